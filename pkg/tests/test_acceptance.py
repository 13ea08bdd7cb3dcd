"""Acceptance: one test per criterion, at the stated tolerances."""
import os
import random
import time

import pytest

import test_protocol
import test_vcdio
from conftest import CONFIG_DIR
from fixtures.arb_ref import compare_policy, quota_violations, random_patterns, arbiter_winners
from fixtures.faults import FAULTS
from fixtures.planted_bca import planted_bca_run
from fixtures.waves import step_vcd
from stbusv.analyzer import compare
from stbusv.interconnect.config import ArbPolicy
from stbusv.protocol import OPCODE_SIZES, SUPPORTED_WIDTHS
from stbusv.regression import RunSpec, load_config, load_config_full, run_matrix, run_test, suite
from stbusv.regression.runner import run_cell
from stbusv.verif.checker import check_all
from stbusv.verif.coverage import CoverageModel
from stbusv.verif.monitor import extract_all
from stbusv.verif.scoreboard import scoreboard_check
from stbusv.vcdio import parse_vcd_text

THRESHOLD = 0.99
REPRESENTATIVES = ("t1_03_full_xbar_lru", "t2_03_full_xbar_lru", "t3_03_full_xbar_lru")


def test_criterion_1_signoff_over_full_matrix(tmp_path):
    files = sorted(os.listdir(CONFIG_DIR))
    assert len(files) >= 36
    t0 = time.perf_counter()
    summary = run_matrix(CONFIG_DIR, None, 1, tmp_path, jobs=os.cpu_count() or 1,
                         threshold=THRESHOLD)
    elapsed = time.perf_counter() - t0
    assert summary["cells"] == len(files) * 12
    bad = [(r["config"], r["test"], r.get("error") or r["first_divergence"])
           for r in summary["rows"] if r["status"] != "PASS"]
    assert bad == []
    assert summary["min_alignment"] >= THRESHOLD
    # expected value: the engines are waveform-identical
    assert summary["min_alignment"] == 1.0
    assert elapsed < 30 * 60


def test_criterion_2_coverage_closure(tmp_path):
    for name in REPRESENTATIVES:
        cfg = load_config(CONFIG_DIR / f"{name}.cfg")
        union = CoverageModel(cfg)
        for seed in range(1, 9):
            for t in suite():
                runs = {m: run_test(RunSpec(cfg, t.id, seed, m, tmp_path / name))
                        for m in ("ca", "bca")}
                assert runs["ca"].report["coverage"] == runs["bca"].report["coverage"], \
                    (name, t.id, seed)
                union.merge(runs["ca"].coverage)
            if union.report()["percent"] == 100.0:
                break
        rep = union.report()
        assert rep["percent"] == 100.0, (name, rep["holes"])


def test_criterion_3_determinism(tmp_path):
    for name in REPRESENTATIVES:
        cfg = load_config(CONFIG_DIR / f"{name}.cfg")
        for model in ("ca", "bca"):
            blobs = []
            for k in range(3):
                rep = run_test(RunSpec(cfg, "t12", 7, model, tmp_path / str(k), stop_txns=500))
                with open(rep.vcd_path, "rb") as f:
                    blobs.append(f.read())
            assert blobs[0] == blobs[1] == blobs[2], (name, model)


def test_criterion_4_mutation_detection():
    assert len(FAULTS) >= 13
    assert {f.detector for f in FAULTS} == {f"R{k}" for k in range(1, 11)} | {"scoreboard"}
    missed = []
    for fault in FAULTS:
        cfg, tr = fault.run()
        txns = extract_all(tr, cfg.endianness)
        rules = {v.rule_id for v in check_all(tr, cfg.ptype, cfg.pipe_size)}
        sb = scoreboard_check({k: v for k, v in txns.items() if k.startswith("init")},
                              {k: v for k, v in txns.items() if k.startswith("targ")}, cfg)
        caught = (not sb.passed) if fault.detector == "scoreboard" else fault.detector in rules
        if not caught:
            missed.append(fault.name)
    assert missed == []


def test_criterion_5_arbitration_oracles():
    for policy in ArbPolicy:
        assert compare_policy(policy, n_max=4, hold=200) == [], policy
    rng = random.Random(5)
    for _ in range(50):
        n, window = rng.randint(2, 4), rng.choice([4, 8, 16])
        quota = [rng.randint(1, 3) for _ in range(n)]
        seq = random_patterns(rng, n, 400, rng.choice([0.3, 0.6, 0.9]))
        wins = arbiter_winners(ArbPolicy.BANDWIDTH_LIMITED, n, seq, quota=(quota, window))
        assert quota_violations(seq, wins, quota, window) == []


def test_criterion_6_protocol_laws():
    # the round-trip properties run at >= 1000 examples each
    test_protocol.test_build_rebuild_round_trip()
    test_protocol.test_size_convert_round_trip()
    test_vcdio.test_round_trip_traces()
    assert len(OPCODE_SIZES) == 7 and len(SUPPORTED_WIDTHS) == 6
    for size in OPCODE_SIZES:
        for width in SUPPORTED_WIDTHS:
            test_protocol.test_t2_symmetry_table(size, width)
            test_protocol.test_t3_asymmetry_table(size, width)


def test_criterion_7_planted_bca_caught_by_signoff_only(tmp_path):
    for name in REPRESENTATIVES:
        row = run_cell(load_config_full(CONFIG_DIR / f"{name}.cfg"), "t02", 1, str(tmp_path),
                       THRESHOLD, engines={"bca": planted_bca_run})
        assert row["checks"] == {"ca": "PASS", "bca": "PASS"}, name
        assert row["signoff"] == "FAIL", name
        assert row["first_divergence"] and all(
            isinstance(c, int) for c in row["first_divergence"].values())


def test_criterion_8_analyzer_arithmetic():
    def rate(n, damaged):
        a = parse_vcd_text(step_vcd(n, 10, set()))
        b = parse_vcd_text(step_vcd(n, 10, damaged))
        return compare(a, b, 10, threshold=THRESHOLD)

    rep = rate(10, {4})
    assert rep.ports["init0"].rate == 0.9 and rep.verdict == "FAIL"
    rep = rate(200, {3, 50, 199})
    assert rep.ports["init0"].rate == pytest.approx(0.985, abs=1e-12)
    assert rep.verdict == "FAIL"
    assert rate(200, {3, 50}).verdict == "PASS"
