"""Batch execution: one run, or a config x test x seed matrix on both engines."""
from __future__ import annotations

import glob
import json
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool

from ..analyzer import DEFAULT_THRESHOLD, compare_files, signoff
from ..interconnect import ENGINES
from ..interconnect.config import NodeConfig
from ..vcdio import write_vcd
from ..verif.checker import check_all
from ..verif.coverage import CoverageModel, sample_run
from ..verif.monitor import extract_all
from ..verif.report import build_report, dumps, render_text
from ..verif.scoreboard import scoreboard_check
from ..verif.traffic import gen_traffic
from .config_io import LoadedConfig, load_config_full
from .suite import get_test, suite

MODELS = ("ca", "bca")
VCD_NAME = "waves.vcd"
SUMMARY_SCHEMA = "stbusv.regression/1"
DEFAULT_SEEDS = 4


class RegressionError(Exception):
    pass


@dataclass
class RunSpec:
    config: NodeConfig
    test_id: str
    seed: int
    model: str = "ca"
    out_dir: str = "out"
    stop_txns: int | None = None
    stop_cycles: int | None = None
    # replaces the model's engine, e.g. a fault-injected variant
    engine: object = None

    def run_dir(self) -> str:
        return os.path.join(self.out_dir, self.model, self.test_id, str(self.seed))


@dataclass
class RunReport:
    spec: RunSpec
    report: dict
    coverage: CoverageModel
    vcd_path: str
    report_path: str
    wall_time: float
    truncated: bool = False
    applicable: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return self.report["verdict"]

    @property
    def violations(self) -> list:
        return self.report["violations"]

    @property
    def scoreboard(self) -> dict:
        return self.report["scoreboard"]


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def run_test(spec: RunSpec) -> RunReport:
    """Generate, simulate, check and write the outputs of one run."""
    t0 = time.perf_counter()
    if spec.model not in MODELS:
        raise RegressionError(f"unknown model {spec.model!r}; use one of {MODELS}")
    test = get_test(spec.test_id)
    cfg = test.bench_config(spec.config)
    n_txns = spec.stop_txns or test.stop_txns
    max_cycles = spec.stop_cycles or test.stop_cycles
    stim = gen_traffic(spec.seed, test.constraints(cfg), n_txns)
    engine = spec.engine or ENGINES[spec.model]
    traces = engine(cfg, stim, seed=spec.seed, max_cycles=max_cycles)
    cycles = max(tr.n_cycles for tr in traces.values())
    truncated = cycles >= max_cycles

    txns = extract_all(traces, cfg.endianness)
    violations = check_all(traces, cfg.ptype, cfg.pipe_size)
    init = {k: v for k, v in txns.items() if k.startswith("init")}
    targ = {k: v for k, v in txns.items() if k.startswith("targ")}
    sb = scoreboard_check(init, targ, cfg, drained=not truncated)
    cov = sample_run(CoverageModel(cfg), traces, txns)

    report = build_report(config=cfg.name, test=spec.test_id, seed=spec.seed, model=spec.model,
                          cycles=cycles, transactions=len(stim), violations=violations,
                          scoreboard=sb, coverage=cov.report())
    report["applicable"] = test.applies(cfg)
    report["stopped_by"] = "cycles" if truncated else "transactions"

    d = spec.run_dir()
    os.makedirs(d, exist_ok=True)
    vcd = write_vcd(traces, cfg.clock_ns, os.path.join(d, VCD_NAME))
    rpath = os.path.join(d, "verification.json")
    _write(rpath, dumps(report))
    _write(os.path.join(d, "verification.txt"), render_text(report))
    _write(os.path.join(d, "coverage.json"), json.dumps(report["coverage"], indent=2,
                                                        sort_keys=True) + "\n")
    return RunReport(spec, report, cov, vcd, rpath, time.perf_counter() - t0, truncated,
                     report["applicable"])


# -- matrix ---------------------------------------------------------------------

def config_files(config_dir) -> list[str]:
    files = sorted(glob.glob(os.path.join(os.fspath(config_dir), "*.cfg")))
    if not files:
        raise RegressionError(f"no *.cfg files in {config_dir}")
    return files


def seeds_for(k: int) -> list[int]:
    return list(range(1, k + 1))


def run_cell(loaded: LoadedConfig, test_id: str, seed: int, out_root: str,
             threshold: float = DEFAULT_THRESHOLD, engines: dict | None = None) -> dict:
    """Both engines on one (config, test, seed), then the alignment check."""
    cfg = loaded.node
    base = os.path.join(out_root, cfg.name)
    runs = {}
    for m in MODELS:
        spec = RunSpec(cfg, test_id, seed, m, base, loaded.stop_txns, loaded.stop_cycles,
                       (engines or {}).get(m))
        runs[m] = run_test(spec)
    ca, bca = runs["ca"], runs["bca"]
    row = {
        "config": cfg.name, "test": test_id, "seed": seed,
        "applicable": ca.applicable,
        "checks": {m: runs[m].verdict for m in MODELS},
        "violations": {m: len(runs[m].violations) for m in MODELS},
        "coverage": ca.report["coverage"]["percent"],
        "coverage_equal": ca.report["coverage"] == bca.report["coverage"],
        "bins": sorted(k for k, v in ca.coverage.bins.items() if v),
    }
    if ca.verdict == "PASS" and bca.verdict == "PASS":
        rep = compare_files(ca.vcd_path, bca.vcd_path, cfg.clock_ns, threshold)
        adir = os.path.join(base, "alignment", test_id)
        os.makedirs(adir, exist_ok=True)
        _write(os.path.join(adir, f"{seed}.json"), rep.to_json())
        _write(os.path.join(adir, f"{seed}.txt"), rep.render_text())
        row["min_alignment"] = rep.min_rate
        row["signoff"] = signoff(rep, threshold)
        row["first_divergence"] = {p.port: p.first_divergence for p in rep.misaligned()}
    else:
        row["min_alignment"] = None
        row["signoff"] = "NOT_RUN"
        row["first_divergence"] = {}
    row["status"] = ("PASS" if row["signoff"] == "PASS" and row["coverage_equal"] else "FAIL")
    return row


def _cell_job(args):
    path, test_id, seed, out_root, threshold, engines = args
    loaded = load_config_full(path)
    try:
        return run_cell(loaded, test_id, seed, out_root, threshold, engines)
    except Exception as e:  # recorded, the matrix continues
        return {"config": loaded.node.name, "test": test_id, "seed": seed, "status": "FAIL",
                "error": f"{type(e).__name__}: {e}", "signoff": "NOT_RUN",
                "min_alignment": None, "first_divergence": {}, "checks": {},
                "violations": {}, "coverage": None, "coverage_equal": False, "bins": [],
                "applicable": True}


def run_matrix(config_dir, tests=None, seeds_per_test: int = DEFAULT_SEEDS,
               out_dir="regress", jobs: int = 1, threshold: float = DEFAULT_THRESHOLD,
               progress=None, engines: dict | None = None) -> dict:
    """Every (config, test, seed) cell; returns and writes the summary.

    ``engines`` optionally replaces the engine of a model (picklable callables
    when ``jobs > 1``)."""
    files = config_files(config_dir)
    test_ids = list(tests) if tests else [t.id for t in suite()]
    for t in test_ids:
        get_test(t)
    # parse everything up front so a bad file fails before any run
    names = {}
    for f in files:
        name = load_config_full(f).node.name
        if name in names:
            raise RegressionError(f"{f} and {names[name]} share the config name {name}")
        names[name] = f
    jobs_list = [(f, t, s, os.fspath(out_dir), threshold, engines)
                 for f in files for t in test_ids for s in seeds_for(seeds_per_test)]
    t0 = time.perf_counter()
    rows = []
    if jobs > 1:
        with Pool(jobs) as pool:
            for row in pool.imap_unordered(_cell_job, jobs_list):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for j in jobs_list:
            row = _cell_job(j)
            rows.append(row)
            if progress:
                progress(row)
    summary = summarize(rows)
    os.makedirs(out_dir, exist_ok=True)
    _write(os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2,
                                                             sort_keys=True) + "\n")
    _write(os.path.join(out_dir, "summary.txt"), render_summary(summary))
    summary["wall_time"] = time.perf_counter() - t0
    return summary


def summarize(rows: list[dict]) -> dict:
    """Order-insensitive aggregation of matrix rows."""
    rows = sorted(rows, key=lambda r: (r["config"], r["test"], r["seed"]))
    per_config: dict[str, set] = {}
    for r in rows:
        per_config.setdefault(r["config"], set()).update(r.get("bins", []))
    fails = [r for r in rows if r["status"] != "PASS"]
    rates = [r["min_alignment"] for r in rows if r["min_alignment"] is not None]
    slim = [{k: v for k, v in r.items() if k != "bins"} for r in rows]
    return {
        "schema": SUMMARY_SCHEMA,
        "cells": len(rows),
        "failed": len(fails),
        "min_alignment": min(rates) if rates else None,
        "verdict": "PASS" if rows and not fails else "FAIL",
        "rows": slim,
        "bins_hit": {k: sorted(v) for k, v in sorted(per_config.items())},
    }


def render_summary(summary: dict) -> str:
    lines = [f"{'config':<28} {'test':<5} {'seed':>4}  {'checks':<9} {'cov%':>6} "
             f"{'min align':>9}  status"]
    for r in summary["rows"]:
        checks = "/".join(r["checks"].get(m, "-") for m in MODELS) if r["checks"] else "ERROR"
        cov = f"{r['coverage']:.1f}" if r["coverage"] is not None else "-"
        al = f"{r['min_alignment']:.4f}" if r["min_alignment"] is not None else "-"
        line = (f"{r['config']:<28} {r['test']:<5} {r['seed']:>4}  {checks:<9} {cov:>6} "
                f"{al:>9}  {r['status']}")
        if r["first_divergence"]:
            port, cyc = sorted(r["first_divergence"].items(), key=lambda x: x[1])[0]
            line += f"  first divergence {port}@{cyc}"
        if r.get("error"):
            line += f"  {r['error']}"
        lines.append(line)
    lines.append(f"{summary['cells']} cells, {summary['failed']} failed, "
                 f"min alignment {summary['min_alignment']}, verdict {summary['verdict']}")
    return "\n".join(lines) + "\n"
