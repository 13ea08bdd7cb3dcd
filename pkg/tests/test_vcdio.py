import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixtures.nodes import node
from fixtures.waves import one_signal_vcd, port_traces
from stbusv.interconnect import run_ca
from stbusv.verif.traffic import TrafficConstraints, gen_traffic
from stbusv.vcdio import (DuplicateName, UnknownIdCode, UnknownSignal, VcdIoError,
                          VcdSyntaxError, WaveDb, WidthMismatch, id_code, parse_vcd,
                          parse_vcd_text, render_vcd, render_wavedb, sample_at,
                          traces_to_wavedb, wavedb_to_traces, write_vcd)

MINIMAL = """$timescale 1ns $end
$scope module top $end
$scope module init0 $end
$var wire 1 ! req $end
$var wire 4 " opc $end
$upscope $end
$upscope $end
$enddefinitions $end
#0
$dumpvars
0!
b101 "
$end
#30
1!
#50
"""


def test_minimal_file():
    db = parse_vcd_text(MINIMAL)
    assert [v.full_name for v in db.signals] == ["top.init0.req", "top.init0.opc"]
    assert db.changes == [(0, "!", "0"), (0, '"', "0101"), (30, "!", "1")]
    assert db.end_time == 50 and db.span_cycles(10) == 5
    assert sample_at(db, "init0.req", 29) == "0"
    assert sample_at(db, "init0.req", 30) == "1"
    assert sample_at(db, "top.init0.opc", 1000) == "0101"
    with pytest.raises(UnknownSignal):
        sample_at(db, "init0.gnt", 0)


def test_sample_before_first_change_is_x():
    db = parse_vcd_text(one_signal_vcd([(20, 1)], 40))
    assert sample_at(db, "init0.req", 10) == "x"
    assert sample_at(db, "init0.req", 20) == "1"


@pytest.mark.parametrize("cut", [40, 120, len(MINIMAL.split("$enddefinitions")[0]) + 5])
def test_truncated_header_is_syntax_error(cut):
    text = MINIMAL[:cut]
    if "$enddefinitions $end" in text:
        pytest.skip("cut after the header")
    with pytest.raises(VcdSyntaxError):
        parse_vcd_text(text)


@pytest.mark.parametrize("body, exc", [
    ("#0\n1?\n", UnknownIdCode),
    ("#0\nb11111 \"\n", WidthMismatch),
    ("#0\n1\"\n", WidthMismatch),
    ("#10\n1!\n#5\n0!\n", VcdSyntaxError),
    ("#0\nr1.5 !\n", VcdSyntaxError),
])
def test_bad_bodies(body, exc):
    head = MINIMAL.split("#0")[0]
    with pytest.raises(exc):
        parse_vcd_text(head + body)


def test_z_reads_as_x_and_short_vectors_extend():
    head = MINIMAL.split("#0")[0]
    db = parse_vcd_text(head + "#0\nz!\nb1 \"\n#10\nbx \"\n")
    assert sample_at(db, "init0.req", 0) == "x"
    assert sample_at(db, "init0.opc", 0) == "0001"
    assert sample_at(db, "init0.opc", 10) == "xxxx"


def test_id_codes_unique_and_printable():
    codes = [id_code(k) for k in range(20000)]
    assert len(set(codes)) == len(codes)
    assert all(33 <= ord(ch) <= 126 for c in codes for ch in c)
    assert codes[:3] == ["!", '"', "#"]


def test_duplicate_port_names_rejected():
    tr = run_ca(node(), gen_traffic(0, TrafficConstraints.for_config(node()), 2))
    with pytest.raises(DuplicateName):
        traces_to_wavedb([tr["init0"], tr["init0"]])


def test_write_and_parse_engine_run(tmp_path):
    cfg = node(2, 2, width=128)
    tr = run_ca(cfg, gen_traffic(3, TrafficConstraints.for_config(cfg), 40))
    path = write_vcd(tr, 10, tmp_path / "sub" / "w.vcd")
    db = parse_vcd(path)
    assert db == traces_to_wavedb(tr, 10)
    back = wavedb_to_traces(db, 10)
    assert all(back[p] == tr[p] for p in tr)
    # the writer is deterministic down to the byte
    assert open(path, "rb").read() == render_vcd(tr, 10).encode()


def test_io_errors(tmp_path):
    with pytest.raises(VcdIoError):
        parse_vcd(tmp_path / "missing.vcd")
    with pytest.raises(OSError):
        parse_vcd(tmp_path / "missing.vcd")


@settings(max_examples=1000)
@given(port_traces(), st.sampled_from([1, 5, 10]))
def test_round_trip_traces(traces, period):
    text = render_vcd(traces, period)
    db = parse_vcd_text(text)
    assert db == traces_to_wavedb(traces, period)
    assert render_wavedb(db) == text
    back = wavedb_to_traces(db, period)
    assert back.keys() == traces.keys()
    for p in traces:
        assert back[p] == traces[p]


@settings(max_examples=200)
@given(port_traces(max_ports=2), st.data())
def test_sample_at_matches_linear_scan(traces, data):
    db = traces_to_wavedb(traces, 10)
    var = data.draw(st.sampled_from(db.signals))
    t = data.draw(st.integers(0, db.end_time + 20))
    expect = "x"
    for time, code, val in db.changes:
        if code == var.id_code and time <= t:
            expect = val
    assert sample_at(db, var.full_name, t) == expect


def test_equality_is_structural():
    a = parse_vcd_text(MINIMAL)
    b = parse_vcd_text(MINIMAL.replace("#50", "#60"))
    assert a != b and a == parse_vcd_text(MINIMAL)
    assert WaveDb() == WaveDb()
