"""Value Change Dump writer and parser.

Accepted grammar (a subset of IEEE 1364 VCD; whitespace between tokens is free)::

    vcd          = { declaration } "$enddefinitions" "$end" { simulation } ;
    declaration  = "$date" text "$end" | "$version" text "$end" | "$comment" text "$end"
                 | "$timescale" number unit "$end"
                 | "$scope" scope_type identifier "$end" | "$upscope" "$end"
                 | "$var" var_type size id_code reference [ bit_range ] "$end" ;
    simulation   = "#" number
                 | ( "$dumpvars" | "$dumpall" | "$dumpon" | "$dumpoff" ) { change } "$end"
                 | "$comment" text "$end"
                 | change ;
    change       = scalar_value id_code
                 | ( "b" | "B" ) binary_digits id_code ;
    scalar_value = "0" | "1" | "x" | "X" | "z" | "Z" ;
    binary_digits= { "0" | "1" | "x" | "X" | "z" | "Z" } ;
    unit         = "s" | "ms" | "us" | "ns" | "ps" | "fs" ;

``z`` is read as ``x``.  Vectors shorter than their declared width are
left-extended (with ``x`` when the leading digit is ``x``, else ``0``).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .interconnect.signals import SIGNAL_NAMES, PortTrace, signal_widths

TIMESCALE = "1ns"
DATE = "reproducible run"
VERSION = "stbusv vcdio 1"
TOP = "top"


class VcdError(Exception):
    pass


class VcdSyntaxError(VcdError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line, self.reason = line, reason


class UnknownIdCode(VcdError):
    pass


class WidthMismatch(VcdError):
    pass


class UnknownSignal(VcdError, KeyError):
    pass


class DuplicateName(VcdError):
    pass


class VcdIoError(VcdError, OSError):
    pass


@dataclass(frozen=True)
class VarDef:
    scope: tuple
    name: str
    width: int
    id_code: str

    @property
    def full_name(self) -> str:
        return ".".join(self.scope + (self.name,))


@dataclass
class WaveDb:
    timescale: str = TIMESCALE
    signals: list = field(default_factory=list)
    # (time, id_code, value) in file order
    changes: list = field(default_factory=list)
    end_time: int = 0

    def __post_init__(self):
        self._index = None

    def __eq__(self, other):
        if not isinstance(other, WaveDb):
            return NotImplemented
        return (self.timescale == other.timescale and self.signals == other.signals
                and self.changes == other.changes and self.end_time == other.end_time)

    # -- lookups -------------------------------------------------------------

    def var(self, signal: str) -> VarDef:
        by_name = {v.full_name: v for v in self.signals}
        if signal in by_name:
            return by_name[signal]
        if f"{TOP}.{signal}" in by_name:
            return by_name[f"{TOP}.{signal}"]
        raise UnknownSignal(signal)

    def ports(self) -> list[str]:
        """Scopes directly under the top scope, in declaration order."""
        out = []
        for v in self.signals:
            if len(v.scope) >= 2 and v.scope[1] not in out:
                out.append(v.scope[1])
        return out

    def port_signals(self, port: str) -> list[VarDef]:
        return [v for v in self.signals if len(v.scope) >= 2 and v.scope[1] == port]

    def history(self, id_code: str) -> tuple[np.ndarray, list]:
        """Change times and values of one id code."""
        if self._index is None:
            idx: dict[str, tuple[list, list]] = {v.id_code: ([], []) for v in self.signals}
            for t, code, val in self.changes:
                ts, vs = idx[code]
                if ts and ts[-1] == t:
                    vs[-1] = val
                else:
                    ts.append(t)
                    vs.append(val)
            self._index = {k: (np.asarray(ts, dtype=np.int64), vs) for k, (ts, vs) in idx.items()}
        return self._index[id_code]

    def span_cycles(self, period: int) -> int:
        last = max(self.end_time, max((t for t, _, _ in self.changes), default=0))
        return last // period


def id_code(k: int) -> str:
    """k-th identifier from the printable ASCII range '!'..'~'."""
    chars = []
    k += 1
    while k:
        k -= 1
        chars.append(chr(33 + k % 94))
        k //= 94
    return "".join(chars)


# -- writer ---------------------------------------------------------------------

def _fmt(value: int, width: int) -> str:
    if width == 1:
        return str(int(value))
    return format(int(value), f"0{width}b")


def traces_to_wavedb(traces, clock_period_ns: int = 10) -> WaveDb:
    """The WaveDb a VCD of ``traces`` encodes: initial values at time 0, then
    one change per signal per cycle whose value differs from the previous one."""
    traces = list(traces.values()) if isinstance(traces, dict) else list(traces)
    db = WaveDb()
    events = []
    names = set()
    for tr in traces:
        if tr.name in names:
            raise DuplicateName(f"port {tr.name} appears twice")
        names.add(tr.name)
        widths = signal_widths(tr.width_bits)
        for s in SIGNAL_NAMES:
            k = len(db.signals)
            w = widths[s]
            code = id_code(k)
            db.signals.append(VarDef((TOP, tr.name), s, w, code))
            a = tr.signals[s]
            if not len(a):
                continue
            idx = np.flatnonzero(a[1:] != a[:-1]) + 1
            events.append((0, k, code, _fmt(a[0], w)))
            events.extend((c, k, code, _fmt(v, w)) for c, v in zip(idx.tolist(), a[idx].tolist()))
    events.sort(key=lambda e: (e[0], e[1]))
    db.changes = [(c * clock_period_ns, code, v) for c, _, code, v in events]
    n = max((tr.n_cycles for tr in traces), default=0)
    db.end_time = n * clock_period_ns
    return db


def render_wavedb(db: WaveDb) -> str:
    out = ["$date", f"    {DATE}", "$end", "$version", f"    {VERSION}", "$end",
           f"$timescale {db.timescale} $end"]
    open_scope: list = []
    for v in db.signals:
        common = 0
        while (common < len(open_scope) and common < len(v.scope)
               and open_scope[common] == v.scope[common]):
            common += 1
        while len(open_scope) > common:
            out.append("$upscope $end")
            open_scope.pop()
        for name in v.scope[common:]:
            out.append(f"$scope module {name} $end")
            open_scope.append(name)
        out.append(f"$var wire {v.width} {v.id_code} {v.name} $end")
    out += ["$upscope $end"] * len(open_scope)
    out.append("$enddefinitions $end")
    width = {v.id_code: v.width for v in db.signals}
    changes = db.changes
    k = 0
    if changes and changes[0][0] == 0:
        out += ["#0", "$dumpvars"]
        while k < len(changes) and changes[k][0] == 0:
            _, code, val = changes[k]
            out.append(val + code if width[code] == 1 else f"b{val} {code}")
            k += 1
        out.append("$end")
    cur = 0
    for t, code, val in changes[k:]:
        if t != cur:
            cur = t
            out.append(f"#{t}")
        out.append(val + code if width[code] == 1 else f"b{val} {code}")
    if db.end_time > cur:
        out.append(f"#{db.end_time}")
    return "\n".join(out) + "\n"


def render_vcd(traces, clock_period_ns: int = 10) -> str:
    return render_wavedb(traces_to_wavedb(traces, clock_period_ns))


def write_vcd(traces, clock_period_ns: int, path) -> str:
    """Write ``traces`` (PortTraces, or a WaveDb) as a VCD file."""
    if isinstance(traces, WaveDb):
        text = render_wavedb(traces)
    else:
        text = render_vcd(traces, clock_period_ns)
    try:
        d = os.path.dirname(os.fspath(path))
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise VcdIoError(str(e)) from e
    return os.fspath(path)


# -- parser ---------------------------------------------------------------------

_SCALARS = {"0": "0", "1": "1", "x": "x", "X": "x", "z": "x", "Z": "x"}
_DUMP_BLOCKS = {"$dumpvars", "$dumpall", "$dumpon", "$dumpoff"}


def _tokens(text: str):
    for ln, line in enumerate(text.splitlines(), 1):
        for tok in line.split():
            yield ln, tok


def _vector(bits: str, width: int, ln: int) -> str:
    bits = bits.translate(_VEC_MAP)
    if bits.strip("01x"):
        raise VcdSyntaxError(ln, f"bad vector digits {bits!r}")
    if len(bits) > width:
        raise WidthMismatch(f"line {ln}: {len(bits)} digits for a {width}-bit signal")
    if len(bits) < width:
        bits = ("x" if bits[:1] == "x" else "0") * (width - len(bits)) + bits
    return bits


_VEC_MAP = str.maketrans({"X": "x", "z": "x", "Z": "x"})


def parse_vcd_text(text: str) -> WaveDb:
    db = WaveDb()
    toks = _tokens(text)
    scope: list[str] = []
    vars_by_id: dict[str, VarDef] = {}
    ln = 0

    def until_end(first_ln):
        words = []
        for l2, tok in toks:
            if tok == "$end":
                return words
            words.append(tok)
        raise VcdSyntaxError(first_ln, "unterminated section (missing $end)")

    ended = False
    for ln, tok in toks:
        if tok in ("$date", "$version", "$comment"):
            until_end(ln)
        elif tok == "$timescale":
            db.timescale = "".join(until_end(ln))
        elif tok == "$scope":
            words = until_end(ln)
            if len(words) != 2:
                raise VcdSyntaxError(ln, "$scope needs a type and a name")
            scope.append(words[1])
        elif tok == "$upscope":
            until_end(ln)
            if not scope:
                raise VcdSyntaxError(ln, "$upscope without an open scope")
            scope.pop()
        elif tok == "$var":
            words = until_end(ln)
            if len(words) < 4:
                raise VcdSyntaxError(ln, "$var needs type, size, id and reference")
            try:
                width = int(words[1])
            except ValueError:
                raise VcdSyntaxError(ln, f"bad $var size {words[1]!r}") from None
            code = words[2]
            if code in vars_by_id:
                raise VcdSyntaxError(ln, f"id code {code!r} declared twice")
            v = VarDef(tuple(scope), words[3], width, code)
            vars_by_id[code] = v
            db.signals.append(v)
        elif tok == "$enddefinitions":
            until_end(ln)
            ended = True
            break
        else:
            raise VcdSyntaxError(ln, f"unexpected token {tok!r} in the header")
    if not ended:
        raise VcdSyntaxError(ln, "no $enddefinitions")

    t = 0
    changes = db.changes
    pending_vec = None
    for ln, tok in toks:
        if pending_vec is not None:
            bits, vln = pending_vec
            v = vars_by_id.get(tok)
            if v is None:
                raise UnknownIdCode(f"line {ln}: {tok!r}")
            changes.append((t, tok, _vector(bits, v.width, vln) if v.width > 1
                            else _vector(bits, 1, vln)))
            pending_vec = None
            continue
        c0 = tok[0]
        if c0 == "#":
            try:
                nt = int(tok[1:])
            except ValueError:
                raise VcdSyntaxError(ln, f"bad timestamp {tok!r}") from None
            if nt < t:
                raise VcdSyntaxError(ln, f"time goes backwards ({nt} < {t})")
            t = nt
        elif c0 in _SCALARS:
            code = tok[1:]
            v = vars_by_id.get(code)
            if v is None:
                raise UnknownIdCode(f"line {ln}: {code!r}")
            if v.width != 1:
                raise WidthMismatch(f"line {ln}: scalar change for {v.width}-bit {v.full_name}")
            changes.append((t, code, _SCALARS[c0]))
        elif c0 in "bB":
            pending_vec = (tok[1:], ln)
        elif tok in _DUMP_BLOCKS or tok == "$end":
            continue
        elif tok == "$comment":
            until_end(ln)
        elif c0 in "rR":
            raise VcdSyntaxError(ln, "real-valued changes are not supported")
        else:
            raise VcdSyntaxError(ln, f"unexpected token {tok!r}")
    if pending_vec is not None:
        raise VcdSyntaxError(pending_vec[1], "vector value without id code")
    db.end_time = t
    return db


def parse_vcd(path) -> WaveDb:
    try:
        with open(path, encoding="ascii") as f:
            text = f.read()
    except OSError as e:
        raise VcdIoError(str(e)) from e
    return parse_vcd_text(text)


def sample_at(db: WaveDb, signal: str, time_ns: int) -> str:
    """Value of ``signal`` at ``time_ns``: its latest change at or before that
    time, ``'x'`` before the first one."""
    v = db.var(signal)
    times, values = db.history(v.id_code)
    k = int(np.searchsorted(times, time_ns, side="right")) - 1
    return values[k] if k >= 0 else "x"


def sample_cycles(db: WaveDb, var: VarDef, period: int, n: int) -> list:
    """Per-cycle values of one variable for cycles 0..n-1."""
    times, values = db.history(var.id_code)
    pts = np.arange(n, dtype=np.int64) * period
    k = np.searchsorted(times, pts, side="right") - 1
    vals = ["x"] + values
    return [vals[j + 1] for j in k.tolist()]


def to_int(value: str) -> int:
    """Numeric value of a sampled VCD value; undefined bits read as 0."""
    return int(value.replace("x", "0"), 2) if value else 0


def wavedb_to_traces(db: WaveDb, period: int) -> dict[str, PortTrace]:
    """Rebuild dense per-port traces by sampling every cycle."""
    n = db.span_cycles(period)
    out = {}
    for port in db.ports():
        vars_ = {v.name: v for v in db.port_signals(port)}
        missing = [s for s in SIGNAL_NAMES if s not in vars_]
        if missing:
            raise UnknownSignal(f"{port} lacks {missing}")
        width = vars_["data"].width
        tr = PortTrace(port, width, n)
        for s in SIGNAL_NAMES:
            vals = [to_int(x) for x in sample_cycles(db, vars_[s], period, n)]
            a = tr.signals[s]
            if a.dtype == object:
                a[:] = vals
            else:
                a[:] = np.asarray(vals, dtype=np.int64)
        out[port] = tr
    return out
