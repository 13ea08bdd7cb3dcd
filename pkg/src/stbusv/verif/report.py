"""Verification report: JSON for tools, text for people.

JSON schema (``verification.json``)::

    {
      "schema": "stbusv.verification/1",
      "config": str, "test": str, "seed": int, "model": "ca" | "bca",
      "cycles": int, "transactions": int,
      "violations": [{"rule": "R1".."R10", "port": str, "cycle": int, "message": str}],
      "scoreboard": {"verdict": "PASS" | "FAIL", "matched": int, "details": [str]},
      "coverage": {"percent": float, "hit": int, "total": int, "holes": [str],
                   "excluded": [str], "bins": {bin: count}},
      "verdict": "PASS" | "FAIL"
    }

``verdict`` is PASS iff there are no violations and the scoreboard passed.
"""
from __future__ import annotations

import json

SCHEMA = "stbusv.verification/1"


def build_report(*, config: str, test: str, seed: int, model: str, cycles: int,
                 transactions: int, violations, scoreboard, coverage: dict) -> dict:
    viol = [v.to_dict() for v in violations]
    sb = scoreboard.to_dict()
    return {
        "schema": SCHEMA, "config": config, "test": test, "seed": seed, "model": model,
        "cycles": cycles, "transactions": transactions, "violations": viol,
        "scoreboard": sb, "coverage": coverage,
        "verdict": "PASS" if not viol and sb["verdict"] == "PASS" else "FAIL",
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def render_text(report: dict) -> str:
    cov = report["coverage"]
    lines = [
        f"config {report['config']}  test {report['test']}  seed {report['seed']}  "
        f"model {report['model']}",
        f"cycles {report['cycles']}  transactions {report['transactions']}",
        f"protocol checks: {len(report['violations'])} violation(s)",
    ]
    for v in report["violations"][:20]:
        lines.append(f"  {v['rule']:<4} {v['port']:<8} cycle {v['cycle']:>7}  {v['message']}")
    lines.append(f"scoreboard: {report['scoreboard']['verdict']} "
                 f"({report['scoreboard']['matched']} matched)")
    for d in report["scoreboard"]["details"][:20]:
        lines.append(f"  {d}")
    lines.append(f"coverage: {cov['percent']:.1f}% ({cov['hit']}/{cov['total']} bins)")
    if cov["holes"]:
        lines.append("  holes: " + ", ".join(cov["holes"]))
    lines.append(f"verdict: {report['verdict']}")
    return "\n".join(lines) + "\n"
