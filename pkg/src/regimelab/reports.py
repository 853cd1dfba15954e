"""Comparison records and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

CSV_HEADER = ("name", "N", "estimate", "se", "oracle", "error", "pass")


@dataclass(frozen=True)
class Entry:
    """One row of a report: a statistic at one grid value (usually N)."""

    key: float
    estimate: float | complex
    std_error: float = 0.0
    oracle: float | complex | None = None
    error: float | None = None
    bound: float | None = None
    passed: bool | None = None
    std_error_imag: float = 0.0


@dataclass
class ConvergenceReport:
    name: str
    entries: list[Entry]
    passed: bool
    criterion: str
    key_name: str = "N"
    decay_order: float | None = None
    notes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.decay_order is not None and len(self.entries) < 3:
            raise ValueError("decay order needs at least three grid points")

    @property
    def n_grid(self) -> list[float]:
        return [e.key for e in self.entries]

    @property
    def estimates(self) -> list[float | complex]:
        return [e.estimate for e in self.entries]

    @property
    def errors(self) -> list[float | None]:
        return [e.error for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "criterion": self.criterion,
            "pass": bool(self.passed),
            "key": self.key_name,
            "decay_order": _num(self.decay_order),
            "entries": [_entry_dict(self, e) for e in self.entries],
            "notes": _jsonable(self.notes),
        }

    def csv_rows(self) -> list[tuple]:
        rows = []
        for e in self.entries:
            ok = "" if e.passed is None else str(bool(e.passed)).lower()
            key = _fmt(e.key)
            if isinstance(e.estimate, complex) or isinstance(e.oracle, complex):
                est, orc = complex(e.estimate), None if e.oracle is None else complex(e.oracle)
                rows.append((self.name + "[re]", key, _fmt(est.real), _fmt(e.std_error),
                             _fmt(None if orc is None else orc.real), _fmt(e.error), ok))
                rows.append((self.name + "[im]", key, _fmt(est.imag), _fmt(e.std_error_imag),
                             _fmt(None if orc is None else orc.imag), _fmt(e.error), ok))
            else:
                rows.append((self.name, key, _fmt(e.estimate), _fmt(e.std_error),
                             _fmt(e.oracle), _fmt(e.error), ok))
        return rows


@dataclass
class TightnessReport:
    """Tail probabilities of the path supremum and of the modulus of continuity, per N."""

    n_grid: list[int]
    c_tail: dict[tuple[int, float], float]
    modulus_tail: dict[tuple[int, float], float]
    epsilon: float
    hard_bound: dict[int, float]
    hard_bound_tail: dict[int, float]
    trials: int
    checks: dict[str, bool] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "name": "tightness",
            "pass": self.passed,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "checks": self.checks,
            "c_tail": [{"N": n, "c": c, "prob": p} for (n, c), p in sorted(self.c_tail.items())],
            "modulus_tail": [{"N": n, "delta": d, "prob": p}
                             for (n, d), p in sorted(self.modulus_tail.items())],
            "hard_bound": [{"N": n, "c": self.hard_bound[n], "prob": self.hard_bound_tail[n]}
                           for n in self.n_grid],
            "notes": _jsonable(self.notes),
        }

    def csv_rows(self) -> list[tuple]:
        rows = []
        for (n, c), p in sorted(self.c_tail.items()):
            rows.append((f"sup_tail[c={_fmt(c)}]", str(n), _fmt(p), "", "", "", ""))
        for (n, d), p in sorted(self.modulus_tail.items()):
            rows.append((f"modulus_tail[delta={_fmt(d)}]", str(n), _fmt(p), "", "", "", ""))
        for n in self.n_grid:
            rows.append(("hard_bound_tail", str(n), _fmt(self.hard_bound_tail[n]), "",
                         "0", _fmt(self.hard_bound_tail[n]),
                         str(self.hard_bound_tail[n] == 0.0).lower()))
        stated = self.notes.get("stated_bound_tail", {})
        for n in self.n_grid:
            if n in stated:
                rows.append(("stated_bound_tail", str(n), _fmt(stated[n]), "", "0", _fmt(stated[n]),
                             str(stated[n] == 0.0).lower()))
        return rows


def decay_order(keys: Sequence[float], errors: Sequence[float],
                std_errors: Sequence[float] | None = None, se_factor: float = 5.0) -> float | None:
    """Least-squares slope p of ``log error = c - p log N``.

    Only points whose error exceeds ``se_factor`` standard errors enter the fit;
    returns ``None`` when fewer than three points qualify.
    """
    se = np.zeros(len(errors)) if std_errors is None else np.asarray(std_errors, float)
    k = np.asarray(keys, float)
    e = np.asarray(errors, float)
    use = (e > se_factor * se) & (e > 0) & np.isfinite(e)
    if use.sum() < 3:
        return None
    slope = np.polyfit(np.log(k[use]), np.log(e[use]), 1)[0]
    return float(-slope)


def resolved_monotone(errors: Sequence[float], std_errors: Sequence[float] | None = None,
                      se_factor: float = 5.0, strict: bool = False) -> bool:
    """Errors do not increase between consecutive grid points that are both resolved.

    A point is resolved when its error exceeds ``se_factor`` standard errors;
    pairs involving an unresolved point are skipped.
    """
    se = [0.0] * len(errors) if std_errors is None else list(std_errors)
    for a in range(len(errors) - 1):
        ea, eb = errors[a], errors[a + 1]
        if ea <= se_factor * se[a] or eb <= se_factor * se[a + 1]:
            continue
        if eb > ea or (strict and eb == ea):
            return False
    return True


def write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _num(x):
    if x is None:
        return None
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    return float(x)


def _entry_dict(report: ConvergenceReport, e: Entry) -> dict:
    d = {
        "statistic": f"{report.name}[{report.key_name}={_fmt(e.key)}]",
        report.key_name: _num(e.key),
        "estimate": _num(e.estimate),
        "std_error": _num(e.std_error),
        "oracle": _num(e.oracle),
        "bound": _num(e.bound),
        "error": _num(e.error),
        "pass": None if e.passed is None else bool(e.passed),
    }
    if isinstance(e.estimate, complex):
        d["std_error_imag"] = _num(e.std_error_imag)
    return d


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    return x
