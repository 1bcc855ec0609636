"""Monte Carlo driver and result files.

Work is split into one item per ``(M, realization)`` pair; every item runs
the requested schemes on the same channel draw. Items may be spread over a
process pool, but results are gathered in item order, so the output does
not depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alternating_optimizer import SCHEMES, SolveResult, run_scheme
from .resource_allocation import Allocation, distinct_users_per_slot
from .scenario import ScenarioConfig, generate_realization

SUMMARY_COLUMNS = ("scheme", "M", "mean_rate_bpshz", "stderr", "n")


@dataclass(frozen=True)
class RealizationRecord:
    scheme: str
    M: int
    realization: int
    rate: float
    per_user_rates: list
    distinct_users_per_slot: float
    init_index: int
    trace: list
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, with_time: bool = False) -> dict:
        out = {
            "scheme": self.scheme, "M": self.M, "realization": self.realization,
            "rate": self.rate, "per_user_rates": self.per_user_rates,
            "distinct_users_per_slot": self.distinct_users_per_slot,
            "init_index": self.init_index, "trace": self.trace,
        }
        if with_time:
            out["wall_time"] = self.wall_time
        return out


@dataclass(frozen=True)
class SchemeStats:
    scheme: str
    M: int
    mean: float
    stderr: float
    n: int


@dataclass
class ExperimentSummary:
    """Per-realization records plus mean/standard error per (scheme, M)."""

    config: ScenarioConfig
    schemes: list
    M_values: list
    records: list

    def rates(self, scheme: str, M: int) -> np.ndarray:
        return np.array([r.rate for r in self.records
                         if r.scheme == scheme and r.M == M])

    def select(self, scheme: str, M: int) -> list:
        return [r for r in self.records if r.scheme == scheme and r.M == M]

    def stats(self) -> list:
        rows = []
        for scheme in self.schemes:
            for M in self.M_values:
                x = self.rates(scheme, M)
                n = x.size
                mean = math.fsum(x) / n if n else math.nan
                se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
                rows.append(SchemeStats(scheme, M, mean, se, n))
        return rows

    def stat(self, scheme: str, M: int) -> SchemeStats:
        for s in self.stats():
            if s.scheme == scheme and s.M == M:
                return s
        raise KeyError((scheme, M))


def ordered_schemes(schemes) -> list:
    """Validate and order schemes so that ``fixed`` precedes ``dynamic``."""
    schemes = list(dict.fromkeys(schemes))
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ValueError(f"unknown schemes {bad}; expected a subset of {SCHEMES}")
    if not schemes:
        raise ValueError("no schemes requested")
    first = [s for s in ("fixed", "dynamic") if s in schemes]
    return first + [s for s in schemes if s not in first]


def run_realization(cfg: ScenarioConfig, M: int, index: int, schemes) -> list:
    """Run ``schemes`` on realization ``index`` with an ``M``-element surface."""
    cfg_m = cfg.replace(M=M)
    realization = generate_realization(cfg_m, index)
    done: dict[str, SolveResult] = {}
    records = []
    for scheme in ordered_schemes(schemes):
        t0 = time.perf_counter()
        res = run_scheme(scheme, realization, cfg_m, warm_start=done.get("fixed"))
        elapsed = time.perf_counter() - t0
        done[scheme] = res
        records.append(RealizationRecord(
            scheme=scheme, M=M, realization=index, rate=float(res.common_rate),
            per_user_rates=[float(x) for x in res.per_user_rates],
            distinct_users_per_slot=float(res.distinct_users_per_slot),
            init_index=int(res.init_index),
            trace=[float(x) for x in res.trace], wall_time=elapsed,
        ))
    return records


def _work(item):
    cfg_dict, M, index, schemes = item
    return run_realization(ScenarioConfig.from_dict(cfg_dict), M, index, schemes)


def run_monte_carlo(cfg: ScenarioConfig, schemes=SCHEMES, M_values=None,
                    workers: int = 1, progress=None) -> ExperimentSummary:
    """Average every scheme over ``cfg.num_realizations`` channel draws per M.

    Parameters
    ----------
    cfg : ScenarioConfig
    schemes : sequence of str
        Subset of ``SCHEMES``.
    M_values : sequence of int, optional
        Surface sizes; defaults to ``[cfg.M]``.
    workers : int
        Process count. Results are identical for any value.
    progress : callable, optional
        Called as ``progress(done, total)`` after each work item.
    """
    schemes = ordered_schemes(schemes)
    M_values = [cfg.M] if M_values is None else [int(m) for m in M_values]
    if not M_values or any(m < 1 for m in M_values):
        raise ValueError("M values must be positive integers")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    items = [(cfg.to_dict(), M, i, schemes)
             for M in M_values for i in range(cfg.num_realizations)]
    records = []
    if workers == 1:
        results = map(_work, items)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_work, items)
    try:
        for done, chunk in enumerate(results, start=1):
            records.extend(chunk)
            if progress is not None:
                progress(done, len(items))
    finally:
        if pool is not None:
            pool.shutdown()
    order = {s: j for j, s in enumerate(schemes)}
    records.sort(key=lambda r: (M_values.index(r.M), r.realization, order[r.scheme]))
    return ExperimentSummary(cfg, schemes, M_values, records)


# ---------------------------------------------------------------------------
# files


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit_summary(summary: ExperimentSummary, out_dir) -> dict:
    """Write ``summary.csv``, ``records.json`` and ``timings.csv`` to ``out_dir``.

    ``records.json`` holds only deterministic content; wall times go to the
    separate ``timings.csv``. Returns the written paths by name.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name
                 for name in ("summary.csv", "records.json", "timings.csv")}
        with open(paths["summary.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for s in summary.stats():
                w.writerow([s.scheme, s.M, _fmt(s.mean), _fmt(s.stderr), s.n])
        doc = {
            "config": summary.config.to_dict(),
            "schemes": list(summary.schemes),
            "M_values": list(summary.M_values),
            "records": [r.to_dict() for r in summary.records],
        }
        with open(paths["records.json"], "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        with open(paths["timings.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("scheme", "M", "realization", "wall_time_s"))
            for r in summary.records:
                w.writerow([r.scheme, r.M, r.realization, f"{r.wall_time:.6f}"])
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return paths


def load_records(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dump_allocation(result, path) -> Path:
    """Write the RB grid of ``result`` (a SolveResult or Allocation) as CSV.

    The file has ``Q`` rows of assigned users (-1 when unassigned) followed
    by ``Q`` rows of powers in Watt::

        kind,slot,n0,n1,...
        user,0,2,2,-1,...
        power,0,0.13,0.2,0.0,...
    """
    alloc = result.allocation if isinstance(result, SolveResult) else result
    assign = alloc.assignment()
    Q, N = assign.shape
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "slot"] + [f"n{n}" for n in range(N)])
            for q in range(Q):
                w.writerow(["user", q] + [int(u) for u in assign[q]])
            for q in range(Q):
                w.writerow(["power", q] + [repr(float(p)) for p in alloc.p[q]])
    except OSError as exc:
        raise OSError(f"cannot write allocation to {path}: {exc}") from exc
    return path


def load_allocation(path, K: int | None = None) -> Allocation:
    """Parse a file written by ``dump_allocation``.

    ``K`` defaults to one more than the largest user index in the file.
    """
    users, powers = {}, {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["kind", "slot"]:
        raise ValueError(f"{path}: not an allocation dump")
    for row in rows[1:]:
        kind, q = row[0], int(row[1])
        if kind == "user":
            users[q] = [int(x) for x in row[2:]]
        elif kind == "power":
            powers[q] = [float(x) for x in row[2:]]
        else:
            raise ValueError(f"{path}: unknown row kind {kind!r}")
    Q = len(users)
    if sorted(users) != list(range(Q)) or sorted(powers) != list(range(Q)):
        raise ValueError(f"{path}: incomplete slot rows")
    assign = np.array([users[q] for q in range(Q)], dtype=int)
    p = np.array([powers[q] for q in range(Q)], dtype=float)
    if K is None:
        K = int(assign.max()) + 1 if np.any(assign >= 0) else 1
    return Allocation.from_assignment(assign, p, K)


def distinct_users_from_dump(path) -> float:
    """Unique assigned users per slot, averaged over slots, from a dump file."""
    return distinct_users_per_slot(load_allocation(path).assignment())


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
