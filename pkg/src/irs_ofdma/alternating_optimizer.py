"""Alternating optimization of OFDMA allocation and IRS reflection, plus benchmarks.

Each initialization starts from random unit-modulus reflections and
alternates two block updates until the common rate stalls:

1. resource allocation for the CNRs induced by the current reflections,
2. SCA reflection update for the current allocation.

Both updates are accepted only when they do not lower the common rate, so the
per-initialization trace is nondecreasing. The best initialization wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel_model
from .passive_beamforming import ScaSettings, sca_solve_p12
from .resource_allocation import Allocation, DualSettings, compute_rates, solve_p11
from .scenario import STREAM_SOLVER, ChannelRealization, ScenarioConfig, substream

SCHEMES = ("dynamic", "fixed", "random_phase_1", "random_phase_2", "no_irs")
_SCHEME_CODE = {name: i for i, name in enumerate(SCHEMES)}


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one scheme on one channel realization.

    ``trace`` holds the common rate after every resource-allocation step of
    the winning initialization; ``traces`` holds it for every initialization.
    """

    allocation: Allocation
    schedule: np.ndarray
    common_rate: float
    per_user_rates: np.ndarray
    trace: list
    init_index: int
    scheme: str
    traces: list = field(default_factory=list)

    @property
    def distinct_users_per_slot(self) -> float:
        return self.allocation.distinct_users_per_slot()


def random_schedule(rng: np.random.Generator, M: int, Q: int) -> np.ndarray:
    """Unit-modulus reflections with i.i.d. phases uniform on [-pi, pi)."""
    return np.exp(1j * rng.uniform(-np.pi, np.pi, size=(Q, M)))


def _init_rng(cfg: ScenarioConfig, realization: ChannelRealization,
              scheme: str, i: int) -> np.random.Generator:
    return substream(cfg.seed, realization.index, STREAM_SOLVER,
                     _SCHEME_CODE[scheme], i)


def _cnr(realization, schedule, gamma_sigma2):
    return channel_model.cnr_grid(realization.h_d, realization.V, schedule,
                                  1.0, gamma_sigma2)


def _alternate(realization, cfg, schedule, incumbent, tied, dual, sca):
    gs2 = cfg.gamma * cfg.sigma2
    g = _cnr(realization, schedule, gs2)
    alloc = solve_p11(g, cfg.P, dual, initial=incumbent).allocation
    rate = compute_rates(alloc, g)[1]
    trace = [rate]
    for _ in range(cfg.outer_max_iter):
        step = sca_solve_p12(alloc, realization.h_d, realization.V, schedule,
                             gs2, tied, sca)
        schedule = step.schedule
        g = _cnr(realization, schedule, gs2)
        alloc = solve_p11(g, cfg.P, dual, initial=alloc).allocation
        new_rate = compute_rates(alloc, g)[1]
        trace.append(new_rate)
        if new_rate - rate < cfg.outer_tol:
            break
        rate = new_rate
    return alloc, schedule, trace


def solve_p1(realization: ChannelRealization, cfg: ScenarioConfig,
             tied: bool = False, extra_inits=()) -> SolveResult:
    """Best of ``cfg.I`` alternating-optimization runs (plus ``extra_inits``).

    ``extra_inits`` are additional ``(schedule, allocation)`` starting points
    tried after the random ones, e.g. a fixed-beamforming solution to
    warm-start the dynamic scheme. The allocation may be None; otherwise it
    serves as incumbent of the first resource allocation step.
    """
    scheme = "fixed" if tied else "dynamic"
    dual = DualSettings.from_config(cfg)
    sca = ScaSettings.from_config(cfg)
    inits = []
    for i in range(cfg.I):
        rng = _init_rng(cfg, realization, scheme, i)
        init = random_schedule(rng, realization.M, 1 if tied else cfg.Q)
        inits.append((np.repeat(init, cfg.Q, axis=0) if tied else init, None))
    inits.extend((np.asarray(s, dtype=complex), a) for s, a in extra_inits)

    best = None
    traces = []
    for i, (init, incumbent) in enumerate(inits):
        alloc, schedule, trace = _alternate(realization, cfg, init, incumbent,
                                            tied, dual, sca)
        traces.append(trace)
        # ties keep the lowest initialization index
        if best is None or trace[-1] > best[2][-1]:
            best = (alloc, schedule, trace, i)
    alloc, schedule, trace, index = best
    rates, rate = compute_rates(alloc, _cnr(realization, schedule,
                                            cfg.gamma * cfg.sigma2))
    return SolveResult(alloc, schedule, rate, rates, trace, index, scheme, traces)


def _allocation_only(scheme, realization, cfg, schedule) -> SolveResult:
    g = _cnr(realization, schedule, cfg.gamma * cfg.sigma2)
    res = solve_p11(g, cfg.P, DualSettings.from_config(cfg))
    trace = [res.rate]
    return SolveResult(res.allocation, schedule, res.rate, res.rates, trace, 0,
                       scheme, [trace])


def run_scheme(scheme: str, realization: ChannelRealization,
               cfg: ScenarioConfig, warm_start: SolveResult | None = None) -> SolveResult:
    """Run one of ``SCHEMES`` on a realization.

    For ``dynamic``, a ``warm_start`` result (normally the fixed scheme on
    the same realization) is appended as an extra initialization so the
    dynamic rate cannot fall below it.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    M, Q = realization.M, cfg.Q
    if scheme == "dynamic":
        extra = () if warm_start is None else (
            (warm_start.schedule, warm_start.allocation),)
        return solve_p1(realization, cfg, tied=False, extra_inits=extra)
    if scheme == "fixed":
        return solve_p1(realization, cfg, tied=True)
    if scheme == "random_phase_1":
        rng = _init_rng(cfg, realization, scheme, 0)
        schedule = np.repeat(random_schedule(rng, M, 1), Q, axis=0)
        return _allocation_only(scheme, realization, cfg, schedule)
    if scheme == "random_phase_2":
        rng = _init_rng(cfg, realization, scheme, 0)
        return _allocation_only(scheme, realization, cfg,
                                random_schedule(rng, M, Q))
    return _allocation_only(scheme, realization.without_irs(), cfg,
                            np.zeros((Q, M), dtype=complex))
