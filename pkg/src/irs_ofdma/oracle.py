"""Exhaustive reference solver for tiny instances.

Every RB-to-user assignment is enumerated; for each one the max-min power
allocation is computed exactly and the best common rate is kept. With
channels instead of CNRs, every reflection coefficient additionally runs
over a grid of unit-modulus phases. All evaluated points are feasible, so
the result is a lower bound on the true optimum.

None of this shares code with the dual solver in ``resource_allocation``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize

from . import channel_model
from .scenario import ChannelRealization

MAX_ASSIGNMENTS = 10**4
MAX_PHASE_POINTS = 10**6


def min_power_for_rate(gains, bits: float) -> float:
    """Least total power with ``sum log2(1 + g_i p_i) >= bits``.

    Closed-form water-filling: the strongest ``j`` sub-bands are active and
    share the water level ``w`` with ``sum_{i<=j} log2(w g_i) = bits``.
    """
    if bits <= 0:
        return 0.0
    g = np.sort(np.asarray(gains, dtype=float))[::-1]
    g = g[g > 0]
    if g.size == 0:
        return math.inf
    log_g = np.log2(g)
    for j in range(1, g.size + 1):
        log_w = (bits - log_g[:j].sum()) / j
        if j == g.size or log_w + log_g[j] <= 0:
            w = 2.0**log_w
            return float(np.sum(w - 1.0 / g[:j]))
    raise AssertionError("unreachable")


def _single_slot_maxmin(g, assign, P: float) -> float:
    """Exact max-min common rate of a Q=1 instance with a fixed assignment."""
    K, _, N = g.shape
    groups = [g[k, 0, assign[0] == k] for k in range(K)]
    if any(grp.size == 0 or not np.any(grp > 0) for grp in groups):
        return 0.0

    def power_needed(t):
        return sum(min_power_for_rate(grp, t * N) for grp in groups)

    # any user alone with the full budget bounds the common rate from above
    hi = min(
        math.log2(1.0 + grp.max() * P) * grp.size / N for grp in groups
    )
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if power_needed(mid) <= P:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(hi, 1.0):
            break
    return lo


def _multi_slot_maxmin(g, assign, P: float) -> float:
    """Max-min common rate for a fixed assignment spanning several slots."""
    K, Q, N = g.shape
    gain = np.array([[g[assign[q, n], q, n] for n in range(N)] for q in range(Q)])
    owner = assign.ravel()
    gain = gain.ravel()
    if any(not np.any((owner == k) & (gain > 0)) for k in range(K)):
        return 0.0

    def rates(x):
        p = P * np.clip(x[:-1], 0.0, None)
        r = np.log2(1.0 + gain * p) / (N * Q)
        return np.array([r[owner == k].sum() for k in range(K)])

    x0 = np.append(np.full(Q * N, 1.0 / N), 0.0)
    cons = [{"type": "ineq", "fun": lambda x: rates(x) - x[-1]}]
    for q in range(Q):
        sl = slice(q * N, (q + 1) * N)
        cons.append({"type": "ineq", "fun": lambda x, sl=sl: 1.0 - x[sl].sum()})
    bounds = [(0.0, 1.0)] * (Q * N) + [(0.0, None)]
    res = minimize(lambda x: -x[-1], x0, method="SLSQP", bounds=bounds,
                   constraints=cons, options={"maxiter": 500, "ftol": 1e-12})
    x = np.clip(res.x[:-1], 0.0, 1.0).reshape(Q, N)
    x /= np.maximum(x.sum(axis=1, keepdims=True), 1.0)
    return float(rates(np.append(x.ravel(), 0.0)).min())


def maxmin_fixed_assignment(g, assign, P: float) -> float:
    """Optimal common rate when the RB assignment (Q, N) is fixed."""
    g = np.asarray(g, dtype=float)
    assign = np.asarray(assign, dtype=int)
    if g.shape[1] == 1:
        return _single_slot_maxmin(g, assign, P)
    return _multi_slot_maxmin(g, assign, P)


def enumerate_assignments(K: int, Q: int, N: int):
    for combo in itertools.product(range(K), repeat=Q * N):
        yield np.array(combo, dtype=int).reshape(Q, N)


def oracle_cnr(g, P: float) -> float:
    """Best common rate over all assignments for a fixed CNR grid."""
    g = np.asarray(g, dtype=float)
    K, Q, N = g.shape
    if K ** (Q * N) > MAX_ASSIGNMENTS:
        raise ValueError(f"{K}^{Q * N} assignments exceed the oracle limit")
    return max(maxmin_fixed_assignment(g, a, P)
               for a in enumerate_assignments(K, Q, N))


def brute_force_oracle(instance, P: float, gamma_sigma2: float | None = None,
                       grid_points: int | None = None, Q: int = 1) -> float:
    """Exhaustive common rate of a tiny instance.

    Parameters
    ----------
    instance : ndarray of shape (K, Q, N), or ChannelRealization
        A CNR grid, or channels whose reflection phases are gridded.
    P : float
        Per-slot power budget in Watt.
    gamma_sigma2 : float
        SNR gap times noise power; required with channels.
    grid_points : int, optional
        Phase grid size per reflection coefficient. Defaults to 256 when
        ``M * Q <= 2`` and 64 otherwise.
    Q : int
        Number of time slots; only used with channels.
    """
    if not isinstance(instance, ChannelRealization):
        return oracle_cnr(instance, P)
    if gamma_sigma2 is None or not gamma_sigma2 > 0:
        raise ValueError("gamma_sigma2 is required with channels")
    K, N, M = instance.K, instance.N, instance.M
    if grid_points is None:
        grid_points = 256 if M * Q <= 2 else 64
    if K ** (Q * N) > MAX_ASSIGNMENTS:
        raise ValueError(f"{K}^{Q * N} assignments exceed the oracle limit")
    if grid_points ** (M * Q) > MAX_PHASE_POINTS:
        raise ValueError(
            f"{grid_points}^{M * Q} phase points exceed the oracle limit"
        )
    phases = np.exp(2j * np.pi * np.arange(grid_points) / grid_points)
    assignments = list(enumerate_assignments(K, Q, N))
    best = 0.0
    for combo in itertools.product(range(grid_points), repeat=M * Q):
        schedule = phases[np.array(combo)].reshape(Q, M)
        g = channel_model.cnr_grid(instance.h_d, instance.V, schedule,
                                   1.0, gamma_sigma2)
        for a in assignments:
            best = max(best, maxmin_fixed_assignment(g, a, P))
    return best
