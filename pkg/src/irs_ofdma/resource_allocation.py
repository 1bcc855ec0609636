"""Max-min OFDMA resource block and power allocation for fixed CNRs.

The common rate ``R = min_k R_k`` is maximized over binary RB assignments and
per-slot power budgets by Lagrange duality:

* the user weights ``lam`` (multipliers of ``R_k >= R``) live on the simplex
  and are updated by projected subgradient steps;
* for fixed ``lam`` the Lagrangian separates over RBs, each RB picks the user
  with the largest water-filling score, and the per-slot power price ``mu_q``
  is found by bisection so the slot budget is met.

Each dual iterate yields a primal candidate (the winners of every RB with an
exactly water-filled budget); the best candidates are kept and polished by a
max-min power allocation with their assignment frozen. Small instances add a
local search over single-RB moves and swaps; on larger ones, if the duality
gap is still open, the winners at the best multipliers are greedily repaired
by handing cheap RBs to the user short of rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

LN2 = math.log(2.0)
TINY_PRICE = 1e-300
BUDGET_RTOL = 1e-8


@dataclass(frozen=True)
class Allocation:
    """Binary RB assignment ``alpha`` (K, Q, N) and powers ``p`` (Q, N) in Watt."""

    alpha: np.ndarray
    p: np.ndarray

    @classmethod
    def from_assignment(cls, assign, p, K: int) -> "Allocation":
        """Build from a (Q, N) user-index grid with -1 for unassigned RBs."""
        assign = np.asarray(assign, dtype=int)
        p = np.asarray(p, dtype=float)
        Q, N = assign.shape
        alpha = np.zeros((K, Q, N), dtype=np.int8)
        q_idx, n_idx = np.nonzero(assign >= 0)
        alpha[assign[q_idx, n_idx], q_idx, n_idx] = 1
        return cls(alpha, np.where(assign >= 0, p, 0.0))

    @classmethod
    def empty(cls, K: int, Q: int, N: int) -> "Allocation":
        return cls(np.zeros((K, Q, N), dtype=np.int8), np.zeros((Q, N)))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.alpha.shape

    def assignment(self) -> np.ndarray:
        """(Q, N) grid of assigned user indices, -1 where unassigned."""
        used = self.alpha.any(axis=0)
        return np.where(used, self.alpha.argmax(axis=0), -1)

    def distinct_users_per_slot(self) -> float:
        """Number of distinct served users per slot, averaged over slots."""
        return distinct_users_per_slot(self.assignment())

    def check(self, P: float) -> None:
        """Raise ``ValueError`` if any allocation constraint is violated."""
        alpha, p = self.alpha, self.p
        if not np.isin(alpha, (0, 1)).all():
            raise ValueError("alpha must be binary")
        if np.any(alpha.sum(axis=0) > 1):
            raise ValueError("an RB is assigned to more than one user")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("powers must be finite and non-negative")
        if np.any(p.sum(axis=1) > P * (1 + 1e-9)):
            raise ValueError("per-slot power budget exceeded")
        if np.any((p > 0) & ~alpha.any(axis=0)):
            raise ValueError("power allocated to an unassigned RB")


def distinct_users_per_slot(assign) -> float:
    assign = np.asarray(assign)
    return float(np.mean([np.unique(row[row >= 0]).size for row in assign]))


@dataclass(frozen=True)
class DualState:
    """User weights ``lam`` on the simplex and per-slot power prices ``mu``."""

    lam: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class P11Result:
    allocation: Allocation
    rate: float
    rates: np.ndarray
    dual_bound: float
    dual: DualState
    iterations: int
    gap_met: bool

    @property
    def gap(self) -> float:
        """Relative duality gap ``(dual_bound - rate) / dual_bound``."""
        if self.dual_bound <= 0:
            return 0.0
        return (self.dual_bound - self.rate) / self.dual_bound


@dataclass(frozen=True)
class DualSettings:
    max_iter: int = 500
    gap_tol: float = 1e-3
    step: float = 0.5
    refine_iter: int = 300
    pool_size: int = 8
    # one-RB moves are searched only when (K - 1) * Q * N is at most this
    local_search_moves: int = 32
    # consecutive rejected moves before the greedy repair of larger instances stops
    repair_patience: int = 8

    @classmethod
    def from_config(cls, cfg) -> "DualSettings":
        return cls(max_iter=cfg.dual_max_iter, gap_tol=cfg.dual_gap_tol,
                   step=cfg.dual_step)


# ---------------------------------------------------------------------------
# scalar building blocks


def waterfill_power(lam_k, mu_q, g, N: int, Q: int):
    """Power maximizing ``lam_k * log2(1 + g p) / (N Q) - mu_q * p`` over p >= 0."""
    if np.any(np.asarray(mu_q) <= 0):
        raise ValueError("power price mu_q must be positive")
    g = np.asarray(g, dtype=float)
    with np.errstate(divide="ignore"):
        level = np.asarray(lam_k, dtype=float) / (N * Q * mu_q * LN2)
        p = np.where(g > 0, level - 1.0 / np.where(g > 0, g, 1.0), 0.0)
    p = np.maximum(p, 0.0)
    return float(p) if p.ndim == 0 else p


@numba.njit(cache=True)
def _rb_best(lam, mu, gcol, nq):
    best_k = 0
    best_p = 0.0
    best_s = -np.inf
    for k in range(gcol.size):
        p = 0.0
        if gcol[k] > 0.0 and lam[k] > 0.0:
            p = lam[k] / (nq * mu * LN2) - 1.0 / gcol[k]
            if p < 0.0:
                p = 0.0
        s = lam[k] * math.log2(1.0 + gcol[k] * p) / nq - mu * p
        if s > best_s:
            best_s = s
            best_k = k
            best_p = p
    return best_k, best_p, best_s


def per_rb_winner(lam, mu_q: float, g_col, N: int, Q: int):
    """Return ``(winner, power, score)`` of one RB for the given duals.

    Ties go to the lowest user index.
    """
    if mu_q <= 0:
        raise ValueError("power price mu_q must be positive")
    k, p, s = _rb_best(np.asarray(lam, dtype=float), float(mu_q),
                       np.asarray(g_col, dtype=float), float(N * Q))
    return int(k), float(p), float(s)


@numba.njit(cache=True)
def _slot_power(lam, gq, mu, nq, winners, powers):
    total = 0.0
    score = 0.0
    for n in range(gq.shape[0]):
        k, p, s = _rb_best(lam, mu, gq[n], nq)
        winners[n] = k
        powers[n] = p
        total += p
        score += s
    return total, score


@numba.njit(cache=True)
def _slot_bisect(lam, gq, P, nq, mu0, winners, powers):
    """Price ``mu`` meeting the slot budget; fills winners/powers at that price.

    Returns ``(mu, score_sum, ok)``. The returned side of the bracket never
    exceeds the budget. ``ok`` is False only if the bracket cannot be found.
    """
    active = False
    for n in range(gq.shape[0]):
        for k in range(gq.shape[1]):
            if gq[n, k] > 0.0 and lam[k] > 0.0:
                active = True
    if not active:
        _, score = _slot_power(lam, gq, 1.0, nq, winners, powers)
        return TINY_PRICE, 0.0, True

    mu_hi = mu0
    total_hi, _ = _slot_power(lam, gq, mu_hi, nq, winners, powers)
    if total_hi > P:
        found = False
        for _ in range(2100):
            mu_lo = mu_hi
            mu_hi *= 2.0
            total_hi, _ = _slot_power(lam, gq, mu_hi, nq, winners, powers)
            if total_hi <= P:
                found = True
                break
        if not found:
            return mu_hi, 0.0, False
    else:
        mu_lo = mu_hi
        found = False
        for _ in range(2100):
            mu_lo *= 0.5
            if mu_lo == 0.0:
                break
            t_lo, _ = _slot_power(lam, gq, mu_lo, nq, winners, powers)
            if t_lo > P:
                found = True
                break
            mu_hi = mu_lo
            total_hi = t_lo
        if not found:
            return mu_hi, 0.0, False

    for _ in range(300):
        if P - total_hi <= BUDGET_RTOL * P:
            break
        mid = math.sqrt(mu_lo * mu_hi)
        if not (mu_lo < mid < mu_hi):
            break
        t_mid, _ = _slot_power(lam, gq, mid, nq, winners, powers)
        if t_mid > P:
            mu_lo = mid
        else:
            mu_hi = mid
            total_hi = t_mid
    total, score = _slot_power(lam, gq, mu_hi, nq, winners, powers)
    return mu_hi, score, True


def slot_total_power(lam, g_slot, mu_q: float, N: int, Q: int) -> float:
    """Total power of the per-RB winners of one slot at price ``mu_q``.

    ``g_slot`` has shape (K, N).
    """
    gq = np.ascontiguousarray(np.asarray(g_slot, dtype=float).T)
    winners = np.zeros(gq.shape[0], dtype=np.int64)
    powers = np.zeros(gq.shape[0])
    total, _ = _slot_power(np.asarray(lam, dtype=float), gq, float(mu_q),
                           float(N * Q), winners, powers)
    return float(total)


def slot_power_bisection(lam, g_slot, P: float, N: int, Q: int):
    """Find the slot price ``mu_q`` that spends the budget ``P``.

    Parameters
    ----------
    lam : array_like, shape (K,)
        User weights on the simplex.
    g_slot : array_like, shape (K, N)
        CNRs of the slot.

    Returns
    -------
    mu : float
    winners : ndarray of int, shape (N,)
    powers : ndarray, shape (N,)
    """
    if not P > 0:
        raise ValueError("power budget must be positive")
    lam = np.asarray(lam, dtype=float)
    gq = np.ascontiguousarray(np.asarray(g_slot, dtype=float).T)
    winners = np.zeros(gq.shape[0], dtype=np.int64)
    powers = np.zeros(gq.shape[0])
    mu, _, ok = _slot_bisect(lam, gq, float(P), float(N * Q),
                             _initial_price(lam, gq, P, N * Q), winners, powers)
    if not ok:
        raise RuntimeError("could not bracket the slot power price")
    return float(mu), winners, powers


def _initial_price(lam, gq, P, nq):
    g_max = gq.max() if gq.size else 0.0
    if g_max <= 0:
        return 1.0
    return float(lam.max() / (nq * LN2 * (P / gq.shape[0] + 1.0 / g_max)))


# ---------------------------------------------------------------------------
# simplex projection and exact water-filling


@numba.njit(cache=True)
def project_simplex(v):
    """Euclidean projection onto the probability simplex (sorting method)."""
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(u.size):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            theta = t
    out = np.empty_like(v)
    for i in range(v.size):
        out[i] = max(v[i] - theta, 0.0)
    return out


@numba.njit(cache=True)
def _waterfill_levels(a, b, P, out):
    """Maximize ``sum a_n ln(1 + p_n / b_n)`` s.t. ``sum p_n <= P``.

    Entries with ``a_n <= 0`` or infinite ``b_n`` get no power. Fills ``out``
    with ``p_n = max(0, a_n x - b_n)`` where ``x`` is the water level.
    """
    cnt = 0
    idx = np.empty(a.size, dtype=np.int64)
    for i in range(a.size):
        out[i] = 0.0
        if a[i] > 0.0 and np.isfinite(b[i]):
            idx[cnt] = i
            cnt += 1
    if cnt == 0:
        return
    idx = idx[:cnt]
    tau = np.empty(cnt)
    for j in range(cnt):
        tau[j] = b[idx[j]] / a[idx[j]]
    order = np.argsort(tau)
    sa = 0.0
    sb = 0.0
    x = 0.0
    for j in range(cnt):
        i = idx[order[j]]
        sa += a[i]
        sb += b[i]
        x = (P + sb) / sa
        if j + 1 == cnt or x <= tau[order[j + 1]]:
            break
    for j in range(cnt):
        i = idx[j]
        p = a[i] * x - b[i]
        out[i] = p if p > 0.0 else 0.0


@numba.njit(cache=True)
def _frozen_powers(gt, assign, lam, P, p_out):
    """Exact weighted water-filling of every slot with a frozen assignment."""
    Q, N, _ = gt.shape
    a = np.empty(N)
    b = np.empty(N)
    row = np.empty(N)
    for q in range(Q):
        for n in range(N):
            k = assign[q, n]
            a[n] = 0.0
            b[n] = np.inf
            if k >= 0 and gt[q, n, k] > 0.0:
                a[n] = lam[k]
                b[n] = 1.0 / gt[q, n, k]
        _waterfill_levels(a, b, P, row)
        for n in range(N):
            p_out[q, n] = row[n]


@numba.njit(cache=True)
def _rates(gt, assign, p, K, rates):
    Q, N, _ = gt.shape
    nq = Q * N
    for k in range(K):
        rates[k] = 0.0
    for q in range(Q):
        for n in range(N):
            k = assign[q, n]
            if k >= 0 and p[q, n] > 0.0:
                rates[k] += math.log2(1.0 + gt[q, n, k] * p[q, n]) / nq
    r = np.inf
    for k in range(K):
        if rates[k] < r:
            r = rates[k]
    return r


@numba.njit(cache=True)
def _prune(assign, p):
    """Mark RBs without power as unassigned."""
    Q, N = assign.shape
    for q in range(Q):
        for n in range(N):
            if p[q, n] <= 0.0:
                assign[q, n] = -1
                p[q, n] = 0.0


# ---------------------------------------------------------------------------
# dual loop


@numba.njit(cache=True)
def _pool_insert(pool_assign, pool_p, pool_R, cand, cand_p, r):
    """Keep the best ``len(pool_R)`` distinct assignments seen so far."""
    worst = 0
    for b in range(pool_R.size):
        if pool_R[b] > -np.inf and np.array_equal(pool_assign[b], cand):
            if r > pool_R[b]:
                pool_R[b] = r
                pool_p[b] = cand_p
            return
        if pool_R[b] < pool_R[worst]:
            worst = b
    if r > pool_R[worst]:
        pool_R[worst] = r
        pool_assign[worst] = cand
        pool_p[worst] = cand_p


@numba.njit(cache=True)
def _dual_loop(gt, P, lam0, max_iter, step0, gap_tol, pool_assign, pool_p, pool_R):
    """Projected subgradient on the user weights.

    Primal candidates are collected in the pool arrays, which may already
    hold incumbents. Returns ``(dual_best, lam, mu, iterations, ok)`` where
    ``lam``/``mu`` are the multipliers attaining the smallest dual value.
    """
    Q, N, K = gt.shape
    nq = float(Q * N)
    lam = lam0.copy()
    rates = np.empty(K)

    mu = np.empty(Q)
    for q in range(Q):
        g_max = 0.0
        for n in range(N):
            for k in range(K):
                if gt[q, n, k] > g_max:
                    g_max = gt[q, n, k]
        mu[q] = 1.0
        if g_max > 0.0:
            mu[q] = lam.max() / (nq * LN2 * (P / N + 1.0 / g_max))

    winners = np.empty((Q, N), dtype=np.int64)
    powers = np.empty((Q, N))
    cand = np.empty((Q, N), dtype=np.int64)
    cand_p = np.empty((Q, N))
    dual_rates = np.empty(K)
    dual_best = np.inf
    lam_best = lam.copy()
    mu_best = mu.copy()
    it = 0
    for it in range(1, max_iter + 1):
        dual_value = 0.0
        for q in range(Q):
            m, score, ok = _slot_bisect(lam, gt[q], P, nq, mu[q], winners[q], powers[q])
            if not ok:
                return dual_best, lam_best, mu_best, it, False
            mu[q] = m
            dual_value += score + m * P
        if dual_value < dual_best:
            dual_best = dual_value
            lam_best[:] = lam
            mu_best[:] = mu

        # primal candidate: winners with exactly water-filled budgets
        for q in range(Q):
            for n in range(N):
                cand[q, n] = winners[q, n]
        _frozen_powers(gt, cand, lam, P, cand_p)
        _prune(cand, cand_p)
        r = _rates(gt, cand, cand_p, K, rates)
        _pool_insert(pool_assign, pool_p, pool_R, cand, cand_p, r)

        best_R = pool_R.max()
        if dual_best <= 0.0 or (dual_best - best_R) <= gap_tol * dual_best:
            break

        # subgradient of the dual function at lam
        r_min = _rates(gt, winners, powers, K, dual_rates)
        scale = dual_rates.max()
        if scale <= 0.0:
            scale = 1.0
        step = step0 / math.sqrt(it)
        lam = project_simplex(lam - step * (dual_rates - r_min) / scale)
    return dual_best, lam_best, mu_best, it, True


@numba.njit(cache=True)
def _refine_frozen(gt, assign, p, P, lam0, iters, step0):
    """Max-min power allocation for a frozen assignment.

    Minimizes the (smooth, convex) dual of the frozen problem over the
    simplex by normalized projected gradient steps. Overwrites ``p`` when a
    better common rate is found; returns the best common rate.
    """
    Q, N, K = gt.shape
    rates = np.empty(K)
    best_R = _rates(gt, assign, p, K, rates)
    served = np.zeros(K, dtype=np.bool_)
    for q in range(Q):
        for n in range(N):
            if assign[q, n] >= 0:
                served[assign[q, n]] = True
    for k in range(K):
        if not served[k]:
            return best_R
    lam = lam0.copy()
    trial = np.empty((Q, N))
    for t in range(1, iters + 1):
        _frozen_powers(gt, assign, lam, P, trial)
        r = _rates(gt, assign, trial, K, rates)
        if r > best_R:
            best_R = r
            p[:, :] = trial
        spread = rates.max() - r
        if spread <= 1e-12 * max(r, 1e-300):
            break
        step = step0 / math.sqrt(t)
        lam = project_simplex(lam - step * (rates - r) / spread)
    return best_R


@numba.njit(cache=True)
def _polish(gt, assign, p, P, lam, iters, step0):
    """Refine the frozen assignment, then search single-RB moves and swaps.

    Each move is evaluated with its own max-min power refinement and kept
    when it raises the common rate. Updates ``assign``/``p`` in place and
    returns the final common rate.
    """
    Q, N, K = gt.shape
    best_R = _refine_frozen(gt, assign, p, P, lam, iters, step0)
    trial = np.empty_like(assign)
    trial_p = np.empty_like(p)
    improved = True
    while improved:
        improved = False
        for q in range(Q):
            for n in range(N):
                for k in range(K):
                    if k == assign[q, n]:
                        continue
                    trial[:, :] = assign
                    trial[q, n] = k
                    _frozen_powers(gt, trial, lam, P, trial_p)
                    r = _refine_frozen(gt, trial, trial_p, P, lam, iters, step0)
                    if r > best_R * (1.0 + 1e-9) + 1e-15:
                        best_R = r
                        assign[:, :] = trial
                        p[:, :] = trial_p
                        improved = True
        # exchange the owners of two RBs
        for i in range(Q * N):
            for j in range(i + 1, Q * N):
                qi, ni = i // N, i % N
                qj, nj = j // N, j % N
                if assign[qi, ni] == assign[qj, nj]:
                    continue
                trial[:, :] = assign
                trial[qi, ni] = assign[qj, nj]
                trial[qj, nj] = assign[qi, ni]
                _frozen_powers(gt, trial, lam, P, trial_p)
                r = _refine_frozen(gt, trial, trial_p, P, lam, iters, step0)
                if r > best_R * (1.0 + 1e-9) + 1e-15:
                    best_R = r
                    assign[:, :] = trial
                    p[:, :] = trial_p
                    improved = True
    return best_R


@numba.njit(cache=True)
def _rebalance(gt, assign, p, P, lam, mu, iters, step0, max_fail):
    """Greedy repair: hand RBs to the poorest user.

    Candidate RBs are ranked by the dual score the move gives up at
    ``(lam, mu)``; a move is kept when the refined common rate improves.
    Stops after ``max_fail`` consecutive rejected moves.
    """
    Q, N, K = gt.shape
    nq = float(Q * N)
    score = np.zeros((Q, N, K))
    one = np.zeros(1)
    for q in range(Q):
        for n in range(N):
            for k in range(K):
                one[0] = gt[q, n, k]
                _, _, score[q, n, k] = _rb_best(lam[k:k + 1], mu[q], one, nq)
    rates = np.empty(K)
    best_R = _refine_frozen(gt, assign, p, P, lam, iters, step0)
    trial = np.empty_like(assign)
    trial_p = np.empty_like(p)
    tried = np.zeros((Q, N), dtype=np.bool_)
    for _ in range(Q * N):
        # refined rates are nearly equal; the rates under the global weights
        # still show which user is short of RBs
        _frozen_powers(gt, assign, lam, P, trial_p)
        _rates(gt, assign, trial_p, K, rates)
        poor = 0
        for k in range(1, K):
            if rates[k] < rates[poor]:
                poor = k
        tried[:, :] = False
        fails = 0
        accepted = False
        while fails < max_fail and not accepted:
            cost = np.inf
            bq = -1
            bn = -1
            for q in range(Q):
                for n in range(N):
                    j = assign[q, n]
                    if j == poor or tried[q, n] or gt[q, n, poor] <= 0.0:
                        continue
                    c = -score[q, n, poor]
                    if j >= 0:
                        c += score[q, n, j]
                    if c < cost:
                        cost = c
                        bq = q
                        bn = n
            if bq < 0:
                break
            tried[bq, bn] = True
            trial[:, :] = assign
            trial[bq, bn] = poor
            _frozen_powers(gt, trial, lam, P, trial_p)
            r = _refine_frozen(gt, trial, trial_p, P, lam, iters, step0)
            if r > best_R * (1.0 + 1e-9) + 1e-15:
                best_R = r
                assign[:, :] = trial
                p[:, :] = trial_p
                accepted = True
            else:
                fails += 1
        if not accepted:
            break
    return best_R


# ---------------------------------------------------------------------------
# public solver


def _transpose_cnr(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 3:
        raise ValueError(f"CNR grid must have shape (K, Q, N), got {g.shape}")
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise ValueError("CNRs must be finite and non-negative")
    return np.ascontiguousarray(g.transpose(1, 2, 0))


def solve_p11(g, P: float, settings: DualSettings | None = None,
              initial: Allocation | None = None) -> P11Result:
    """Max-min RB and power allocation for a fixed CNR grid.

    Parameters
    ----------
    g : array_like, shape (K, Q, N)
        Channel-to-noise ratios in 1/Watt.
    P : float
        Per-slot power budget in Watt.
    settings : DualSettings, optional
    initial : Allocation, optional
        Incumbent solution; the returned allocation is never worse than it.

    Returns
    -------
    P11Result
        The best feasible allocation found and the smallest dual value seen,
        which upper-bounds the optimal common rate.
    """
    settings = settings or DualSettings()
    if not P > 0:
        raise ValueError("power budget must be positive")
    gt = _transpose_cnr(g)
    Q, N, K = gt.shape
    B = settings.pool_size
    pool_assign = np.full((B, Q, N), -1, dtype=np.int64)
    pool_p = np.zeros((B, Q, N))
    pool_R = np.full(B, -np.inf)
    if initial is not None:
        if initial.alpha.shape != (K, Q, N):
            raise ValueError("initial allocation does not match the CNR grid")
        pool_assign[0] = initial.assignment()
        pool_p[0] = initial.p
        pool_R[0] = compute_rates(initial, g)[1]
    lam0 = np.full(K, 1.0 / K)
    dual_bound, lam, mu, iters, ok = _dual_loop(
        gt, float(P), lam0, settings.max_iter, settings.step,
        settings.gap_tol, pool_assign, pool_p, pool_R)
    if not ok:
        raise RuntimeError("slot power bisection failed to bracket the budget")

    rates = np.empty(K)
    best = int(np.argmax(pool_R))
    assign, p = pool_assign[best].copy(), pool_p[best].copy()
    best_R = _rates(gt, assign, p, K, rates)
    search = (K - 1) * Q * N <= settings.local_search_moves
    for b in np.argsort(-pool_R, kind="stable"):
        if not np.isfinite(pool_R[b]) or settings.refine_iter == 0:
            continue
        cand, cand_p = pool_assign[b].copy(), pool_p[b].copy()
        if search:
            r = _polish(gt, cand, cand_p, float(P), lam,
                        settings.refine_iter, settings.step)
        else:
            r = _refine_frozen(gt, cand, cand_p, float(P), lam,
                               settings.refine_iter, settings.step)
        _prune(cand, cand_p)
        r = _rates(gt, cand, cand_p, K, rates)
        if r > best_R:
            best_R, assign, p = r, cand, cand_p

    gap_open = dual_bound - best_R > settings.gap_tol * dual_bound
    if not search and gap_open and settings.repair_patience > 0:
        # start from the (efficient, unbalanced) winners at the best duals
        cand = np.empty((Q, N), dtype=np.int64)
        cand_p = np.empty((Q, N))
        for q in range(Q):
            _slot_bisect(lam, gt[q], float(P), float(Q * N), mu[q], cand[q], cand_p[q])
        _frozen_powers(gt, cand, lam, float(P), cand_p)
        _rebalance(gt, cand, cand_p, float(P), lam, mu, settings.refine_iter,
                   settings.step, settings.repair_patience)
        _prune(cand, cand_p)
        if _rates(gt, cand, cand_p, K, rates) > best_R:
            assign, p = cand, cand_p

    alloc = Allocation.from_assignment(assign, p, K)
    rates, R = compute_rates(alloc, g)
    # the dual value is an upper bound only up to rounding
    dual_bound = max(float(dual_bound), R)
    gap_met = dual_bound <= 0 or (dual_bound - R) <= settings.gap_tol * dual_bound
    return P11Result(alloc, R, rates, dual_bound, DualState(lam, mu),
                     int(iters), bool(gap_met))


def compute_rates(alloc: Allocation, g) -> tuple[np.ndarray, float]:
    """Per-user rates (bps/Hz) and the common rate of an allocation."""
    g = np.asarray(g, dtype=float)
    K, Q, N = g.shape
    snr = g * alloc.p[None, :, :]
    rates = (alloc.alpha * np.log2(1.0 + snr)).sum(axis=(1, 2)) / (N * Q)
    return rates, float(rates.min())
