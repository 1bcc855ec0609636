"""Reflection coefficient design for a fixed OFDMA allocation.

The CFR of an assigned RB ``(q, n)`` is affine in the slot's reflection
vector, ``c = c0 + c_row @ phi_q``, so its power ``|c|**2`` is convex in
``phi_q``. Around an expansion point ``c~`` it is minorized by the affine
function ``2 Re(conj(c~) c) - |c~|**2``; plugging this into the rate
expressions gives a concave max-min surrogate. The SCA loop re-expands at
the surrogate maximizer until the true common rate stops improving.

The surrogate is maximized over the product of unit disks by projected
supergradient ascent with a Polyak-type step (target: best value seen plus a
shrinking margin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import channel_model
from .resource_allocation import Allocation, compute_rates

DOMAIN_FLOOR = 1e-9
LN2 = math.log(2.0)


@dataclass(frozen=True)
class ScaSettings:
    tol: float = 1e-4
    max_iter: int = 50
    inner_max_iter: int = 2000
    inner_tol: float = 1e-6
    backtrack_max: int = 40

    @classmethod
    def from_config(cls, cfg) -> "ScaSettings":
        return cls(tol=cfg.sca_tol, max_iter=cfg.sca_max_iter,
                   inner_max_iter=cfg.inner_max_iter, inner_tol=cfg.inner_tol,
                   backtrack_max=cfg.backtrack_max)


def project_unit_disk(phi) -> np.ndarray:
    """Scale every coefficient with modulus above one back onto the unit circle."""
    phi = np.asarray(phi, dtype=complex)
    mod = np.abs(phi)
    return np.where(mod > 1.0, phi / np.where(mod > 1.0, mod, 1.0), phi)


def affine_cfr_coeffs(h_d, V, n: int) -> tuple[complex, np.ndarray]:
    """Coefficients ``(c0, c_row)`` with ``CFR[n] = c0 + c_row @ phi``."""
    h_d = np.asarray(h_d, dtype=complex)
    V = np.asarray(V, dtype=complex)
    N = h_d.size
    if not 0 <= n < N:
        raise ValueError(f"sub-band index {n} out of range for N={N}")
    if V.ndim != 2 or V.shape[0] != N:
        raise ValueError(f"V must have {N} rows")
    f_row = np.exp(-2j * np.pi * n * np.arange(N) / N)
    return complex(f_row @ h_d), f_row @ V


def linearized_gain(a, b, a_tilde, b_tilde):
    """First-order lower bound of ``a**2 + b**2`` around ``(a_tilde, b_tilde)``."""
    return a_tilde * (2 * a - a_tilde) + b_tilde * (2 * b - b_tilde)


@dataclass(frozen=True)
class SubproblemState:
    """Linearization data of every assigned RB that carries power.

    Arrays are indexed by RB; ``slot``/``band``/``user`` locate it,
    ``c0 + c_row @ phi[slot]`` is its CFR, ``snr_scale`` is
    ``p / (gamma sigma^2)`` and ``expansion`` is the CFR at the expansion
    point (``a_tilde + 1j * b_tilde``).
    """

    slot: np.ndarray
    band: np.ndarray
    user: np.ndarray
    c0: np.ndarray
    c_row: np.ndarray
    snr_scale: np.ndarray
    expansion: np.ndarray
    K: int
    Q: int
    N: int

    @property
    def size(self) -> int:
        return self.slot.size

    def cfr(self, schedule) -> np.ndarray:
        schedule = np.asarray(schedule, dtype=complex)
        return self.c0 + np.einsum("rm,rm->r", self.c_row, schedule[self.slot])

    def gains(self, schedule) -> np.ndarray:
        """Linearized channel power gains of all RBs at ``schedule``."""
        c = self.cfr(schedule)
        return linearized_gain(c.real, c.imag, self.expansion.real,
                               self.expansion.imag)

    def surrogate_rates(self, schedule) -> np.ndarray:
        arg = 1.0 + self.snr_scale * self.gains(schedule)
        with np.errstate(invalid="ignore", divide="ignore"):
            contrib = np.log2(arg) / (self.N * self.Q)
        return np.bincount(self.user, weights=contrib, minlength=self.K)


def build_subproblem(alloc: Allocation, h_d, V, expansion_schedule,
                     gamma_sigma2: float) -> SubproblemState:
    """Collect the affine CFR coefficients of the powered RBs of ``alloc``."""
    h_d = np.asarray(h_d, dtype=complex)
    V = np.asarray(V, dtype=complex)
    K, Q, N = alloc.alpha.shape
    assign = alloc.assignment()
    slot, band = np.nonzero((assign >= 0) & (alloc.p > 0))
    user = assign[slot, band]
    c0_all = np.fft.fft(h_d, axis=1)            # (K, N)
    crow_all = np.fft.fft(V, axis=1)            # (K, N, M)
    c0 = c0_all[user, band]
    c_row = crow_all[user, band]
    schedule = np.asarray(expansion_schedule, dtype=complex)
    expansion = c0 + np.einsum("rm,rm->r", c_row, schedule[slot])
    return SubproblemState(
        slot=slot.astype(np.int64), band=band.astype(np.int64),
        user=user.astype(np.int64), c0=c0, c_row=np.ascontiguousarray(c_row),
        snr_scale=alloc.p[slot, band] / gamma_sigma2, expansion=expansion,
        K=K, Q=Q, N=N,
    )


# ---------------------------------------------------------------------------
# inner solver


# Complex quantities are split into real and imaginary float arrays; only
# Re(conj(c~) c) enters the surrogate, which keeps the loops real-valued.


@numba.njit(cache=True)
def _surrogate(pr, pi, slot, user, z0, zr, zi, offset, s, K, nq, rates, lin):
    """Surrogate rates at ``pr + 1j*pi``.

    Stores ``Re(conj(c~) c)`` of every RB in ``lin`` and returns
    ``(min rate, argmin user, smallest log argument)``.
    """
    M = zr.shape[1]
    for k in range(K):
        rates[k] = 0.0
    min_arg = np.inf
    for r in range(slot.size):
        q = slot[r]
        acc = z0[r]
        for m in range(M):
            acc += zr[r, m] * pr[q, m] - zi[r, m] * pi[q, m]
        lin[r] = acc
        arg = 1.0 + s[r] * (2.0 * acc - offset[r])
        if arg < min_arg:
            min_arg = arg
        if arg > 0.0:
            rates[user[r]] += math.log2(arg) / nq
        else:
            rates[user[r]] = -np.inf
    worst = 0
    for k in range(1, K):
        if rates[k] < rates[worst]:
            worst = k
    return rates[worst], worst, min_arg


@numba.njit(cache=True)
def _supergradient(slot, user, zr, zi, offset, s, k_min, nq, lin, gr, gi):
    """Gradient of the surrogate rate of user ``k_min``; returns its squared norm."""
    M = zr.shape[1]
    gr[:, :] = 0.0
    gi[:, :] = 0.0
    for r in range(slot.size):
        if user[r] != k_min:
            continue
        q = slot[r]
        arg = 1.0 + s[r] * (2.0 * lin[r] - offset[r])
        w = 2.0 * s[r] / (arg * nq * LN2)
        for m in range(M):
            gr[q, m] += w * zr[r, m]
            gi[q, m] -= w * zi[r, m]
    norm2 = 0.0
    for q in range(gr.shape[0]):
        for m in range(M):
            norm2 += gr[q, m] * gr[q, m] + gi[q, m] * gi[q, m]
    return norm2


@numba.njit(cache=True)
def _step(pr, pi, gr, gi, step, tr, ti):
    """Projected step into ``tr``/``ti``; returns the squared move length."""
    moved = 0.0
    for q in range(pr.shape[0]):
        for m in range(pr.shape[1]):
            a = pr[q, m] + step * gr[q, m]
            b = pi[q, m] + step * gi[q, m]
            mod2 = a * a + b * b
            if mod2 > 1.0:
                scale = 1.0 / math.sqrt(mod2)
                a *= scale
                b *= scale
            tr[q, m] = a
            ti[q, m] = b
            moved += (a - pr[q, m]) ** 2 + (b - pi[q, m]) ** 2
    return moved


@numba.njit(cache=True)
def _maximize_surrogate(pr, pi, slot, user, z0, zr, zi, offset, s, K, nq,
                        max_iter, tol, backtrack_max):
    """Projected supergradient ascent of the min surrogate rate.

    ``slot`` indexes rows of the start point ``pr + 1j*pi`` (all zeros in
    tied mode). Returns ``(best_re, best_im, best_value, iterations, stalled)``.
    """
    rates = np.empty(K)
    lin = np.empty(slot.size)
    lin_trial = np.empty(slot.size)
    pr = pr.copy()
    pi = pi.copy()
    f, k_min, _ = _surrogate(pr, pi, slot, user, z0, zr, zi, offset, s, K,
                             nq, rates, lin)
    best = f
    best_r = pr.copy()
    best_i = pi.copy()
    delta = max(0.1 * abs(f), 1e-3)
    gr = np.zeros_like(pr)
    gi = np.zeros_like(pi)
    tr = np.empty_like(pr)
    ti = np.empty_like(pi)
    stall = 0
    stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = _supergradient(slot, user, zr, zi, offset, s, k_min, nq,
                                lin, gr, gi)
        if gnorm2 == 0.0:
            break
        step = (best + delta - f) / gnorm2
        if not (step > 0.0 and np.isfinite(step)):
            step = 0.2 / (math.sqrt(it) * math.sqrt(gnorm2))

        ok = False
        moved = 0.0
        f_new = f
        k_new = k_min
        for _ in range(backtrack_max + 1):
            moved = _step(pr, pi, gr, gi, step, tr, ti)
            f_new, k_new, min_arg = _surrogate(tr, ti, slot, user, z0, zr, zi,
                                               offset, s, K, nq, rates, lin_trial)
            if min_arg >= DOMAIN_FLOOR:
                ok = True
                break
            step *= 0.5
        if not ok:
            stalled = True
            break

        pr[:, :] = tr
        pi[:, :] = ti
        lin[:] = lin_trial
        f = f_new
        k_min = k_new
        if f > best:
            best = f
            best_r[:, :] = pr
            best_i[:, :] = pi
            stall = 0
        else:
            stall += 1
            if stall >= 20:
                delta *= 0.5
                stall = 0
        if math.sqrt(moved) < tol:
            break
    return best_r, best_i, best, it, stalled


@dataclass(frozen=True)
class P13Result:
    schedule: np.ndarray
    surrogate_rate: float
    iterations: int
    stalled: bool


def _collapse(schedule, tied: bool) -> np.ndarray:
    schedule = np.asarray(schedule, dtype=complex)
    if tied:
        if not np.allclose(schedule, schedule[:1], atol=1e-12, rtol=0):
            raise ValueError("tied mode requires identical reflection vectors")
        return np.ascontiguousarray(schedule[:1])
    return np.ascontiguousarray(schedule.copy())


def solve_p13(state: SubproblemState, expansion_schedule, tied: bool = False,
              settings: ScaSettings | None = None) -> P13Result:
    """Maximize the surrogate common rate around ``expansion_schedule``.

    The returned schedule is feasible and its surrogate common rate is never
    below that of the expansion point.
    """
    settings = settings or ScaSettings()
    Q = state.Q
    phi0 = _collapse(expansion_schedule, tied)
    if state.size == 0:
        return P13Result(np.repeat(phi0, Q // phi0.shape[0], axis=0),
                         0.0, 0, False)
    z = np.conj(state.expansion)[:, None] * state.c_row
    z0 = (np.conj(state.expansion) * state.c0).real
    offset = np.abs(state.expansion) ** 2
    slot = np.zeros_like(state.slot) if tied else state.slot
    best_r, best_i, value, iters, stalled = _maximize_surrogate(
        np.ascontiguousarray(phi0.real), np.ascontiguousarray(phi0.imag),
        slot, state.user, z0, np.ascontiguousarray(z.real),
        np.ascontiguousarray(z.imag), offset, state.snr_scale, state.K,
        float(state.N * Q), settings.inner_max_iter, settings.inner_tol,
        settings.backtrack_max)
    phi = best_r + 1j * best_i
    if tied:
        phi = np.repeat(phi, Q, axis=0)
    return P13Result(phi, float(value), int(iters), bool(stalled))


# ---------------------------------------------------------------------------
# SCA loop


@dataclass(frozen=True)
class ScaResult:
    schedule: np.ndarray
    rate: float
    history: list = field(default_factory=list)


def true_common_rate(alloc: Allocation, h_d, V, schedule,
                     gamma_sigma2: float) -> float:
    g = channel_model.cnr_grid(h_d, V, schedule, 1.0, gamma_sigma2)
    return compute_rates(alloc, g)[1]


def sca_solve_p12(alloc: Allocation, h_d, V, init, gamma_sigma2: float,
                  tied: bool = False,
                  settings: ScaSettings | None = None) -> ScaResult:
    """Successive convex approximation of the reflection design.

    Each surrogate maximizer is accepted only if the true common rate under
    ``alloc`` does not drop, so ``history`` is nondecreasing.

    Parameters
    ----------
    alloc : Allocation
    h_d : ndarray, shape (K, N)
    V : ndarray, shape (K, N, M)
    init : ndarray, shape (Q, M)
        Starting schedule; rows must be identical when ``tied``.
    gamma_sigma2 : float
        SNR gap times noise power (Watt).
    tied : bool
        Use one reflection vector for all slots.
    """
    settings = settings or ScaSettings()
    schedule = np.array(init, dtype=complex)
    channel_model.check_reflection(schedule)
    _collapse(schedule, tied)
    rate = true_common_rate(alloc, h_d, V, schedule, gamma_sigma2)
    history = [rate]
    if not np.any(alloc.alpha.any(axis=0) & (alloc.p > 0)):
        return ScaResult(schedule, rate, history)
    for _ in range(settings.max_iter):
        state = build_subproblem(alloc, h_d, V, schedule, gamma_sigma2)
        sub = solve_p13(state, schedule, tied, settings)
        new_rate = true_common_rate(alloc, h_d, V, sub.schedule, gamma_sigma2)
        if not new_rate >= rate:
            break
        gain = new_rate - rate
        schedule, rate = sub.schedule, new_rate
        history.append(rate)
        if gain < settings.tol:
            break
    return ScaResult(schedule, rate, history)
