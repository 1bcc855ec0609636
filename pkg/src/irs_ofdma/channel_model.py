"""Multipath channel algebra for an IRS-aided OFDMA downlink.

Time-domain channels are plain complex numpy arrays:

* a tap vector is 1-D with at least one entry,
* the direct channel ``h_d`` of a user is zero-padded to length ``N``,
* the cascaded matrix ``V`` of a user is ``N x M``; column ``m`` holds the
  BS-IRS taps of element ``m`` convolved with its IRS-user taps,
* a reflection schedule is ``Q x M``, one reflection vector per time slot.

The CFR uses the unnormalized DFT ``sum_l h[l] exp(-j 2 pi n l / N)`` so that
``|CFR|**2`` is the sampled channel power transfer function.
"""

from __future__ import annotations

import numpy as np

UNIT_DISK_TOL = 1e-12


def _as_taps(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=complex).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must contain at least one tap")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def convolve(x, y) -> np.ndarray:
    """Linear convolution of two tap vectors (length ``len(x) + len(y) - 1``)."""
    return np.convolve(_as_taps(x, "x"), _as_taps(y, "y"))


def cascade_column(r, t, n: int) -> np.ndarray:
    """Zero-padded cascade ``r * t`` of one reflecting element, length ``n``.

    Raises ``ValueError`` when the cascade is longer than ``n``: the cyclic
    prefix would not cover the delay spread.
    """
    taps = convolve(r, t)
    if taps.size > n:
        raise ValueError(
            f"cascaded channel has {taps.size} taps, more than N={n}"
        )
    col = np.zeros(n, dtype=complex)
    col[: taps.size] = taps
    return col


def build_cascaded_matrix(r_set, t_set, n: int) -> np.ndarray:
    """Stack ``cascade_column(r_set[m], t_set[m], n)`` into an ``n x M`` matrix."""
    if len(r_set) != len(t_set):
        raise ValueError(
            f"got {len(r_set)} IRS-user links but {len(t_set)} BS-IRS links"
        )
    if len(r_set) == 0:
        return np.zeros((n, 0), dtype=complex)
    return np.stack(
        [cascade_column(r, t, n) for r, t in zip(r_set, t_set)], axis=1
    )


def zero_pad(taps, n: int) -> np.ndarray:
    """Direct-link taps zero-padded to length ``n``."""
    taps = _as_taps(taps, "taps")
    if taps.size > n:
        raise ValueError(f"direct channel has {taps.size} taps, more than N={n}")
    out = np.zeros(n, dtype=complex)
    out[: taps.size] = taps
    return out


def effective_cir(h_d, V, phi) -> np.ndarray:
    """Superposed impulse response ``h_d + V @ phi``."""
    h_d = np.asarray(h_d, dtype=complex)
    V = np.asarray(V, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if V.ndim != 2 or h_d.ndim != 1 or phi.ndim != 1:
        raise ValueError("expected h_d (N,), V (N, M) and phi (M,)")
    if V.shape != (h_d.size, phi.size):
        raise ValueError(
            f"V has shape {V.shape}, expected ({h_d.size}, {phi.size})"
        )
    return h_d + V @ phi


def cfr(h) -> np.ndarray:
    """Channel frequency response on the ``N`` sub-bands (unnormalized DFT)."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("h must be a non-empty 1-D vector")
    return np.fft.fft(h)


def cnr_grid(h_d, V, schedule, gamma: float, sigma2: float) -> np.ndarray:
    """Effective channel-to-noise ratios ``g[k, q, n]``.

    Parameters
    ----------
    h_d : array_like, shape (K, N)
        Zero-padded direct channels.
    V : array_like, shape (K, N, M)
        Cascaded channel matrices.
    schedule : array_like, shape (Q, M)
        Reflection vector of each time slot.
    gamma : float
        Linear SNR gap, at least 1.
    sigma2 : float
        Noise power per sub-band in Watt.

    Returns
    -------
    ndarray, shape (K, Q, N)
        ``|CFR|**2 / (gamma * sigma2)`` in 1/Watt.
    """
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if gamma < 1:
        raise ValueError(f"SNR gap must be >= 1 (linear), got {gamma}")
    h_d = np.asarray(h_d, dtype=complex)
    V = np.asarray(V, dtype=complex)
    schedule = np.asarray(schedule, dtype=complex)
    if schedule.ndim != 2 or V.ndim != 3 or h_d.ndim != 2:
        raise ValueError("expected h_d (K, N), V (K, N, M), schedule (Q, M)")
    if V.shape[:2] != h_d.shape or V.shape[2] != schedule.shape[1]:
        raise ValueError(
            f"inconsistent shapes h_d={h_d.shape}, V={V.shape}, "
            f"schedule={schedule.shape}"
        )
    cir = h_d[:, None, :] + np.einsum("knm,qm->kqn", V, schedule)
    return np.abs(np.fft.fft(cir, axis=-1)) ** 2 / (gamma * sigma2)


def user_rate(alpha_k, p, g_k, n: int, q: int) -> float:
    """Achievable rate of one user in bps/Hz.

    ``(1 / (n * q)) * sum alpha * log2(1 + g * p)`` over the ``q x n`` grid.
    """
    alpha_k = np.asarray(alpha_k, dtype=float)
    snr = np.asarray(g_k, dtype=float) * np.asarray(p, dtype=float)
    return float(np.sum(alpha_k * np.log2(1.0 + snr)) / (n * q))


def check_reflection(phi) -> None:
    """Raise if any reflection coefficient lies outside the unit disk."""
    mod = np.abs(np.asarray(phi))
    if np.any(mod > 1.0 + UNIT_DISK_TOL):
        raise ValueError(
            f"reflection coefficient modulus {mod.max():.6g} exceeds 1"
        )
