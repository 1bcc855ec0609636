"""Simulation scenario: configuration, geometry, path loss and channel draws.

Randomness is organised as a tree of ``numpy.random.SeedSequence`` spawn
keys under one master seed::

    (realization, 0, k)        direct BS-user link of user k
    (realization, 1, m)        BS-IRS link of element m
    (realization, 2, m)        IRS-user links of element m (all users)
    (realization, 3, ...)      optimizer initialisations (see alternating_optimizer)

Because each element has its own substream, the channels of a surface with
``M`` elements are a prefix of those generated for any larger ``M``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import channel_model

STREAM_DIRECT = 0
STREAM_BS_IRS = 1
STREAM_IRS_USER = 2
STREAM_SOLVER = 3


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """System, geometry and solver parameters of one experiment.

    Powers and gains are stored in the units used by config files (dBm, dB);
    the linear values are exposed as cached properties.
    """

    K: int = 3
    N: int = 16
    Q: int = 6
    M: int = 40
    P_dbm: float = 35.0
    sigma2_dbm: float = -110.0
    gamma_db: float = 8.8
    I: int = 5
    D_bs_irs: float = 100.0
    d_irs_user: float = 2.0
    beta_bu: float = 3.5
    beta_bi: float = 2.2
    beta_iu: float = 2.8
    zeta0_db: float = -30.0
    D0: float = 1.0
    L0: int = 4
    L1: int = 2
    L2: int = 3
    num_realizations: int = 100
    seed: int = 2020
    # dual solver for the resource allocation step
    dual_max_iter: int = 500
    dual_gap_tol: float = 1e-3
    dual_step: float = 0.5
    # SCA for the reflection update
    sca_tol: float = 1e-4
    sca_max_iter: int = 50
    inner_max_iter: int = 2000
    inner_tol: float = 1e-6
    backtrack_max: int = 40
    # alternating optimization
    outer_tol: float = 1e-3
    outer_max_iter: int = 30

    def __post_init__(self):
        counts = ("K", "N", "Q", "M", "I", "num_realizations", "L0", "L1", "L2",
                  "dual_max_iter", "sca_max_iter", "inner_max_iter",
                  "outer_max_iter")
        for name in counts:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        for name in ("D_bs_irs", "D0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.d_irs_user >= 0:
            raise ValueError("d_irs_user must be non-negative")
        if not self.gamma_db >= 0:
            raise ValueError("gamma_db must be >= 0 (SNR gap of at least 1)")
        if max(self.L0, self.L1 + self.L2 - 1) > self.N:
            raise ValueError(
                f"delay spread max(L0, L1+L2-1)={max(self.L0, self.L1 + self.L2 - 1)}"
                f" exceeds N={self.N}; cyclic prefix assumption violated"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name in ("P_dbm", "sigma2_dbm", "zeta0_db", "beta_bu", "beta_bi",
                     "beta_iu", "dual_gap_tol", "dual_step", "sca_tol",
                     "inner_tol", "outer_tol"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @cached_property
    def P(self) -> float:
        return dbm_to_watt(self.P_dbm)

    @cached_property
    def sigma2(self) -> float:
        return dbm_to_watt(self.sigma2_dbm)

    @cached_property
    def gamma(self) -> float:
        return db_to_linear(self.gamma_db)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(unknown)}")
        values = {}
        for name, raw in data.items():
            default = known[name].default
            if isinstance(default, int) and not isinstance(default, bool):
                if isinstance(raw, float) and raw.is_integer():
                    raw = int(raw)
            elif isinstance(default, float) and isinstance(raw, int):
                raw = float(raw)
            values[name] = raw
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top-level JSON value must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class ChannelRealization:
    """Channels of all users in one coherence block.

    ``h_d`` has shape (K, N) and ``V`` has shape (K, N, M).
    """

    h_d: np.ndarray
    V: np.ndarray
    index: int = 0

    def __post_init__(self):
        if self.h_d.ndim != 2 or self.V.ndim != 3 or self.V.shape[:2] != self.h_d.shape:
            raise ValueError(
                f"inconsistent channel shapes h_d={self.h_d.shape}, V={self.V.shape}"
            )

    @property
    def K(self) -> int:
        return self.h_d.shape[0]

    @property
    def N(self) -> int:
        return self.h_d.shape[1]

    @property
    def M(self) -> int:
        return self.V.shape[2]

    def without_irs(self) -> "ChannelRealization":
        return ChannelRealization(self.h_d, np.zeros_like(self.V), self.index)


def path_loss(D_prime: float, beta: float, zeta0_db: float = -30.0,
              D0: float = 1.0) -> float:
    """Distance path loss ``zeta0 * (D'/D0)**(-beta)`` as a linear power gain."""
    if not D_prime > 0 or not D0 > 0:
        raise ValueError("distances must be positive")
    return db_to_linear(zeta0_db) * (D_prime / D0) ** (-beta)


def pdp_weights(L: int) -> np.ndarray:
    """Normalized exponential power delay profile ``exp(-l/(L-1))``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if L == 1:
        return np.ones(1)
    t = np.exp(-np.arange(L) / (L - 1))
    return t / t.sum()


def sample_taps(zeta: float, L: int, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh taps with mean powers ``zeta * pdp_weights(L)``."""
    if zeta < 0:
        raise ValueError(f"path gain must be non-negative, got {zeta}")
    xi = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    return np.sqrt(zeta * pdp_weights(L)) * xi


def user_positions(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Return (BS-user, IRS-user) distances of the K users in meters.

    The IRS sits at the origin and the BS at ``(-D, 0)``. User ``k`` (1-based)
    is on the semicircle of radius ``d`` at angle ``k * pi / (K + 1)``.
    """
    D, d = cfg.D_bs_irs, cfg.d_irs_user
    theta = np.arange(1, cfg.K + 1) * np.pi / (cfg.K + 1)
    bs_user = np.hypot(D + d * np.cos(theta), d * np.sin(theta))
    return bs_user, np.full(cfg.K, float(d))


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def generate_realization(cfg: ScenarioConfig, realization_index: int) -> ChannelRealization:
    """Draw the direct and cascaded channels of every user.

    Deterministic in ``(cfg.seed, realization_index)``.
    """
    if realization_index < 0:
        raise ValueError("realization_index must be non-negative")
    bs_user, irs_user = user_positions(cfg)
    K, N, M = cfg.K, cfg.N, cfg.M
    zeta_bi = path_loss(cfg.D_bs_irs, cfg.beta_bi, cfg.zeta0_db, cfg.D0)

    h_d = np.zeros((K, N), dtype=complex)
    for k in range(K):
        rng = substream(cfg.seed, realization_index, STREAM_DIRECT, k)
        zeta = path_loss(bs_user[k], cfg.beta_bu, cfg.zeta0_db, cfg.D0)
        h_d[k] = channel_model.zero_pad(sample_taps(zeta, cfg.L0, rng), N)

    zeta_iu = [path_loss(irs_user[k], cfg.beta_iu, cfg.zeta0_db, cfg.D0)
               for k in range(K)]
    t_set = []
    r_sets = [[] for _ in range(K)]
    for m in range(M):
        rng = substream(cfg.seed, realization_index, STREAM_BS_IRS, m)
        t_set.append(sample_taps(zeta_bi, cfg.L1, rng))
        rng = substream(cfg.seed, realization_index, STREAM_IRS_USER, m)
        for k in range(K):
            r_sets[k].append(sample_taps(zeta_iu[k], cfg.L2, rng))
    V = np.stack([channel_model.build_cascaded_matrix(r_sets[k], t_set, N)
                  for k in range(K)])
    return ChannelRealization(h_d, V, realization_index)
