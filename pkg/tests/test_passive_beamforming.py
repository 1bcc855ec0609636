import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs_ofdma import channel_model as cm
from irs_ofdma import passive_beamforming as pb
from irs_ofdma.resource_allocation import Allocation

coord = st.floats(-1e3, 1e3, allow_nan=False)


def test_project_unit_disk():
    np.testing.assert_allclose(pb.project_unit_disk([2.0, 0.5, 1 + 1j]),
                               [1.0, 0.5, (1 + 1j) / math.sqrt(2)])


def test_affine_cfr_coeffs():
    rng = np.random.default_rng(0)
    N, M = 8, 3
    h_d = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    V = rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))
    c0, c_row = pb.affine_cfr_coeffs(h_d, np.zeros((N, M)), 2)
    assert c0 == pytest.approx(cm.cfr(h_d)[2])
    assert np.all(c_row == 0)
    c0, c_row = pb.affine_cfr_coeffs(np.zeros(N), V[:, :1], 5)
    assert c0 == 0
    assert c_row[0] == pytest.approx(cm.cfr(V[:, 0])[5])
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, M)) * rng.uniform(0, 1, M)
    H = cm.cfr(cm.effective_cir(h_d, V, phi))
    for n in range(N):
        c0, c_row = pb.affine_cfr_coeffs(h_d, V, n)
        assert c0 + c_row @ phi == pytest.approx(H[n])
    with pytest.raises(ValueError):
        pb.affine_cfr_coeffs(h_d, V, N)


def test_linearized_gain_examples():
    assert pb.linearized_gain(0.3, -2.0, 0.3, -2.0) == pytest.approx(0.09 + 4.0)
    assert pb.linearized_gain(5.0, 7.0, 0.0, 0.0) == 0.0
    assert pb.linearized_gain(2.0, 0.0, 1.0, 0.0) == 3.0


@given(coord, coord, coord, coord)
def test_linearized_gain_minorizes(a, b, at, bt):
    lin = pb.linearized_gain(a, b, at, bt)
    assert lin <= a * a + b * b + 1e-9 * (1 + a * a + b * b + at * at + bt * bt)
    assert pb.linearized_gain(at, bt, at, bt) == pytest.approx(at * at + bt * bt,
                                                                rel=1e-12, abs=1e-12)


def single_rb(h0, v0, s=1.0):
    """K=Q=N=M=1 instance with ``p / (gamma sigma^2) = s``."""
    alloc = Allocation.from_assignment([[0]], [[s]], 1)
    return alloc, np.array([[h0]], dtype=complex), np.array([[[v0]]], dtype=complex)


def test_p13_no_direct_link():
    alloc, h_d, V = single_rb(0.0, 1.0)
    start = np.ones((1, 1), dtype=complex)
    state = pb.build_subproblem(alloc, h_d, V, start, 1.0)
    res = pb.solve_p13(state, start)
    assert abs(res.schedule[0, 0]) == pytest.approx(1.0, abs=1e-6)
    assert res.surrogate_rate == pytest.approx(1.0, abs=1e-6)


def test_p13_aligned_direct_link():
    s = 0.7
    alloc, h_d, V = single_rb(1.0, 1.0, s)
    start = np.ones((1, 1), dtype=complex)
    state = pb.build_subproblem(alloc, h_d, V, start, 1.0)
    res = pb.solve_p13(state, start)
    assert res.schedule[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert res.surrogate_rate == pytest.approx(math.log2(1 + 4 * s), abs=1e-9)


def test_p13_fixed_point():
    alloc, h_d, V = single_rb(1.0, 1.0)
    start = np.ones((1, 1), dtype=complex)
    state = pb.build_subproblem(alloc, h_d, V, start, 1.0)
    settings = pb.ScaSettings()
    res = pb.solve_p13(state, start, settings=settings)
    assert abs(res.schedule[0, 0] - 1.0) <= settings.tol


def test_p13_surrogate_not_below_start():
    rng = np.random.default_rng(3)
    K, Q, N, M = 2, 3, 4, 5
    h_d = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
    V = rng.standard_normal((K, N, M)) + 1j * rng.standard_normal((K, N, M))
    assign = rng.integers(0, K, (Q, N))
    alloc = Allocation.from_assignment(assign, np.full((Q, N), 1.0 / N), K)
    start = np.exp(1j * rng.uniform(0, 2 * np.pi, (Q, M)))
    state = pb.build_subproblem(alloc, h_d, V, start, 1.0)
    base = state.surrogate_rates(start).min()
    res = pb.solve_p13(state, start)
    assert res.surrogate_rate >= base - 1e-12
    assert res.surrogate_rate == pytest.approx(
        state.surrogate_rates(res.schedule).min(), rel=1e-9)
    assert np.all(np.abs(res.schedule) <= 1 + 1e-12)
    # the surrogate minorizes the true rates everywhere
    true = pb.true_common_rate(alloc, h_d, V, res.schedule, 1.0)
    assert true >= res.surrogate_rate - 1e-12


def test_sca_empty_allocation_keeps_init():
    init = np.exp(1j * np.arange(6.0)).reshape(2, 3)
    alloc = Allocation.empty(1, 2, 4)
    out = pb.sca_solve_p12(alloc, np.ones((1, 4)), np.ones((1, 4, 3)), init, 1.0)
    np.testing.assert_array_equal(out.schedule, init)


def test_sca_single_element_matches_grid_search():
    rng = np.random.default_rng(8)
    N = 4
    h_d = (rng.standard_normal((1, N)) + 1j * rng.standard_normal((1, N))) * 0.3
    V = rng.standard_normal((1, N, 1)) + 1j * rng.standard_normal((1, N, 1))
    alloc = Allocation.from_assignment(np.zeros((1, N), int), np.full((1, N), 2.0), 1)
    out = pb.sca_solve_p12(alloc, h_d, V, np.ones((1, 1)), 1.0)
    amp = np.linspace(0, 1, 100)
    phase = np.linspace(-np.pi, np.pi, 100, endpoint=False)
    grid = (amp[:, None] * np.exp(1j * phase[None, :])).ravel()
    best = max(pb.true_common_rate(alloc, h_d, V, np.array([[z]]), 1.0) for z in grid)
    assert out.rate >= 0.99 * best


def test_sca_tied_and_monotone():
    rng = np.random.default_rng(9)
    K, Q, N, M = 2, 3, 4, 6
    h_d = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
    V = rng.standard_normal((K, N, M)) + 1j * rng.standard_normal((K, N, M))
    alloc = Allocation.from_assignment(rng.integers(0, K, (Q, N)),
                                       np.full((Q, N), 0.25), K)
    init = np.repeat(np.exp(1j * rng.uniform(0, 6, (1, M))), Q, axis=0)
    out = pb.sca_solve_p12(alloc, h_d, V, init, 1.0, tied=True)
    assert np.all(out.schedule == out.schedule[:1])
    assert all(b >= a for a, b in zip(out.history, out.history[1:]))
    with pytest.raises(ValueError):
        pb.sca_solve_p12(alloc, h_d, V, np.exp(1j * rng.uniform(0, 6, (Q, M))),
                         1.0, tied=True)
    free = pb.sca_solve_p12(alloc, h_d, V, init, 1.0)
    assert free.rate >= free.history[0]
    assert all(b >= a for a, b in zip(free.history, free.history[1:]))
