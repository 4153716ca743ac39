"""Hypothesis-driven invariants that hold for arbitrary well-formed inputs."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tsgain.analysis import contraction_certificate, hilger_contains
from tsgain.controller import ControllerState, gain_update_scattered, mu_bar
from tsgain.matfun import expc, mat_exp
from tsgain.timescale import Gap, TimeScaleProgram, realize, ts_exponential

finite_floats = st.floats(allow_nan=False, allow_infinity=False)


@st.composite
def bounded_matrix(draw, n=3, bound=4.0):
    entries = draw(
        st.lists(
            st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
            min_size=n * n,
            max_size=n * n,
        )
    )
    x = np.array(entries).reshape(n, n)
    norm = np.linalg.norm(x, 2)
    if norm > 0:
        x *= draw(st.floats(min_value=0.01, max_value=bound)) / norm
    return x


@settings(max_examples=40, deadline=None)
@given(bounded_matrix())
def test_expc_commutes_and_is_bounded(x):
    e = expc(x)
    nx = np.linalg.norm(x, 2)
    assert np.linalg.norm(e @ x - x @ e, 2) <= 1e-11 * max(1.0, np.linalg.norm(e, 2))
    assert np.linalg.norm(e, 2) <= math.exp(nx) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(bounded_matrix(), bounded_matrix())
def test_mat_exp_block_triangular_structure(a, b):
    # exp of [[A, B], [0, 0]] keeps the identity in the lower-right block
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = a
    m[:n, n:] = b
    e = mat_exp(m)
    np.testing.assert_allclose(e[n:, n:], np.eye(n), atol=1e-12)
    np.testing.assert_allclose(e[n:, :n], 0.0, atol=1e-12)
    np.testing.assert_allclose(e[:n, :n], mat_exp(a), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=0.9),
    st.integers(min_value=2, max_value=10),
    st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
)
def test_ts_exponential_semigroup_on_uniform_grids(h, steps, lam):
    grid = realize(TimeScaleProgram.uniform(h), horizon=steps * h)
    mid = grid.times[steps // 2]
    end = grid.times[steps]
    whole = ts_exponential(lam, grid, 0.0, end)
    split = ts_exponential(lam, grid, 0.0, mid) * ts_exponential(lam, grid, mid, end)
    assert abs(whole - split) <= 1e-12 * max(1.0, abs(whole))


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=1e-3, max_value=100.0),
    st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=1, max_size=4),
    st.floats(min_value=1e-3, max_value=2.0),
)
def test_gain_update_never_decreases(k0, y, mu):
    state = ControllerState(k=k0)
    updated = gain_update_scattered(state, np.array(y), mu)
    assert updated.k >= state.k
    assert updated.t == state.t + mu


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=20.0),
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=0.01, max_value=0.5),
)
def test_mu_bar_product_depends_only_on_cb(k, cb, frac):
    eps1 = frac * (2.0 / cb)
    product = k * mu_bar(k, cb, eps1)
    reference = 1.0 * mu_bar(1.0, cb, eps1)
    assert math.isclose(product, reference, rel_tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=-6.0, max_value=3.0),
    st.floats(min_value=1e-4, max_value=3.0),
)
def test_hilger_membership_equals_scalar_certificate(lam, mu):
    # the two routes agree wherever one float ulp cannot flip either strict
    # inequality; right at |1 + mu lam| = 1 rounding may differ
    assume(abs(lam) > 1e-6)
    assume(abs(abs(1.0 + mu * lam) - 1.0) > 1e-12)
    cert = contraction_certificate(cb_hat=-lam, k=1.0, mu=mu)
    assert hilger_contains(lam, mu) == (cert.eps2 > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=1.0), st.integers(min_value=1, max_value=8))
def test_constant_delta_integral_is_exact(h, steps):
    from tsgain.timescale import delta_integral

    grid = realize(TimeScaleProgram([Gap(h)]), horizon=steps * h)
    span = grid.t_end - grid.t_start
    assert math.isclose(delta_integral(lambda t: 2.5, grid), 2.5 * span, rel_tol=1e-12)
