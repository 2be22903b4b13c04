import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l0rls import (FilterParams, FilterState, NumericalBreakdownError, g_scalar,
                   g_vector, init_state, l0_norm_approx, l0_rls_cost, l0_rls_step,
                   rls_step)


def make_params(n, lam=0.95, gamma=0.0, alpha=50.0, init_scale=100.0):
    return FilterParams(num_taps=n, forgetting=lam, gamma=gamma, alpha=alpha,
                        init_scale=init_scale)


# ---------------------------------------------------------------- g kernel

@pytest.mark.parametrize("t,alpha,expected", [
    (0.0, 50.0, 0.0),        # sgn(0) = 0 convention
    (0.02, 50.0, 0.0),       # boundary |t| = 1/alpha
    (0.01, 50.0, -25.0),     # 2500*0.01 - 50
    (-0.5, 50.0, 0.0),       # outside the attraction range
])
def test_g_scalar_values(t, alpha, expected):
    assert g_scalar(t, alpha) == expected


def test_g_scalar_rejects_bad_arguments():
    for t, alpha in [(np.nan, 50.0), (np.inf, 50.0), (0.1, np.nan),
                     (0.1, 0.0), (0.1, -1.0)]:
        with pytest.raises(ValueError):
            g_scalar(t, alpha)


@given(st.floats(-1e6, 1e6), st.floats(0.1, 1e3))
@settings(max_examples=300, deadline=None)
def test_g_scalar_odd_and_bounded(t, alpha):
    assert g_scalar(-t, alpha) == -g_scalar(t, alpha)
    assert abs(g_scalar(t, alpha)) <= alpha


def test_g_vector_matches_scalar():
    w = np.array([0.0, 0.02, -0.5])
    assert np.array_equal(g_vector(w, 50.0), np.zeros(3))
    assert np.array_equal(g_vector([0.01], 50.0), [-25.0])
    assert g_vector(np.empty(0), 50.0).shape == (0,)
    rng = np.random.default_rng(3)
    w = rng.uniform(-0.1, 0.1, 64)
    assert np.array_equal(g_vector(w, 50.0), [g_scalar(t, 50.0) for t in w])


def test_g_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        g_vector([0.1, np.nan], 50.0)


# --------------------------------------------------------- l0 approximation

def test_l0_norm_approx_values():
    assert l0_norm_approx(np.zeros(8), 50.0) == 0.0
    assert l0_norm_approx([1e6, -1e6], 50.0) == pytest.approx(2.0, abs=1e-12)
    assert l0_norm_approx([np.log(2) / 50.0], 50.0) == pytest.approx(0.5, rel=1e-12)


def test_l0_norm_approx_monotone_and_bounded():
    rng = np.random.default_rng(11)
    for _ in range(50):
        w = rng.standard_normal(12) * rng.choice([0.0, 0.01, 1.0], 12)
        val = l0_norm_approx(w, 50.0)
        assert 0.0 <= val <= np.count_nonzero(w)
        bumped = w.copy()
        i = rng.integers(0, 12)
        bumped[i] += np.sign(bumped[i]) * 0.01 if bumped[i] != 0 else 0.01
        assert l0_norm_approx(bumped, 50.0) >= val


# ------------------------------------------------------------------- cost

def test_l0_rls_cost_values():
    p = make_params(1, lam=0.9, gamma=1e-4)
    assert l0_rls_cost([0.0, 0.0], np.zeros(1), p, 1) == 0.0
    assert l0_rls_cost([1.0], np.zeros(1), p, 0) == 1.0
    p0 = make_params(1, lam=0.9, gamma=0.0)
    assert l0_rls_cost([1.0, 1.0], np.zeros(1), p0, 1) == pytest.approx(1.9, rel=1e-15)


def test_l0_rls_cost_length_mismatch():
    p = make_params(1)
    with pytest.raises(ValueError):
        l0_rls_cost([1.0, 1.0], np.zeros(1), p, 0)


# ------------------------------------------------------------------- state

def test_init_state():
    s = init_state(make_params(4, init_scale=100.0))
    assert np.array_equal(s.w, np.zeros(4))
    assert np.array_equal(s.P, 100.0 * np.eye(4))
    assert s.n == 0
    s1 = init_state(make_params(1, init_scale=1.0))
    assert np.array_equal(s1.P, [[1.0]])


def test_params_validation():
    with pytest.raises(ValueError):
        FilterParams(num_taps=0)
    with pytest.raises(ValueError):
        FilterParams(num_taps=4, forgetting=1.0)
    with pytest.raises(ValueError):
        FilterParams(num_taps=4, forgetting=0.0)
    with pytest.raises(ValueError):
        FilterParams(num_taps=4, gamma=-1e-3)
    with pytest.raises(ValueError):
        FilterParams(num_taps=4, alpha=0.0)
    with pytest.raises(ValueError):
        FilterParams(num_taps=4, init_scale=0.0)


def test_beta_is_derived():
    p = FilterParams(num_taps=2, forgetting=0.995, gamma=1e-4)
    assert p.beta == 1e-4 * (1.0 - 0.995)
    assert FilterParams(num_taps=2, gamma=0.0).beta == 0.0


# --------------------------------------------------------------- rls_step

def test_rls_step_zero_regressor():
    p = make_params(3, lam=0.8)
    s = init_state(p)
    s.w = np.array([0.5, -0.2, 0.0])
    s2, out = rls_step(s, np.zeros(3), 1.5, p)
    assert np.array_equal(out.gain, np.zeros(3))
    assert np.array_equal(s2.P, s.P / 0.8)
    assert np.array_equal(s2.w, s.w)
    assert out.error == 1.5


def test_rls_step_scalar_case():
    # N=1, P=[[1]], w=[0], lam=0.5, x=[1], d=1:
    # k = 1/1.5, P(n) = (1 - k)/0.5 = 2/3, w = k
    p = make_params(1, lam=0.5, init_scale=1.0)
    s = init_state(p)
    s2, out = rls_step(s, [1.0], 1.0, p)
    assert out.error == 1.0
    assert out.output == 0.0
    assert out.gain[0] == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert s2.w[0] == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert s2.P[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert s2.n == 1


def test_rls_step_matches_normal_equation_oracle():
    # straight-from-definition oracle: solve the exponentially weighted
    # least squares normal equations by direct matrix solve each step
    rng = np.random.default_rng(42)
    n, t, lam, scale = 4, 300, 0.95, 100.0
    p = make_params(n, lam=lam, init_scale=scale)
    state = init_state(p)
    a = np.eye(n) / scale
    b = np.zeros(n)
    w_true = rng.standard_normal(n)
    for _ in range(t):
        x = rng.standard_normal(n)
        d = x @ w_true + 0.1 * rng.standard_normal()
        state, _ = rls_step(state, x, d, p)
        a = lam * a + np.outer(x, x)
        b = lam * b + d * x
        w_oracle = np.linalg.solve(a, b)
        np.testing.assert_allclose(state.w, w_oracle, rtol=1e-8, atol=1e-12)


def test_rls_step_shape_mismatch():
    p = make_params(3)
    with pytest.raises(ValueError):
        rls_step(init_state(p), np.zeros(2), 0.0, p)


def test_rls_step_breakdown_is_reported():
    p = make_params(1, lam=0.5)
    bad = FilterState(w=np.zeros(1), P=np.array([[-1.0]]))
    with pytest.raises(NumericalBreakdownError) as exc:
        rls_step(bad, [2.0], 0.0, p)
    assert exc.value.denominator == pytest.approx(0.5 - 4.0)
    assert exc.value.iteration == 0


def test_p_stays_exactly_symmetric_over_long_run():
    rng = np.random.default_rng(5)
    p = make_params(8, lam=0.99)
    state = init_state(p)
    worst = 0.0
    for _ in range(100_000):
        x = rng.standard_normal(8)
        state, _ = rls_step(state, x, x @ np.ones(8), p)
        worst = max(worst, np.abs(state.P - state.P.T).max())
    scale = np.abs(state.P).max()
    assert worst <= 1e-9 * scale
    state.validate()


def test_inversion_lemma_consistency():
    # P(n) must invert the weighted autocorrelation
    # sum_m lam^(n-m) x x' + lam^(n+1) / init_scale * I
    rng = np.random.default_rng(9)
    n, lam, scale = 8, 0.98, 100.0
    p = make_params(n, lam=lam, init_scale=scale)
    state = init_state(p)
    a = np.eye(n) / scale
    for step_idx in range(500):
        x = rng.standard_normal(n)
        state, _ = rls_step(state, x, float(x.sum()), p)
        a = lam * a + np.outer(x, x)
        if step_idx >= 10 * n:
            direct = np.linalg.inv(a)
            rel = np.abs(state.P - direct).max() / np.abs(direct).max()
            assert rel <= 1e-6


def test_gain_identity():
    # I - k x' = lam P(n) P(n-1)^{-1}, the identity behind the recursion
    rng = np.random.default_rng(17)
    n, lam = 5, 0.9
    p = make_params(n, lam=lam)
    state = init_state(p)
    for _ in range(50):
        x = rng.standard_normal(n)
        prev = state.P.copy()
        state, out = rls_step(state, x, rng.standard_normal(), p)
        lhs = np.eye(n) - np.outer(out.gain, x)
        rhs = lam * state.P @ np.linalg.inv(prev)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10)


# ------------------------------------------------------------ l0_rls_step

def test_l0_step_gamma_zero_reduces_to_rls_exactly():
    rng = np.random.default_rng(21)
    p = make_params(6, lam=0.97, gamma=0.0, alpha=50.0)
    s_rls = init_state(p)
    s_l0 = init_state(p)
    for _ in range(200):
        x = rng.standard_normal(6)
        d = rng.standard_normal()
        s_rls, o1 = rls_step(s_rls, x, d, p)
        s_l0, o2 = l0_rls_step(s_l0, x, d, p)
        assert np.array_equal(s_rls.w, s_l0.w)
        assert np.array_equal(s_rls.P, s_l0.P)
        assert o1.error == o2.error


def test_l0_step_attraction_only():
    # x = 0 so the gain vanishes; with P(n-1)=[[1]], lam=0.5 the updated
    # P(n) is [[2]], and with beta = gamma(1-lam) = 5e-7:
    # w(n) = 0.01 + 5e-7 * 2 * g(0.01) = 0.01 - 2.5e-5
    p = make_params(1, lam=0.5, gamma=1e-6, alpha=50.0, init_scale=1.0)
    assert p.beta == pytest.approx(5e-7, rel=1e-15)
    state = FilterState(w=np.array([0.01]), P=np.array([[1.0]]))
    new, _ = l0_rls_step(state, [0.0], 0.0, p)
    assert new.P[0, 0] == 2.0
    assert new.w[0] == pytest.approx(0.009975, rel=1e-12)


def test_l0_step_dead_zone():
    # every weight outside the attraction range: identical to plain RLS
    rng = np.random.default_rng(33)
    p = make_params(5, lam=0.9, gamma=1e-3, alpha=50.0)
    w = rng.uniform(0.1, 1.0, 5) * rng.choice([-1.0, 1.0], 5)
    for _ in range(20):
        base = FilterState(w=w.copy(), P=np.eye(5))
        x = rng.standard_normal(5)
        d = rng.standard_normal()
        s_rls, _ = rls_step(base, x, d, p)
        s_l0, _ = l0_rls_step(FilterState(w=w.copy(), P=np.eye(5)), x, d, p)
        assert np.array_equal(s_rls.w, s_l0.w)
        w = s_l0.w + np.sign(w) * 0.2  # keep far outside the range


def _reference_l0_rls(xs, ds, n, lam, gamma, alpha, init_scale):
    """Plain-Python re-implementation of the recursion, no shared helpers."""
    beta = gamma * (1.0 - lam)
    w = [0.0] * n
    big_p = [[init_scale if i == j else 0.0 for j in range(n)] for i in range(n)]
    trajectory = []
    for x, d in zip(xs, ds):
        px = [sum(big_p[i][j] * x[j] for j in range(n)) for i in range(n)]
        den = lam + sum(x[i] * px[i] for i in range(n))
        k = [px[i] / den for i in range(n)]
        err = d - sum(w[i] * x[i] for i in range(n))
        xp = [sum(x[i] * big_p[i][j] for i in range(n)) for j in range(n)]
        p_next = [[(big_p[i][j] - k[i] * xp[j]) / lam for j in range(n)]
                  for i in range(n)]
        p_next = [[(p_next[i][j] + p_next[j][i]) / 2.0 for j in range(n)]
                  for i in range(n)]
        g = []
        for wi in w:
            if abs(wi) <= 1.0 / alpha:
                sgn = 1.0 if wi > 0 else (-1.0 if wi < 0 else 0.0)
                g.append(alpha * alpha * wi - alpha * sgn)
            else:
                g.append(0.0)
        w = [w[i] + k[i] * err
             + beta * sum(p_next[i][j] * g[j] for j in range(n))
             for i in range(n)]
        big_p = p_next
        trajectory.append(list(w))
    return np.asarray(trajectory)


def test_l0_step_matches_independent_reference():
    rng = np.random.default_rng(8)
    n, t = 8, 1000
    lam, gamma, alpha, scale = 0.98, 5e-3, 50.0, 100.0
    p = make_params(n, lam=lam, gamma=gamma, alpha=alpha, init_scale=scale)
    w_true = np.zeros(n)
    w_true[:2] = [0.5, -0.3]
    w_true[2] = 0.01
    xs = rng.standard_normal((t, n))
    ds = xs @ w_true + 0.03 * rng.standard_normal(t)
    reference = _reference_l0_rls(xs.tolist(), ds.tolist(), n, lam, gamma, alpha, scale)
    state = init_state(p)
    for i in range(t):
        state, _ = l0_rls_step(state, xs[i], ds[i], p)
        np.testing.assert_allclose(state.w, reference[i], rtol=1e-10, atol=1e-14)
