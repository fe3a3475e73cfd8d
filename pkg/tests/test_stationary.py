import numpy as np
import pytest

from erw import (
    CookieEnvironment,
    DomainError,
    TransitionKernel,
    check_abc,
    check_genabc,
    f_coefficients,
    pi0_bracket,
    solve_stationary,
    speed_interval,
)
from erw.stationary import gth_stationary, moment_balance_mean

from conftest import ballistic_grid


def solve(p, N=200, **kw):
    env = CookieEnvironment(p)
    return env, solve_stationary(TransitionKernel(env), N=N, **kw)


def test_deterministic_point():
    env, sol = solve((1.0, 1.0, 1.0), N=20)
    assert sol.pi_hat[0] == 1.0 and not sol.pi_hat[1:].any()
    assert sol.mean_estimate == 0.0 and sol.speed_estimate == 1.0
    assert check_genabc(env, sol) == 0.0
    assert check_abc(env, sol) == 0.0


def test_solution_invariants():
    env, sol = solve((0.9, 0.9, 0.9))
    assert len(sol.pi_hat) == 200
    assert abs(sol.pi_hat.sum() - 1.0) < 1e-12
    assert (sol.pi_hat > 0).all()
    assert sol.speed_estimate == 1.0 / (1.0 + 2.0 * sol.mean_estimate)
    assert sol.fixed_point_error < 1e-12
    assert 0 < sol.tail_mass_bound < 1e-5


def test_speed_inside_bracket_at_09():
    env, sol = solve((0.9, 0.9, 0.9))
    assert 0.72258 <= sol.speed_estimate <= 0.73028


def test_moment_balance_agrees_with_pi0_representation():
    # two independent routes from pi_hat to the speed
    for p in [(0.9, 0.9, 0.9), (0.95, 0.7, 0.9), (1.0, 0.8, 0.85), (0.6, 0.99, 0.95)]:
        env, sol = solve(p)
        f1, f2, f3 = f_coefficients(env)
        v = f1 / (f2 + f3 * sol.pi_hat[0])
        assert sol.speed_estimate == pytest.approx(v, abs=1e-10)


def test_moment_balance_route_on_renormalized_scheme():
    # with plain renormalisation both routes inherit the pi_hat(0) error, so
    # their disagreement shrinks as N grows
    p = (0.95, 0.7, 0.9)
    f1, f2, f3 = f_coefficients(CookieEnvironment(p))
    gaps = []
    for N in (200, 800):
        env, sol = solve(p, N=N, scheme="renormalize")
        gaps.append(abs(sol.speed_estimate - f1 / (f2 + f3 * sol.pi_hat[0])))
    assert gaps[1] < gaps[0] < 1e-3


def test_moment_balance_needs_ballistic_regime():
    kernel = TransitionKernel(CookieEnvironment((0.9, 0.8, 0.7)))
    with pytest.raises(DomainError):
        moment_balance_mean(kernel, np.array([0.5, 0.5]))


def test_truncated_mean_is_biased_for_heavy_tails():
    env, sol = solve((0.9, 0.9, 0.9), mean_method="truncated", scheme="renormalize")
    lo, hi = speed_interval(env).v_lower, speed_interval(env).v_upper
    assert sol.mean_method == "truncated"
    assert not lo - 1e-4 <= sol.speed_estimate <= hi + 1e-4


def test_residual_decreases_with_truncation():
    # the default scheme holds the identity at every N, so the trend is
    # checked on plain renormalisation where it carries information
    env = CookieEnvironment((0.9, 0.9, 0.9))
    kernel = TransitionKernel(env)
    r10 = check_genabc(env, solve_stationary(kernel, N=10, scheme="renormalize"))
    r200 = check_genabc(env, solve_stationary(kernel, N=200, scheme="renormalize"))
    assert r200 < r10
    for N in (10, 200):
        assert check_genabc(env, solve_stationary(kernel, N=N)) < 1e-14


def test_renormalized_scheme_converges_to_mean_preserving():
    # Richardson extrapolation of the slowly converging scheme, using its
    # known N**(1 - delta) error law, lands on the default scheme's answer
    env = CookieEnvironment((0.9, 0.9, 0.9))
    kernel = TransitionKernel(env)
    a = solve_stationary(kernel, N=400, scheme="renormalize").pi_hat[0]
    b = solve_stationary(kernel, N=800, scheme="renormalize").pi_hat[0]
    r = 2.0 ** (1 - env.delta)
    extrapolated = b - (a - b) * r / (1 - r)
    assert abs(b - a) > 1e-6
    assert abs(extrapolated - solve_stationary(kernel, N=200).pi_hat[0]) < 2e-7


def test_mean_preserving_rows():
    from erw.branching import mean_next
    from erw.stationary import truncated_matrix

    env = CookieEnvironment((0.9, 0.8, 0.75))
    kernel = TransitionKernel(env)
    P, leak = truncated_matrix(kernel, 60)
    assert (P >= 0).all()
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(
        P @ np.arange(60), [mean_next(kernel, i) for i in range(60)], rtol=1e-12, atol=1e-12
    )
    assert (leak >= 0).all() and leak[-1] > 0.3
    with pytest.raises(ValueError):
        truncated_matrix(kernel, 60, scheme="absorb")


def test_pi_head_stable_in_truncation():
    env = CookieEnvironment((0.95, 0.7, 0.9))  # delta = 2.1, slowest tail
    kernel = TransitionKernel(env)
    a = solve_stationary(kernel, N=100).pi_hat[:2]
    b = solve_stationary(kernel, N=400).pi_hat[:2]
    assert np.abs(a - b).max() < 1e-9


def test_genabc_residual_at_09():
    env, sol = solve((0.9, 0.9, 0.9))
    assert check_genabc(env, sol) < 1e-8


def test_abc_residual_at_09():
    env, sol = solve((0.9, 0.9, 0.9))
    assert check_abc(env, sol) < 1e-8


@pytest.mark.parametrize("p", [(0.9, 0.9, 0.9), (0.8, 0.95, 0.75), (0.9, 0.8, 0.7)])
def test_abc_and_genabc_coincide_for_three_cookies(p):
    env, sol = solve(p, N=60)
    assert check_abc(env, sol) <= check_genabc(env, sol) + 1e-12


def test_genabc_for_more_cookies():
    env, sol = solve((0.9, 0.9, 0.9, 0.9), N=400)
    assert check_genabc(env, sol) < 1e-4


def test_no_stationary_law_without_right_transience():
    for p in [(0.5, 0.5, 0.5), (0.6, 0.6, 0.5), (0.1, 0.2, 0.3)]:
        with pytest.raises(DomainError):
            solve(p)


def test_truncation_too_small():
    with pytest.raises(DomainError):
        solve((0.9, 0.9, 0.9), N=4)


def test_zero_speed_regime_mean_grows():
    means = [solve((0.9, 0.8, 0.7), N=N)[1].mean_estimate for N in (50, 100, 200, 400)]
    assert all(b > a for a, b in zip(means, means[1:]))
    assert solve((0.9, 0.8, 0.7), N=50)[1].mean_method == "truncated"


def test_positive_for_interior_points():
    for p in [(0.9, 0.8, 0.7), (0.6, 0.99, 0.7), (0.99, 0.99, 0.99)]:
        assert (solve(p, N=100)[1].pi_hat > 0).all()


def test_gth_on_small_chain():
    P = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
    np.testing.assert_allclose(gth_stationary(P), [0.25, 0.5, 0.25], atol=1e-15)


def test_pi0_inside_bracket_at_general_argmax():
    env, sol = solve((0.913811, 0.666396, 1.0))
    lo, hi = pi0_bracket(env)
    assert lo - 1e-6 <= sol.pi_hat[0] <= hi + 1e-6


@pytest.mark.slow
def test_containment_on_grid():
    for p in ballistic_grid():
        env, sol = solve(p)
        b = speed_interval(env)
        assert b.pi0_lower - 1e-6 <= sol.pi_hat[0] <= b.pi0_upper + 1e-6
        assert b.v_lower - 1e-4 <= sol.speed_estimate <= b.v_upper + 1e-4


@pytest.mark.slow
def test_doubling_truncation_is_stable():
    worst = 0.0
    for p in ballistic_grid():
        if sum(2 * x - 1 for x in p) < 2.2:
            continue
        env = CookieEnvironment(p)
        kernel = TransitionKernel(env)
        a = solve_stationary(kernel, N=200).speed_estimate
        b = solve_stationary(kernel, N=400).speed_estimate
        worst = max(worst, abs(a - b))
    assert worst < 1e-6
