import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qswitch import cases
from qswitch.errors import AssumptionError, BlowUpError, InvalidInputError
from qswitch.linear_fa import random_partition_features, solve_theta_star
from qswitch.mdp import greedy_policy, policy_index, random_mdp, solve_q_star
from qswitch.switching import (
    FixedRule,
    GreedyRule,
    ScheduleRule,
    SwitchedAffineSystem,
    build_averaging_comparisons,
    build_averaging_ode,
    build_lfa_comparisons,
    build_lfa_ode,
    build_q_comparisons,
    build_q_ode,
    integrate,
    read_trajectory_csv,
)


def _single(A, b=None):
    A = np.atleast_2d(np.asarray(A, float))
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, float)
    return SwitchedAffineSystem(A[None], b[None], FixedRule(0))


@pytest.fixture
def fig_systems(fig_mdp):
    q_star = solve_q_star(fig_mdp)
    return q_star, build_q_ode(fig_mdp, q_star), *build_q_comparisons(fig_mdp, q_star)


def test_q_ode_shape(fig_systems):
    _, sys, upper, lower = fig_systems
    assert sys.num_modes == 4 and sys.dim == 4
    assert upper.num_modes == 4
    assert lower.num_modes == 1


def test_q_ode_offsets(fig_systems):
    q_star, sys, _, _ = fig_systems
    star = policy_index(greedy_policy(q_star, 2, 2), 2)
    np.testing.assert_array_equal(sys.b[star], 0.0)
    assert np.all(sys.b <= 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_q_ode_offsets_nonpositive_random(seed):
    mdp = random_mdp(np.random.default_rng(seed), 3, 2)
    sys = build_q_ode(mdp, solve_q_star(mdp))
    assert np.all(sys.b <= 1e-12)


def test_q_ode_equilibrium_at_origin(fig_systems):
    _, sys, upper, lower = fig_systems
    for s in (sys, upper, lower):
        np.testing.assert_allclose(s.field(np.zeros(4)), 0.0, atol=1e-12)


def test_q_ode_field_matches_bellman_form(fig_mdp, fig_systems, rng):
    # in the original coordinates the field is T(Q) - Q weighted by D
    from qswitch.mdp import bellman_operator, diag_distribution

    q_star, sys, _, _ = fig_systems
    D = diag_distribution(fig_mdp)
    for _ in range(50):
        q = rng.normal(size=4) * 3
        np.testing.assert_allclose(sys.field(q - q_star), D @ (bellman_operator(fig_mdp, q) - q), atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_field_dominance(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, int(rng.integers(2, 4)), int(rng.integers(2, 4)))
    q_star = solve_q_star(mdp)
    sys = build_q_ode(mdp, q_star)
    upper, lower = build_q_comparisons(mdp, q_star)
    for _ in range(20):
        x = rng.normal(size=mdp.num_pairs) * rng.choice([0.1, 1.0, 10.0])
        f = sys.field(x)
        assert np.all(lower.field(x) <= f + 1e-12)
        assert np.all(f <= upper.field(x) + 1e-12)


def test_averaging_structure(fig_mdp):
    q_star = solve_q_star(fig_mdp)
    delta = 0.7
    sys = build_averaging_ode(fig_mdp, delta, q_star)
    assert sys.dim == 8 and sys.num_modes == 4
    for A in sys.A:
        np.testing.assert_array_equal(A[4:, :4], delta * np.eye(4))
        np.testing.assert_array_equal(A[4:, 4:], -delta * np.eye(4))
    np.testing.assert_array_equal(sys.b[:, 4:], 0.0)
    upper, lower = build_averaging_comparisons(fig_mdp, delta, q_star)
    assert upper.num_modes == 4 and lower.num_modes == 1


def test_averaging_switches_on_second_block(fig_mdp):
    q_star = solve_q_star(fig_mdp)
    sys = build_averaging_ode(fig_mdp, 1.0, q_star)
    x = np.zeros(8)
    x[:4] = [-100, -100, 100, 100]  # Q^A block pushes toward action 1 everywhere
    star = policy_index(greedy_policy(q_star, 2, 2), 2)
    assert sys.mode(x) == star


def test_averaging_rejects_bad_delta(fig_mdp):
    with pytest.raises(InvalidInputError):
        build_averaging_ode(fig_mdp, 0.0, solve_q_star(fig_mdp))


def test_lfa_identity_features_reduce_to_tabular(fig_mdp):
    q_star = solve_q_star(fig_mdp)
    phi = np.eye(4)
    theta = solve_theta_star(fig_mdp, phi)
    np.testing.assert_allclose(theta, q_star, atol=1e-9)
    a, b = build_lfa_ode(fig_mdp, phi, theta), build_q_ode(fig_mdp, q_star)
    np.testing.assert_allclose(a.A, b.A, atol=1e-14)
    np.testing.assert_allclose(a.b, b.b, atol=1e-9)
    (ua, la), (ub, lb) = build_lfa_comparisons(fig_mdp, phi, theta), build_q_comparisons(fig_mdp, q_star)
    np.testing.assert_allclose(ua.A, ub.A, atol=1e-14)
    np.testing.assert_allclose(la.A, lb.A, atol=1e-14)


def test_lfa_binary_example_shapes(binary_case):
    mdp, phi = binary_case
    theta = solve_theta_star(mdp, phi)
    sys = build_lfa_ode(mdp, phi, theta)
    assert sys.A.shape == (4, 2, 2)
    assert np.all(sys.b <= 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_lfa_offsets_nonpositive(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, 2, 2)
    phi = random_partition_features(rng, 4, weighted=True)
    try:
        theta = solve_theta_star(mdp, phi)
    except Exception:
        return
    assert np.all(build_lfa_ode(mdp, phi, theta).b <= 1e-10)


def test_lfa_comparisons_require_assumptions(melo_case):
    mdp, _ = melo_case
    with pytest.raises(AssumptionError):
        build_lfa_comparisons(mdp, np.array([[1.0], [-1.0], [0.0], [1.0]]), np.zeros(1))
    with pytest.raises(AssumptionError):
        build_lfa_comparisons(mdp, np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]), np.zeros(2))


def test_system_shape_validation():
    with pytest.raises(InvalidInputError):
        SwitchedAffineSystem(np.zeros((1, 2, 3)), np.zeros((1, 2)), FixedRule(0))
    with pytest.raises(InvalidInputError):
        SwitchedAffineSystem(np.zeros((1, 2, 2)), np.zeros((1, 3)), FixedRule(0))
    with pytest.raises(InvalidInputError):
        SwitchedAffineSystem(np.zeros((1, 2, 2)), np.zeros((1, 2)), FixedRule(1))


def test_scalar_decay():
    tr = integrate(_single(-1.0), [1.0], t_final=1.0, dt=1e-3)
    assert abs(tr.final[0] - np.exp(-1.0)) < 1e-8
    assert tr.times[-1] == pytest.approx(1.0)
    assert np.all(np.diff(tr.times) > 0)


def test_single_mode_matches_matrix_exponential(fig_mdp):
    q_star = solve_q_star(fig_mdp)
    _, lower = build_q_comparisons(fig_mdp, q_star)
    x0 = np.ones(4)
    tr = integrate(lower, x0, t_final=5.0, dt=1e-3)
    np.testing.assert_allclose(tr.final, expm(lower.A[0] * 5.0) @ x0, atol=1e-8)


def test_affine_single_mode_matches_closed_form(rng):
    A = -np.eye(3) + 0.2 * rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    x0 = rng.normal(size=3)
    t = 2.0
    tr = integrate(_single(A, b), x0, t_final=t, dt=1e-3)
    x_eq = -np.linalg.solve(A, b)
    expected = x_eq + expm(A * t) @ (x0 - x_eq)
    np.testing.assert_allclose(tr.final, expected, atol=1e-8)


@pytest.mark.parametrize("which", ["original", "upper", "lower"])
def test_compiled_matches_python(fig_systems, which):
    _, sys, upper, lower = fig_systems
    s = {"original": sys, "upper": upper, "lower": lower}[which]
    x0 = np.array([1.0, -0.5, 2.0, 0.3])
    a = integrate(s, x0, t_final=2.0, dt=1e-2, backend="compiled")
    b = integrate(s, x0, t_final=2.0, dt=1e-2, backend="python")
    np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(a.modes, b.modes)


def test_recorded_modes_consistent(fig_systems):
    _, sys, _, _ = fig_systems
    tr = integrate(sys, np.array([-10.0, 10.0, 10.0, -10.0]), t_final=20.0, dt=1e-2)
    for k in range(0, len(tr.times), 37):
        assert tr.modes[k] == sys.mode(tr.states[k])
    assert len(set(tr.modes.tolist())) > 1


def test_integration_is_deterministic(fig_systems):
    _, sys, _, _ = fig_systems
    a = integrate(sys, np.ones(4), t_final=5.0)
    b = integrate(sys, np.ones(4), t_final=5.0)
    np.testing.assert_array_equal(a.states, b.states)


def test_richardson_fourth_order(rng):
    A = np.array([[-1.0, 0.5], [0.2, -0.7]])
    x0 = np.array([1.0, -1.0])
    ends = [integrate(_single(A), x0, t_final=1.0, dt=h).final for h in (0.2, 0.1, 0.05)]
    ratio = np.max(np.abs(ends[0] - ends[1])) / np.max(np.abs(ends[1] - ends[2]))
    assert 12 < ratio < 20  # 2^4 = 16


def test_schedule_rule_uses_python_backend():
    A = np.array([[[-1.0]], [[-2.0]]])
    sys = SwitchedAffineSystem(A, np.zeros((2, 1)), ScheduleRule(lambda t: 0 if t < 0.5 else 1))
    tr = integrate(sys, [1.0], t_final=1.0, dt=1e-3)
    # the step ending at t = 0.5 already sees mode 1 in its last stage: O(dt) error
    assert abs(tr.final[0] - np.exp(-0.5 - 1.0)) < 1e-4
    with pytest.raises(InvalidInputError):
        integrate(sys, [1.0], t_final=1.0, backend="compiled")


def test_blow_up_detected():
    with pytest.raises(BlowUpError):
        integrate(_single(1e3), [1.0], t_final=10.0, dt=1e-2)


def test_bad_integration_inputs():
    with pytest.raises(InvalidInputError):
        integrate(_single(-1.0), [1.0], t_final=1.0, dt=0.0)
    with pytest.raises(InvalidInputError):
        integrate(_single(-1.0), [1.0, 2.0], t_final=1.0)


def test_greedy_rule_offset_and_coord():
    rule = GreedyRule(2, 2, np.eye(4), np.array([0.0, 0.0, 1.0, 0.0]))
    assert rule(0.0, np.zeros(4)) == policy_index((1, 0), 2)


def test_csv_roundtrip(tmp_path, fig_systems):
    _, sys, _, _ = fig_systems
    tr = integrate(sys, np.ones(4), t_final=1.0, dt=1e-2)
    path = tmp_path / "traj.csv"
    tr.to_csv(path, stride=7)
    header = path.read_text().splitlines()[0]
    assert header == "t,x_0,x_1,x_2,x_3,mode"
    back = read_trajectory_csv(path)
    assert back.times[-1] == tr.times[-1]
    np.testing.assert_array_equal(back.states, tr.states[list(range(0, 101, 7)) + [100]])
    np.testing.assert_array_equal(back.modes[:-1], tr.modes[::7])
