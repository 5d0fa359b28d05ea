import json
import os

import numpy as np
import pytest

from qswitch import cases
from qswitch.errors import InvalidInputError
from qswitch.harness import (
    build_systems,
    fuzz,
    lipschitz_bound,
    reproduce,
    verify_lipschitz,
    verify_quasimonotone,
    verify_sandwich,
)
from qswitch.io import features_from_dict, mdp_from_dict
from qswitch.mdp import random_mdp
from qswitch.qlearn import make_rng
from qswitch.stability import check_lfa_new_condition, check_melo_condition
from qswitch.switching import read_trajectory_csv

HERE = os.path.dirname(__file__)


def test_sandwich_figure_mdp(fig_mdp):
    res = verify_sandwich("q", fig_mdp)
    assert res.verdict == "holds"
    assert res.max_lower_violation < 1e-8 and res.max_upper_violation < 1e-8
    assert res.horizon == 100.0
    t = res.trajectories
    assert np.all(t["lower"].states <= t["original"].states + 1e-8)
    assert np.all(t["original"].states <= t["upper"].states + 1e-8)


def test_sandwich_averaging_both_blocks(fig_mdp):
    res = verify_sandwich("avg", fig_mdp, delta=1.0)
    assert res.holds
    t = res.trajectories
    for block in (slice(0, 4), slice(4, 8)):
        assert np.all(t["lower"].states[:, block] <= t["original"].states[:, block] + 1e-7)
        assert np.all(t["original"].states[:, block] <= t["upper"].states[:, block] + 1e-7)


def test_sandwich_lfa_binary(binary_case):
    mdp, phi = binary_case
    res = verify_sandwich("lfa", mdp, phi=phi, t_final=50.0)
    assert res.holds


def test_sandwich_gamma_zero_offsets_preserved(fig_mdp):
    mdp = fig_mdp.with_gamma(0.0)
    res = verify_sandwich("q", mdp, t_final=10.0, eps=1e-3)
    t = res.trajectories
    # identical linear dynamics -D x: the gap is eps * exp(-d_i t) exactly
    gap = t["upper"].states - t["original"].states
    np.testing.assert_allclose(gap[-1], 1e-3 * np.exp(-mdp.dist * 10.0), rtol=1e-9)
    np.testing.assert_allclose(t["original"].states - t["lower"].states, gap, atol=1e-15)
    assert res.max_lower_violation == 0.0 and res.max_upper_violation == 0.0


def test_sandwich_detects_violation(fig_mdp):
    # swapping the initial offsets must be reported as a violation
    res = verify_sandwich("q", fig_mdp, t_final=1.0, eps=-1e-3, tol=1e-7)
    assert res.verdict == "fails"
    assert res.max_lower_violation > 1e-4


def test_sandwich_rejects_unknown_variant(fig_mdp):
    with pytest.raises(InvalidInputError):
        verify_sandwich("double", fig_mdp)
    with pytest.raises(InvalidInputError):
        build_systems("lfa", fig_mdp)


def test_quasimonotone_metzler():
    A = np.array([[-1.0, 0.5], [0.2, -1.0]])
    res = verify_quasimonotone(lambda x: A @ x, 2, 1000, np.random.default_rng(0))
    assert res.passed and res.witness is None


def test_quasimonotone_counterexample():
    A = np.array([[-1.0, -0.5], [0.2, -1.0]])
    res = verify_quasimonotone(lambda x: A @ x, 2, 1000, np.random.default_rng(0))
    assert not res.passed
    w = res.witness
    z, p, i = np.array(w["z"]), np.array(w["p"]), w["i"]
    assert p[i] == 0 and np.all(p >= 0)
    assert (A @ (z + p))[i] < (A @ z)[i]


@pytest.mark.parametrize("variant", ["q", "avg"])
def test_upper_fields_quasimonotone(fig_mdp, variant):
    _, upper, lower = build_systems(variant, fig_mdp)
    for sys in (upper, lower):
        res = verify_quasimonotone(sys.field, sys.dim, 10_000, np.random.default_rng(1), scale=5.0)
        assert res.passed, res.witness


def test_lfa_upper_field_quasimonotone(binary_case):
    mdp, phi = binary_case
    _, upper, _ = build_systems("lfa", mdp, phi=phi)
    assert verify_quasimonotone(upper.field, 2, 10_000, np.random.default_rng(2)).passed


def test_lipschitz_linear_and_zero(rng):
    A = rng.normal(size=(3, 3))
    est = verify_lipschitz(lambda x: A @ x, 3, 2000, rng)
    assert est <= np.abs(A).sum(axis=1).max() + 1e-12
    assert verify_lipschitz(lambda x: np.zeros(3), 3, 100, rng) == 0.0


def test_lipschitz_bound_formula(fig_mdp):
    d = fig_mdp.dist
    P = fig_mdp.transitions.reshape(4, 2)
    expected = 0.9 * np.max(d * P.sum(axis=1)) + d.max()
    assert lipschitz_bound(fig_mdp) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_q_field_lipschitz(seed):
    mdp = cases.figure_mdp() if seed == 0 else random_mdp(np.random.default_rng(seed), 3, 2)
    sys, upper, _ = build_systems("q", mdp)
    rng = np.random.default_rng(seed)
    for f in (sys.field, upper.field):
        assert verify_lipschitz(f, mdp.num_pairs, 5000, rng, scale=10.0) <= lipschitz_bound(mdp) + 1e-9


def test_reproduce_fig1(tmp_path):
    report = reproduce("fig1", tmp_path, stride=1000)
    out = tmp_path / "fig1"
    for name in ("original", "upper", "lower"):
        tr = read_trajectory_csv(out / f"trajectory_{name}.csv")
        assert tr.states.shape[1] == 4
        assert tr.times[-1] == pytest.approx(100.0)
    saved = json.loads((out / "report.json").read_text())
    assert saved["sandwich"]["verdict"] == "holds"
    assert report["variant"] == "q"


@pytest.mark.parametrize("case,block", [("fig2", 0), ("fig3", 4)])
def test_reproduce_averaging_blocks(tmp_path, case, block):
    report = reproduce(case, tmp_path, t_final=5.0, stride=500)
    tr = read_trajectory_csv(tmp_path / case / "trajectory_original.csv")
    assert tr.states.shape[1] == 4
    res = verify_sandwich("avg", cases.figure_mdp(), t_final=5.0)
    np.testing.assert_allclose(tr.final, res.trajectories["original"].final[block : block + 4])
    assert report["sandwich"]["verdict"] == "holds"


def test_reproduce_binary(tmp_path):
    report = reproduce("ex_binary", tmp_path)
    entry = next(m for m in report["new_condition"]["per_mode"] if m["policy"] == [0, 1])
    np.testing.assert_allclose(entry["diagonal"], [-0.1625, -0.2], atol=1e-12)
    np.testing.assert_allclose(entry["off_diagonal"], [0.1125, 0.15], atol=1e-12)
    assert report["binary_guarantee"] is True
    assert (tmp_path / "ex_binary" / "report.json").is_file()


def test_reproduce_melo(tmp_path):
    report = reproduce("ex_melo", tmp_path)
    assert report["verdicts"] == {"new": "holds", "melo": "fails"}
    assert report["theta_phi"] == [[0, 0], [1, 1]]


def test_reproduce_svg(tmp_path):
    pytest.importorskip("matplotlib")
    reproduce("fig1", tmp_path, t_final=2.0, svg=True)
    assert (tmp_path / "fig1" / "plot.svg").read_text().lstrip().startswith("<?xml")


def test_reproduce_unknown_case(tmp_path):
    with pytest.raises(InvalidInputError):
        reproduce("fig9", tmp_path)


def test_fuzz_rejects_zero_trials():
    with pytest.raises(InvalidInputError):
        fuzz("tabular", 0)
    with pytest.raises(InvalidInputError):
        fuzz("nonsense", 3)


def test_fuzz_deterministic():
    a = fuzz("melo_implies_new", 30, seed=7, features="weighted")
    b = fuzz("melo_implies_new", 30, seed=7, features="weighted")
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


@pytest.mark.parametrize("kind", ["tabular", "averaging", "lfa_binary"])
def test_fuzz_small_runs_clean(kind):
    summary = fuzz(kind, 4, seed=11, t_final=20.0)
    assert summary.passed, summary.violations


def test_fuzz_trial_streams_are_independent():
    # trial k draws from stream (seed, k) whatever the total trial count
    a = fuzz("melo_implies_new", 12, seed=3, features="weighted")
    b = fuzz("melo_implies_new", 6, seed=3, features="weighted")
    assert {k: v for k, v in a.violations.items() if k < 6} == b.violations


def test_melo_weighted_counterexample():
    # frozen instance: nonnegative orthogonal but non-binary features where Melo holds yet the
    # row-dominance condition fails, so the implication needs binary features
    with open(os.path.join(HERE, "data", "melo_weighted_counterexample.json")) as fh:
        inst = json.load(fh)
    mdp = mdp_from_dict(inst["mdp"])
    phi = features_from_dict(inst["features"])
    melo = check_melo_condition(mdp, phi)
    new = check_lfa_new_condition(mdp, phi)
    assert melo.holds
    assert not new.holds
    assert new.worst_margin == pytest.approx(0.195, abs=1e-3)


def test_make_rng_streams():
    a = make_rng(0, 1).random(3)
    b = make_rng(0, 1).random(3)
    c = make_rng(0, 2).random(3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
