"""Numerical verification: comparison sandwiches, field properties, reproduction, fuzzing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import cases
from .config import DEFAULTS
from .errors import InvalidInputError, NoFixedPointError
from .linear_fa import enumerate_theta_phi, random_partition_features, solve_theta_star
from .mdp import Mdp, diag_distribution, random_mdp, solve_q_star, stacked_transition
from .io import features_to_dict, mdp_to_dict
from .qlearn import make_rng
from .stability import (
    check_averaging,
    check_binary_feature_guarantee,
    check_lfa_new_condition,
    check_melo_condition,
    check_qlearning,
)
from .switching import (
    Trajectory,
    build_averaging_comparisons,
    build_averaging_ode,
    build_lfa_comparisons,
    build_lfa_ode,
    build_q_comparisons,
    build_q_ode,
    integrate,
)

VARIANTS = ("q", "avg", "lfa")
CASES = ("fig1", "fig2", "fig3", "ex_binary", "ex_melo")
FUZZ_KINDS = ("tabular", "averaging", "lfa_binary", "melo_implies_new")


@dataclass
class SandwichResult:
    max_lower_violation: float
    max_upper_violation: float
    horizon: float
    tol: float
    final_norms: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def holds(self) -> bool:
        return self.max_lower_violation <= self.tol and self.max_upper_violation <= self.tol

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_lower_violation": self.max_lower_violation,
            "max_upper_violation": self.max_upper_violation,
            "horizon": self.horizon,
            "tol": self.tol,
            "final_norms": self.final_norms,
        }


def build_systems(variant: str, mdp: Mdp, delta: float | None = None, phi=None, q_star=None, theta_star=None):
    """Original, upper and lower systems for one variant."""
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "lfa":
        if phi is None:
            raise InvalidInputError("lfa variant needs a feature matrix")
        if theta_star is None:
            theta_star = solve_theta_star(mdp, phi)
        upper, lower = build_lfa_comparisons(mdp, phi, theta_star)
        return build_lfa_ode(mdp, phi, theta_star), upper, lower
    if q_star is None:
        q_star = solve_q_star(mdp)
    if variant == "q":
        upper, lower = build_q_comparisons(mdp, q_star)
        return build_q_ode(mdp, q_star), upper, lower
    delta = DEFAULTS["delta"] if delta is None else delta
    upper, lower = build_averaging_comparisons(mdp, delta, q_star)
    return build_averaging_ode(mdp, delta, q_star), upper, lower


def verify_sandwich(
    variant: str,
    mdp: Mdp,
    x0=None,
    t_final: float | None = None,
    dt: float | None = None,
    tol: float | None = None,
    eps: float | None = None,
    delta: float | None = None,
    phi=None,
    theta_star=None,
) -> SandwichResult:
    """Integrate original/upper/lower from ``x0``, ``x0 + eps``, ``x0 - eps`` and check ordering.

    All three run in the shifted coordinates of the original system, on the
    same time grid.  ``x0`` defaults to the ones vector.
    """
    t_final = DEFAULTS["t_final"] if t_final is None else t_final
    dt = DEFAULTS["dt"] if dt is None else dt
    tol = DEFAULTS["sandwich_tol"] if tol is None else tol
    eps = DEFAULTS["eps_offset"] if eps is None else eps
    original, upper, lower = build_systems(variant, mdp, delta=delta, phi=phi, theta_star=theta_star)
    x0 = np.ones(original.dim) if x0 is None else np.asarray(x0, float)
    trajs = {
        "original": integrate(original, x0, t_final, dt),
        "upper": integrate(upper, x0 + eps, t_final, dt),
        "lower": integrate(lower, x0 - eps, t_final, dt),
    }
    orig = trajs["original"].states
    low_v = float(max(0.0, np.max(trajs["lower"].states - orig)))
    up_v = float(max(0.0, np.max(orig - trajs["upper"].states)))
    norms = {k: float(np.max(np.abs(t.final))) for k, t in trajs.items()}
    return SandwichResult(low_v, up_v, float(t_final), float(tol), norms, trajs)


@dataclass
class QuasiMonotoneResult:
    passed: bool
    trials: int
    witness: dict | None = None


def verify_quasimonotone(field: Callable, dim: int, trials: int, rng: np.random.Generator, scale: float = 1.0, tol: float = 1e-12) -> QuasiMonotoneResult:
    """Sampled check that ``field_i(z + p) >= field_i(z)`` for ``p >= 0`` with ``p_i = 0``.

    Returns the first counterexample found as the witness.
    """
    for t in range(trials):
        z = rng.uniform(-scale, scale, dim)
        p = rng.uniform(0.0, scale, dim) * (rng.random(dim) < 0.5)
        i = int(rng.integers(dim))
        p[i] = 0.0
        before = float(field(z)[i])
        after = float(field(z + p)[i])
        if after < before - tol:
            return QuasiMonotoneResult(False, t + 1, {"z": z.tolist(), "p": p.tolist(), "i": i, "before": before, "after": after})
    return QuasiMonotoneResult(True, trials)


def verify_lipschitz(field: Callable, dim: int, trials: int, rng: np.random.Generator, scale: float = 1.0) -> float:
    """Largest sampled ratio ``||f(x) - f(y)||_inf / ||x - y||_inf``.

    Half the pairs are far apart, half are small perturbations.
    """
    best = 0.0
    for t in range(trials):
        x = rng.uniform(-scale, scale, dim)
        if t % 2:
            y = x + rng.uniform(-1e-3, 1e-3, dim) * scale
        else:
            y = rng.uniform(-scale, scale, dim)
        gap = np.max(np.abs(x - y))
        if gap == 0:
            continue
        best = max(best, float(np.max(np.abs(field(x) - field(y))) / gap))
    return best


def lipschitz_bound(mdp: Mdp) -> float:
    """``||g D P||_inf + ||D||_inf`` (induced max norms)."""
    D = diag_distribution(mdp)
    gdp = mdp.gamma * D @ stacked_transition(mdp)
    return float(np.abs(gdp).sum(axis=1).max() + np.abs(D).sum(axis=1).max())


# ---------------------------------------------------------------- reproduction


def _write_case(out: Path, trajs: dict, block: slice | None, stride: int, svg: bool, title: str):
    out.mkdir(parents=True, exist_ok=True)
    picked = {}
    for name, tr in trajs.items():
        if block is not None:
            tr = tr.block(block.start, block.stop)
        tr.to_csv(out / f"trajectory_{name}.csv", stride=stride)
        picked[name] = tr
    if svg:
        _plot_svg(out / "plot.svg", picked, title)
    return picked


def _plot_svg(path: Path, trajs: dict, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = {"original": "black", "upper": "red", "lower": "blue"}
    fig, ax = plt.subplots(figsize=(8, 6))
    step = max(1, len(trajs["original"].times) // 2000)
    for name, tr in trajs.items():
        for j in range(tr.states.shape[1]):
            ax.plot(tr.times[::step], tr.states[::step, j], color=colors[name], lw=0.8, label=name if j == 0 else None)
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def reproduce(case: str, out_dir="out", t_final: float | None = None, dt: float | None = None, stride: int = 100, svg: bool = False) -> dict:
    """Regenerate one figure or example; writes ``out_dir/<case>/`` and returns the report."""
    if case not in CASES:
        raise InvalidInputError(f"unknown case {case!r}; expected one of {CASES}")
    out = Path(out_dir) / case
    out.mkdir(parents=True, exist_ok=True)
    if case in ("fig1", "fig2", "fig3"):
        mdp = cases.figure_mdp()
        variant = "q" if case == "fig1" else "avg"
        res = verify_sandwich(variant, mdp, t_final=t_final, dt=dt)
        n = mdp.num_pairs
        block = {"fig1": None, "fig2": slice(0, n), "fig3": slice(n, 2 * n)}[case]
        picked = _write_case(out, res.trajectories, block, stride, svg, case)
        report = {"case": case, "variant": variant, "sandwich": res.to_dict()}
        report["final_norms"] = {k: float(np.max(np.abs(tr.final))) for k, tr in picked.items()}
        report["q_star"] = solve_q_star(mdp).tolist()
    elif case == "ex_binary":
        mdp = cases.binary_feature_mdp()
        phi = cases.binary_features()
        rep = check_lfa_new_condition(mdp, phi)
        report = {"case": case, "new_condition": rep.to_dict(), "binary_guarantee": check_binary_feature_guarantee(phi)}
    else:
        mdp = cases.melo_mdp()
        phi = cases.melo_features()
        theta_phi = enumerate_theta_phi(mdp, phi)
        new = check_lfa_new_condition(mdp, phi, theta_phi)
        melo = check_melo_condition(mdp, phi, theta_phi)
        report = {
            "case": case,
            "theta_phi": [list(p) for p in theta_phi],
            "new_condition": new.to_dict(),
            "melo_condition": melo.to_dict(),
            "verdicts": {"new": new.verdict, "melo": melo.verdict},
            "theta_star": solve_theta_star(mdp, phi).tolist(),
        }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


# --------------------------------------------------------------------- fuzzing


@dataclass
class FuzzSummary:
    kind: str
    trials: int
    seed: int
    violations: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "violations": {str(k): v for k, v in sorted(self.violations.items())},
            "skipped": {str(k): v for k, v in sorted(self.skipped.items())},
            "stats": self.stats,
        }


def _random_dims(rng):
    return int(rng.integers(2, 4)), int(rng.integers(2, 4))


def _margin_error_tabular(mdp: Mdp) -> float:
    rep = check_qlearning(mdp)
    expected = mdp.dist * (mdp.gamma - 1.0)
    return max(float(np.max(np.abs(m.margins - expected))) for m in rep.per_mode)


def _margin_error_averaging(mdp: Mdp, delta: float) -> float:
    rep = check_averaging(mdp, delta)
    root = np.sqrt(mdp.gamma)
    expected = np.concatenate([mdp.dist * (root - 1.0), np.full(mdp.num_pairs, delta * (root - 1.0))])
    return max(float(np.max(np.abs(m.margins - expected))) for m in rep.per_mode)


def _fuzz_trial(kind: str, rng: np.random.Generator, sandwich: bool, t_final: float, dt: float, features: str):
    """Run one trial; returns (problem or None, skip reason or None, instance)."""
    S, A = _random_dims(rng)
    if kind == "tabular":
        mdp = random_mdp(rng, S, A)
        inst = {"mdp": mdp_to_dict(mdp, use_behavior=False)}
        err = _margin_error_tabular(mdp)
        if err > 1e-12:
            return f"margin formula off by {err:.3g}", None, inst
        if sandwich:
            res = verify_sandwich("q", mdp, t_final=t_final, dt=dt)
            if not res.holds:
                return f"sandwich violated: {res.to_dict()}", None, inst
        return None, None, inst
    if kind == "averaging":
        mdp = random_mdp(rng, S, A)
        delta = float(10 ** rng.uniform(-1, 1))
        inst = {"mdp": mdp_to_dict(mdp, use_behavior=False), "delta": delta}
        err = _margin_error_averaging(mdp, delta)
        if err > 1e-12:
            return f"margin formula off by {err:.3g}", None, inst
        if sandwich:
            res = verify_sandwich("avg", mdp, t_final=t_final, dt=dt, delta=delta)
            if not res.holds:
                return f"sandwich violated: {res.to_dict()}", None, inst
        return None, None, inst
    if kind == "lfa_binary":
        mdp = random_mdp(rng, S, A)
        phi = random_partition_features(rng, mdp.num_pairs)
        inst = {"mdp": mdp_to_dict(mdp, use_behavior=False), "features": features_to_dict(phi)}
        if not check_binary_feature_guarantee(phi):
            return "binary guarantee predicate false on partition features", None, inst
        rep = check_lfa_new_condition(mdp, phi)
        if not rep.holds:
            return f"new condition fails (worst margin {rep.worst_margin:.3g})", None, inst
        if sandwich:
            try:
                theta_star = solve_theta_star(mdp, phi)
            except NoFixedPointError:
                return None, "no projected fixed point", inst
            res = verify_sandwich("lfa", mdp, t_final=t_final, dt=dt, phi=phi, theta_star=theta_star)
            if not res.holds:
                return f"sandwich violated: {res.to_dict()}", None, inst
        return None, None, inst
    # melo_implies_new
    mdp = random_mdp(rng, S, A, behavior=True)
    phi = random_partition_features(rng, mdp.num_pairs, weighted=(features == "weighted"))
    inst = {"mdp": mdp_to_dict(mdp), "features": features_to_dict(phi)}
    melo = check_melo_condition(mdp, phi)
    new = check_lfa_new_condition(mdp, phi)
    inst["melo_holds"], inst["new_holds"] = melo.holds, new.holds
    if melo.holds and not new.holds:
        return f"Melo holds (worst {melo.worst_margin:.3g}) but new condition fails (worst {new.worst_margin:.3g})", None, inst
    return None, None, inst


def fuzz(
    kind: str,
    trials: int,
    seed: int = 0,
    sandwich: bool = True,
    t_final: float | None = None,
    dt: float | None = None,
    features: str = "binary",
) -> FuzzSummary:
    """Randomized property checks; each trial uses the stream ``(seed, trial)``.

    ``features`` selects ``binary`` or ``weighted`` partition features for
    ``melo_implies_new``.
    """
    if kind not in FUZZ_KINDS:
        raise InvalidInputError(f"unknown fuzz kind {kind!r}; expected one of {FUZZ_KINDS}")
    if trials < 1:
        raise InvalidInputError("trials must be at least 1")
    if features not in ("binary", "weighted"):
        raise InvalidInputError("features must be 'binary' or 'weighted'")
    t_final = DEFAULTS["t_final"] if t_final is None else t_final
    dt = DEFAULTS["dt"] if dt is None else dt
    summary = FuzzSummary(kind, trials, seed)
    for trial in range(trials):
        problem, skip, inst = _fuzz_trial(kind, make_rng(seed, trial), sandwich, t_final, dt, features)
        if problem is not None:
            summary.violations[trial] = {"problem": problem, "instance": inst}
        elif skip is not None:
            summary.skipped[trial] = skip
        if kind == "melo_implies_new":
            # how many trials exercise the implication at all
            summary.stats["melo_holds"] = summary.stats.get("melo_holds", 0) + int(inst["melo_holds"])
    return summary
