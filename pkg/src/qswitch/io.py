"""JSON file formats for MDPs and feature matrices."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .mdp import Mdp, check, stationary_state_action_distribution


def mdp_from_dict(data: dict) -> Mdp:
    """Parse the MDP schema.

    ``dist`` is either an explicit action-major vector or
    ``{"behavior_policy": [[...], ...]}``, in which case the stationary
    state-action distribution under that policy is used.
    """
    try:
        nS, nA = int(data["num_states"]), int(data["num_actions"])
        P = np.asarray(data["transitions"], float)
        R = np.asarray(data["rewards"], float)
        gamma = float(data["gamma"])
        dist = data["dist"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed MDP JSON: {exc!r}") from exc
    if P.shape != (nA, nS, nS) or R.shape != (nA, nS):
        raise InvalidInputError(f"MDP JSON shapes {P.shape}/{R.shape} disagree with num_states={nS}, num_actions={nA}")
    behavior = None
    if isinstance(dist, dict):
        if "behavior_policy" not in dist:
            raise InvalidInputError("dist object must contain 'behavior_policy'")
        behavior = np.asarray(dist["behavior_policy"], float)
        if behavior.shape != (nS, nA):
            raise InvalidInputError(f"behavior_policy must be {nS}x{nA}")
        d = stationary_state_action_distribution(P, behavior)
    else:
        d = np.asarray(dist, float)
    return check(Mdp(P, R, gamma, d, behavior=behavior))


def mdp_to_dict(mdp: Mdp, use_behavior: bool = True) -> dict:
    out = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "gamma": mdp.gamma,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }
    if use_behavior and mdp.behavior is not None:
        out["dist"] = {"behavior_policy": mdp.behavior.tolist()}
    else:
        out["dist"] = mdp.dist.tolist()
    return out


def features_from_dict(data: dict) -> np.ndarray:
    try:
        rows, cols = int(data["rows"]), int(data["cols"])
        values = np.asarray(data["values"], float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed feature JSON: {exc!r}") from exc
    if values.size != rows * cols:
        raise InvalidInputError(f"feature JSON has {values.size} values for a {rows}x{cols} matrix")
    return values.reshape(rows, cols)


def features_to_dict(phi) -> dict:
    phi = np.asarray(phi, float)
    return {"rows": phi.shape[0], "cols": phi.shape[1], "values": phi.reshape(-1).tolist()}


def _load(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc


def load_mdp(path) -> Mdp:
    return mdp_from_dict(_load(path))


def load_features(path) -> np.ndarray:
    return features_from_dict(_load(path))


def save_mdp(mdp: Mdp, path, use_behavior: bool = True) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(mdp, use_behavior), indent=2) + "\n")


def save_features(phi, path) -> None:
    Path(path).write_text(json.dumps(features_to_dict(phi), indent=2) + "\n")
