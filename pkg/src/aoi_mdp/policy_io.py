"""JSON persistence of stationary policies."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

from .kernel import control_code
from .model import ModelParams, StateSpace, SystemState
from .solver import Policy

FORMAT_TAG = "aoi-mdp-policy"
FORMAT_VERSION = 1
# tolerances do not change what a policy means, so they stay out of the hash
_HASHED_FIELDS = ("q", "delta_max", "r_max", "g_max_cost", "gamma", "p_a", "p_s")


class PolicyFileError(ValueError):
    pass


def params_hash(params: ModelParams) -> str:
    payload = {name: getattr(params, name) for name in _HASHED_FIELDS}
    payload = {k: float(v) if isinstance(v, float) else v for k, v in payload.items()}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def export_policy(policy: Policy, path, params: ModelParams | None = None) -> Path:
    params = params or policy.space.params
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "params": dataclasses.asdict(params),
        "params_hash": params_hash(params),
        "rows": [
            [list(state.vector()), list(policy[i])] for i, state in enumerate(policy.space.states)
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    return path


def read_policy_params(path) -> ModelParams:
    doc = _load(path)
    return ModelParams(**doc["params"])


def _load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PolicyFileError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format") != FORMAT_TAG:
        raise PolicyFileError(f"{path}: not a policy file")
    if doc.get("version") != FORMAT_VERSION:
        raise PolicyFileError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def import_policy(path, params: ModelParams | None = None, space: StateSpace | None = None) -> Policy:
    """Load a policy, checking it was produced for ``params`` (defaults to the recorded ones)."""
    doc = _load(path)
    recorded = ModelParams(**doc["params"])
    if doc["params_hash"] != params_hash(recorded):
        raise PolicyFileError(f"{path}: recorded parameter hash does not match recorded parameters")
    if params is not None and params_hash(params) != doc["params_hash"]:
        raise PolicyFileError(f"{path}: policy was produced for different parameters")
    params = params or recorded
    if space is None:
        space = StateSpace(params)
    rows = doc["rows"]
    if len(rows) != len(space):
        raise PolicyFileError(f"{path}: {len(rows)} rows for a state space of {len(space)}")
    codes = []
    for i, (vec, u) in enumerate(rows):
        if SystemState.from_vector(vec) != space.states[i]:
            raise PolicyFileError(f"{path}: row {i} state {vec} does not match the state space")
        codes.append(control_code(u))
    policy = Policy(space, codes)
    if not policy.is_admissible():
        raise PolicyFileError(f"{path}: policy contains inadmissible controls")
    return policy
