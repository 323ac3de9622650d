"""Model files, experiment configs and bundled presets.

Model and config files are JSON documents. A model file holds
``num_states``, ``num_actions``, ``num_obs``, ``discount``, ``init_dist``,
a reward table and either a joint ``kernel`` ``[s][a][s'][y']`` or a state
transition plus a deterministic ``observation_map``. Transitions may be
written per state (``transition[s][a][s']``) or per action
(``transition_by_action[a][s][s']``); rewards likewise (``reward[s][a]`` or
``reward_by_action[a][s]``). An optional ``reward_scale`` multiplies the
reward table and may be the string ``"1 - discount"``.

An experiment config names a model (preset name, path, or inline mapping)
and adds ``agent_state``, ``regularizer``, ``behavior`` (list of phase
policies, each a ``[z][a]`` table), ``schedule``, ``steps``, ``seeds``
(a count or a list) and optional ``log_every``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .agent_state import (AgentStateMachine, make_constant, make_observation_state,
                          make_sliding_window, make_table)
from .learner import LearningRateSchedule, config_digest
from .policies import PeriodicPolicy, Policy
from .pomdp import PomdpModel, check_model, from_factored
from .regularizers import Regularizer, make_regularizer

PRESET_PACKAGE = "rasql.presets"


def list_presets() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(PRESET_PACKAGE).iterdir()
                  if p.name.endswith(".json"))


def _read_preset(name: str) -> dict:
    path = resources.files(PRESET_PACKAGE) / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return json.loads(path.read_text())


def _reward_scale(doc: dict) -> float:
    scale = doc.get("reward_scale", 1.0)
    if isinstance(scale, str):
        if scale.replace(" ", "") != "1-discount":
            raise ValueError(f"unsupported reward_scale {scale!r}")
        return 1.0 - float(doc["discount"])
    return float(scale)


def model_from_dict(doc: dict) -> PomdpModel:
    if "reward_by_action" in doc:
        reward = np.asarray(doc["reward_by_action"], dtype=float).T
    else:
        reward = np.asarray(doc["reward"], dtype=float)
    reward = _reward_scale(doc) * reward
    gamma = float(doc["discount"])
    if "kernel" in doc:
        model = PomdpModel(np.asarray(doc["kernel"], dtype=float), reward, gamma,
                           doc["init_dist"], doc.get("init_obs"))
    else:
        if "transition_by_action" in doc:
            P = np.transpose(np.asarray(doc["transition_by_action"], dtype=float), (1, 0, 2))
        else:
            P = np.asarray(doc["transition"], dtype=float)
        model = from_factored(P, doc["observation_map"], reward, gamma, doc["init_dist"],
                              num_obs=doc.get("num_obs"))
    declared = tuple(doc.get(k) for k in ("num_states", "num_actions", "num_obs"))
    actual = (model.num_states, model.num_actions, model.num_obs)
    for name, want, got in zip(("num_states", "num_actions", "num_obs"), declared, actual):
        if want is not None and want != got:
            raise ValueError(f"{name} = {want} but the arrays imply {got}")
    return check_model(model)


def load_model(ref: str | dict, base_dir: Path | None = None) -> tuple[PomdpModel, dict]:
    """Resolve a model reference; returns the model and its source document."""
    if isinstance(ref, dict):
        return model_from_dict(ref), ref
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if path.suffix == ".json" or path.exists():
        doc = json.loads(path.read_text())
    else:
        doc = _read_preset(ref)
    return model_from_dict(doc), doc


def make_agent_state(spec: dict | str, num_obs: int, num_actions: int) -> AgentStateMachine:
    """``observation``, ``window`` (with ``k``, ``pad``), ``constant`` or ``table``."""
    if isinstance(spec, str):
        spec = _parse_asm_string(spec)
    kind = spec.get("kind", "observation")
    if kind == "observation":
        return make_observation_state(num_obs, num_actions)
    if kind == "window":
        return make_sliding_window(num_obs, num_actions, int(spec["k"]), pad=spec.get("pad", True))
    if kind == "constant":
        return make_constant(num_obs, num_actions)
    if kind == "table":
        return make_table(spec["table"], spec.get("start"), int(spec.get("init_state", 0)))
    raise ValueError(f"unknown agent-state kind {kind!r}")


def _parse_asm_string(text: str) -> dict:
    # "observation" or "window(k)"
    text = text.strip()
    if text.startswith("window(") and text.endswith(")"):
        return {"kind": "window", "k": int(text[7:-1])}
    return {"kind": text}


def make_behavior(doc) -> PeriodicPolicy:
    """Behavior from a single ``[z][a]`` table or a list of phase tables."""
    arr = np.asarray(doc, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    return PeriodicPolicy(tuple(Policy(p) for p in arr))


@dataclass
class ExperimentConfig:
    model: PomdpModel
    agent_state: AgentStateMachine
    regularizer: Regularizer
    behavior: PeriodicPolicy
    schedule: LearningRateSchedule
    steps: int
    seeds: tuple[int, ...]
    log_every: int | None = None
    allow_partial: bool = False
    name: str = ""
    source: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        Z, Y, A = self.agent_state.update_table.shape
        if (Y, A) != (self.model.num_obs, self.model.num_actions):
            raise ValueError("agent-state machine does not match the model's observation/action sets")
        if self.behavior.phases[0].probs.shape != (Z, A):
            raise ValueError(f"behavior policy must be a {Z}x{A} table per phase")

    @property
    def period(self) -> int:
        return self.behavior.period

    def describe(self) -> dict:
        """Canonical description used for the config digest."""
        m = self.model
        return {
            "model": {"kernel": m.kernel.tolist(), "reward": m.reward.tolist(),
                      "discount": m.discount, "init_dist": m.init_dist.tolist(),
                      "init_obs": m.init_obs.tolist()},
            "agent_state": {"update": self.agent_state.update_table.tolist(),
                            "start": self.agent_state.start_table.tolist()},
            "regularizer": self.regularizer.to_dict(),
            "behavior": [p.probs.tolist() for p in self.behavior.phases],
            "schedule": self.schedule.spec(),
            "steps": self.steps,
            "log_every": self.log_every,
        }

    def digest(self) -> str:
        return config_digest(self.describe())

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _seeds(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return tuple(range(value))
    return tuple(int(s) for s in value)


def config_from_dict(doc: dict, base_dir: Path | None = None, name: str = "") -> ExperimentConfig:
    model, model_doc = load_model(doc["model"], base_dir)
    asm_spec = doc.get("agent_state", model_doc.get("agent_state", {"kind": "observation"}))
    return ExperimentConfig(
        model=model,
        agent_state=make_agent_state(asm_spec, model.num_obs, model.num_actions),
        regularizer=make_regularizer(doc.get("regularizer", {"kind": "entropy", "beta": 1.0})),
        behavior=make_behavior(doc["behavior"]),
        schedule=LearningRateSchedule.parse(doc.get("schedule", "inverse-visit")),
        steps=int(doc.get("steps", 100_000)),
        seeds=_seeds(doc.get("seeds", 25)),
        log_every=doc.get("log_every"),
        allow_partial=bool(doc.get("allow_partial", False)),
        name=name,
        source=doc,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), path.parent, name=path.stem)


def load_preset(name: str) -> ExperimentConfig:
    doc = _read_preset(name)
    if "behavior" not in doc:
        raise KeyError(f"preset {name!r} is a model, not an experiment config")
    return config_from_dict(doc, name=name)
