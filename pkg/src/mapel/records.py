"""Replayable episode records.

A record carries everything needed to reproduce an episode bit for bit:
the game config, the layout seed, the per-team message topologies, and
per-step positions / capture flags / actions / report flags / gathered
vectors / status.  Files are line-delimited JSON, one step per line,
bracketed by a header and a terminal-rewards line.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .env import (
    Action,
    GameConfig,
    GameError,
    GameState,
    GameStatus,
    new_game,
    step as env_step,
)
from .training import config_hash


class CorruptRecord(GameError):
    pass


@dataclass
class StepEntry:
    step: int
    pursuers: list[tuple[int, int]]
    evaders: list[tuple[int, int]]
    captured: list[bool]
    actions: dict[str, int]  # one per agent; captured evaders log Stay
    flags: dict[str, int]
    reports: dict[str, list[int]]
    status: str


@dataclass
class EpisodeRecord:
    config: GameConfig
    seed: int
    pursuer_topology: dict | None
    evader_topology: dict | None
    steps: list[StepEntry] = field(default_factory=list)
    terminal_rewards: dict[str, float] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(asdict(self.config))

    def initial_state(self) -> GameState:
        return new_game(self.config, self.seed)


def topology_dict(topology) -> dict | None:
    if topology is None:
        return None
    return {
        "kind": topology.kind,
        "n_agents": topology.n_agents,
        "ring": list(topology.ring) if topology.ring is not None else None,
    }


def save_record(record: EpisodeRecord, path) -> None:
    with open(path, "w") as fh:
        header = {
            "kind": "header",
            "config": asdict(record.config),
            "config_hash": record.config_hash,
            "seed": record.seed,
            "pursuer_topology": record.pursuer_topology,
            "evader_topology": record.evader_topology,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for entry in record.steps:
            row = {"kind": "step", **asdict(entry)}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.write(
            json.dumps(
                {"kind": "rewards", "terminal_rewards": record.terminal_rewards},
                sort_keys=True,
            )
            + "\n"
        )


def load_record(path) -> EpisodeRecord:
    try:
        with open(path) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptRecord(str(exc)) from exc
    if not lines or lines[0].get("kind") != "header":
        raise CorruptRecord("missing header line")
    head = lines[0]
    cfg_fields = dict(head["config"])
    cfg_fields["obstacle_size_range"] = tuple(cfg_fields["obstacle_size_range"])
    config = GameConfig(**cfg_fields)
    if head.get("config_hash") != config_hash(asdict(config)):
        raise CorruptRecord("config hash mismatch")
    record = EpisodeRecord(
        config=config,
        seed=head["seed"],
        pursuer_topology=head.get("pursuer_topology"),
        evader_topology=head.get("evader_topology"),
    )
    for row in lines[1:]:
        kind = row.get("kind")
        if kind == "step":
            row.pop("kind")
            row["pursuers"] = [tuple(p) for p in row["pursuers"]]
            row["evaders"] = [tuple(p) for p in row["evaders"]]
            try:
                record.steps.append(StepEntry(**row))
            except TypeError as exc:
                raise CorruptRecord(f"bad step row: {exc}") from exc
        elif kind == "rewards":
            record.terminal_rewards = row["terminal_rewards"]
        else:
            raise CorruptRecord(f"unknown row kind {kind!r}")
    return record


def resimulate(record: EpisodeRecord):
    """Drive a fresh game with the recorded actions; verify each step.

    Returns the final (status, rewards).  Raises CorruptRecord if the
    trajectory diverges from the recorded one, which would mean the
    record or the engine is broken.
    """
    state = record.initial_state()
    rewards = {a: 0.0 for a in state.agent_ids()}
    for entry in record.steps:
        live = state.live_agents()
        actions = {a: Action(entry.actions[a]) for a in live}
        state, rewards, status = env_step(
            state, actions, max_steps=record.config.max_steps
        )
        if (
            list(state.pursuer_positions) != entry.pursuers
            or list(state.evader_positions) != entry.evaders
            or list(state.evader_captured) != entry.captured
            or status.value != entry.status
        ):
            raise CorruptRecord(f"divergence at step {entry.step}")
    return state.status, rewards
