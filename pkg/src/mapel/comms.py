"""Situation-report topologies and per-step flag exchange.

A team is a graph of agents.  P2PSR connects every pair (dense
communication); RSR arranges the team in a random ring fixed for the
episode, so each agent hears only its two neighbors.  The payload is a
single bit per agent: 1 when an opponent or the target is inside that
agent's observation space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import GameError, UnknownAgent
from .sensing import Observation

P2PSR = "p2psr"
RSR = "rsr"


@dataclass(frozen=True)
class Topology:
    kind: str
    n_agents: int
    message_edges: frozenset[tuple[int, int]]
    ring: tuple[int, ...] | None = None  # cyclic agent order, RSR only

    @property
    def temporal_edges(self) -> tuple[tuple[int, int], ...]:
        """Per-agent self-loops carrying recurrent state across steps."""
        return tuple((i, i) for i in range(self.n_agents))

    def report_length(self) -> int:
        if self.kind == P2PSR:
            return self.n_agents - 1
        return 2


def build_topology(kind: str, n: int, rng: np.random.Generator) -> Topology:
    """Construct the message graph for a team of n agents.

    The RSR ring is a uniformly random cyclic order drawn from ``rng`` and
    stays fixed for the whole episode.  For n <= 3 the RSR edge set equals
    the complete graph, so the two methods coincide there.
    """
    if n < 1:
        raise GameError(f"team size must be >= 1, got {n}")
    if kind == P2PSR:
        edges = frozenset(
            (i, j) for i in range(n) for j in range(i + 1, n)
        )
        return Topology(kind=P2PSR, n_agents=n, message_edges=edges)
    if kind != RSR:
        raise GameError(f"unknown topology kind {kind!r}")
    ring = tuple(int(i) for i in rng.permutation(n))
    edges = set()
    for k in range(n):
        a, b = ring[k], ring[(k + 1) % n]
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return Topology(kind=RSR, n_agents=n, message_edges=frozenset(edges), ring=ring)


def report_flag(observation: Observation) -> int:
    """1 iff an opponent is visible or a target cell lies inside the mask."""
    planes = observation.planes
    if planes[4].any():
        return 1
    if (planes[0] & planes[3]).any():
        return 1
    return 0


def gather(topology: Topology, flags: np.ndarray | list[int], agent: int) -> np.ndarray:
    """Collect the report vector agent receives this step.

    P2PSR: the other agents' flags in ascending sender order.  RSR: the
    flags of the ring predecessor and successor; with a 2-agent ring the
    single peer's flag is duplicated to keep the input width fixed.
    """
    flags = np.asarray(flags, dtype=np.uint8)
    n = topology.n_agents
    if flags.shape != (n,):
        raise GameError(f"expected {n} flags, got shape {flags.shape}")
    if not 0 <= agent < n:
        raise UnknownAgent(f"agent index {agent} out of range for team of {n}")
    if topology.kind == P2PSR:
        return np.concatenate([flags[:agent], flags[agent + 1 :]])
    if n == 1:
        return np.zeros(2, dtype=np.uint8)
    if n == 2:
        peer = flags[1 - agent]
        return np.array([peer, peer], dtype=np.uint8)
    k = topology.ring.index(agent)
    pred = topology.ring[k - 1]
    succ = topology.ring[(k + 1) % n]
    return np.array([flags[pred], flags[succ]], dtype=np.uint8)
