import numpy as np
import pytest

from mapel.comms import P2PSR, RSR, Topology, build_topology, gather, report_flag
from mapel.env import GameError, UnknownAgent
from mapel.sensing import observe

from conftest import make_grid, make_state


def _rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------- build_topology

def test_p2psr_four_agents_has_six_edges():
    topo = build_topology(P2PSR, 4, _rng())
    assert len(topo.message_edges) == 6
    assert topo.report_length() == 3


def test_rsr_five_agents_is_a_single_cycle():
    topo = build_topology(RSR, 5, _rng(4))
    assert len(topo.message_edges) == 5
    degree = {i: 0 for i in range(5)}
    for a, b in topo.message_edges:
        degree[a] += 1
        degree[b] += 1
    assert all(d == 2 for d in degree.values())
    # walk the ring: all nodes visited exactly once before closing
    assert sorted(topo.ring) == list(range(5))


def test_rsr_two_agents_single_edge():
    topo = build_topology(RSR, 2, _rng())
    assert topo.message_edges == frozenset({(0, 1)})


def test_rsr_three_agents_equals_complete_graph():
    topo = build_topology(RSR, 3, _rng(7))
    full = build_topology(P2PSR, 3, _rng())
    assert topo.message_edges == full.message_edges


def test_edge_count_formulas_hold_for_all_small_teams():
    for n in range(2, 17):
        p = build_topology(P2PSR, n, _rng(n))
        assert len(p.message_edges) == n * (n - 1) // 2
        r = build_topology(RSR, n, _rng(n))
        expected = n if n >= 3 else 1
        assert len(r.message_edges) == expected
        assert len(p.temporal_edges) == n
        assert len(r.temporal_edges) == n


def test_ring_is_random_but_seeded():
    rings = {build_topology(RSR, 6, _rng(s)).ring for s in range(30)}
    assert len(rings) > 5
    assert build_topology(RSR, 6, _rng(3)).ring == build_topology(RSR, 6, _rng(3)).ring


def test_build_topology_rejects_bad_input():
    with pytest.raises(GameError):
        build_topology(P2PSR, 0, _rng())
    with pytest.raises(GameError):
        build_topology("star", 4, _rng())


# ------------------------------------------------------------- report_flag

def test_flag_set_when_opponent_visible():
    s = make_state(make_grid(32, 32, targets=[(30, 30)]), [(2, 2)], [(4, 4)])
    obs = observe(s, "p0", 9, 9)
    assert report_flag(obs) == 1


def test_flag_set_when_target_in_mask():
    s = make_state(make_grid(32, 32, targets=[(4, 4)]), [(2, 2)], [(30, 30)])
    obs = observe(s, "p0", 9, 9)
    assert report_flag(obs) == 1


def test_flag_zero_when_mask_empty_of_both():
    s = make_state(make_grid(32, 32, targets=[(30, 30)]), [(2, 2)], [(28, 28)])
    obs = observe(s, "p0", 9, 9)
    assert report_flag(obs) == 0


# ------------------------------------------------------------------ gather

def test_gather_p2psr_excludes_self():
    topo = build_topology(P2PSR, 4, _rng())
    out = gather(topo, [1, 0, 0, 1], agent=0)
    assert out.tolist() == [0, 0, 1]
    assert gather(topo, [1, 0, 0, 1], agent=3).tolist() == [1, 0, 0]


def test_gather_rsr_is_predecessor_then_successor():
    topo = build_topology(RSR, 5, _rng(11))
    flags = [0, 1, 0, 1, 1]
    for agent in range(5):
        k = topo.ring.index(agent)
        pred, succ = topo.ring[k - 1], topo.ring[(k + 1) % 5]
        assert gather(topo, flags, agent).tolist() == [flags[pred], flags[succ]]


def test_gather_rsr_two_agents_duplicates_peer():
    topo = build_topology(RSR, 2, _rng())
    assert gather(topo, [1, 0], agent=0).tolist() == [0, 0]
    assert gather(topo, [1, 0], agent=1).tolist() == [1, 1]


def test_gather_single_agent():
    p = build_topology(P2PSR, 1, _rng())
    assert gather(p, [1], agent=0).size == 0
    r = build_topology(RSR, 1, _rng())
    assert gather(r, [1], agent=0).tolist() == [0, 0]


def test_gather_stable_within_episode():
    topo = build_topology(RSR, 6, _rng(9))
    flags = [1, 0, 1, 0, 1, 0]
    first = [gather(topo, flags, a).tolist() for a in range(6)]
    again = [gather(topo, flags, a).tolist() for a in range(6)]
    assert first == again


def test_gather_errors():
    topo = build_topology(P2PSR, 3, _rng())
    with pytest.raises(UnknownAgent):
        gather(topo, [0, 1, 0], agent=5)
    with pytest.raises(GameError):
        gather(topo, [0, 1], agent=0)
