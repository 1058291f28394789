import pytest

from subgoal_irl.environments import build_from_layout
from subgoal_irl.layouts import load_carpark_layout, load_grid_layout


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {verdict}", flush=True)


def random_stochastic_mdp(rng, num_states=5, num_actions=3, discount=0.9):
    """Dense random MDP whose transition rows are Dirichlet-ish draws."""
    from subgoal_irl.mdp import TabularMdp
    t = rng.random((num_states, num_actions, num_states)) + 1e-3
    t /= t.sum(axis=2, keepdims=True)
    return TabularMdp.from_dense(t, discount=discount)


def random_policy(rng, num_states, num_actions):
    from subgoal_irl.mdp import Policy
    p = rng.random((num_states, num_actions)) + 1e-3
    p /= p.sum(axis=1, keepdims=True)
    return Policy(probs=p)


@pytest.fixture(scope="session")
def tworoom12():
    return build_from_layout(load_grid_layout("grid12_tworoom.txt"))


@pytest.fixture(scope="session")
def corridor8():
    return build_from_layout(load_grid_layout("grid8_corridor.txt"))


@pytest.fixture(scope="session")
def rooms16():
    return build_from_layout(load_grid_layout("grid16_rooms.txt"))


@pytest.fixture(scope="session")
def rooms32():
    return build_from_layout(load_grid_layout("grid32_rooms.txt"))


@pytest.fixture(scope="session")
def carpark():
    return build_from_layout(load_carpark_layout("carpark20x16.cfg"))


def mdp_graph(mdp):
    """Independent view of the deterministic transition graph for oracles."""
    import networkx as nx
    g = nx.DiGraph()
    g.add_nodes_from(range(mdp.num_states))
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            succ, probs = mdp.successors(s, a)
            for s2, p in zip(succ, probs):
                if p > 0.5 and s2 != s:
                    g.add_edge(s, int(s2))
    return g
