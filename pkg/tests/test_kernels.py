"""The compiled and numpy kernel backends must be interchangeable."""

import numpy as np
import pytest

from subgoal_irl.kernels import _npcore

from conftest import random_policy, random_stochastic_mdp

try:
    from subgoal_irl.kernels import _ccore
except ImportError:
    _ccore = None

needs_ccore = pytest.mark.skipif(_ccore is None, reason="compiled core not built")


def _mdp_args(mdp):
    return mdp.indptr, mdp.succ_states, mdp.succ_probs


@needs_ccore
def test_soft_value_iteration_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(25):
        s = int(rng.integers(2, 12))
        a = int(rng.integers(1, 5))
        mdp = random_stochastic_mdp(rng, s, a, discount=float(rng.random()))
        reward = rng.normal(size=s) * 3
        horizon = int(rng.integers(1, 20))
        got_c = _ccore.soft_value_iteration(reward, mdp.discount, horizon, 1e-6,
                                            *_mdp_args(mdp), a)
        got_np = _npcore.soft_value_iteration(reward, mdp.discount, horizon, 1e-6,
                                              *_mdp_args(mdp), a)
        assert got_c[2] == got_np[2]  # same sweep count
        assert np.max(np.abs(got_c[0] - got_np[0])) < 1e-12
        assert np.max(np.abs(got_c[1] - got_np[1])) < 1e-12


@needs_ccore
def test_propagation_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(25):
        s = int(rng.integers(2, 12))
        a = int(rng.integers(1, 5))
        mdp = random_stochastic_mdp(rng, s, a)
        pol = random_policy(rng, s, a)
        p0 = rng.random(s)
        p0 /= p0.sum()
        horizon = int(rng.integers(1, 12))
        got_c = _ccore.propagate_visitation(p0, pol.probs, horizon, *_mdp_args(mdp))
        got_np = _npcore.propagate_visitation(p0, pol.probs, horizon, *_mdp_args(mdp))
        assert np.max(np.abs(got_c - got_np)) < 1e-13


def test_backend_selection_reports_a_name():
    from subgoal_irl import kernels
    assert kernels.BACKEND in ("cython", "numpy")
