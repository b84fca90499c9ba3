import numpy as np
import pytest

from autoclip.errors import InvalidArgumentError, InvalidStateError
from autoclip.models import ModelSpec, gen_synthetic
from autoclip.optimizers import (ADAPTIVE, NON_ADAPTIVE, OptimizerConfig,
                                 equivalence_pair_run, init_state,
                                 paired_config, step)

SPEC = ModelSpec("logistic")
DATA = gen_synthetic("gauss2class", 0, 100, dims=5)


class TestStepArithmetic:
    def test_sgd(self):
        cfg = OptimizerConfig("sgd", 0.1)
        w = np.array([1.0, -2.0])
        g = np.array([10.0, 5.0])
        w2, st = step(cfg, init_state(cfg, 2), w, g)
        np.testing.assert_allclose(w2, [0.0, -2.5])
        assert st.t == 1

    def test_sgd_coupled_weight_decay(self):
        cfg = OptimizerConfig("sgd", 0.1, weight_decay=0.5)
        w = np.array([2.0])
        w2, _ = step(cfg, init_state(cfg, 1), w, np.array([1.0]))
        # grad becomes 1 + 0.5*2 = 2
        np.testing.assert_allclose(w2, [2.0 - 0.1 * 2.0])

    def test_sgd_decoupled_weight_decay(self):
        cfg = OptimizerConfig("sgd", 0.1, weight_decay=0.5, decoupled_wd=True)
        w = np.array([2.0])
        w2, _ = step(cfg, init_state(cfg, 1), w, np.array([1.0]))
        np.testing.assert_allclose(w2, [2.0 - 0.1 * 1.0 - 0.1 * 0.5 * 2.0])

    def test_heavyball_accumulates(self):
        cfg = OptimizerConfig("heavyball", 1.0, momentum=0.5)
        w = np.zeros(1)
        st = init_state(cfg, 1)
        g = np.ones(1)
        w, st = step(cfg, st, w, g)   # m=1, w=-1
        w, st = step(cfg, st, w, g)   # m=1.5, w=-2.5
        np.testing.assert_allclose(w, [-2.5])

    def test_nag_lookahead(self):
        cfg = OptimizerConfig("nag", 1.0, momentum=0.5)
        st = init_state(cfg, 1)
        w, st = step(cfg, st, np.zeros(1), np.ones(1))
        # m=1, update = g + 0.5*m = 1.5
        np.testing.assert_allclose(w, [-1.5])

    def test_adagrad_first_step_is_near_sign(self):
        cfg = OptimizerConfig("adagrad", 0.1)
        w, _ = step(cfg, init_state(cfg, 2), np.zeros(2),
                    np.array([4.0, -0.25]))
        np.testing.assert_allclose(w, [-0.1, 0.1], rtol=1e-9)

    def test_adam_first_step_is_near_sign(self):
        cfg = OptimizerConfig("adam", 0.01)
        w, _ = step(cfg, init_state(cfg, 2), np.zeros(2),
                    np.array([300.0, -1e-3]))
        np.testing.assert_allclose(w, [-0.01, 0.01], rtol=1e-6)

    def test_step_does_not_mutate_inputs(self):
        cfg = OptimizerConfig("adam", 0.01)
        st = init_state(cfg, 3)
        w = np.ones(3)
        g = np.ones(3)
        step(cfg, st, w, g)
        assert np.all(w == 1.0) and np.all(st.m == 0.0) and st.t == 0

    def test_state_kind_mismatch(self):
        cfg_a = OptimizerConfig("sgd", 0.1)
        cfg_b = OptimizerConfig("adam", 0.1)
        with pytest.raises(InvalidStateError):
            step(cfg_a, init_state(cfg_b, 2), np.zeros(2), np.zeros(2))

    def test_dim_mismatch(self):
        cfg = OptimizerConfig("sgd", 0.1)
        with pytest.raises(InvalidArgumentError):
            step(cfg, init_state(cfg, 2), np.zeros(2), np.zeros(3))

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            OptimizerConfig("sgd", 0.0)
        with pytest.raises(InvalidArgumentError):
            OptimizerConfig("adam", 0.1, beta1=1.0)
        with pytest.raises(InvalidArgumentError):
            OptimizerConfig("lamb", 0.1)


class TestPairedConfig:
    def test_non_adaptive_scaling(self):
        cfg = OptimizerConfig("sgd", eta=0.2, weight_decay=0.06)
        twin = paired_config(cfg, 0.5)
        assert twin.eta == 0.2 * 0.5
        assert twin.weight_decay == 0.06 / 0.5

    def test_adaptive_coupled_scaling(self):
        cfg = OptimizerConfig("adam", eta=0.2, weight_decay=0.06)
        twin = paired_config(cfg, 0.5)
        assert twin.eta == 0.2
        assert twin.weight_decay == 0.06 / 0.5

    def test_decoupled_unchanged(self):
        cfg = OptimizerConfig("adamw", eta=0.2, weight_decay=0.06)
        assert paired_config(cfg, 0.5) == cfg


@pytest.mark.parametrize("kind", NON_ADAPTIVE)
def test_threshold_free_twin_non_adaptive(kind):
    dev = equivalence_pair_run(kind, 100, 3, 0.6, 0.05, 0.02, 0.01,
                               SPEC, DATA)
    assert dev <= 1e-9


@pytest.mark.parametrize("kind", ADAPTIVE)
def test_threshold_free_twin_adaptive(kind):
    dev = equivalence_pair_run(kind, 100, 3, 0.6, 0.05, 0.02, 0.01,
                               SPEC, DATA)
    assert dev <= 1e-6


def test_min_clip_pairing_is_not_an_identity():
    # with unclipped samples present the rescaled min-clip pairing diverges
    dev = equivalence_pair_run("sgd", 100, 3, 0.6, 0.05, 0.02, 0.01,
                               SPEC, DATA, negative_control=True)
    assert dev > 1e-9


def test_equivalence_run_deterministic():
    a = equivalence_pair_run("adam", 30, 9, 1.1, 0.02, 0.01, 0.01, SPEC, DATA)
    b = equivalence_pair_run("adam", 30, 9, 1.1, 0.02, 0.01, 0.01, SPEC, DATA)
    assert a == b
