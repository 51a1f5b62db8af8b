import numpy as np
import pytest
import torch

from GSDM.datasets import random_orthonormal
from GSDM.exceptions import ArchitectureMismatchError, FormatError, PreconditionError
from GSDM.graphs import Graph, decompose_all
from GSDM.schedules import NoiseSchedule
from GSDM.scorenet import (
    CHECKPOINT_MAGIC,
    NoisyExample,
    ScoreNetArch,
    ScoreNetParams,
    adjacency_score,
    batch_loss,
    feature_score,
    grad_check,
    joint_scores,
    load_checkpoint,
    loss_and_grads,
    relative_l2,
    save_checkpoint,
    spectrum_score,
)


def _inputs(n, d, rng):
    return rng.standard_normal((n, d)), rng.standard_normal(n), random_orthonormal(n, rng)


def _small_records(rng, d=2):
    cycle = np.roll(np.eye(4), 1, axis=1)
    star = np.zeros((5, 5))
    star[0, 1:] = star[1:, 0] = 1.0
    graphs = [
        Graph(X=rng.standard_normal((4, d)), A=cycle + cycle.T),
        Graph(X=rng.standard_normal((5, d)), A=star),
    ]
    return decompose_all(graphs)


class TestScores:
    def test_zero_final_layer_gives_zero_scores(self, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=3, hidden=8, time_dim=4))
        X, lam, U = _inputs(6, 3, rng)
        s_x, s_lam = joint_scores(params, X, lam, U, 0.5)
        assert np.all(s_x == 0.0) and np.all(s_lam == 0.0)
        assert s_x.shape == (6, 3) and s_lam.shape == (6,)

    def test_initialization_is_seeded(self):
        arch = ScoreNetArch(d=2, hidden=8, time_dim=4, zero_final=False)
        a = ScoreNetParams.initialize(arch, seed=11)
        b = ScoreNetParams.initialize(arch, seed=11)
        c = ScoreNetParams.initialize(arch, seed=12)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))

    def test_eigenpair_permutation_equivariance(self, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=8, time_dim=4, zero_final=False), seed=1)
        X, lam, U = _inputs(7, 2, rng)
        perm = rng.permutation(7)
        base = spectrum_score(params, X, lam, U, 0.3)
        permuted = spectrum_score(params, X, lam[perm], U[:, perm], 0.3)
        np.testing.assert_allclose(permuted, base[perm], atol=1e-12)
        np.testing.assert_allclose(
            feature_score(params, X, lam[perm], U[:, perm], 0.3), feature_score(params, X, lam, U, 0.3), atol=1e-12
        )

    def test_node_permutation_equivariance(self, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=8, time_dim=4, zero_final=False), seed=2)
        X, lam, U = _inputs(6, 2, rng)
        P = np.eye(6)[rng.permutation(6)]
        s_x, s_lam = joint_scores(params, X, lam, U, 0.7)
        p_x, p_lam = joint_scores(params, P @ X, lam, P @ U, 0.7)
        np.testing.assert_allclose(p_x, P @ s_x, atol=1e-12)
        np.testing.assert_allclose(p_lam, s_lam, atol=1e-12)

    @pytest.mark.parametrize("n", [5, 17, 40])
    def test_one_network_serves_every_size(self, n, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=3, hidden=8, time_dim=4, zero_final=False))
        s_x, s_lam = joint_scores(params, *_inputs(n, 3, rng), 0.5)
        assert s_x.shape == (n, 3) and s_lam.shape == (n,)
        assert np.all(np.isfinite(s_x)) and np.all(np.isfinite(s_lam))

    def test_finite_on_large_inputs(self, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=8, time_dim=4, zero_final=False))
        X, lam, U = _inputs(8, 2, rng)
        s_x, s_lam = joint_scores(params, 1e3 * X, 1e3 * lam, U, 1.0)
        assert np.all(np.isfinite(s_x)) and np.all(np.isfinite(s_lam))

    def test_featureless_graphs(self, rng):
        params = ScoreNetParams.initialize(ScoreNetArch(d=0, hidden=8, time_dim=4, zero_final=False))
        assert params.theta is None
        s_x, s_lam = joint_scores(params, np.zeros((5, 0)), *_inputs(5, 0, rng)[1:], 0.2)
        assert s_x.shape == (5, 0) and np.all(np.isfinite(s_lam))

    @pytest.mark.parametrize(
        "X, lam, U, t",
        [
            (np.zeros((3, 1)), np.zeros(4), np.eye(4), 0.5),
            (np.zeros((4, 1)), np.zeros(4), np.eye(3), 0.5),
            (np.zeros((4, 1)), np.zeros(4), np.eye(4), 1.5),
            (np.zeros((4, 1)), np.array([0.0, np.nan, 0.0, 0.0]), np.eye(4), 0.5),
        ],
    )
    def test_rejects_bad_inputs(self, X, lam, U, t):
        params = ScoreNetParams.initialize(ScoreNetArch(d=1, hidden=4, time_dim=4))
        with pytest.raises(PreconditionError):
            spectrum_score(params, X, lam, U, t)

    def test_adjacency_score_is_symmetric_with_zero_diagonal(self, rng):
        params = ScoreNetParams.initialize(
            ScoreNetArch(d=2, hidden=8, time_dim=4, variant="fullrank", zero_final=False), seed=4
        )
        A = rng.standard_normal((6, 6))
        s_x, S = adjacency_score(params, rng.standard_normal((6, 2)), A + A.T, 0.4)
        assert s_x.shape == (6, 2)
        np.testing.assert_array_equal(S, S.T)
        assert np.all(np.diag(S) == 0.0)

    def test_invalid_architecture(self):
        with pytest.raises(PreconditionError):
            ScoreNetArch(d=1, time_dim=5)
        with pytest.raises(PreconditionError):
            ScoreNetArch(d=1, variant="dense")


class TestLoss:
    def test_zero_network_loss_is_noise_power(self, rng):
        records = _small_records(rng)
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=4, time_dim=4))
        batch = [NoisyExample.draw(r, rng) for r in records]
        parts = batch_loss(params, batch, NoiseSchedule())
        expected_x = np.mean([np.mean(e.eps_X ** 2) for e in batch])
        expected_l = np.mean([np.mean(e.eps_Lambda ** 2) for e in batch])
        assert float(parts.loss_X) == pytest.approx(expected_x, rel=1e-12)
        assert float(parts.loss_Lambda) == pytest.approx(expected_l, rel=1e-12)

    def test_empty_batch(self):
        params = ScoreNetParams.initialize(ScoreNetArch(d=1, hidden=4, time_dim=4))
        with pytest.raises(PreconditionError):
            batch_loss(params, [], NoiseSchedule())

    def test_gradients_have_parameter_shapes(self, rng):
        records = _small_records(rng)
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=4, time_dim=4, zero_final=False))
        loss, grads = loss_and_grads(params, [NoisyExample.draw(r, rng) for r in records], NoiseSchedule())
        assert np.isfinite(loss)
        assert set(grads) == {name for name, _ in params.named_parameters()}
        for name, p in params.named_parameters():
            assert grads[name].shape == tuple(p.shape)

    @pytest.mark.parametrize("variant", ["spectral", "fullrank"])
    def test_gradient_check(self, variant, rng):
        records = _small_records(rng)
        params = ScoreNetParams.initialize(
            ScoreNetArch(d=2, hidden=4, time_dim=4, variant=variant, zero_final=False), seed=5
        )
        batch = [NoisyExample.draw(r, rng, variant=variant) for r in records]
        assert grad_check(params, batch, NoiseSchedule()) < 1e-4

    def test_coarse_step_degrades_gradient_check(self, rng):
        records = _small_records(rng)
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=4, time_dim=4, zero_final=False), seed=6)
        batch = [NoisyExample.draw(r, rng) for r in records]
        schedule = NoiseSchedule()
        assert grad_check(params, batch, schedule, h=0.5) > grad_check(params, batch, schedule, h=1e-5)

    def test_gradient_check_rejects_bad_step(self, rng):
        records = _small_records(rng)
        params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=4, time_dim=4))
        with pytest.raises(PreconditionError):
            grad_check(params, [NoisyExample.draw(records[0], rng)], NoiseSchedule(), h=0.0)


class TestCheckpoint:
    def _trained(self, rng):
        arch = ScoreNetArch(d=2, hidden=4, time_dim=4, zero_final=False)
        params = ScoreNetParams.initialize(arch, seed=8)
        optimizer = torch.optim.Adam(params.parameters(), lr=1e-2)
        batch = [NoisyExample.draw(r, rng) for r in _small_records(rng)]
        for _ in range(2):
            optimizer.zero_grad()
            batch_loss(params, batch, NoiseSchedule()).total.backward()
            optimizer.step()
        return arch, params, optimizer

    def test_round_trip(self, rng, tmp_path):
        arch, params, optimizer = self._trained(rng)
        path = tmp_path / "model.ckpt"
        save_checkpoint(str(path), params, optimizer, step=2, extra={"note": "unit"})
        restored = load_checkpoint(str(path), arch)
        assert restored.step == 2
        assert restored.extra == {"note": "unit"}
        assert restored.optimizer["name"] == "adam"
        for a, b in zip(params.parameters(), restored.params.parameters()):
            assert torch.equal(a.detach(), b)
        for p, (m1, m2) in zip(params.parameters(), restored.moments):
            state = optimizer.state[p]
            np.testing.assert_array_equal(m1, state["exp_avg"].numpy())
            np.testing.assert_array_equal(m2, state["exp_avg_sq"].numpy())

    def test_without_optimizer(self, rng, tmp_path):
        _, params, _ = self._trained(rng)
        path = tmp_path / "bare.ckpt"
        save_checkpoint(str(path), params)
        restored = load_checkpoint(str(path))
        assert restored.moments is None and restored.optimizer is None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOT-A-CHECKPOINT\n{}\n")
        with pytest.raises(FormatError) as info:
            load_checkpoint(str(path))
        assert info.value.line == 1

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "corrupt.ckpt"
        path.write_bytes(CHECKPOINT_MAGIC + b" v1\n{not json\n")
        with pytest.raises(FormatError):
            load_checkpoint(str(path))

    def test_truncated_data(self, rng, tmp_path):
        _, params, _ = self._trained(rng)
        path = tmp_path / "short.ckpt"
        save_checkpoint(str(path), params)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_checkpoint(str(path))

    def test_architecture_mismatch(self, rng, tmp_path):
        _, params, _ = self._trained(rng)
        path = tmp_path / "model.ckpt"
        save_checkpoint(str(path), params)
        with pytest.raises(ArchitectureMismatchError):
            load_checkpoint(str(path), ScoreNetArch(d=2, hidden=16, time_dim=4))


def test_relative_l2():
    assert relative_l2(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 0.0
    assert relative_l2(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert relative_l2(np.zeros(2), np.zeros(2)) == 0.0
    assert relative_l2(np.ones(2), np.zeros(2)) == float("inf")
