"""Safety-watch demo: local training, round flow, frame filtering."""

import numpy as np
import pytest

from comverse.csw.data import SampleBatch, anomaly_threshold, filter_frames, make_batch, make_ground_truth
from comverse.csw.demo import (
    ACCUMULATOR_OBJECT,
    AGGREGATE_OBJECT,
    build_deployment,
    child_train_step,
    distribute_model,
    drive_contributions,
    parent_apply_update,
    run_round,
    run_training,
)
from comverse.csw.training import Model, local_train, loss, pooled
from comverse.errors import InvalidArgument


class TestLocalTrain:
    def test_closed_form_at_zero_weights(self):
        batch = SampleBatch(features=np.array([[1.0, 0.0]]), labels=np.array([2.0]))
        grad = local_train(Model(weights=np.zeros(2)), batch)
        assert np.allclose(grad.values, [-2.0, 0.0])

    def test_gradient_vanishes_at_ground_truth(self):
        # Derived: a noiseless batch fit exactly by the generator weights.
        truth = make_ground_truth(8, seed=3)
        batch = make_batch(truth, 50, seed=4, noise=0.0)
        grad = local_train(Model(weights=truth), batch)
        assert np.linalg.norm(grad.values) < 1e-9

    def test_deterministic(self):
        truth = make_ground_truth(4, seed=1)
        batch = make_batch(truth, 10, seed=2)
        model = Model(weights=np.ones(4))
        g1 = local_train(model, batch)
        g2 = local_train(model, batch)
        assert np.array_equal(g1.values, g2.values)

    def test_empty_batch_rejected(self):
        empty = SampleBatch(features=np.zeros((0, 2)), labels=np.zeros(0))
        with pytest.raises(InvalidArgument):
            local_train(Model(weights=np.zeros(2)), empty)

    def test_nonfinite_model_rejected(self):
        with pytest.raises(InvalidArgument):
            Model(weights=np.array([np.inf, 0.0]))


class TestFilterFrames:
    def _batch(self):
        return make_batch(make_ground_truth(4, seed=9), 30, seed=10)

    def test_pass_all_is_identity(self):
        batch = self._batch()
        out = filter_frames(batch, lambda x, y: True)
        assert np.array_equal(out.features, batch.features)

    def test_pass_none_is_empty(self):
        assert len(filter_frames(self._batch(), lambda x, y: False)) == 0

    def test_threshold_matches_brute_force(self):
        batch = self._batch()
        predicate = anomaly_threshold(1.0)
        out = filter_frames(batch, predicate)
        # Oracle: independent row-by-row scan.
        expected = [i for i in range(len(batch)) if abs(batch.labels[i]) > 1.0]
        assert np.array_equal(out.features, batch.features[expected])
        assert np.array_equal(out.labels, batch.labels[expected])


def centralized_descent(batches, rounds, eta, dim):
    """Oracle: plain full-batch gradient descent over each child's mean."""
    w = np.zeros(dim)
    for _ in range(rounds):
        grads = []
        for batch in batches:
            residual = batch.labels - batch.features @ w
            grads.append(-(batch.features.T @ residual) / len(batch))
        w = w - eta * (np.sum(grads, axis=0) / len(batches))
    return w


class TestFederatedRounds:
    def test_single_child_equals_local_step(self):
        dep = build_deployment(children=1, dim=4, samples=20, seed=6, topk=0)
        assert run_round(dep)
        batch = dep.batches[0]
        grad = local_train(Model(weights=np.zeros(4)), batch)
        expected = -0.1 * grad.values
        assert np.max(np.abs(dep.model().weights - expected)) < 1e-9

    def test_three_children_match_centralized_oracle(self):
        dep = build_deployment(children=3, dim=8, samples=50, seed=6, topk=0)
        run_training(dep, rounds=10)
        want = centralized_descent(dep.batches, 10, 0.1, 8)
        assert np.max(np.abs(dep.model().weights - want)) <= 1e-9

    def test_round_counter_increments_once_per_round(self):
        dep = build_deployment(children=2, dim=4, samples=10, seed=8, topk=0)
        run_training(dep, rounds=3)
        assert dep.model().round == 3
        assert dep.parent.fedcore.store.get(ACCUMULATOR_OBJECT).version == 3

    def test_pause_mid_round_completes_over_remaining(self):
        dep = build_deployment(children=3, dim=4, samples=10, seed=9, topk=0)
        assert run_round(dep)
        dep.net.settle()
        distribute_model(dep)
        dep.net.settle()
        for kid in dep.children:
            child_train_step(dep, kid)
        state = dep.parent.fedcore.open_round()
        assert len(state.participants) == 3
        dep.net.settle()
        dep.children[1].share(dep.community_id.value, [])  # pause mid-round
        dep.net.settle()
        reopened = dep.parent.fedcore.current_round
        assert reopened.attempt == 2
        assert [p.value for p in reopened.participants] == [
            "cam-00.watch-hq", "cam-02.watch-hq",
        ]
        for _ in range(4):
            drive_contributions(dep)
            if dep.parent.fedcore.current_round is None:
                break
        assert dep.parent.fedcore.current_round is None
        _, agg = dep.parent.fedcore.get_object(AGGREGATE_OBJECT)
        assert agg["contributors"] == 2
        parent_apply_update(dep)
        assert dep.model().round == 2

    def test_paused_child_excluded_at_round_open(self):
        dep = build_deployment(children=3, dim=4, samples=10, seed=10, topk=0)
        dep.children[0].share(dep.community_id.value, [])
        dep.net.settle()
        assert run_round(dep)
        _, agg = dep.parent.fedcore.get_object(AGGREGATE_OBJECT)
        assert agg["contributors"] == 2

    def test_loss_decreases_with_topk_compression(self):
        dep = build_deployment(children=3, dim=8, samples=50, seed=11, topk=4)
        history = run_training(dep, rounds=10)
        assert history[-1] < history[0]

    def test_topk_half_dim_within_10x_of_uncompressed(self):
        plain = build_deployment(children=3, dim=8, samples=50, seed=0, topk=0)
        run_training(plain, rounds=50)
        compressed = build_deployment(children=3, dim=8, samples=50, seed=0, topk=4)
        run_training(compressed, rounds=50)
        assert compressed.loss_history[-1] <= 10 * plain.loss_history[-1]

    def test_mid_round_model_loss_history_matches_pooled_loss(self):
        dep = build_deployment(children=2, dim=4, samples=10, seed=12, topk=0)
        run_training(dep, rounds=2)
        assert dep.loss_history[-1] == pytest.approx(
            loss(dep.model().weights, pooled(dep.batches))
        )


class TestDemoCli:
    def test_cli_emits_loss_csv(self, tmp_path):
        from click.testing import CliRunner
        from comverse.csw.demo import main

        out = tmp_path / "loss.csv"
        result = CliRunner().invoke(
            main,
            ["--children", "2", "--rounds", "3", "--dim", "4", "--samples", "10",
             "--seed", "5", "--out", str(out)],
        )
        assert result.exit_code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "round,loss"
        assert len(lines) == 4
