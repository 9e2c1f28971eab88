"""Round loop wiring: aggregation, reward, fairness, full small runs."""

import numpy as np
import pytest

from fedaa import config, nn, orchestrator
from fedaa.data import LabeledDataset
from fedaa.clients import ClientRecord
from fedaa.errors import ConfigError, InternalError, NumericError
from fedaa.selection import top_count


def small_cfg(**overrides):
    """A config tiny enough to run in well under a second."""
    base = dict(
        dataset=config.DatasetConfig(
            kind="synthetic00", num_clients=6, samples_per_client=20
        ),
        rounds=3,
        local=nn.SgdConfig(learning_rate=0.05, batch_size=8, epochs=1),
        ddpg=config.DdpgConfig(hidden=16, warmup=2, batch_size=4),
        m_percent=50.0,
    )
    base.update(overrides)
    return config.ExperimentConfig(**base)


# ------------------------------------------------------------ primitives


def test_aggregate_hand_example():
    uploads = [np.array([1.0, 2.0]), np.array([3.0, 6.0])]
    merged = orchestrator.aggregate(uploads, np.array([0.25, 0.75]))
    assert np.allclose(merged, [2.5, 5.0], atol=1e-15)
    same = orchestrator.aggregate(uploads, np.array([1.0, 0.0]))
    assert np.array_equal(same, uploads[0])


def test_aggregate_rejects_bad_weights():
    uploads = [np.zeros(2), np.zeros(2)]
    with pytest.raises(InternalError):
        orchestrator.aggregate(uploads, np.array([0.6, 0.6]))
    with pytest.raises(InternalError):
        orchestrator.aggregate(uploads, np.array([-0.2, 1.2]))
    with pytest.raises(ConfigError, match="2 uploads but 3 weights"):
        orchestrator.aggregate(uploads, np.array([0.5, 0.25, 0.25]))


def test_evaluate_reward_hand_oracle():
    # identity-ish logits: class = argmax(W x) with W selecting feature
    arch = nn.ArchSpec(2, (), 3, output_head="logits")
    params = np.zeros(nn.param_count(arch))
    model = nn.MlpModel(arch, params)
    slices = nn.layer_slices(arch)
    w = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])  # never predicts class 2
    params[slices[0][0]] = w.ravel()
    features = np.array([[2.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 2.0]])
    labels = np.array([0, 1, 1, 1])  # predictions: 0 1 0 1 -> 3/4 correct
    val = LabeledDataset(features, labels, 3)
    acc, per_class = orchestrator.evaluate_reward(model, val)
    assert acc == 0.75
    assert per_class[0] == 1.0
    assert abs(per_class[1] - 2.0 / 3.0) < 1e-12
    assert per_class[2] == 0.0  # absent class scores zero


def test_evaluate_fairness_hand_oracle():
    arch = nn.ArchSpec(1, (), 2, output_head="logits")
    # model A predicts class 1 iff x > 0 strongly; weights [w00 w01], bias
    always_one = np.array([0.0, 1.0, 0.0, 1.0])  # logit1 = x + 1 > logit0 = 0 for x >= 0
    model = nn.MlpModel(arch, always_one)
    feats = np.array([[1.0], [1.0], [1.0], [1.0], [1.0]])
    # client 0: 4/5 labels are 1 -> acc 0.8; client 1: all 1 -> acc 1.0
    c0 = ClientRecord(
        0, "benign", None,
        LabeledDataset(feats, np.array([1, 1, 1, 1, 0]), 2),
        LabeledDataset(feats, np.array([1, 1, 1, 1, 0]), 2),
        model,
    )
    c1 = ClientRecord(
        1, "benign", None,
        LabeledDataset(feats, np.ones(5, dtype=int), 2),
        LabeledDataset(feats, np.ones(5, dtype=int), 2),
        model,
    )
    metrics = orchestrator.evaluate_fairness([c0, c1], model)
    assert abs(metrics.mean_acc - 0.9) < 1e-12
    assert abs(metrics.acc_std - 0.1) < 1e-12  # population std of {0.8, 1.0}
    assert abs(metrics.mean_global_acc - 0.9) < 1e-12
    assert metrics.loss_std > 0.0


def test_fairness_requires_a_benign_client():
    with pytest.raises(ConfigError, match="benign"):
        orchestrator.evaluate_fairness([], nn.MlpModel(nn.ArchSpec(1, (), 2), np.zeros(4)))


def test_sample_participants():
    rng = np.random.default_rng(0)
    assert orchestrator.sample_participants(10, 1.0, rng) == list(range(10))
    half = orchestrator.sample_participants(10, 0.5, np.random.default_rng(1))
    assert len(half) == 5
    assert half == sorted(half)
    assert all(0 <= c < 10 for c in half)
    again = orchestrator.sample_participants(10, 0.5, np.random.default_rng(1))
    assert half == again
    # round-half-up cohort size
    assert len(orchestrator.sample_participants(5, 0.5, np.random.default_rng(2))) == 3
    with pytest.raises(ConfigError):
        orchestrator.sample_participants(10, 0.0, rng)


def test_subsystem_seeds_cover_labels():
    seeds = orchestrator.subsystem_seeds(7)
    assert set(seeds) == set(orchestrator.SUBSYSTEM_LABELS)
    assert len(set(seeds.values())) == len(seeds)
    assert seeds == orchestrator.subsystem_seeds(7)


def test_round_record_validates_weight_count():
    with pytest.raises(InternalError):
        orchestrator.RoundRecord(
            round=0, reward=0.5, mean_benign_acc=0.5, acc_std=0.0, acc_var=0.0,
            loss_std=0.0, mean_global_acc=0.5, selected_ids=[0, 1],
            action=[1.0], per_class_val_acc=[0.5],
        )


# ------------------------------------------------------------ experiments


def test_build_experiment_shapes():
    exp = orchestrator.build_experiment(small_cfg())
    assert len(exp.clients) == 6
    assert exp.cohort_size == 6
    assert exp.arch.input_dim == 60
    assert exp.arch.output_dim == 10
    m = top_count(50.0, 6)
    assert exp.agent.state_dim == m
    assert exp.agent.action_dim == m
    assert len(exp.buffer) == 0
    assert all(c.role == "benign" for c in exp.clients)
    # every client's initial local model matches the broadcast parameters
    for c in exp.clients:
        assert np.array_equal(c.local_model.params, exp.initial_params)


def test_build_experiment_partial_participation_sets_agent_dims():
    cfg = small_cfg(participation_ratio=0.5)
    exp = orchestrator.build_experiment(cfg)
    assert exp.cohort_size == 3
    assert exp.agent.state_dim == top_count(50.0, 3)


def test_build_experiment_fedavg_skips_agent():
    exp = orchestrator.build_experiment(small_cfg(aggregator="fedavg"))
    assert exp.agent is None and exp.buffer is None


def test_run_records_well_formed():
    cfg = small_cfg(rounds=4)
    records = orchestrator.run_experiment(cfg)
    assert len(records) == 4
    m = top_count(cfg.m_percent, 6)
    for t, rec in enumerate(records):
        assert rec.round == t
        assert len(rec.selected_ids) == m
        assert len(rec.action) == m
        assert rec.selected_ids == sorted(rec.selected_ids)
        assert all(0 <= c < 6 for c in rec.selected_ids)
        assert abs(sum(rec.action) - 1.0) < 1e-9
        assert min(rec.action) >= 0.0
        assert 0.0 <= rec.reward <= 1.0
        assert len(rec.per_class_val_acc) == 10
        assert abs(rec.acc_var - rec.acc_std**2) < 1e-15


def test_round_zero_selection_uses_broadcast_copies():
    # identical uploads at round 0: distances all zero, lowest ids win
    cfg = small_cfg()
    records = orchestrator.run_experiment(cfg)
    m = top_count(cfg.m_percent, 6)
    assert records[0].selected_ids == list(range(m))


def test_run_is_deterministic():
    cfg = small_cfg(rounds=3)
    a = orchestrator.run_experiment(cfg)
    b = orchestrator.run_experiment(cfg)
    for ra, rb in zip(a, b):
        assert ra == rb


def test_seed_changes_trajectory():
    a = orchestrator.run_experiment(small_cfg(seed=0))
    b = orchestrator.run_experiment(small_cfg(seed=1))
    assert any(ra.reward != rb.reward for ra, rb in zip(a, b))


def test_fedavg_weights_proportional_to_sizes():
    cfg = small_cfg(
        aggregator="fedavg",
        dataset=config.DatasetConfig(
            kind="synthetic00", num_clients=4,
            samples_per_client=(20, 20, 40, 20),
        ),
        rounds=2,
        m_percent=30.0,
    )
    records = orchestrator.run_experiment(cfg)
    rec = records[0]
    assert rec.selected_ids == [0, 1, 2, 3]
    # 80 percent train split, then 2 samples per client move to the server pool
    sizes = np.array([14, 14, 30, 14], dtype=float)
    assert np.allclose(rec.action, sizes / sizes.sum(), atol=1e-12)


def test_buffer_grows_one_transition_per_round():
    cfg = small_cfg(rounds=5)
    exp = orchestrator.build_experiment(cfg)
    orchestrator._run_fedaa(exp)
    assert len(exp.buffer) == 5


def test_agent_updates_after_warmup():
    cfg = small_cfg(rounds=5, ddpg=config.DdpgConfig(hidden=16, warmup=3, batch_size=4))
    exp = orchestrator.build_experiment(cfg)
    orchestrator._run_fedaa(exp)
    # rounds 2, 3, 4 reach the warmup threshold (buffer sizes 3, 4, 5)
    assert exp.agent.update_counter == 3


def test_errors_carry_round_prefix():
    # a huge rate with a hidden layer overflows activations within a round
    cfg = small_cfg(
        model_hidden=(4,),
        local=nn.SgdConfig(learning_rate=1e200, batch_size=8, epochs=2),
    )
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(NumericError, match="^round 0:"):
            orchestrator.run_experiment(cfg)


def test_malicious_roles_materialized():
    cfg = small_cfg(
        dataset=config.DatasetConfig(
            kind="synthetic00", num_clients=10, samples_per_client=20
        ),
        malicious_fraction=0.3,
        attack=__import__("fedaa.clients", fromlist=["AttackSpec"]).AttackSpec("same_value"),
    )
    exp = orchestrator.build_experiment(cfg)
    bad = [c.id for c in exp.clients if c.role == "malicious"]
    assert len(bad) == 3
    assert all(exp.clients[c].attack.kind == "same_value" for c in bad)
    good = [c for c in exp.clients if c.role == "benign"]
    assert all(c.attack is None for c in good)


def test_run_fedavg_baseline_uses_same_environment():
    cfg = small_cfg(rounds=2)
    direct = orchestrator.run_experiment(
        config.ExperimentConfig(
            **{**cfg.__dict__, "aggregator": "fedavg"}
        )
    )
    helper = orchestrator.run_fedavg_baseline(cfg)
    for ra, rb in zip(direct, helper):
        assert ra == rb
