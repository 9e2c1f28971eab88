"""Round loop: aggregate, evaluate, broadcast, train, select, learn.

Per-round order. The policy turns the previous selection state into
aggregation weights over the previously selected uploads; the merged
model is scored on the held-out validation set (that score is the
reward) and broadcast; participating clients run local updates (benign
ones first, so reference-point attacks can read their uploads); the new
uploads go through distance selection, producing the next state; the
transition lands in the replay buffer; actor and critic take one SGD
step each once the buffer has warmed up, and the targets soft-update
every second round. The baseline aggregator replaces all of this with
size-weighted averaging over every participant.

Randomness is split into named substreams of the config seed, so the
schedule of one subsystem never perturbs another. Two runs of the same
config are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, FedaaError, InternalError
from . import data as datamod
from .clients import ClientRecord, assign_roles, local_update
from .config import ExperimentConfig, SYNTHETIC_KINDS
from .data import LabeledDataset, round_half_up
from .ddpg import (
    DdpgAgent,
    ReplayBuffer,
    Transition,
    act,
    exploration_sigma,
    make_agent,
    soft_update,
    update_actor,
    update_critic,
)
from .nn import ArchSpec, MlpModel, ce_loss_from_logits, forward, init_params
from .seeding import derive_seed, stream
from .selection import select_clients, top_count

SUBSYSTEM_LABELS = (
    "data",
    "sizes",
    "validation",
    "partition",
    "server-pool",
    "roles",
    "model-init",
    "agent-init",
    "participation",
    "exploration",
    "buffer",
)


def subsystem_seeds(master: int) -> dict[str, int]:
    """Named top-level stream seeds recorded in the run manifest."""
    return {label: derive_seed(master, label) for label in SUBSYSTEM_LABELS}


@dataclass
class RoundRecord:
    round: int
    reward: float
    mean_benign_acc: float
    acc_std: float
    acc_var: float
    loss_std: float
    mean_global_acc: float
    selected_ids: list[int]
    action: list[float]
    per_class_val_acc: list[float]

    def __post_init__(self) -> None:
        if len(self.selected_ids) != len(self.action):
            raise InternalError("one aggregation weight per selected client")


@dataclass
class FairnessMetrics:
    mean_acc: float
    acc_std: float
    loss_std: float
    mean_global_acc: float


def aggregate(uploads: list[np.ndarray], action: np.ndarray) -> np.ndarray:
    """Convex combination of uploads under simplex weights."""
    weights = np.asarray(action, dtype=np.float64)
    if len(uploads) != weights.size:
        raise ConfigError(f"{len(uploads)} uploads but {weights.size} weights")
    if weights.min() < -1e-6 or abs(weights.sum() - 1.0) > 1e-6:
        raise InternalError("aggregation weights violate the probability simplex")
    return weights @ np.stack(uploads)


def evaluate_reward(
    model: MlpModel, val_set: LabeledDataset
) -> tuple[float, np.ndarray]:
    """Accuracy on the validation set, plus per-class accuracies.

    Classes absent from the validation set score 0.0 by convention.
    """
    logits = forward(model, val_set.features)
    correct = np.argmax(logits, axis=1) == val_set.labels
    per_class = np.zeros(val_set.num_classes)
    for c in range(val_set.num_classes):
        mask = val_set.labels == c
        if mask.any():
            per_class[c] = float(correct[mask].mean())
    return float(correct.mean()), per_class


def evaluate_fairness(
    clients: list[ClientRecord], global_model: MlpModel
) -> FairnessMetrics:
    """Population spread of benign clients' local test performance.

    Accuracy/loss come from each benign client's own stored local model
    on its own test split; mean_global_acc scores the shared global
    model on the same splits.
    """
    accs, losses, global_accs = [], [], []
    for client in clients:
        if client.role != "benign":
            continue
        logits = forward(client.local_model, client.test.features)
        accs.append(float((np.argmax(logits, axis=1) == client.test.labels).mean()))
        losses.append(ce_loss_from_logits(logits, client.test.labels))
        g_logits = forward(global_model, client.test.features)
        global_accs.append(float((np.argmax(g_logits, axis=1) == client.test.labels).mean()))
    if not accs:
        raise ConfigError("fairness metrics need at least one benign client")
    return FairnessMetrics(
        mean_acc=float(np.mean(accs)),
        acc_std=float(np.std(accs)),
        loss_std=float(np.std(losses)),
        mean_global_acc=float(np.mean(global_accs)),
    )


def sample_participants(
    num_clients: int, ratio: float, rng: np.random.Generator
) -> list[int]:
    """Seeded draw of round(ratio * num_clients) distinct client ids, ascending."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError("participation ratio must lie in (0, 1]")
    size = round_half_up(ratio * num_clients)
    if size < 1:
        raise ConfigError(
            f"participation ratio {ratio} yields an empty cohort of {num_clients}"
        )
    return sorted(int(i) for i in rng.choice(num_clients, size=size, replace=False))


@dataclass
class Experiment:
    """Materialized run: clients, validation set, policy, buffers."""

    cfg: ExperimentConfig
    clients: list[ClientRecord]
    val_set: LabeledDataset
    arch: ArchSpec
    initial_params: np.ndarray
    cohort_size: int
    agent: DdpgAgent | None
    buffer: ReplayBuffer | None


def _client_sizes(cfg: ExperimentConfig) -> list[int]:
    sizes = cfg.dataset.samples_per_client
    n = cfg.dataset.num_clients
    if sizes == "lognormal":
        return datamod.lognormal_sizes(n, stream(cfg.seed, "sizes"))
    if isinstance(sizes, int):
        return [sizes] * n
    return list(sizes)


def _materialize_data(cfg: ExperimentConfig) -> tuple[LabeledDataset, datamod.ClientPartition]:
    """Build (validation set, client partition) for the configured dataset."""
    ds = cfg.dataset
    data_rng = stream(cfg.seed, "data")
    if ds.kind in SYNTHETIC_KINDS:
        spec = datamod.SyntheticSpec(
            alpha=ds.alpha,
            beta=ds.beta,
            num_clients=ds.num_clients,
            samples_per_client=_client_sizes(cfg),
        )
        partition = datamod.generate_synthetic(spec, data_rng)
        return datamod.extract_server_pool(partition, stream(cfg.seed, "server-pool"))
    if ds.kind == "synthetic_dirichlet":
        # pool one generator per client so all classes appear in the source;
        # a single random linear labeler leaves entire classes empty
        base, extra = divmod(ds.total_samples, ds.num_clients)
        if base < 5:
            raise ConfigError(
                "synthetic_dirichlet needs total_samples >= 5 * num_clients"
            )
        sizes = [base + (1 if i < extra else 0) for i in range(ds.num_clients)]
        spec = datamod.SyntheticSpec(
            alpha=ds.alpha, beta=ds.beta, num_clients=ds.num_clients,
            samples_per_client=sizes,
        )
        xs, ys = [], []
        for gen, size in zip(datamod.draw_synthetic_generators(spec, data_rng), sizes):
            x, y = datamod.sample_from_generator(gen, size, data_rng)
            xs.append(x)
            ys.append(y)
        source = LabeledDataset(
            np.concatenate(xs), np.concatenate(ys), spec.num_classes
        )
    elif ds.kind == "csv":
        source = datamod.load_csv(ds.csv_path)
    else:
        source = datamod.load_idx(ds.idx_images, ds.idx_labels)
    counts = cfg.validation.per_class
    if counts is None:
        counts = 100
    if isinstance(counts, int):
        counts = (counts,) * source.num_classes
    val_set, remainder = datamod.build_validation_set(
        source, counts, stream(cfg.seed, "validation")
    )
    partition = datamod.dirichlet_partition(
        remainder, ds.num_clients, ds.dirichlet_concentration, stream(cfg.seed, "partition")
    )
    return val_set, partition


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    """Materialize datasets, roles, models, and the policy for a config."""
    val_set, partition = _materialize_data(cfg)
    num_classes = val_set.num_classes
    input_dim = val_set.features.shape[1]
    arch = ArchSpec(input_dim, tuple(cfg.model_hidden), num_classes, output_head="logits")
    initial = init_params(arch, stream(cfg.seed, "model-init"))
    malicious = set(assign_roles(cfg.dataset.num_clients, cfg.malicious_fraction, stream(cfg.seed, "roles")))
    clients = []
    for cid, (train, test) in enumerate(partition.clients):
        is_bad = cid in malicious
        clients.append(
            ClientRecord(
                id=cid,
                role="malicious" if is_bad else "benign",
                attack=cfg.attack if is_bad else None,
                train=train,
                test=test,
                local_model=MlpModel(arch, initial.copy()),
            )
        )
    cohort = round_half_up(cfg.participation_ratio * cfg.dataset.num_clients)
    agent = None
    buffer = None
    if cfg.aggregator == "fedaa":
        if cohort < 2:
            raise ConfigError("the distance selector needs a cohort of at least 2")
        m_count = top_count(cfg.m_percent, cohort)
        agent = make_agent(
            state_dim=m_count,
            action_dim=m_count,
            rng=stream(cfg.seed, "agent-init"),
            hidden=cfg.ddpg.hidden,
            gamma=cfg.ddpg.gamma,
            epsilon_soft=cfg.ddpg.epsilon_soft,
            actor_lr=cfg.ddpg.actor_lr,
            critic_lr=cfg.ddpg.critic_lr,
            weight_decay=cfg.ddpg.weight_decay,
            noise_sigma=cfg.ddpg.noise_sigma,
        )
        buffer = ReplayBuffer(cfg.ddpg.buffer_capacity)
    return Experiment(
        cfg=cfg,
        clients=clients,
        val_set=val_set,
        arch=arch,
        initial_params=initial,
        cohort_size=cohort,
        agent=agent,
        buffer=buffer,
    )


def _collect_uploads(
    exp: Experiment,
    participants: list[int],
    global_params: np.ndarray,
    round_index: int,
) -> dict[int, np.ndarray]:
    """Run local updates for a cohort; benign clients go first so that
    reference-point attacks can use their uploads."""
    cfg = exp.cfg
    uploads: dict[int, np.ndarray] = {}
    benign_vecs: list[np.ndarray] = []
    for cid in participants:
        client = exp.clients[cid]
        if client.role != "benign":
            continue
        rng = stream(cfg.seed, "local", round_index, cid)
        uploads[cid] = local_update(client, global_params, cfg.local, rng)
        benign_vecs.append(uploads[cid])
    for cid in participants:
        client = exp.clients[cid]
        if client.role == "benign":
            continue
        rng = stream(cfg.seed, "local", round_index, cid)
        uploads[cid] = local_update(
            client, global_params, cfg.local, rng, benign_uploads=benign_vecs
        )
    return uploads


def run_experiment(cfg: ExperimentConfig) -> list[RoundRecord]:
    """Full run under the configured aggregator; one record per round."""
    exp = build_experiment(cfg)
    if cfg.aggregator == "fedavg":
        return _run_fedavg(exp)
    return _run_fedaa(exp)


def run_fedavg_baseline(cfg: ExperimentConfig) -> list[RoundRecord]:
    """Same environment, size-weighted averaging instead of the policy."""
    return run_experiment(replace(cfg, aggregator="fedavg"))


def _run_fedaa(exp: Experiment) -> list[RoundRecord]:
    cfg = exp.cfg
    agent, buffer = exp.agent, exp.buffer
    part_rng = stream(cfg.seed, "participation")
    explore_rng = stream(cfg.seed, "exploration")
    buffer_rng = stream(cfg.seed, "buffer")
    global_params = exp.initial_params.copy()
    # round 0 selection sees unattacked broadcast copies: no training has
    # happened yet, so there is nothing for an attacker to distort
    participants = sample_participants(cfg.dataset.num_clients, cfg.participation_ratio, part_rng)
    uploads = {cid: global_params.copy() for cid in participants}
    sel = select_clients(uploads, cfg.m_percent, cfg.distance_scope, exp.arch)
    records: list[RoundRecord] = []
    for t in range(cfg.rounds):
        try:
            agent.noise_sigma = exploration_sigma(
                t, cfg.rounds, cfg.ddpg.noise_sigma, cfg.ddpg.noise_sigma_end
            )
            action = act(agent, sel.state, explore=True, rng=explore_rng)
            global_params = aggregate([uploads[c] for c in sel.selected_ids], action)
            global_model = MlpModel(exp.arch, global_params)
            reward, per_class = evaluate_reward(global_model, exp.val_set)
            participants = sample_participants(
                cfg.dataset.num_clients, cfg.participation_ratio, part_rng
            )
            uploads = _collect_uploads(exp, participants, global_params, t)
            fairness = evaluate_fairness(exp.clients, global_model)
            next_sel = select_clients(uploads, cfg.m_percent, cfg.distance_scope, exp.arch)
            records.append(
                RoundRecord(
                    round=t,
                    reward=reward,
                    mean_benign_acc=fairness.mean_acc,
                    acc_std=fairness.acc_std,
                    acc_var=fairness.acc_std**2,
                    loss_std=fairness.loss_std,
                    mean_global_acc=fairness.mean_global_acc,
                    selected_ids=list(sel.selected_ids),
                    action=[float(a) for a in action],
                    per_class_val_acc=[float(a) for a in per_class],
                )
            )
            buffer.push(Transition(sel.state, action, reward, next_sel.state))
            if len(buffer) >= cfg.ddpg.warmup:
                batch = buffer.sample(min(cfg.ddpg.batch_size, len(buffer)), buffer_rng)
                update_critic(agent, batch)
                update_actor(agent, batch)
            if t % 2 == 0:
                soft_update(agent)
            sel = next_sel
        except FedaaError as exc:
            raise type(exc)(f"round {t}: {exc}") from exc
    return records


def _run_fedavg(exp: Experiment) -> list[RoundRecord]:
    cfg = exp.cfg
    part_rng = stream(cfg.seed, "participation")
    global_params = exp.initial_params.copy()
    participants = sample_participants(cfg.dataset.num_clients, cfg.participation_ratio, part_rng)
    uploads = {cid: global_params.copy() for cid in participants}
    records: list[RoundRecord] = []
    for t in range(cfg.rounds):
        try:
            ids = sorted(uploads)
            sizes = np.asarray([len(exp.clients[c].train) for c in ids], dtype=np.float64)
            action = sizes / sizes.sum()
            global_params = aggregate([uploads[c] for c in ids], action)
            global_model = MlpModel(exp.arch, global_params)
            reward, per_class = evaluate_reward(global_model, exp.val_set)
            participants = sample_participants(
                cfg.dataset.num_clients, cfg.participation_ratio, part_rng
            )
            uploads = _collect_uploads(exp, participants, global_params, t)
            fairness = evaluate_fairness(exp.clients, global_model)
            records.append(
                RoundRecord(
                    round=t,
                    reward=reward,
                    mean_benign_acc=fairness.mean_acc,
                    acc_std=fairness.acc_std,
                    acc_var=fairness.acc_std**2,
                    loss_std=fairness.loss_std,
                    mean_global_acc=fairness.mean_global_acc,
                    selected_ids=ids,
                    action=[float(a) for a in action],
                    per_class_val_acc=[float(a) for a in per_class],
                )
            )
        except FedaaError as exc:
            raise type(exc)(f"round {t}: {exc}") from exc
    return records
