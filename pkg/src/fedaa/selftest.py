"""Fast internal consistency checks behind the selftest subcommand."""

from __future__ import annotations

import numpy as np

from . import data as datamod
from .ddpg import ReplayBuffer, Transition, make_agent, act, soft_update
from .nn import ArchSpec, MlpModel, backward_ce, flatten, init_params, param_count, unflatten
from .orchestrator import aggregate
from .selection import select_clients


def _check_simplex_actions() -> None:
    rng = np.random.default_rng(7)
    agent = make_agent(4, 4, rng, hidden=16)
    for trial in range(20):
        a = act(agent, rng.uniform(0, 1, 4), explore=True, rng=rng)
        assert abs(a.sum() - 1.0) < 1e-9 and a.min() >= 0.0, "action off the simplex"


def _check_soft_update() -> None:
    rng = np.random.default_rng(8)
    agent = make_agent(3, 3, rng, hidden=8, epsilon_soft=1.0)
    soft_update(agent)
    assert np.array_equal(agent.target_actor.params, agent.actor.params), (
        "epsilon 1 must overwrite the target"
    )


def _check_buffer_fifo() -> None:
    buf = ReplayBuffer(3)
    s = np.zeros(2)
    for r in range(5):
        buf.push(Transition(s, np.array([0.5, 0.5]), r / 10.0, s))
    rewards = sorted(t.reward for t in buf.sample(3, np.random.default_rng(0)))
    assert rewards == [0.2, 0.3, 0.4], "oldest transitions must be evicted first"


def _check_partition_complete() -> None:
    rng = np.random.default_rng(9)
    source = datamod.LabeledDataset(rng.normal(size=(300, 4)), rng.integers(0, 3, 300), 3)
    part = datamod.dirichlet_partition(source, 5, 0.5, rng)
    seen = np.concatenate(
        [np.concatenate([tr, te]) for tr, te in part.source_indices]
    )
    assert sorted(seen.tolist()) == list(range(300)), "partition must cover the source"


def _check_distance_symmetry() -> None:
    rng = np.random.default_rng(10)
    uploads = {i: rng.normal(size=20) for i in range(6)}
    res = select_clients(uploads, 50.0, keep_matrix=True)
    c = res.distance_matrix
    assert np.allclose(c, c.T, atol=1e-12) and np.all(np.diag(c) == 0.0), (
        "distance matrix must be symmetric with a zero diagonal"
    )


def _check_aggregate_hull() -> None:
    uploads = [np.zeros(4), np.ones(4)]
    merged = aggregate(uploads, np.array([0.25, 0.75]))
    assert np.allclose(merged, 0.75), "aggregation must stay inside the convex hull"


def _check_flatten_round_trip() -> None:
    rng = np.random.default_rng(11)
    arch = ArchSpec(5, (4,), 3)
    params = init_params(arch, rng)
    assert np.array_equal(flatten(unflatten(arch, params)), params), (
        "flatten(unflatten(.)) must be bit-exact"
    )


def _check_gradient() -> None:
    rng = np.random.default_rng(12)
    arch = ArchSpec(3, (5,), 2)
    model = MlpModel(arch, init_params(arch, rng))
    x = rng.normal(size=(6, 3))
    y = rng.integers(0, 2, 6)
    _, grad = backward_ce(model, x, y)
    h = 1e-6
    for k in (0, 7, param_count(arch) - 1):
        probe = model.params.copy()
        probe[k] += h
        up, _ = backward_ce(MlpModel(arch, probe), x, y)
        probe[k] -= 2 * h
        down, _ = backward_ce(MlpModel(arch, probe), x, y)
        fd = (up - down) / (2 * h)
        assert abs(fd - grad[k]) <= 1e-4 * max(abs(fd), abs(grad[k]), 1e-8), (
            f"gradient check failed at coordinate {k}"
        )


CHECKS = (
    ("simplex_actions", _check_simplex_actions),
    ("soft_update_arithmetic", _check_soft_update),
    ("replay_buffer_fifo", _check_buffer_fifo),
    ("partition_completeness", _check_partition_complete),
    ("distance_symmetry", _check_distance_symmetry),
    ("aggregation_convex_hull", _check_aggregate_hull),
    ("flatten_round_trip", _check_flatten_round_trip),
    ("gradient_check", _check_gradient),
)


def run_selftest() -> list[tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) triples."""
    out = []
    for name, fn in CHECKS:
        try:
            fn()
            out.append((name, True, ""))
        except Exception as exc:  # a failed check must not stop the rest
            out.append((name, False, str(exc)))
    return out
