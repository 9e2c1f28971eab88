"""Deterministic-policy actor-critic over aggregation weights.

The actor maps the selection state to a weight vector on the simplex
(softmax head). The critic scores a (state, action) pair with a scalar
head on the concatenated input. Updates are plain SGD with decoupled
weight decay: the critic descends the mean squared Bellman residual,
the actor ascends the critic's value of its own actions. Target copies
of both networks track the mains through soft updates.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IngestionError, InternalError, NumericError
from .nn import (
    ArchSpec,
    MlpModel,
    backward_from_output,
    forward,
    forward_cached,
    forward_logits,
    init_params,
    softmax,
)


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray

    def __post_init__(self) -> None:
        self.state = np.asarray(self.state, dtype=np.float64)
        self.action = np.asarray(self.action, dtype=np.float64)
        self.next_state = np.asarray(self.next_state, dtype=np.float64)
        if self.state.shape != self.next_state.shape:
            raise InternalError("state and next_state dimensions differ")
        if abs(self.action.sum() - 1.0) > 1e-9 or self.action.min() < 0.0:
            raise InternalError("action must lie on the probability simplex")
        if not 0.0 <= self.reward <= 1.0:
            raise InternalError(f"reward {self.reward} outside [0, 1]")


class ReplayBuffer:
    """Bounded FIFO of transitions; sampling is uniform without replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if n < 1 or n > len(self._items):
            raise ConfigError(f"cannot sample {n} of {len(self._items)} transitions")
        picks = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[int(i)] for i in picks]


@dataclass
class DdpgAgent:
    actor: MlpModel
    critic: MlpModel
    target_actor: MlpModel
    target_critic: MlpModel
    gamma: float = 0.99
    epsilon_soft: float = 0.001
    actor_lr: float = 0.01
    critic_lr: float = 0.01
    weight_decay: float = 1e-5
    noise_sigma: float = 0.1
    update_counter: int = 0

    @property
    def state_dim(self) -> int:
        return self.actor.arch.input_dim

    @property
    def action_dim(self) -> int:
        return self.actor.arch.output_dim


def make_agent(
    state_dim: int,
    action_dim: int,
    rng: np.random.Generator,
    hidden: int = 256,
    **hyper,
) -> DdpgAgent:
    """Fresh agent; targets start as exact copies of the mains."""
    if state_dim < 1 or action_dim < 1:
        raise ConfigError("state_dim and action_dim must be positive")
    actor_arch = ArchSpec(state_dim, (hidden,), action_dim, output_head="softmax_simplex")
    critic_arch = ArchSpec(state_dim + action_dim, (hidden,), 1, output_head="scalar")
    actor = MlpModel(actor_arch, init_params(actor_arch, rng))
    critic = MlpModel(critic_arch, init_params(critic_arch, rng))
    return DdpgAgent(
        actor=actor,
        critic=critic,
        target_actor=MlpModel(actor_arch, actor.params.copy()),
        target_critic=MlpModel(critic_arch, critic.params.copy()),
        **hyper,
    )


def act(
    agent: DdpgAgent,
    state: np.ndarray,
    explore: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Policy action for one state; exploration perturbs the pre-softmax logits."""
    state = np.asarray(state, dtype=np.float64)
    if state.ndim != 1 or state.size != agent.state_dim:
        raise ConfigError(f"state has shape {state.shape}, expected ({agent.state_dim},)")
    logits = forward_logits(agent.actor, state[None, :])
    if explore:
        if rng is None:
            raise ConfigError("exploration requires an rng")
        logits = logits + rng.normal(0.0, agent.noise_sigma, size=logits.shape)
    return softmax(logits)[0]


def _stack(transitions: list[Transition]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if not transitions:
        raise ConfigError("need at least one transition")
    states = np.stack([t.state for t in transitions])
    actions = np.stack([t.action for t in transitions])
    rewards = np.asarray([t.reward for t in transitions])
    next_states = np.stack([t.next_state for t in transitions])
    return states, actions, rewards, next_states


def critic_target(agent: DdpgAgent, transitions: list[Transition]) -> np.ndarray:
    """Bellman targets y = r + gamma * Q'(s', pi'(s')) from the target nets."""
    _, _, rewards, next_states = _stack(transitions)
    next_actions = forward(agent.target_actor, next_states)
    q_next = forward(agent.target_critic, np.hstack([next_states, next_actions]))[:, 0]
    return rewards + agent.gamma * q_next


def update_critic(agent: DdpgAgent, transitions: list[Transition]) -> float:
    """One SGD step on the mean squared Bellman residual; returns the pre-step loss."""
    states, actions, _, _ = _stack(transitions)
    targets = critic_target(agent, transitions)
    out, cache = forward_cached(agent.critic, np.hstack([states, actions]))
    residual = out[:, 0] - targets
    loss = float(np.mean(residual**2))
    if not np.isfinite(loss):
        raise NumericError("critic loss is not finite")
    dout = (2.0 / residual.size) * residual[:, None]
    grad, _ = backward_from_output(agent.critic, cache, dout)
    agent.critic.params -= agent.critic_lr * (grad + agent.weight_decay * agent.critic.params)
    agent.update_counter += 1
    return loss


def update_actor(agent: DdpgAgent, transitions: list[Transition]) -> float:
    """One ascent step on mean Q(s, pi(s)); returns the pre-step objective."""
    states, _, _, _ = _stack(transitions)
    actions, actor_cache = forward_cached(agent.actor, states)
    q, critic_cache = forward_cached(agent.critic, np.hstack([states, actions]))
    objective = float(np.mean(q[:, 0]))
    if not np.isfinite(objective):
        raise NumericError("actor objective is not finite")
    dq = np.full((states.shape[0], 1), 1.0 / states.shape[0])
    _, dinput = backward_from_output(agent.critic, critic_cache, dq)
    d_action = dinput[:, agent.state_dim :]
    grad, _ = backward_from_output(agent.actor, actor_cache, d_action)
    agent.actor.params += agent.actor_lr * (grad - agent.weight_decay * agent.actor.params)
    return objective


def soft_update(agent: DdpgAgent) -> None:
    """targets <- epsilon * mains + (1 - epsilon) * targets, both networks."""
    eps = agent.epsilon_soft
    for main, target in ((agent.actor, agent.target_actor), (agent.critic, agent.target_critic)):
        target.params *= 1.0 - eps
        target.params += eps * main.params


def exploration_sigma(
    round_index: int, total_rounds: int, start: float = 0.1, end: float = 0.01
) -> float:
    """Linear decay from start at round 0 to end at the final round."""
    if total_rounds <= 1:
        return start
    frac = min(max(round_index / (total_rounds - 1), 0.0), 1.0)
    return start * (1.0 - frac) + end * frac


_MAGIC = b"FEDAAAG1"
_HEAD_CODES = {"logits": 0, "softmax_simplex": 1, "scalar": 2}
_CODE_HEADS = {v: k for k, v in _HEAD_CODES.items()}


def _pack_net(model: MlpModel) -> bytes:
    arch = model.arch
    parts = [struct.pack("<II", arch.input_dim, len(arch.hidden_dims))]
    parts.append(struct.pack(f"<{len(arch.hidden_dims)}I", *arch.hidden_dims))
    parts.append(struct.pack("<II", arch.output_dim, _HEAD_CODES[arch.output_head]))
    parts.append(struct.pack("<Q", model.params.size))
    parts.append(model.params.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob, self.path, self.offset = blob, path, 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise IngestionError(f"{self.path}: truncated at byte {self.offset}")
        out = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return out

    def take_floats(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.offset + size > len(self.blob):
            raise IngestionError(f"{self.path}: truncated at byte {self.offset}")
        arr = np.frombuffer(self.blob, dtype="<f8", count=count, offset=self.offset)
        self.offset += size
        return arr.astype(np.float64)


def _unpack_net(reader: _Reader) -> MlpModel:
    input_dim, n_hidden = reader.take("<II")
    hidden = reader.take(f"<{n_hidden}I") if n_hidden else ()
    output_dim, head_code = reader.take("<II")
    if head_code not in _CODE_HEADS:
        raise IngestionError(f"{reader.path}: unknown head code {head_code}")
    arch = ArchSpec(input_dim, tuple(hidden), output_dim, output_head=_CODE_HEADS[head_code])
    (count,) = reader.take("<Q")
    params = reader.take_floats(count)
    return MlpModel(arch, params)


def save_agent(agent: DdpgAgent, path: str) -> None:
    """Binary checkpoint; layout documented in README (all little-endian)."""
    parts = [
        _MAGIC,
        struct.pack("<I", 1),
        struct.pack("<Q", agent.update_counter),
        struct.pack(
            "<6d",
            agent.gamma,
            agent.epsilon_soft,
            agent.actor_lr,
            agent.critic_lr,
            agent.weight_decay,
            agent.noise_sigma,
        ),
    ]
    for net in (agent.actor, agent.critic, agent.target_actor, agent.target_critic):
        parts.append(_pack_net(net))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_agent(path: str) -> DdpgAgent:
    """Rebuild an agent from save_agent output; validates magic and version."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise IngestionError(f"{path}: bad magic at byte 0")
    reader = _Reader(blob, path)
    reader.offset = len(_MAGIC)
    (version,) = reader.take("<I")
    if version != 1:
        raise IngestionError(f"{path}: unsupported checkpoint version {version}")
    (counter,) = reader.take("<Q")
    gamma, eps, actor_lr, critic_lr, wd, sigma = reader.take("<6d")
    nets = [_unpack_net(reader) for _ in range(4)]
    if reader.offset != len(blob):
        raise IngestionError(f"{path}: {len(blob) - reader.offset} trailing bytes")
    return DdpgAgent(
        actor=nets[0],
        critic=nets[1],
        target_actor=nets[2],
        target_critic=nets[3],
        gamma=gamma,
        epsilon_soft=eps,
        actor_lr=actor_lr,
        critic_lr=critic_lr,
        weight_decay=wd,
        noise_sigma=sigma,
        update_counter=counter,
    )
