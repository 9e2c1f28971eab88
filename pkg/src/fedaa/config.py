"""Experiment configuration: schema, parsing, canonical emission.

The on-disk format is one ``key = value`` pair per line. Blank lines
and lines starting with ``#`` are skipped. Dotted prefixes group keys
(``ddpg.gamma = 0.95``). Unknown and duplicate keys are rejected with
the offending line number, as are values outside their documented
ranges. ``emit_config`` renders a config back to canonical text (sorted
keys, every applicable key present), and ``parse . emit`` is the
identity; the canonical text is also what the run manifest hashes.

The full key table with defaults and ranges is reproduced in README.md.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

from .errors import ConfigError, ParseError
from .clients import ATTACK_KINDS, AttackSpec
from .nn import SgdConfig
from .selection import SCOPES

SYNTHETIC_KINDS = ("synthetic00", "synthetic11", "synthetic")
DATASET_KINDS = SYNTHETIC_KINDS + ("synthetic_dirichlet", "csv", "idx")
AGGREGATORS = ("fedaa", "fedavg")


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic00"
    num_clients: int = 100
    alpha: float = 0.0
    beta: float = 0.0
    # int applies to every client; "lognormal" draws seeded sizes in [20, 1000]
    samples_per_client: int | tuple[int, ...] | str = "lognormal"
    total_samples: int = 5000
    dirichlet_concentration: float = 0.1
    csv_path: str = ""
    idx_images: str = ""
    idx_labels: str = ""


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.99
    epsilon_soft: float = 0.001
    actor_lr: float = 0.01
    critic_lr: float = 0.01
    weight_decay: float = 1e-05
    hidden: int = 256
    buffer_capacity: int = 10000
    batch_size: int = 64
    warmup: int = 10
    noise_sigma: float = 0.1
    noise_sigma_end: float = 0.01


@dataclass(frozen=True)
class ValidationConfig:
    # per-class sample counts for the held-out reward set; None defers to
    # the dataset kind (upload pool for synthetic kinds, 100 per class else)
    per_class: int | tuple[int, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model_hidden: tuple[int, ...] = ()
    malicious_fraction: float = 0.0
    attack: AttackSpec | None = None
    m_percent: float = 30.0
    participation_ratio: float = 1.0
    rounds: int = 50
    local: SgdConfig = field(default_factory=SgdConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)
    distance_scope: str = "all_layers"
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    aggregator: str = "fedaa"
    seed: int = 0


def _int(lo: int | None = None, hi: int | None = None) -> Callable[[str], int]:
    def parse(raw: str) -> int:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"not an integer: {raw!r}") from None
        if lo is not None and value < lo:
            raise ValueError(f"must be >= {lo}")
        if hi is not None and value > hi:
            raise ValueError(f"must be <= {hi}")
        return value

    return parse


def _float(
    lo: float | None = None,
    hi: float | None = None,
    lo_open: bool = False,
    hi_open: bool = False,
) -> Callable[[str], float]:
    def parse(raw: str) -> float:
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"not a number: {raw!r}") from None
        if lo is not None and (value <= lo if lo_open else value < lo):
            raise ValueError(f"must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (value >= hi if hi_open else value > hi):
            raise ValueError(f"must be {'<' if hi_open else '<='} {hi}")
        return value

    return parse


def _choice(*options: str) -> Callable[[str], str]:
    def parse(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {raw!r}")
        return raw

    return parse


def _intlist(min_value: int) -> Callable[[str], tuple[int, ...]]:
    def parse(raw: str) -> tuple[int, ...]:
        if raw == "":
            return ()
        out = []
        for part in raw.split(","):
            try:
                value = int(part.strip())
            except ValueError:
                raise ValueError(f"not an integer: {part.strip()!r}") from None
            if value < min_value:
                raise ValueError(f"entries must be >= {min_value}")
            out.append(value)
        return tuple(out)

    return parse


def _sizes(raw: str) -> int | tuple[int, ...] | str:
    if raw == "lognormal":
        return raw
    parsed = _intlist(5)(raw)
    if not parsed:
        raise ValueError("expected 'lognormal', an integer, or a comma list")
    return parsed[0] if len(parsed) == 1 and "," not in raw else parsed


def _classcounts(raw: str) -> int | tuple[int, ...]:
    parsed = _intlist(1)(raw)
    if not parsed:
        raise ValueError("expected an integer or a comma list")
    return parsed[0] if len(parsed) == 1 and "," not in raw else parsed


def _string(raw: str) -> str:
    return raw


SCHEMA: dict[str, Callable[[str], object]] = {
    "dataset": _choice(*DATASET_KINDS),
    "dataset.num_clients": _int(lo=2),
    "dataset.alpha": _float(lo=0.0),
    "dataset.beta": _float(lo=0.0),
    "dataset.samples_per_client": _sizes,
    "dataset.total_samples": _int(lo=100),
    "dataset.dirichlet_concentration": _float(lo=0.0, lo_open=True),
    "dataset.csv_path": _string,
    "dataset.idx_images": _string,
    "dataset.idx_labels": _string,
    "model.hidden": _intlist(1),
    "malicious_fraction": _float(lo=0.0, hi=0.5, hi_open=True),
    "attack": _choice("none", *ATTACK_KINDS),
    "attack.tau": _float(lo=0.0, lo_open=True),
    "attack.ipm_epsilon": _float(lo=0.0, lo_open=True),
    "m_percent": _float(lo=0.0, hi=100.0, lo_open=True),
    "participation_ratio": _float(lo=0.0, hi=1.0, lo_open=True),
    "rounds": _int(lo=1),
    "local.lr": _float(lo=0.0),
    "local.weight_decay": _float(lo=0.0),
    "local.batch_size": _int(lo=1),
    "local.epochs": _int(lo=1),
    "ddpg.gamma": _float(lo=0.0, hi=1.0, lo_open=True),
    "ddpg.epsilon_soft": _float(lo=0.0, hi=1.0, lo_open=True),
    "ddpg.actor_lr": _float(lo=0.0),
    "ddpg.critic_lr": _float(lo=0.0),
    "ddpg.weight_decay": _float(lo=0.0),
    "ddpg.hidden": _int(lo=1),
    "ddpg.buffer_capacity": _int(lo=1),
    "ddpg.batch_size": _int(lo=1),
    "ddpg.warmup": _int(lo=1),
    "ddpg.noise_sigma": _float(lo=0.0),
    "ddpg.noise_sigma_end": _float(lo=0.0),
    "distance_scope": _choice(*SCOPES),
    "validation.per_class": _classcounts,
    "aggregator": _choice(*AGGREGATORS),
    "seed": _int(lo=0),
}


def parse_config_values(text: str) -> dict[str, object]:
    """Parse config text into a key-value map without cross-validation.

    ParseError carries the offending line number.
    """
    values: dict[str, object] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"line {number}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SCHEMA:
            raise ParseError(f"line {number}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"line {number}: duplicate key {key!r}")
        try:
            values[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ParseError(f"line {number}: {key}: {exc}") from None
    return values


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse and cross-validate config text."""
    return build_config(parse_config_values(text))


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def build_config(values: dict[str, object]) -> ExperimentConfig:
    """Assemble and cross-validate a config from parsed key values."""
    present = set(values)

    def get(key: str, default):
        return values.get(key, default)

    kind = get("dataset", "synthetic00")
    _require(
        not ({"dataset.alpha", "dataset.beta"} & present) or kind == "synthetic",
        "dataset.alpha/beta apply only to dataset = synthetic",
    )
    _require(
        "dataset.samples_per_client" not in present or kind in SYNTHETIC_KINDS,
        "dataset.samples_per_client applies only to the synthetic dataset kinds",
    )
    _require(
        "dataset.total_samples" not in present or kind == "synthetic_dirichlet",
        "dataset.total_samples applies only to dataset = synthetic_dirichlet",
    )
    _require(
        "dataset.dirichlet_concentration" not in present
        or kind in ("synthetic_dirichlet", "csv", "idx"),
        "dataset.dirichlet_concentration applies only to partitioned dataset kinds",
    )
    for key, owner in (
        ("dataset.csv_path", "csv"),
        ("dataset.idx_images", "idx"),
        ("dataset.idx_labels", "idx"),
    ):
        _require(key not in present or kind == owner, f"{key} applies only to dataset = {owner}")
    if kind == "csv":
        _require(bool(get("dataset.csv_path", "")), "dataset = csv requires dataset.csv_path")
    if kind == "idx":
        _require(
            bool(get("dataset.idx_images", "")) and bool(get("dataset.idx_labels", "")),
            "dataset = idx requires dataset.idx_images and dataset.idx_labels",
        )
    alpha, beta = {
        "synthetic00": (0.0, 0.0),
        "synthetic11": (1.0, 1.0),
    }.get(kind, (get("dataset.alpha", 0.0), get("dataset.beta", 0.0)))
    dataset = DatasetConfig(
        kind=kind,
        num_clients=get("dataset.num_clients", 100),
        alpha=float(alpha),
        beta=float(beta),
        samples_per_client=get("dataset.samples_per_client", "lognormal"),
        total_samples=get("dataset.total_samples", 5000),
        dirichlet_concentration=get("dataset.dirichlet_concentration", 0.1),
        csv_path=get("dataset.csv_path", ""),
        idx_images=get("dataset.idx_images", ""),
        idx_labels=get("dataset.idx_labels", ""),
    )
    sizes = dataset.samples_per_client
    if isinstance(sizes, tuple):
        _require(
            len(sizes) == dataset.num_clients,
            f"dataset.samples_per_client lists {len(sizes)} sizes for "
            f"{dataset.num_clients} clients",
        )

    attack_kind = get("attack", "none")
    if attack_kind == "none":
        _require(
            not ({"attack.tau", "attack.ipm_epsilon"} & present),
            "attack.tau / attack.ipm_epsilon require an attack",
        )
        attack = None
    else:
        _require(
            "attack.ipm_epsilon" not in present or attack_kind == "ipm",
            "attack.ipm_epsilon applies only to attack = ipm",
        )
        attack = AttackSpec(
            kind=attack_kind,
            tau=get("attack.tau", None),
            ipm_epsilon=get("attack.ipm_epsilon", 0.5),
        )
    malicious_fraction = get("malicious_fraction", 0.0)
    _require(
        malicious_fraction == 0.0 or attack is not None,
        "malicious_fraction > 0 requires an attack",
    )

    validation = ValidationConfig(per_class=get("validation.per_class", None))
    _require(
        validation.per_class is None or kind not in SYNTHETIC_KINDS,
        "validation.per_class conflicts with the synthetic kinds, which build "
        "the reward set from client uploads",
    )

    local = SgdConfig(
        learning_rate=get("local.lr", 0.1),
        weight_decay=get("local.weight_decay", 0.0),
        batch_size=get("local.batch_size", 64),
        epochs=get("local.epochs", 20),
    )
    ddpg = DdpgConfig(
        gamma=get("ddpg.gamma", 0.99),
        epsilon_soft=get("ddpg.epsilon_soft", 0.001),
        actor_lr=get("ddpg.actor_lr", 0.01),
        critic_lr=get("ddpg.critic_lr", 0.01),
        weight_decay=get("ddpg.weight_decay", 1e-05),
        hidden=get("ddpg.hidden", 256),
        buffer_capacity=get("ddpg.buffer_capacity", 10000),
        batch_size=get("ddpg.batch_size", 64),
        warmup=get("ddpg.warmup", 10),
        noise_sigma=get("ddpg.noise_sigma", 0.1),
        noise_sigma_end=get("ddpg.noise_sigma_end", 0.01),
    )
    return ExperimentConfig(
        dataset=dataset,
        model_hidden=get("model.hidden", ()),
        malicious_fraction=float(malicious_fraction),
        attack=attack,
        m_percent=float(get("m_percent", 30.0)),
        participation_ratio=float(get("participation_ratio", 1.0)),
        rounds=get("rounds", 50),
        local=local,
        ddpg=ddpg,
        distance_scope=get("distance_scope", "all_layers"),
        validation=validation,
        aggregator=get("aggregator", "fedaa"),
        seed=get("seed", 0),
    )


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text: sorted keys, every applicable key spelled out."""
    pairs: dict[str, object] = {
        "aggregator": cfg.aggregator,
        "attack": cfg.attack.kind if cfg.attack else "none",
        "dataset": cfg.dataset.kind,
        "dataset.num_clients": cfg.dataset.num_clients,
        "distance_scope": cfg.distance_scope,
        "m_percent": cfg.m_percent,
        "malicious_fraction": cfg.malicious_fraction,
        "model.hidden": cfg.model_hidden,
        "participation_ratio": cfg.participation_ratio,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "local.lr": cfg.local.learning_rate,
        "local.weight_decay": cfg.local.weight_decay,
        "local.batch_size": cfg.local.batch_size,
        "local.epochs": cfg.local.epochs,
        "ddpg.gamma": cfg.ddpg.gamma,
        "ddpg.epsilon_soft": cfg.ddpg.epsilon_soft,
        "ddpg.actor_lr": cfg.ddpg.actor_lr,
        "ddpg.critic_lr": cfg.ddpg.critic_lr,
        "ddpg.weight_decay": cfg.ddpg.weight_decay,
        "ddpg.hidden": cfg.ddpg.hidden,
        "ddpg.buffer_capacity": cfg.ddpg.buffer_capacity,
        "ddpg.batch_size": cfg.ddpg.batch_size,
        "ddpg.warmup": cfg.ddpg.warmup,
        "ddpg.noise_sigma": cfg.ddpg.noise_sigma,
        "ddpg.noise_sigma_end": cfg.ddpg.noise_sigma_end,
    }
    if cfg.attack is not None:
        pairs["attack.tau"] = float(cfg.attack.tau)
        if cfg.attack.kind == "ipm":
            pairs["attack.ipm_epsilon"] = cfg.attack.ipm_epsilon
    kind = cfg.dataset.kind
    if kind == "synthetic":
        pairs["dataset.alpha"] = cfg.dataset.alpha
        pairs["dataset.beta"] = cfg.dataset.beta
    if kind in SYNTHETIC_KINDS:
        pairs["dataset.samples_per_client"] = cfg.dataset.samples_per_client
    if kind == "synthetic_dirichlet":
        pairs["dataset.total_samples"] = cfg.dataset.total_samples
    if kind in ("synthetic_dirichlet", "csv", "idx"):
        pairs["dataset.dirichlet_concentration"] = cfg.dataset.dirichlet_concentration
    if kind == "csv":
        pairs["dataset.csv_path"] = cfg.dataset.csv_path
    if kind == "idx":
        pairs["dataset.idx_images"] = cfg.dataset.idx_images
        pairs["dataset.idx_labels"] = cfg.dataset.idx_labels
    if cfg.validation.per_class is not None:
        pairs["validation.per_class"] = cfg.validation.per_class
    return "".join(f"{key} = {_fmt(pairs[key])}\n" for key in sorted(pairs))


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical config text."""
    return hashlib.sha256(emit_config(cfg).encode("utf-8")).hexdigest()
