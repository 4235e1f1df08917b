"""Training/pipeline configuration and the flat key=value config format."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass
class TrainConfig:
    """Every knob of the training and clustering pipeline.

    Defaults follow the reference setup for a mid-size citation network:
    order cap 40, gated cell with 200 hidden units, saturation threshold 1,
    learning rate 0.01, at most 200 epochs with early termination once the
    standard deviation of the last 5 losses falls below 1e-3.
    """

    max_order: int = 40
    epsilon: float = 1.0
    lambda_tig: float = 1.0
    lambda_sep: float = 1.0
    learning_rate: float = 0.01
    anneal_factor: float | None = None
    anneal_start_epoch: int = 10
    max_epochs: int = 200
    early_stop_window: int = 5
    early_stop_std: float = 1e-3
    seed: int = 0
    pair_sampling_budget: int = 2_000_000
    recluster_every: int = 1
    cell_kind: str = "gated-recurrent"
    hidden_dim: int = 200
    self_loops: bool = True
    proportion: str | None = None
    kmeans_restarts: int = 10
    exact_pair_limit: int = 5000
    workers: int = 1
    normalize_embedding: bool = False
    row_normalize_features: bool = False
    memory_budget_mb: float = 6144.0
    dense_eigh_max: int = 512
    kernel_materialize_max: int = 25000

    def validate(self) -> None:
        if self.max_order < 1:
            raise ConfigError(f"max_order must be >= 1, got {self.max_order}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.lambda_tig < 0 or self.lambda_sep < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.early_stop_window < 2:
            raise ConfigError(
                f"early_stop_window must be >= 2, got {self.early_stop_window}"
            )
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.recluster_every < 1:
            raise ConfigError(f"recluster_every must be >= 1, got {self.recluster_every}")
        if self.anneal_factor is not None and not 0 < self.anneal_factor <= 1:
            raise ConfigError(f"anneal_factor must be in (0, 1], got {self.anneal_factor}")
        if self.workers != 1:
            raise ConfigError("only workers = 1 is implemented")
        if self.cell_kind not in ("simple-recurrent", "gated-recurrent"):
            raise ConfigError(f"unknown cell_kind {self.cell_kind!r}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.proportion is not None:
            self.proportion_ratio()

    def proportion_ratio(self) -> tuple[int, int] | None:
        """Parse the 'a:b' target proportion between the two loss terms."""
        if self.proportion is None:
            return None
        try:
            a_str, b_str = self.proportion.split(":")
            a, b = int(a_str), int(b_str)
        except ValueError:
            raise ConfigError(
                f"proportion must look like '1:10', got {self.proportion!r}"
            ) from None
        if a < 1 or b < 1:
            raise ConfigError(f"proportion parts must be positive, got {self.proportion!r}")
        return a, b

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_overrides(self, overrides: dict[str, str]) -> "TrainConfig":
        parsed = {key: parse_value(key, raw) for key, raw in overrides.items()}
        return replace(self, **parsed)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_optional_float(raw: str) -> float | None:
    low = raw.strip().lower()
    return None if low in ("none", "") else float(raw)


def _parse_optional_str(raw: str) -> str | None:
    low = raw.strip().lower()
    return None if low in ("none", "") else raw.strip()


_PARSERS = {
    int: int,
    float: float,
    bool: _parse_bool,
    str: str,
    "optional_float": _parse_optional_float,
    "optional_str": _parse_optional_str,
}

# Documented config keys; anything else is rejected.
CONFIG_SPEC: dict[str, object] = {
    "max_order": int,
    "epsilon": float,
    "lambda_tig": float,
    "lambda_sep": float,
    "learning_rate": float,
    "anneal_factor": "optional_float",
    "anneal_start_epoch": int,
    "max_epochs": int,
    "early_stop_window": int,
    "early_stop_std": float,
    "seed": int,
    "pair_sampling_budget": int,
    "recluster_every": int,
    "cell_kind": str,
    "hidden_dim": int,
    "self_loops": bool,
    "proportion": "optional_str",
    "kmeans_restarts": int,
    "exact_pair_limit": int,
    "workers": int,
    "normalize_embedding": bool,
    "row_normalize_features": bool,
    "memory_budget_mb": float,
    "dense_eigh_max": int,
    "kernel_materialize_max": int,
}


def parse_value(key: str, raw: str):
    """Parse one config value, rejecting unknown keys by name."""
    if key not in CONFIG_SPEC:
        raise ConfigError(f"unknown config key {key!r}")
    parser = _PARSERS[CONFIG_SPEC[key]]
    try:
        return parser(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def read_config(path) -> TrainConfig:
    """Read a flat 'key = value' file ('#' starts a comment) into a TrainConfig.

    Missing keys take their documented defaults; unknown keys fail closed.
    """
    values: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            values[key] = parse_value(key, raw)
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg
