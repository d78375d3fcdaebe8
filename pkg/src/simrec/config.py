"""Flat ``key = value`` run configuration covering every module default."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError


def _opt(default, help, choices=None):
    return field(default=default, metadata={"help": help, "choices": choices})


@dataclass
class RunConfig:
    # inputs and outputs
    clicks: str = _opt("", "clickstream TSV (user, item, timestamp_ms, kind)")
    attributes: str = _opt("", "item attributes TSV")
    vectors: str = _opt("", "image feature vectors file (optional)")
    new_items: str = _opt("", "new-item list, one id per line (optional)")
    workdir: str = _opt("run", "directory for artifacts and reports")
    cutoff_ms: int = _opt(0, "train/test cutoff; 0 holds out the last calendar day")
    seed: int = _opt(0, "random seed for every stochastic stage")
    workers: int = _opt(1, "parallel workers (CF shards, lock-free SGD threads, evaluation)")
    # item-to-item CF
    alpha: float = _opt(0.9, "weight of co-visitation vs attribute Jaccard")
    top_n: int = _opt(200, "neighbors kept per item in the similarity table")
    shards: int = _opt(1, "user shards for the co-visitation map/reduce")
    user_cap: int = _opt(500, "skip users with more distinct items than this (0 = no cap)")
    # candidate pool
    pool_size: int = _opt(200, "candidates per item")
    quota_cf: int = _opt(150, "pool slots for CF neighbors")
    quota_attr: int = _opt(40, "pool slots for attribute neighbors")
    quota_new: int = _opt(10, "pool slots for new items")
    # item2vec
    window: int = _opt(2, "item2vec context window on each side")
    negatives: int = _opt(8, "item2vec negatives per positive pair")
    dim: int = _opt(64, "item2vec embedding dimension")
    lr: float = _opt(0.025, "item2vec learning rate")
    epochs: int = _opt(5, "item2vec epochs")
    neg_distribution: str = _opt("uniform", "negative sampling distribution", ("uniform", "unigram"))
    # personalized
    p_window: int = _opt(8, "personalized window length, current item included")
    p_negatives: int = _opt(8, "personalized negatives per case")
    omega: float = _opt(2.0, "loss weight for transitions into add-cart items")
    p_dim: int = _opt(64, "personalized embedding dimension")
    p_lr: float = _opt(0.025, "personalized learning rate")
    p_epochs: int = _opt(10, "personalized epochs")
    addcart_scope: str = _opt("session", "which add-carts trigger omega", ("session", "event"))
    # evaluation
    ks: str = _opt("5,10,20", "comma-separated K values")
    history_scope: str = _opt("full", "test-case history: full (train tail + test) or test", ("full", "test"))
    # serving
    k: int = _opt(30, "items returned per request")
    fallback: str = _opt("cf", "ranker for users without history", ("cf", "pool"))
    latency_budget_ms: float = _opt(100.0, "per-request latency budget (logged when exceeded)")
    host: str = _opt("127.0.0.1", "bind address")
    port: int = _opt(8080, "bind port")
    ttl_s: float = _opt(1800.0, "session store idle TTL in seconds (0 = never expire)")
    serve_model: str = _opt("", "personalized model to serve (default: workdir/addcart.emb)")
    # synthetic data
    users: int = _opt(2000, "synth: users")
    items: int = _opt(1000, "synth: items")
    clusters: int = _opt(8, "synth: planted clusters (1 = null model)")
    days: int = _opt(8, "synth: days of activity")
    events_per_user: int = _opt(40, "synth: events per user")
    addcart_rate: float = _opt(0.1, "synth: probability an event is an add-cart")
    p_in: float = _opt(0.9, "synth: probability a click stays in the user's cluster")
    p_taste: float = _opt(0.7, "synth: probability an in-cluster click jumps near the user's home")
    vector_dim: int = _opt(32, "synth: image vector dimension")
    n_new_items: int = _opt(20, "synth: size of the new-item list")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def help_for(cls, key: str) -> str:
        return {f.name: f.metadata["help"] for f in fields(cls)}[key]

    @property
    def k_values(self) -> list[int]:
        return sorted(int(x) for x in self.ks.split(",") if x.strip())

    def path(self, name: str) -> Path:
        return Path(self.workdir) / name

    def with_updates(self, updates: dict[str, Any]) -> "RunConfig":
        cfg = replace(self, **coerce(updates))
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    # -- module configs --------------------------------------------------------

    def item2vec_config(self):
        from .item2vec import Item2VecConfig
        return Item2VecConfig(window=self.window, negatives=self.negatives, dim=self.dim,
                              learning_rate=self.lr, epochs=self.epochs, seed=self.seed,
                              workers=self.workers, neg_distribution=self.neg_distribution)

    def personalized_config(self, omega: float | None = None):
        from .personalized import PersonalizedConfig
        return PersonalizedConfig(window_size=self.p_window, negatives=self.p_negatives,
                                  omega_addcart=self.omega if omega is None else omega,
                                  dim=self.p_dim, learning_rate=self.p_lr, epochs=self.p_epochs,
                                  seed=self.seed, workers=self.workers, addcart_scope=self.addcart_scope)

    def synth_config(self):
        from .synth import SynthConfig
        return SynthConfig(users=self.users, items=self.items, clusters=self.clusters, days=self.days,
                           events_per_user=self.events_per_user, addcart_rate=self.addcart_rate,
                           p_in=self.p_in, p_taste=self.p_taste, vector_dim=self.vector_dim,
                           new_items=self.n_new_items, seed=self.seed)

    @property
    def quotas(self) -> tuple[int, int, int]:
        return (self.quota_cf, self.quota_attr, self.quota_new)

    def validate(self) -> None:
        try:
            self.item2vec_config()
            self.personalized_config()
            self.synth_config()
            ks = self.k_values
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (0.0 <= self.alpha <= 1.0, "alpha must be in [0, 1]"),
            (self.top_n >= 1, "top_n must be >= 1"),
            (self.shards >= 1, "shards must be >= 1"),
            (self.user_cap >= 0, "user_cap must be >= 0"),
            (self.pool_size >= 1, "pool_size must be >= 1"),
            (min(self.quotas) >= 0 and sum(self.quotas) <= self.pool_size, "quotas must be >= 0 and sum to <= pool_size"),
            (bool(ks) and ks[0] >= 1, "ks must list K values >= 1"),
            (1 <= self.k <= self.pool_size, "k must be in [1, pool_size]"),
            (self.cutoff_ms >= 0, "cutoff_ms must be >= 0"),
            (self.latency_budget_ms > 0, "latency_budget_ms must be > 0"),
            (0 <= self.port <= 65535, "port out of range"),
            (self.ttl_s >= 0, "ttl_s must be >= 0"),
        ]
        for f in fields(self):
            choices = f.metadata.get("choices")
            if choices and getattr(self, f.name) not in choices:
                checks.append((False, f"{f.name} must be one of {', '.join(choices)}"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(raw: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for key, value in raw.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        typ = _TYPES[key]
        if not isinstance(value, str):
            out[key] = value
            continue
        try:
            out[key] = {"int": int, "float": float}.get(typ, str)(value.strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r} as {typ}") from None
    return out


def parse_config_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        raw[key] = value
    return raw


def load_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (command-line flags win)."""
    raw: dict[str, Any] = {}
    if path:
        try:
            raw.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    raw.update(overrides or {})
    return RunConfig().with_updates(raw)
