"""Stage functions wiring the modules together; each writes its artifacts to the workdir."""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass
from pathlib import Path

from . import cf, data, evaluate, item2vec, personalized, pool
from .config import RunConfig
from .errors import ConfigError, ParseError, SimrecError
from .image import load_vectors

log = logging.getLogger(__name__)

ARTIFACTS = {
    "train": "train.tsv",
    "test": "test.tsv",
    "cf_table": "cf_table.tsv",
    "pools": "pools.tsv",
    "item2vec": "item2vec.emb",
    "personalized": "personalized.emb",
    "addcart": "addcart.emb",
    "report_csv": "report.csv",
    "report_txt": "report.txt",
}

RANKERS = ("image", "cf", "item2vec", "personalized", "addcart-enhanced")


class StageError(SimrecError):
    """Failure inside a named stage; ``data_error`` selects the exit code."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.data_error = isinstance(exc, (ParseError, OSError, ValueError)) and not isinstance(exc, ConfigError)
        self.usage_error = isinstance(exc, ConfigError)


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, exc) from exc


def artifact(cfg: RunConfig, key: str) -> Path:
    return cfg.path(ARTIFACTS[key])


def _require(value: str, key: str) -> str:
    if not value:
        raise ConfigError(f"config key {key!r} is required for this command")
    return value


def load_attributes(cfg: RunConfig) -> data.Attributes:
    return data.load_attributes(cfg.attributes) if cfg.attributes else data.Attributes()


def load_new_items(cfg: RunConfig) -> list[str]:
    return pool.read_new_items(cfg.new_items) if cfg.new_items else []


# -- stages ------------------------------------------------------------------------


def run_ingest(cfg: RunConfig):
    with stage("core-data"):
        events = data.read_events(_require(cfg.clicks, "clicks"))
        if not events:
            raise ValueError(f"no events in {cfg.clicks}")
        cutoff = cfg.cutoff_ms or data.last_day_cutoff(events)
        train_ev, test_ev = data.split_events(events, cutoff)
        Path(cfg.workdir).mkdir(parents=True, exist_ok=True)
        data.write_events(artifact(cfg, "train"), train_ev)
        data.write_events(artifact(cfg, "test"), test_ev)
        train, test = data.build_corpus(train_ev), data.build_corpus(test_ev)
        log.info("split at %d: %d train / %d test events, %d train items",
                 cutoff, len(train_ev), len(test_ev), train.n_items)
        if train.n_items == 0:
            raise ValueError("no training events before the cutoff")
        return train, test


def load_split(cfg: RunConfig):
    with stage("core-data"):
        train = data.build_corpus(data.read_events(artifact(cfg, "train")))
        test = data.build_corpus(data.read_events(artifact(cfg, "test")))
        return train, test


def run_cf(cfg: RunConfig, train: data.Corpus, attrs=None) -> cf.SimilarityTable:
    with stage("cf-ranker"):
        attrs = load_attributes(cfg) if attrs is None else attrs
        table = cf.compute_similarity_table(train, attrs, alpha=cfg.alpha, top_n=cfg.top_n,
                                            shards=cfg.shards, user_cap=cfg.user_cap or None,
                                            workers=cfg.workers)
        cf.write_similarity_table(artifact(cfg, "cf_table"), table)
        return table


def run_pool(cfg: RunConfig, train: data.Corpus, table, attrs=None) -> pool.CandidatePool:
    with stage("candidate-pool"):
        attrs = load_attributes(cfg) if attrs is None else attrs
        attr_index = cf.attribute_neighbors(train.item_index, attrs, cfg.pool_size)
        pools = pool.build_pools(train.item_index, table, attr_index, load_new_items(cfg),
                                 cfg.quotas, cfg.pool_size)
        pool.write_pools(artifact(cfg, "pools"), pools)
        return pools


def run_item2vec(cfg: RunConfig, train: data.Corpus) -> item2vec.EmbeddingModel:
    with stage("item2vec"):
        model = item2vec.train(train, cfg.item2vec_config())
        item2vec.write_embedding(artifact(cfg, "item2vec"), model)
        return model


def run_personalized(cfg: RunConfig, train: data.Corpus):
    """Train the plain (omega = 1) and the add-cart enhanced model."""
    with stage("personalized"):
        plain = personalized.train(train, cfg.personalized_config(omega=1.0))
        personalized.write_personalized(artifact(cfg, "personalized"), plain)
        enhanced = personalized.train(train, cfg.personalized_config())
        personalized.write_personalized(artifact(cfg, "addcart"), enhanced)
        return plain, enhanced


@dataclass
class Models:
    table: cf.SimilarityTable
    item2vec: item2vec.EmbeddingModel
    plain: personalized.PersonalizedModel
    enhanced: personalized.PersonalizedModel


def load_models(cfg: RunConfig) -> Models:
    with stage("evaluator"):
        return Models(
            cf.read_similarity_table(artifact(cfg, "cf_table"), cfg.alpha),
            item2vec.load_item2vec(artifact(cfg, "item2vec")),
            personalized.load_personalized(artifact(cfg, "personalized")),
            personalized.load_personalized(artifact(cfg, "addcart")),
        )


def run_evaluate(cfg: RunConfig, train, test, pools, models: Models) -> evaluate.EvalReport:
    with stage("evaluator"):
        order = {item: k for k, item in enumerate(train.item_index)}
        rankers = {}
        if cfg.vectors and Path(cfg.vectors).is_file():
            rankers["image"] = evaluate.image_ranker(load_vectors(cfg.vectors), order)
        else:
            log.warning("image ranker skipped: no vectors file (%r)", cfg.vectors)
            rankers["image"] = None
        rankers["cf"] = evaluate.cf_ranker(models.table, order)
        rankers["item2vec"] = evaluate.item2vec_ranker(models.item2vec)
        rankers["personalized"] = evaluate.personalized_ranker(models.plain)
        rankers["addcart-enhanced"] = evaluate.personalized_ranker(models.enhanced)
        cases = evaluate.build_cases(test, train, history=cfg.p_window,
                                     include_train_history=cfg.history_scope == "full")
        report = evaluate.run_report(cases, rankers, pools, cfg.k_values, workers=cfg.workers)
        report.write(artifact(cfg, "report_csv"), artifact(cfg, "report_txt"))
        return report


def run_pipeline(cfg: RunConfig) -> evaluate.EvalReport:
    train, test = run_ingest(cfg)
    attrs = load_attributes(cfg)
    table = run_cf(cfg, train, attrs)
    pools = run_pool(cfg, train, table, attrs)
    i2v = run_item2vec(cfg, train)
    plain, enhanced = run_personalized(cfg, train)
    return run_evaluate(cfg, train, test, pools, Models(table, i2v, plain, enhanced))
