"""Round-of-learning orchestration and scenario runs.

Every random draw is seeded from ``(master_seed, run, client, round, stream)``
through :class:`numpy.random.SeedSequence`, so results do not depend on the
order or concurrency in which clients are processed.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .aggregation import AggregatorConfig, ClientUpdate, f_la
from .data import Dataset, PartitionPlan, generate_synthetic, load_idx, partition_non_iid, poison_labels, split_validation
from .errors import FliowaError, RoundError
from .model import ModelSpec, ParamVector, TrainConfig, evaluate_accuracy, init_model, train_local

log = logging.getLogger(__name__)

# stream tags keep derived seeds for different purposes apart
_DATA, _SPLIT, _PARTITION, _ADVERSARY, _POISON, _INIT, _TRAIN = range(7)


def derive_seed(*keys):
    """64-bit seed hashed from non-negative integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    num_classes: int = 10
    dim: int = 60
    samples_per_class: int = 350
    spread: float = 0.25
    idx_images: str | None = None
    idx_labels: str | None = None
    validation_fraction: float = 1 / 6
    test_fraction: float = 1 / 7
    poison_mode: str = "shuffle"

    def __post_init__(self):
        if self.source not in ("synthetic", "idx"):
            raise ValueError(f"unknown dataset source {self.source!r}")
        if self.source == "idx" and not (self.idx_images and self.idx_labels):
            raise ValueError("idx dataset requires both image and label paths")
        if self.poison_mode not in ("shuffle", "class-map"):
            raise ValueError(f"unknown poison mode {self.poison_mode!r}")


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int = 20
    rounds: int = 10
    epochs_per_round: int = 5
    adversarial_fraction: float = 0.0
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    hidden_dims: tuple = ()
    batch_size: int = 16
    learning_rate: float = 8.0
    labels_per_client: int = 6
    master_seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.n_clients < 1:
            raise ValueError(f"n_clients must be >= 1, got {self.n_clients}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.epochs_per_round < 1:
            raise ValueError(f"epochs_per_round must be >= 1, got {self.epochs_per_round}")
        if not 0.0 <= self.adversarial_fraction < 1.0:
            raise ValueError(f"adversarial_fraction must be in [0, 1), got {self.adversarial_fraction}")
        if self.n_adversarial >= self.n_clients:
            raise ValueError("at least one client must stay benign")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        # validates batch size and learning rate
        TrainConfig(self.epochs_per_round, self.batch_size, self.learning_rate, 0)

    @property
    def n_adversarial(self):
        # guard against 0.1 * 20 landing at 1.9999999
        return int(np.floor(self.adversarial_fraction * self.n_clients + 1e-9))

    def train_config(self, seed):
        return TrainConfig(self.epochs_per_round, self.batch_size, self.learning_rate, seed)

    def partition_plan(self, run):
        return PartitionPlan(self.n_clients, self.labels_per_client, derive_seed(self.master_seed, run, _PARTITION))


@dataclass
class PreparedData:
    train: Dataset
    validation: Dataset
    test: Dataset
    model_spec: ModelSpec


def prepare_data(cfg):
    """Build the shared train pool, validation set and test set."""
    dc = cfg.data
    if dc.source == "synthetic":
        full = generate_synthetic(dc.num_classes, dc.dim, dc.samples_per_class, dc.spread,
                                  derive_seed(cfg.master_seed, _DATA))
    else:
        full = load_idx(dc.idx_images, dc.idx_labels)
    rest, test = split_validation(full, dc.test_fraction, derive_seed(cfg.master_seed, _SPLIT, 0))
    train, validation = split_validation(rest, dc.validation_fraction, derive_seed(cfg.master_seed, _SPLIT, 1))
    spec = ModelSpec(full.dim, full.num_classes, cfg.hidden_dims)
    return PreparedData(train, validation, test, spec)


@dataclass
class FederationState:
    cfg: FederationConfig
    run_index: int
    round_index: int
    model_spec: ModelSpec
    global_params: ParamVector
    client_params: list
    client_data: list
    validation: Dataset
    test: Dataset
    adversarial_ids: frozenset


@dataclass
class RoundMetrics:
    round_index: int
    global_accuracy: float
    per_client_accuracy: list
    c_used: float | None
    weights: list
    discarded_ids: frozenset
    adversarial_discarded: int
    benign_discarded: int
    b_effective: float | None = None

    def __eq__(self, other):
        if not isinstance(other, RoundMetrics):
            return NotImplemented
        return (
            self.round_index == other.round_index
            and self.global_accuracy == other.global_accuracy
            and list(self.per_client_accuracy) == list(other.per_client_accuracy)
            and self.c_used == other.c_used
            and list(self.weights) == list(other.weights)
            and frozenset(self.discarded_ids) == frozenset(other.discarded_ids)
            and self.adversarial_discarded == other.adversarial_discarded
            and self.benign_discarded == other.benign_discarded
            and self.b_effective == other.b_effective
        )


def choose_adversaries(cfg, run):
    rng = np.random.default_rng(derive_seed(cfg.master_seed, run, _ADVERSARY))
    return frozenset(int(i) for i in rng.permutation(cfg.n_clients)[: cfg.n_adversarial])


def init_state(cfg, run=0, prepared=None):
    """Partition, poison and initialise a fresh run."""
    prepared = prepare_data(cfg) if prepared is None else prepared
    client_data = partition_non_iid(prepared.train, cfg.partition_plan(run))
    adversaries = choose_adversaries(cfg, run)
    for cid in sorted(adversaries):
        # poisoned once, at setup
        client_data[cid] = poison_labels(client_data[cid], cfg.data.poison_mode,
                                         derive_seed(cfg.master_seed, run, cid, _POISON))
    global_params = init_model(prepared.model_spec, derive_seed(cfg.master_seed, run, _INIT))
    return FederationState(
        cfg=cfg,
        run_index=run,
        round_index=0,
        model_spec=prepared.model_spec,
        global_params=global_params,
        client_params=[global_params.copy() for _ in range(cfg.n_clients)],
        client_data=client_data,
        validation=prepared.validation,
        test=prepared.test,
        adversarial_ids=adversaries,
    )


def _client_step(state, cid, round_index):
    cfg = state.cfg
    data = state.client_data[cid]
    params = state.client_params[cid]
    if len(data) > 0:
        seed = derive_seed(cfg.master_seed, state.run_index, cid, round_index, _TRAIN)
        params = train_local(params, state.model_spec, data, cfg.train_config(seed))
    acc = f_la(params, state.validation, state.model_spec)
    return ClientUpdate(cid, params, max(len(data), 1), acc)


def run_round(state):
    """One round: local training, server-side scoring, aggregation, broadcast."""
    cfg = state.cfg
    r = state.round_index + 1
    try:
        ids = range(cfg.n_clients)
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                updates = list(pool.map(lambda cid: _client_step(state, cid, r), ids))
        else:
            updates = [_client_step(state, cid, r) for cid in ids]
        new_global, report = cfg.aggregator(updates)
        global_acc = evaluate_accuracy(new_global, state.model_spec, state.test)
    except FliowaError as exc:
        raise RoundError(r, exc) from exc

    discarded = frozenset(report.discarded_ids)
    adv = len(discarded & state.adversarial_ids)
    metrics = RoundMetrics(
        round_index=r,
        global_accuracy=global_acc,
        per_client_accuracy=[u.accuracy for u in updates],
        c_used=report.c_used,
        weights=[report.weights[cid] for cid in range(cfg.n_clients)],
        discarded_ids=discarded,
        adversarial_discarded=adv,
        benign_discarded=len(discarded) - adv,
        b_effective=report.b_effective,
    )
    log.debug("run %d round %d acc=%.4f c=%s discarded=%s", state.run_index, r, global_acc,
              report.c_used, sorted(discarded))
    new_state = replace(
        state,
        round_index=r,
        global_params=new_global,
        client_params=[new_global.copy() for _ in range(cfg.n_clients)],
    )
    return new_state, metrics


def run_federation(state):
    series = []
    for _ in range(state.cfg.rounds):
        state, metrics = run_round(state)
        series.append(metrics)
    return state, series


@dataclass
class ScenarioResult:
    label: str
    series: list
    adversarial_ids: list
    mean_accuracy: np.ndarray

    @property
    def final_accuracies(self):
        return np.array([s[-1].global_accuracy for s in self.series])


def run_scenario(cfg, runs=10, prepared=None):
    """Repeat the federation ``runs`` times with per-run derived seeds."""
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    prepared = prepare_data(cfg) if prepared is None else prepared
    series, adversaries = [], []
    for run in range(runs):
        state = init_state(cfg, run, prepared)
        _, s = run_federation(state)
        series.append(s)
        adversaries.append(state.adversarial_ids)
    mean = np.mean([[m.global_accuracy for m in s] for s in series], axis=0)
    return ScenarioResult(cfg.aggregator.label, series, adversaries, mean)


def detection_report(series, true_adversarial):
    """Per-round ``(precision, recall)`` of the discarded set."""
    truth = frozenset(true_adversarial)
    out = []
    for m in series:
        discarded = frozenset(m.discarded_ids)
        hit = len(discarded & truth)
        precision = hit / len(discarded) if discarded else 1.0
        recall = hit / len(truth) if truth else 1.0
        out.append((precision, recall))
    return out
