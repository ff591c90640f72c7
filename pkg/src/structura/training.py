"""Training loops and evaluation.

Local pretraining fits each factor-type scorer independently with a
multiclass hinge; structured training runs loss-augmented inference through
a configurable backend, backpropagates the structured hinge, and early-stops
on summed dev loss with patience, returning the best snapshot.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from .constraints import ConstraintSet
from .errors import DataFormatError, StructuraError
from .exact import Augment, ExactConfig, exact_map
from .graphs import (
    AgreementLabel,
    ArgMiningMeta,
    Assignment,
    FactorGraph,
    LinkLabel,
    NodeLabel,
    StanceLabel,
    StanceMeta,
    Task,
    VarKind,
    active_factors,
)
from .randomized import (
    RandConfig,
    randomized_inference_argmining,
    randomized_inference_stance,
)
from .results import InferenceResult, Telemetry
from .scoring import (
    GradientBank,
    HammingMode,
    ScoreTable,
    ScorerBank,
    config_index,
    hinge_gradient,
    hinge_loss,
    param_norm,
    score_graph,
    sgd_step,
)


class Backend(str, Enum):
    EXACT = "exact"
    RAND_CONSTRAINED = "rand_c"
    RAND_UNCONSTRAINED = "rand"
    LOCAL_ONLY = "local"
    # Reserved so harness reports can ingest externally produced numbers for
    # the dual-decomposition solver; never runnable here.
    AD3 = "ad3"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass
class Corpus:
    graphs: list[FactorGraph]
    gold: list[Assignment]
    split: Split = Split.TRAIN

    def __post_init__(self):
        if not self.graphs:
            raise DataFormatError("corpus is empty")
        if len(self.graphs) != len(self.gold):
            raise DataFormatError("corpus gold list does not match graphs")
        ids = [g.id for g in self.graphs]
        if len(set(ids)) != len(ids):
            raise DataFormatError("corpus contains duplicate graph ids")
        for g, a in zip(self.graphs, self.gold):
            g.validate_assignment(a)

    @property
    def n(self) -> int:
        return len(self.graphs)

    @property
    def task(self) -> Task:
        return self.graphs[0].task

    def pairs(self) -> Iterator[tuple[FactorGraph, Assignment]]:
        return zip(self.graphs, self.gold)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    weight_decay: float = 1e-5
    patience: int = 10
    max_epochs: int = 100
    backend: Backend = Backend.EXACT
    rand: RandConfig = field(default_factory=RandConfig)
    hamming_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise DataFormatError("patience must be >= 1")
        if self.learning_rate <= 0:
            raise DataFormatError("learning_rate must be > 0")

    @classmethod
    def local_defaults(cls, task: Task) -> "TrainConfig":
        lr = 0.05 if task is Task.ARG_MINING else 5e-5
        return cls(learning_rate=lr, patience=10, max_epochs=50)

    @classmethod
    def structured_defaults(cls, task: Task) -> "TrainConfig":
        if task is Task.ARG_MINING:
            return cls(
                learning_rate=1e-4,
                patience=10,
                rand=RandConfig(restarts=5),
            )
        return cls(
            learning_rate=2e-6,
            patience=3,
            rand=RandConfig(restarts=50),
        )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    param_norm: float
    seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "dev_loss": self.dev_loss,
            "param_norm": self.param_norm,
            "seconds": self.seconds,
        }


@dataclass
class TrainResult:
    bank: ScorerBank
    history: list[EpochRecord]

    @property
    def best_epoch(self) -> int:
        return min(range(len(self.history)), key=lambda i: self.history[i].dev_loss)


def run_backend(
    g: FactorGraph,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    backend: Backend,
    rand_cfg: Optional[RandConfig] = None,
    exact_cfg: Optional[ExactConfig] = None,
    aug: Optional[Augment] = None,
) -> InferenceResult:
    """Dispatch one MAP inference call to the selected backend."""
    if backend is Backend.EXACT:
        return exact_map(g, bank, cs, aug=aug, config=exact_cfg)
    if backend in (Backend.RAND_CONSTRAINED, Backend.RAND_UNCONSTRAINED):
        cfg = rand_cfg or RandConfig()
        cfg = replace(cfg, constrained=backend is Backend.RAND_CONSTRAINED)
        gold = None
        if aug is not None:
            gold = aug.gold
            cfg = replace(cfg, hamming_mode=aug.mode, hamming_weight=aug.coefficient)
        if g.task is Task.ARG_MINING:
            return randomized_inference_argmining(g, bank, cs, cfg, gold=gold)
        return randomized_inference_stance(g, bank, cs, cfg, gold=gold)
    if backend is Backend.LOCAL_ONLY:
        return local_argmax(g, bank)
    raise StructuraError(
        f"backend {backend.value} has no runnable implementation here"
    )


def local_argmax(g: FactorGraph, bank: ScorerBank) -> InferenceResult:
    """Structure-blind prediction: per-variable argmax of local factor scores."""
    start = time.perf_counter()
    table = ScoreTable(g, bank)
    assignment = Assignment(table.argmax_labels())
    telemetry = Telemetry(
        moves_evaluated=g.num_variables, wall_time_s=time.perf_counter() - start
    )
    return InferenceResult(
        assignment=assignment,
        breakdown=score_graph(g, assignment, bank),
        telemetry=telemetry,
        proven_optimal=False,
        backend="local",
    )


def train_local(
    corpus: Corpus, init: ScorerBank, cfg: Optional[TrainConfig] = None
) -> ScorerBank:
    """Fit each factor-type scorer on its own gold labels, ignoring structure.

    Uses a per-factor multiclass hinge with margin 1 and stops early once an
    epoch produces no violations. Single-configuration factor types carry no
    local decision and are skipped.
    """
    cfg = cfg or TrainConfig.local_defaults(corpus.task)
    bank = init.copy()
    rng = np.random.default_rng(cfg.seed)
    for _epoch in range(cfg.max_epochs):
        any_violation = False
        order = rng.permutation(corpus.n)
        for idx in order:
            g = corpus.graphs[int(idx)]
            gold = corpus.gold[int(idx)]
            grads = GradientBank(bank)
            graph_has_violation = False
            for f in g.factors:
                scorer = bank.scorer_for(f.ftype)
                if scorer.label_arity < 2 or f.gated:
                    continue
                gold_idx = int(gold.values[f.scope[0]])
                scores = scorer.scores(f.features)
                margins = scores + 1.0
                margins[gold_idx] = scores[gold_idx]
                viol_idx = int(np.argmax(margins))
                if viol_idx != gold_idx and margins[viol_idx] > scores[gold_idx]:
                    grads.accumulate(bank, f.ftype, f.features, viol_idx, 1.0)
                    grads.accumulate(bank, f.ftype, f.features, gold_idx, -1.0)
                    graph_has_violation = True
            if graph_has_violation:
                sgd_step(bank, grads, cfg.learning_rate, cfg.weight_decay)
                any_violation = True
        if not any_violation:
            break
    return bank


def local_factor_accuracy(corpus: Corpus, bank: ScorerBank) -> float:
    """Fraction of local factor decisions whose argmax matches gold."""
    correct = 0
    total = 0
    for g, gold in corpus.pairs():
        for f in g.factors:
            scorer = bank.scorer_for(f.ftype)
            if scorer.label_arity < 2 or f.gated:
                continue
            total += 1
            pred = int(np.argmax(scorer.scores(f.features)))
            if pred == int(gold.values[f.scope[0]]):
                correct += 1
    return correct / total if total else 1.0


def train_structured(
    train: Corpus,
    dev: Corpus,
    init: ScorerBank,
    cfg: TrainConfig,
    cs: Optional[ConstraintSet] = None,
    exact_cfg: Optional[ExactConfig] = None,
) -> TrainResult:
    """Structured hinge training with loss-augmented inference and patience.

    Per graph: run loss-augmented inference through the configured backend,
    apply the hinge subgradient with SGD plus weight decay. After every
    epoch the summed dev loss (same backend) drives early stopping; the
    returned bank is the snapshot with the lowest observed dev loss.
    """
    if cfg.backend is Backend.LOCAL_ONLY:
        raise StructuraError("structured training requires an inference backend")
    bank = init.copy()
    best_bank = bank.copy()
    best_loss = float("inf")
    history: list[EpochRecord] = []
    rng = np.random.default_rng(cfg.seed)
    patience_counter = 0
    epoch = 0
    while patience_counter < cfg.patience and epoch < cfg.max_epochs:
        t0 = time.perf_counter()
        train_loss = 0.0
        for idx in rng.permutation(train.n):
            g = train.graphs[int(idx)]
            gold = train.gold[int(idx)]
            pred = _loss_augmented(g, bank, cs, cfg, exact_cfg, gold, epoch)
            loss = hinge_loss(g, gold, pred, bank, cfg.hamming_weight)
            train_loss += loss
            if loss > 0:
                grads = hinge_gradient(g, gold, pred, bank, cfg.hamming_weight)
                sgd_step(bank, grads, cfg.learning_rate, cfg.weight_decay)
        dev_loss = 0.0
        for g, gold in dev.pairs():
            pred = _loss_augmented(g, bank, cs, cfg, exact_cfg, gold, epoch)
            dev_loss += hinge_loss(g, gold, pred, bank, cfg.hamming_weight)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                dev_loss=dev_loss,
                param_norm=param_norm(bank),
                seconds=time.perf_counter() - t0,
            )
        )
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_bank = bank.copy()
            patience_counter = 0
        else:
            patience_counter += 1
        epoch += 1
    return TrainResult(bank=best_bank, history=history)


def _loss_augmented(g, bank, cs, cfg, exact_cfg, gold, epoch) -> Assignment:
    aug = Augment(gold, HammingMode.ADDITIVE, cfg.hamming_weight)
    try:
        res = run_backend(
            g, bank, cs, cfg.backend, rand_cfg=cfg.rand, exact_cfg=exact_cfg, aug=aug
        )
    except StructuraError as exc:
        raise StructuraError(
            f"epoch {epoch}: inference backend {cfg.backend.value} failed on "
            f"graph {g.id}: {exc}"
        ) from exc
    return res.assignment


# -- metrics ---------------------------------------------------------------


@dataclass
class ClassStats:
    label: str
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


def per_class_stats(
    gold: list[int], pred: list[int], labels: list[str]
) -> list[ClassStats]:
    """Precision/recall/F1 per class over the full label set.

    Classes absent from both gold and predictions get zeros, and they still
    count in macro averages.
    """
    out = []
    for c, name in enumerate(labels):
        tp = sum(1 for gv, pv in zip(gold, pred) if gv == c and pv == c)
        fp = sum(1 for gv, pv in zip(gold, pred) if gv != c and pv == c)
        fn = sum(1 for gv, pv in zip(gold, pred) if gv == c and pv != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        out.append(ClassStats(name, precision, recall, f1, tp + fn))
    return out


def macro_f1(gold: list[int], pred: list[int], labels: list[str]) -> float:
    stats = per_class_stats(gold, pred, labels)
    return sum(s.f1 for s in stats) / len(stats) if stats else 0.0


def positive_f1(gold: list[int], pred: list[int]) -> float:
    stats = per_class_stats(gold, pred, ["neg", "pos"])
    return stats[1].f1


NODE_CLASS_NAMES = [l.name for l in NodeLabel]
LINK_CLASS_NAMES = ["OFF", "ON"]
LINK_LABEL_NAMES = [l.name for l in LinkLabel]
STANCE_CLASS_NAMES = [l.name for l in StanceLabel]
AGREEMENT_CLASS_NAMES = [l.name for l in AgreementLabel]


@dataclass
class MetricsReport:
    node_f1: float
    stance_f1: float
    accuracy: float
    avg_f1: float
    link_f1: Optional[float] = None
    per_class: dict = field(default_factory=dict)
    exact_eval: bool = True
    non_exact_graphs: list[str] = field(default_factory=list)

    def check_consistency(self, tol: float = 1e-9) -> None:
        parts = [self.node_f1] + ([self.link_f1] if self.link_f1 is not None else [])
        if abs(self.avg_f1 - sum(parts) / len(parts)) > tol:
            raise StructuraError("avg_f1 inconsistent with its parts")

    def to_dict(self) -> dict:
        return {
            "node_f1": self.node_f1,
            "link_f1": self.link_f1,
            "stance_f1": self.stance_f1,
            "accuracy": self.accuracy,
            "avg_f1": self.avg_f1,
            "per_class": {
                family: {name: st.to_dict() for name, st in stats.items()}
                for family, stats in self.per_class.items()
            },
            "exact_eval": self.exact_eval,
            "non_exact_graphs": self.non_exact_graphs,
        }

    def table(self) -> str:
        rows = [
            ("node macro F1", self.node_f1),
            ("link positive F1", self.link_f1),
            ("stance macro F1", self.stance_f1),
            ("accuracy", self.accuracy),
            ("avg F1", self.avg_f1),
        ]
        lines = ["metric                value", "-" * 28]
        for name, value in rows:
            shown = "-" if value is None else f"{value:.4f}"
            lines.append(f"{name:<20} {shown:>7}")
        if not self.exact_eval:
            lines.append(f"(non-exact on: {', '.join(self.non_exact_graphs)})")
        return "\n".join(lines)


def metrics_from_predictions(
    corpus: Corpus,
    predictions: list[Assignment],
    exact_eval: bool = True,
    non_exact_graphs: Optional[list[str]] = None,
) -> MetricsReport:
    """Assemble the metric suite from per-graph predictions.

    Node macro F1 covers the node-label variables; link positive F1 covers
    link indicators (essays only); stance macro F1 covers edge labels, for
    essays restricted to pairs whose gold link is on; accuracy counts every
    variable.
    """
    task = corpus.task
    node_g, node_p = [], []
    link_g, link_p = [], []
    stance_g, stance_p = [], []
    correct = 0
    total = 0
    for (g, gold), pred in zip(corpus.pairs(), predictions):
        gv, pv = gold.values, pred.values
        correct += int(np.count_nonzero(gv == pv))
        total += len(gv)
        meta = g.metadata
        if task is Task.ARG_MINING:
            assert isinstance(meta, ArgMiningMeta)
            for var in meta.node_var:
                node_g.append(int(gv[var]))
                node_p.append(int(pv[var]))
            for pair in meta.pairs:
                lvar = meta.link_var[pair]
                link_g.append(int(gv[lvar]))
                link_p.append(int(pv[lvar]))
                if gv[lvar] == 1:
                    svar = meta.stance_var[pair]
                    stance_g.append(int(gv[svar]))
                    stance_p.append(int(pv[svar]))
        else:
            assert isinstance(meta, StanceMeta)
            for var in meta.post_var:
                node_g.append(int(gv[var]))
                node_p.append(int(pv[var]))
            for var in meta.edge_var.values():
                stance_g.append(int(gv[var]))
                stance_p.append(int(pv[var]))
    if task is Task.ARG_MINING:
        node_names, stance_names = NODE_CLASS_NAMES, LINK_LABEL_NAMES
    else:
        node_names, stance_names = STANCE_CLASS_NAMES, AGREEMENT_CLASS_NAMES
    node_f1 = macro_f1(node_g, node_p, node_names)
    stance_f1 = macro_f1(stance_g, stance_p, stance_names)
    per_class = {
        "node": {
            s.label: s for s in per_class_stats(node_g, node_p, node_names)
        },
        "stance": {
            s.label: s for s in per_class_stats(stance_g, stance_p, stance_names)
        },
    }
    link_f1 = None
    if task is Task.ARG_MINING:
        link_f1 = positive_f1(link_g, link_p)
        per_class["link"] = {
            s.label: s for s in per_class_stats(link_g, link_p, LINK_CLASS_NAMES)
        }
        avg = (node_f1 + link_f1) / 2
    else:
        avg = node_f1
    return MetricsReport(
        node_f1=node_f1,
        link_f1=link_f1,
        stance_f1=stance_f1,
        accuracy=correct / total if total else 0.0,
        avg_f1=avg,
        per_class=per_class,
        exact_eval=exact_eval,
        non_exact_graphs=non_exact_graphs or [],
    )


def evaluate(
    corpus: Corpus,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    backend: Backend = Backend.EXACT,
    rand_cfg: Optional[RandConfig] = None,
    exact_cfg: Optional[ExactConfig] = None,
) -> MetricsReport:
    """Metric evaluation of a trained bank over a labeled corpus.

    Test-time inference defaults to exact search (falling back to
    branch-and-bound past the enumeration cap and flagging any graph whose
    search was truncated); other backends are available for baseline rows
    and restart sweeps.
    """
    predictions = []
    non_exact = []
    for g, _gold in corpus.pairs():
        res = run_backend(g, bank, cs, backend, rand_cfg=rand_cfg, exact_cfg=exact_cfg)
        if backend is Backend.EXACT and not res.proven_optimal:
            non_exact.append(g.id)
        predictions.append(res.assignment)
    return metrics_from_predictions(
        corpus,
        predictions,
        exact_eval=backend is Backend.EXACT and not non_exact,
        non_exact_graphs=non_exact,
    )
