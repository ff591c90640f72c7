"""Corpus serialization and synthetic data generation.

Corpora are JSON files with an explicit schema version. Essays carry
propositions grouped into paragraphs, gold links with stances, and one dense
feature vector per proposition plus one per ordered within-paragraph pair.
Threads carry posts with authors, reply parents, stances, and optional
per-edge feature vectors (derived from post-feature concatenation when
absent). No raw text appears anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .constraints import ConstraintSet, sample_valid_labeling
from .errors import DataFormatError
from .graphs import (
    AgreementLabel,
    ArgMiningMeta,
    Assignment,
    Factor,
    FactorGraph,
    FactorType,
    LinkLabel,
    NodeLabel,
    StanceLabel,
    StanceMeta,
    Task,
    Variable,
    VarKind,
)
from .randomized import sample_random_tree
from .training import Corpus, Split

SCHEMA_VERSION = 1

# External label vocabulary; field values in corpus files are exactly these.
NODE_LABEL_NAMES = {"MajorClaim": 0, "Claim": 1, "Premise": 2}
LINK_LABEL_NAMES = {"Support": 0, "Attack": 1}
STANCE_LABEL_NAMES = {"Pro": 0, "Con": 1}
AGREEMENT_LABEL_NAMES = {"Agree": 0, "Disagree": 1}

NODE_LABEL_TEXT = {v: k for k, v in NODE_LABEL_NAMES.items()}
LINK_LABEL_TEXT = {v: k for k, v in LINK_LABEL_NAMES.items()}
STANCE_LABEL_TEXT = {v: k for k, v in STANCE_LABEL_NAMES.items()}
AGREEMENT_LABEL_TEXT = {v: k for k, v in AGREEMENT_LABEL_NAMES.items()}


def _parse_label(table: dict, value, doc_id: str, field: str) -> int:
    try:
        return table[value]
    except (KeyError, TypeError):
        raise DataFormatError(
            f"document {doc_id}: field {field}: unknown label {value!r} "
            f"(expected one of {sorted(table)})"
        ) from None


def _parse_features(value, doc_id: str, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise DataFormatError(
            f"document {doc_id}: field {field}: feature vector must be a "
            f"non-empty list of numbers"
        )
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise DataFormatError(
            f"document {doc_id}: field {field}: non-numeric feature entry"
        ) from None


# -- essay documents ---------------------------------------------------------


def build_arg_graph(doc: dict) -> tuple[FactorGraph, Assignment]:
    """Materialize one essay document into a factor graph plus gold labels.

    Creates all candidate link and link-label variables for ordered
    within-paragraph pairs, and all grandparent/co-parent factors over
    ordered pairs of candidate links (shared head, and shared target,
    respectively).
    """
    doc_id = doc.get("id")
    if not doc_id:
        raise DataFormatError("essay document missing id")
    paragraphs = doc.get("paragraphs")
    if not isinstance(paragraphs, list) or not paragraphs:
        raise DataFormatError(f"document {doc_id}: no paragraphs")
    prop_ids: list[str] = []
    prop_paragraph: list[int] = []
    prop_features: list[np.ndarray] = []
    gold_node: list[int] = []
    for p_idx, para in enumerate(paragraphs):
        props = para.get("propositions")
        if not isinstance(props, list) or not props:
            raise DataFormatError(
                f"document {doc_id}: paragraph {p_idx} has no propositions"
            )
        for prop in props:
            pid = prop.get("id")
            if not pid or pid in prop_ids:
                raise DataFormatError(
                    f"document {doc_id}: missing or duplicate proposition id {pid!r}"
                )
            prop_ids.append(pid)
            prop_paragraph.append(p_idx)
            prop_features.append(
                _parse_features(prop.get("features"), doc_id, f"propositions[{pid}]")
            )
            gold_node.append(
                _parse_label(
                    NODE_LABEL_NAMES,
                    prop.get("gold_label"),
                    doc_id,
                    f"propositions[{pid}].gold_label",
                )
            )
    index_of = {pid: i for i, pid in enumerate(prop_ids)}

    pairs: list[tuple[int, int]] = []
    for p_idx in range(len(paragraphs)):
        members = [i for i, p in enumerate(prop_paragraph) if p == p_idx]
        for src in members:
            for dst in members:
                if src != dst:
                    pairs.append((src, dst))
    pair_index = {pair: k for k, pair in enumerate(pairs)}

    pair_features: dict[tuple[int, int], np.ndarray] = {}
    for rec in doc.get("pair_features", []):
        src, dst = rec.get("src"), rec.get("dst")
        if src not in index_of or dst not in index_of:
            raise DataFormatError(
                f"document {doc_id}: pair_features references unknown "
                f"proposition {src!r}->{dst!r}"
            )
        pair = (index_of[src], index_of[dst])
        if pair not in pair_index:
            raise DataFormatError(
                f"document {doc_id}: pair {src}->{dst} crosses paragraphs"
            )
        pair_features[pair] = _parse_features(
            rec.get("features"), doc_id, f"pair_features[{src}->{dst}]"
        )
    missing = [p for p in pairs if p not in pair_features]
    if missing:
        s, d = missing[0]
        raise DataFormatError(
            f"document {doc_id}: missing pair_features for "
            f"{prop_ids[s]}->{prop_ids[d]} ({len(missing)} pairs total)"
        )

    gold_links: dict[tuple[int, int], int] = {}
    out_degree: dict[int, int] = {}
    for rec in doc.get("links", []):
        src, dst = rec.get("src"), rec.get("dst")
        if src not in index_of or dst not in index_of:
            raise DataFormatError(
                f"document {doc_id}: link references unknown proposition "
                f"{src!r}->{dst!r}"
            )
        pair = (index_of[src], index_of[dst])
        if pair not in pair_index:
            raise DataFormatError(
                f"document {doc_id}: link {src}->{dst} crosses paragraphs"
            )
        if pair in gold_links:
            raise DataFormatError(f"document {doc_id}: duplicate link {src}->{dst}")
        gold_links[pair] = _parse_label(
            LINK_LABEL_NAMES, rec.get("gold_stance"), doc_id, f"links[{src}->{dst}]"
        )
        out_degree[pair[0]] = out_degree.get(pair[0], 0) + 1
    for src, deg in out_degree.items():
        if deg > 1:
            raise DataFormatError(
                f"document {doc_id}: proposition {prop_ids[src]} has {deg} gold parents"
            )
    _reject_gold_cycles(doc_id, prop_ids, gold_links)

    n = len(prop_ids)
    variables: list[Variable] = []
    groups: list[int] = []
    feature_store: list[np.ndarray] = list(prop_features)
    node_var = []
    for i in range(n):
        node_var.append(len(variables))
        variables.append(
            Variable(len(variables), VarKind.NODE_LABEL, (0, 1, 2), feature_ref=i)
        )
        groups.append(prop_paragraph[i])
    link_var: dict[tuple[int, int], int] = {}
    stance_var: dict[tuple[int, int], int] = {}
    for pair in pairs:
        ref = len(feature_store)
        feature_store.append(pair_features[pair])
        link_var[pair] = len(variables)
        variables.append(
            Variable(len(variables), VarKind.LINK_INDICATOR, (0, 1), feature_ref=ref)
        )
        groups.append(prop_paragraph[pair[0]])
        stance_var[pair] = len(variables)
        variables.append(
            Variable(len(variables), VarKind.LINK_LABEL, (0, 1), feature_ref=ref)
        )
        groups.append(prop_paragraph[pair[0]])

    factors: list[Factor] = []
    for i in range(n):
        factors.append(
            Factor(len(factors), FactorType.NODE, (node_var[i],), prop_features[i])
        )
    for pair in pairs:
        factors.append(
            Factor(len(factors), FactorType.LINK, (link_var[pair],), pair_features[pair])
        )
    for pair in pairs:
        factors.append(
            Factor(
                len(factors), FactorType.STANCE, (stance_var[pair],), pair_features[pair]
            )
        )
    for a, b in pairs:
        for c in range(n):
            if c in (a, b) or prop_paragraph[c] != prop_paragraph[a]:
                continue
            factors.append(
                Factor(
                    len(factors),
                    FactorType.GRANDPARENT,
                    (link_var[(a, b)], link_var[(b, c)]),
                    np.concatenate([pair_features[(a, b)], pair_features[(b, c)]]),
                )
            )
            factors.append(
                Factor(
                    len(factors),
                    FactorType.COPARENT,
                    (link_var[(a, b)], link_var[(c, b)]),
                    np.concatenate([pair_features[(a, b)], pair_features[(c, b)]]),
                )
            )

    meta = ArgMiningMeta(
        paragraph_count=len(paragraphs),
        prop_ids=prop_ids,
        prop_paragraph=prop_paragraph,
        node_var=node_var,
        pairs=pairs,
        link_var=link_var,
        stance_var=stance_var,
    )
    graph = FactorGraph(
        id=doc_id,
        task=Task.ARG_MINING,
        variables=variables,
        factors=factors,
        groups=groups,
        feature_store=feature_store,
        metadata=meta,
    )
    gold = np.zeros(len(variables), dtype=np.int16)
    for i in range(n):
        gold[node_var[i]] = gold_node[i]
    for pair in pairs:
        if pair in gold_links:
            gold[link_var[pair]] = 1
            gold[stance_var[pair]] = gold_links[pair]
        else:
            # Absent candidate links keep a total gold labeling via the
            # default stance label.
            gold[stance_var[pair]] = int(LinkLabel.SUPPORT)
    return graph, Assignment(gold)


def _reject_gold_cycles(doc_id, prop_ids, gold_links) -> None:
    parent = {src: dst for (src, dst) in gold_links}
    for start in parent:
        seen = {start}
        cur = parent.get(start)
        while cur is not None:
            if cur in seen:
                raise DataFormatError(
                    f"document {doc_id}: gold links contain a cycle through "
                    f"{prop_ids[cur]}"
                )
            seen.add(cur)
            cur = parent.get(cur)


def arg_graph_to_doc(g: FactorGraph, gold: Assignment) -> dict:
    meta: ArgMiningMeta = g.metadata
    paragraphs = []
    for p in range(meta.paragraph_count):
        props = []
        for i in meta.paragraph_props(p):
            props.append(
                {
                    "id": meta.prop_ids[i],
                    "features": [float(v) for v in g.feature_store[i]],
                    "gold_label": NODE_LABEL_TEXT[int(gold.values[meta.node_var[i]])],
                }
            )
        paragraphs.append({"propositions": props})
    links = []
    pair_features = []
    for pair in meta.pairs:
        src, dst = pair
        feats = g.feature_store[g.variables[meta.link_var[pair]].feature_ref]
        pair_features.append(
            {
                "src": meta.prop_ids[src],
                "dst": meta.prop_ids[dst],
                "features": [float(v) for v in feats],
            }
        )
        if gold.values[meta.link_var[pair]] == 1:
            links.append(
                {
                    "src": meta.prop_ids[src],
                    "dst": meta.prop_ids[dst],
                    "gold_stance": LINK_LABEL_TEXT[int(gold.values[meta.stance_var[pair]])],
                }
            )
    return {
        "id": g.id,
        "paragraphs": paragraphs,
        "links": links,
        "pair_features": pair_features,
    }


# -- thread documents --------------------------------------------------------


def build_stance_graph(doc: dict) -> tuple[FactorGraph, Assignment]:
    """Materialize one thread document into a factor graph plus gold labels."""
    doc_id = doc.get("id")
    if not doc_id:
        raise DataFormatError("thread document missing id")
    posts = doc.get("posts")
    if not isinstance(posts, list) or not posts:
        raise DataFormatError(f"document {doc_id}: no posts")
    post_ids, authors, parents_raw = [], [], []
    features, gold_stance, edge_features = [], [], []
    for rec in posts:
        pid = rec.get("id")
        if not pid or pid in post_ids:
            raise DataFormatError(
                f"document {doc_id}: missing or duplicate post id {pid!r}"
            )
        author = rec.get("author")
        if not isinstance(author, str) or not author:
            raise DataFormatError(
                f"document {doc_id}: post {pid} has an empty author"
            )
        post_ids.append(pid)
        authors.append(author)
        parents_raw.append(rec.get("parent"))
        features.append(_parse_features(rec.get("features"), doc_id, f"posts[{pid}]"))
        gold_stance.append(
            _parse_label(
                STANCE_LABEL_NAMES,
                rec.get("gold_stance"),
                doc_id,
                f"posts[{pid}].gold_stance",
            )
        )
        ef = rec.get("edge_features")
        edge_features.append(
            None if ef is None else _parse_features(ef, doc_id, f"posts[{pid}].edge_features")
        )
    index_of = {pid: i for i, pid in enumerate(post_ids)}
    parents: list[Optional[int]] = []
    for i, raw in enumerate(parents_raw):
        if raw is None:
            parents.append(None)
        elif raw in index_of:
            parents.append(index_of[raw])
        else:
            raise DataFormatError(
                f"document {doc_id}: post {post_ids[i]} replies to unknown post {raw!r}"
            )

    n = len(post_ids)
    variables: list[Variable] = []
    groups: list[int] = []
    feature_store: list[np.ndarray] = list(features)
    post_var = []
    for i in range(n):
        post_var.append(len(variables))
        variables.append(
            Variable(len(variables), VarKind.NODE_LABEL, (0, 1), feature_ref=i)
        )
        groups.append(0)
    edge_var: dict[int, int] = {}
    edge_feats: dict[int, np.ndarray] = {}
    for i in range(n):
        if parents[i] is None:
            continue
        feats = edge_features[i]
        if feats is None:
            feats = np.concatenate([features[i], features[parents[i]]])
        ref = len(feature_store)
        feature_store.append(feats)
        edge_feats[i] = feats
        edge_var[i] = len(variables)
        variables.append(
            Variable(len(variables), VarKind.LINK_LABEL, (0, 1), feature_ref=ref)
        )
        groups.append(0)

    factors: list[Factor] = []
    for i in range(n):
        factors.append(
            Factor(len(factors), FactorType.STANCE, (post_var[i],), features[i])
        )
    for i in sorted(edge_var):
        factors.append(
            Factor(len(factors), FactorType.AGREEMENT, (edge_var[i],), edge_feats[i])
        )

    meta = StanceMeta(
        post_ids=post_ids,
        authors=authors,
        parents=parents,
        post_var=post_var,
        edge_var=edge_var,
        topic=doc.get("topic", ""),
    )
    graph = FactorGraph(
        id=doc_id,
        task=Task.STANCE,
        variables=variables,
        factors=factors,
        groups=groups,
        feature_store=feature_store,
        metadata=meta,
    )

    gold = np.zeros(len(variables), dtype=np.int16)
    for i in range(n):
        gold[post_var[i]] = gold_stance[i]
    given = {}
    for rec in doc.get("agreements", []):
        child = rec.get("post")
        if child not in index_of:
            raise DataFormatError(
                f"document {doc_id}: agreement references unknown post {child!r}"
            )
        given[index_of[child]] = _parse_label(
            AGREEMENT_LABEL_NAMES, rec.get("gold_label"), doc_id, f"agreements[{child}]"
        )
    for i, var in edge_var.items():
        if i in given:
            gold[var] = given[i]
        else:
            same = gold_stance[i] == gold_stance[parents[i]]
            gold[var] = AgreementLabel.AGREE if same else AgreementLabel.DISAGREE
    return graph, Assignment(gold)


def stance_graph_to_doc(g: FactorGraph, gold: Assignment) -> dict:
    meta: StanceMeta = g.metadata
    posts = []
    for i, pid in enumerate(meta.post_ids):
        rec = {
            "id": pid,
            "author": meta.authors[i],
            "parent": None if meta.parents[i] is None else meta.post_ids[meta.parents[i]],
            "features": [float(v) for v in g.feature_store[i]],
            "gold_stance": STANCE_LABEL_TEXT[int(gold.values[meta.post_var[i]])],
        }
        if i in meta.edge_var:
            ref = g.variables[meta.edge_var[i]].feature_ref
            rec["edge_features"] = [float(v) for v in g.feature_store[ref]]
        posts.append(rec)
    agreements = [
        {
            "post": meta.post_ids[i],
            "gold_label": AGREEMENT_LABEL_TEXT[int(gold.values[var])],
        }
        for i, var in sorted(meta.edge_var.items())
    ]
    return {"id": g.id, "topic": meta.topic, "posts": posts, "agreements": agreements}


# -- corpus files -------------------------------------------------------------


def corpus_to_payload(corpus: Corpus) -> dict:
    documents = []
    for g, gold in corpus.pairs():
        if g.task is Task.ARG_MINING:
            documents.append(arg_graph_to_doc(g, gold))
        else:
            documents.append(stance_graph_to_doc(g, gold))
    return {
        "schema_version": SCHEMA_VERSION,
        "task": corpus.task.value,
        "split": corpus.split.value,
        "documents": documents,
    }


def corpus_from_payload(payload: dict, task: Optional[Task] = None) -> Corpus:
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataFormatError(f"unsupported corpus schema version {version!r}")
    try:
        file_task = Task(payload.get("task"))
    except ValueError:
        raise DataFormatError(f"unknown task {payload.get('task')!r}") from None
    if task is not None and task is not file_task:
        raise DataFormatError(
            f"corpus holds {file_task.value} documents, expected {task.value}"
        )
    documents = payload.get("documents")
    if not isinstance(documents, list) or not documents:
        raise DataFormatError("corpus has no documents")
    graphs, gold = [], []
    for doc in documents:
        if file_task is Task.ARG_MINING:
            g, a = build_arg_graph(doc)
        else:
            g, a = build_stance_graph(doc)
        graphs.append(g)
        gold.append(a)
    split = Split(payload.get("split", "train"))
    return Corpus(graphs=graphs, gold=gold, split=split)


def load_corpus(path, task: Optional[Task] = None) -> Corpus:
    p = Path(path)
    if not p.exists():
        raise DataFormatError(f"corpus file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"corpus {p}: invalid JSON ({exc})") from exc
    return corpus_from_payload(payload, task)


def save_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(json.dumps(corpus_to_payload(corpus), sort_keys=True))


# -- synthetic generation ------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Controls for the planted-structure corpus generator.

    Features are class prototypes (scaled basis vectors) plus uniform
    jitter, so a linear scorer separates every factor family by at least
    ``margin`` when the noise rate is zero. The noise rate is the
    probability that one factor's features are drawn from a wrong class
    prototype; gold labels are never perturbed. Per-family overrides let
    node and edge evidence carry different strengths.
    """

    task: Task
    graphs: int
    nodes_min: int = 2
    nodes_max: int = 4
    feature_dim: int = 8
    margin: float = 1.0
    noise: float = 0.0
    seed: int = 0
    split: Split = Split.TRAIN
    max_paragraph_size: int = 3
    author_pool: int = 3
    node_margin: Optional[float] = None
    node_noise: Optional[float] = None
    edge_margin: Optional[float] = None
    edge_noise: Optional[float] = None

    def __post_init__(self):
        if self.graphs < 1:
            raise DataFormatError("graphs must be >= 1")
        if not 1 <= self.nodes_min <= self.nodes_max:
            raise DataFormatError("need 1 <= nodes_min <= nodes_max")
        if self.feature_dim < 6:
            raise DataFormatError("feature_dim must be >= 6 (two prototype blocks)")
        if self.margin < 0:
            raise DataFormatError("margin must be >= 0")
        for rate in (self.noise, self.node_noise, self.edge_noise):
            if rate is not None and not 0.0 <= rate < 1.0:
                raise DataFormatError("noise rates must lie in [0, 1)")

    @property
    def node_margin_(self) -> float:
        return self.margin if self.node_margin is None else self.node_margin

    @property
    def edge_margin_(self) -> float:
        return self.margin if self.edge_margin is None else self.edge_margin

    @property
    def node_noise_(self) -> float:
        return self.noise if self.node_noise is None else self.node_noise

    @property
    def edge_noise_(self) -> float:
        return self.noise if self.edge_noise is None else self.edge_noise

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "graphs": self.graphs,
            "nodes_min": self.nodes_min,
            "nodes_max": self.nodes_max,
            "feature_dim": self.feature_dim,
            "margin": self.margin,
            "noise": self.noise,
            "seed": self.seed,
            "split": self.split.value,
            "max_paragraph_size": self.max_paragraph_size,
            "author_pool": self.author_pool,
            "node_margin": self.node_margin,
            "node_noise": self.node_noise,
            "edge_margin": self.edge_margin,
            "edge_noise": self.edge_noise,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticSpec":
        data = dict(payload)
        data["task"] = Task(data["task"])
        if "split" in data:
            data["split"] = Split(data["split"])
        return cls(**data)


def _proto_features(rng, dim, klass, n_classes, margin, noise, block=0):
    """Prototype-plus-jitter features for one factor.

    The prototype is 2*margin on one basis coordinate of a 3-wide block;
    jitter is uniform on [0, margin/2), so the planted class stays separated
    by at least margin. With probability ``noise`` a wrong class prototype
    is used instead.
    """
    c = klass
    if noise > 0.0 and rng.random() < noise:
        c = int((klass + 1 + rng.integers(n_classes - 1)) % n_classes)
    x = rng.uniform(0.0, margin / 2.0 if margin > 0 else 1.0, size=dim)
    x[3 * block + c] += 2.0 * margin
    return x


def _pair_proto_features(rng, dim, link_on, stance, spec):
    """Pair features carry the link class in block 0 and the stance class in block 1."""
    x = rng.uniform(
        0.0,
        spec.edge_margin_ / 2.0 if spec.edge_margin_ > 0 else 1.0,
        size=dim,
    )
    link_c = int(link_on)
    if spec.edge_noise_ > 0.0 and rng.random() < spec.edge_noise_:
        link_c = 1 - link_c
    stance_c = int(stance)
    if spec.edge_noise_ > 0.0 and rng.random() < spec.edge_noise_:
        stance_c = 1 - stance_c
    x[link_c] += 2.0 * spec.edge_margin_
    x[3 + stance_c] += 2.0 * spec.edge_margin_
    return x


def _paragraph_sizes(n, max_size, rng) -> list[int]:
    sizes = []
    remaining = n
    while remaining > 0:
        take = int(rng.integers(1, min(max_size, remaining) + 1))
        sizes.append(take)
        remaining -= take
    return sizes


def _generate_essay(spec: SyntheticSpec, index: int, rng, cs: ConstraintSet) -> dict:
    n = int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
    sizes = _paragraph_sizes(n, spec.max_paragraph_size, rng)
    doc_id = f"essay_{index:04d}"

    # Plant structure and labels on a featureless skeleton first, then emit
    # features from the resulting gold classes through the standard loader.
    skeleton = {
        "id": doc_id,
        "paragraphs": [],
        "links": [],
        "pair_features": [],
    }
    prop_of = []
    offset = 0
    structures: list[Optional[int]] = []
    placeholder = [0.0] * spec.feature_dim
    for size in sizes:
        local = sample_random_tree(size, rng)
        props = []
        for li in range(size):
            pid = f"{doc_id}_p{offset + li}"
            prop_of.append(pid)
            props.append(
                {"id": pid, "features": list(placeholder), "gold_label": "Premise"}
            )
        for li, parent in enumerate(local):
            structures.append(None if parent is None else offset + parent)
        skeleton["paragraphs"].append({"propositions": props})
        offset += size
    pairs = []
    for start, size in zip(np.cumsum([0] + sizes[:-1]), sizes):
        members = list(range(int(start), int(start) + size))
        for s in members:
            for d in members:
                if s != d:
                    pairs.append((s, d))
    for s, d in pairs:
        skeleton["pair_features"].append(
            {"src": prop_of[s], "dst": prop_of[d], "features": list(placeholder)}
        )
    graph, _ = build_arg_graph(skeleton)
    labeled = sample_valid_labeling(graph, structures, cs, rng)
    meta: ArgMiningMeta = graph.metadata

    node_labels = [int(labeled.values[meta.node_var[i]]) for i in range(n)]
    link_on = {pair: int(labeled.values[meta.link_var[pair]]) for pair in meta.pairs}
    stance = {
        pair: (
            int(labeled.values[meta.stance_var[pair]])
            if link_on[pair]
            else int(LinkLabel.SUPPORT)
        )
        for pair in meta.pairs
    }

    doc = {"id": doc_id, "paragraphs": [], "links": [], "pair_features": []}
    i = 0
    for size in sizes:
        props = []
        for _ in range(size):
            props.append(
                {
                    "id": prop_of[i],
                    "features": [
                        float(v)
                        for v in _proto_features(
                            rng,
                            spec.feature_dim,
                            node_labels[i],
                            3,
                            spec.node_margin_,
                            spec.node_noise_,
                        )
                    ],
                    "gold_label": NODE_LABEL_TEXT[node_labels[i]],
                }
            )
            i += 1
        doc["paragraphs"].append({"propositions": props})
    for pair in meta.pairs:
        s, d = pair
        doc["pair_features"].append(
            {
                "src": prop_of[s],
                "dst": prop_of[d],
                "features": [
                    float(v)
                    for v in _pair_proto_features(
                        rng, spec.feature_dim, link_on[pair], stance[pair], spec
                    )
                ],
            }
        )
        if link_on[pair]:
            doc["links"].append(
                {
                    "src": prop_of[s],
                    "dst": prop_of[d],
                    "gold_stance": LINK_LABEL_TEXT[stance[pair]],
                }
            )
    return doc


def _generate_thread(spec: SyntheticSpec, index: int, rng) -> dict:
    n = int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
    doc_id = f"thread_{index:04d}"
    pool = max(1, min(spec.author_pool, n))
    authors = [f"user_{int(rng.integers(pool))}" for _ in range(n)]
    stance_of_author = {a: int(rng.integers(2)) for a in sorted(set(authors))}
    stances = [stance_of_author[a] for a in authors]
    parents = [None] + [int(rng.integers(0, i)) for i in range(1, n)]
    posts = []
    for i in range(n):
        rec = {
            "id": f"{doc_id}_m{i}",
            "author": authors[i],
            "parent": None if parents[i] is None else f"{doc_id}_m{parents[i]}",
            "features": [
                float(v)
                for v in _proto_features(
                    rng,
                    spec.feature_dim,
                    stances[i],
                    2,
                    spec.node_margin_,
                    spec.node_noise_,
                )
            ],
            "gold_stance": STANCE_LABEL_TEXT[stances[i]],
        }
        if parents[i] is not None:
            agree = int(stances[i] == stances[parents[i]])
            klass = AgreementLabel.AGREE if agree else AgreementLabel.DISAGREE
            rec["edge_features"] = [
                float(v)
                for v in _proto_features(
                    rng,
                    spec.feature_dim,
                    int(klass),
                    2,
                    spec.edge_margin_,
                    spec.edge_noise_,
                )
            ]
        posts.append(rec)
    return {"id": doc_id, "topic": f"topic_{index % 4}", "posts": posts}


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Create a corpus with planted gold structures and separable features.

    Gold structures always satisfy the task constraints: essay forests come
    from the constrained labeler, thread stances are uniform per author with
    derived agreement edges.
    """
    rng = np.random.default_rng(spec.seed)
    documents = []
    if spec.task is Task.ARG_MINING:
        cs = ConstraintSet.for_task(Task.ARG_MINING)
        for i in range(spec.graphs):
            documents.append(_generate_essay(spec, i, rng, cs))
    else:
        for i in range(spec.graphs):
            documents.append(_generate_thread(spec, i, rng))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "task": spec.task.value,
        "split": spec.split.value,
        "documents": documents,
    }
    return corpus_from_payload(payload)


def feature_dims_for(corpus: Corpus) -> dict[FactorType, int]:
    """Per-factor-type feature dimensionality observed in a corpus."""
    dims: dict[FactorType, int] = {}
    for g in corpus.graphs:
        for f in g.factors:
            d = len(f.features)
            if dims.setdefault(f.ftype, d) != d:
                raise DataFormatError(
                    f"graph {g.id}: inconsistent feature dims for {f.ftype.value}"
                )
    return dims
