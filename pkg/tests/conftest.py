"""Shared builders for hand-crafted test graphs."""

import numpy as np
import pytest

from structura.corpus import build_arg_graph, build_stance_graph


def essay_doc(
    doc_id="essay_t",
    paragraph_sizes=(3,),
    links=(),
    dim=6,
    node_features=None,
    pair_features=None,
    gold_labels=None,
):
    """Essay document dict with deterministic placeholder features.

    ``links`` holds (src_index, dst_index, stance_name) over global
    proposition indices; default gold labels put a MajorClaim on the first
    proposition of the first paragraph and premises elsewhere unless linked.
    """
    n = sum(paragraph_sizes)
    ids = [f"p{i}" for i in range(n)]
    if gold_labels is None:
        gold_labels = ["Premise"] * n
        gold_labels[0] = "MajorClaim"
        for src, dst, _ in links:
            if gold_labels[dst] == "MajorClaim":
                gold_labels[src] = "Claim"
    doc = {"id": doc_id, "paragraphs": [], "links": [], "pair_features": []}
    idx = 0
    para_of = {}
    for p, size in enumerate(paragraph_sizes):
        props = []
        for _ in range(size):
            feats = (
                node_features[idx]
                if node_features is not None
                else [float(idx + 1)] + [0.0] * (dim - 1)
            )
            props.append(
                {"id": ids[idx], "features": list(feats), "gold_label": gold_labels[idx]}
            )
            para_of[idx] = p
            idx += 1
        doc["paragraphs"].append({"propositions": props})
    for src, dst, stance in links:
        doc["links"].append({"src": ids[src], "dst": ids[dst], "gold_stance": stance})
    k = 0
    for s in range(n):
        for d in range(n):
            if s != d and para_of[s] == para_of[d]:
                feats = (
                    pair_features[(s, d)]
                    if pair_features is not None
                    else [0.5 * (k + 1)] + [0.0] * (dim - 1)
                )
                doc["pair_features"].append(
                    {"src": ids[s], "dst": ids[d], "features": list(feats)}
                )
                k += 1
    return doc


def thread_doc(
    doc_id="thread_t",
    parents=(None, 0),
    authors=None,
    stances=None,
    dim=6,
    features=None,
    edge_features=None,
):
    n = len(parents)
    authors = authors or [f"u{i}" for i in range(n)]
    stances = stances or ["Pro"] * n
    posts = []
    for i in range(n):
        feats = (
            features[i] if features is not None else [float(i + 1)] + [0.0] * (dim - 1)
        )
        rec = {
            "id": f"m{i}",
            "author": authors[i],
            "parent": None if parents[i] is None else f"m{parents[i]}",
            "features": list(feats),
            "gold_stance": stances[i],
        }
        if parents[i] is not None:
            ef = (
                edge_features[i]
                if edge_features is not None
                else [1.0] + [0.0] * (dim - 1)
            )
            rec["edge_features"] = list(ef)
        posts.append(rec)
    return {"id": doc_id, "topic": "t", "posts": posts}


def make_essay(**kwargs):
    return build_arg_graph(essay_doc(**kwargs))


def make_thread(**kwargs):
    return build_stance_graph(thread_doc(**kwargs))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
