"""Declarative domain constraints: checkers and constrained random labelers.

Argument forests: major claims live in the first or last paragraph, every
essay needs at least one, per-paragraph links form a forest, and link
endpoints must be typed premise->premise, premise->claim, or
claim->major-claim. Threads: a reply edge agrees exactly when its endpoint
stances match, optionally with per-author stance uniformity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConstraintError, GraphStructureError
from .graphs import (
    AgreementLabel,
    ArgMiningMeta,
    Assignment,
    FactorGraph,
    LinkLabel,
    NodeLabel,
    StanceMeta,
    Task,
)


class Rule(str, Enum):
    MC_FIRST_OR_LAST = "mc_first_or_last"
    MC_EXISTS = "mc_exists"
    FOREST = "forest"
    LINK_TYPES = "link_types"
    CLAIM_INTO_MAJOR = "claim_into_major"
    EDGE_CONSISTENCY = "edge_consistency"
    AUTHOR_AGREEMENT = "author_agreement"


ARG_MINING_RULES = (
    Rule.MC_FIRST_OR_LAST,
    Rule.MC_EXISTS,
    Rule.FOREST,
    Rule.LINK_TYPES,
    Rule.CLAIM_INTO_MAJOR,
)
STANCE_RULES = (Rule.EDGE_CONSISTENCY,)

# Legal (child label, parent label) pairs for a realized link.
LEGAL_LINK_TYPES = frozenset(
    {
        (NodeLabel.PREMISE, NodeLabel.PREMISE),
        (NodeLabel.PREMISE, NodeLabel.CLAIM),
        (NodeLabel.CLAIM, NodeLabel.MAJOR_CLAIM),
    }
)


@dataclass(frozen=True)
class Violation:
    rule: Rule
    variables: tuple[int, ...]
    message: str

    def __post_init__(self):
        if not self.variables:
            raise GraphStructureError("violation must implicate at least one variable")


@dataclass
class ConstraintSet:
    """Rule selection plus the sampling knobs of the constrained labeler."""

    task: Task
    rules: tuple[Rule, ...]
    author_constraints_enabled: bool = False
    mc_first_prob: float = 0.5
    mc_last_prob: float = 0.5
    support_prob: float = 0.9

    def __post_init__(self):
        for name in ("mc_first_prob", "mc_last_prob", "support_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConstraintError(f"{name} must lie in [0, 1], got {p}")
        arg_only = set(ARG_MINING_RULES)
        stance_only = {Rule.EDGE_CONSISTENCY, Rule.AUTHOR_AGREEMENT}
        for rule in self.rules:
            if self.task is Task.ARG_MINING and rule in stance_only:
                raise ConstraintError(f"rule {rule.value} does not apply to essays")
            if self.task is Task.STANCE and rule in arg_only:
                raise ConstraintError(f"rule {rule.value} does not apply to threads")

    @classmethod
    def for_task(
        cls,
        task: Task,
        author_constraints: bool = False,
        mc_first_prob: float = 0.5,
        mc_last_prob: float = 0.5,
        support_prob: float = 0.9,
    ) -> "ConstraintSet":
        if task is Task.ARG_MINING:
            rules = ARG_MINING_RULES
        else:
            rules = STANCE_RULES + (
                (Rule.AUTHOR_AGREEMENT,) if author_constraints else ()
            )
        return cls(
            task=task,
            rules=rules,
            author_constraints_enabled=author_constraints,
            mc_first_prob=mc_first_prob,
            mc_last_prob=mc_last_prob,
            support_prob=support_prob,
        )

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "rules": [r.value for r in self.rules],
            "author_constraints_enabled": self.author_constraints_enabled,
            "mc_first_prob": self.mc_first_prob,
            "mc_last_prob": self.mc_last_prob,
            "support_prob": self.support_prob,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ConstraintSet":
        return cls(
            task=Task(payload["task"]),
            rules=tuple(Rule(r) for r in payload["rules"]),
            author_constraints_enabled=bool(
                payload.get("author_constraints_enabled", False)
            ),
            mc_first_prob=float(payload.get("mc_first_prob", 0.5)),
            mc_last_prob=float(payload.get("mc_last_prob", 0.5)),
            support_prob=float(payload.get("support_prob", 0.9)),
        )


def eligible_mc_paragraphs(meta: ArgMiningMeta) -> set[int]:
    # A single-paragraph essay counts as both first and last.
    return {meta.first_paragraph, meta.last_paragraph}


def realized_links(
    g: FactorGraph, a: Assignment
) -> list[tuple[int, int]]:
    """Ordered (child, parent) proposition pairs whose link indicator is on."""
    meta = g.metadata
    return [pair for pair in meta.pairs if a.values[meta.link_var[pair]] == 1]


def check(g: FactorGraph, a: Assignment, cs: ConstraintSet) -> list[Violation]:
    """Return every violated rule instance; empty means the assignment is valid."""
    if cs.task is not g.task:
        raise ConstraintError(
            f"constraint set for {cs.task.value} applied to a {g.task.value} graph"
        )
    if g.task is Task.ARG_MINING:
        return _check_arg_mining(g, a, cs)
    return _check_stance(g, a, cs)


def _check_arg_mining(g, a, cs) -> list[Violation]:
    meta: ArgMiningMeta = g.metadata
    vals = a.values
    out: list[Violation] = []
    labels = [int(vals[meta.node_var[i]]) for i in range(len(meta.prop_ids))]
    links = realized_links(g, a)
    eligible = eligible_mc_paragraphs(meta)

    if Rule.MC_FIRST_OR_LAST in cs.rules:
        for i, lab in enumerate(labels):
            if lab == NodeLabel.MAJOR_CLAIM and meta.prop_paragraph[i] not in eligible:
                out.append(
                    Violation(
                        Rule.MC_FIRST_OR_LAST,
                        (meta.node_var[i],),
                        f"major claim {meta.prop_ids[i]} in middle paragraph "
                        f"{meta.prop_paragraph[i]}",
                    )
                )
    if Rule.MC_EXISTS in cs.rules:
        if all(lab != NodeLabel.MAJOR_CLAIM for lab in labels):
            out.append(
                Violation(
                    Rule.MC_EXISTS,
                    tuple(meta.node_var),
                    "essay has no major claim",
                )
            )
    if Rule.FOREST in cs.rules:
        out.extend(_forest_violations(meta, links))
    if Rule.LINK_TYPES in cs.rules:
        for src, dst in links:
            if (labels[src], labels[dst]) not in LEGAL_LINK_TYPES:
                out.append(
                    Violation(
                        Rule.LINK_TYPES,
                        (
                            meta.link_var[(src, dst)],
                            meta.node_var[src],
                            meta.node_var[dst],
                        ),
                        f"link {meta.prop_ids[src]}->{meta.prop_ids[dst]} joins "
                        f"{NodeLabel(labels[src]).name} to {NodeLabel(labels[dst]).name}",
                    )
                )
    if Rule.CLAIM_INTO_MAJOR in cs.rules:
        for src, dst in links:
            if labels[dst] == NodeLabel.MAJOR_CLAIM and labels[src] != NodeLabel.CLAIM:
                out.append(
                    Violation(
                        Rule.CLAIM_INTO_MAJOR,
                        (meta.link_var[(src, dst)], meta.node_var[src]),
                        f"{meta.prop_ids[src]} links into a major claim but is "
                        f"{NodeLabel(labels[src]).name}",
                    )
                )
    return out


def _forest_violations(meta: ArgMiningMeta, links) -> list[Violation]:
    out = []
    parents: dict[int, list[int]] = {}
    for src, dst in links:
        parents.setdefault(src, []).append(dst)
    for src, dsts in parents.items():
        if len(dsts) > 1:
            out.append(
                Violation(
                    Rule.FOREST,
                    tuple(meta.link_var[(src, d)] for d in dsts),
                    f"{meta.prop_ids[src]} has {len(dsts)} parents",
                )
            )
    # Cycle scan over the realized digraph; multi-parent nodes already reported.
    edges = {src: dsts[0] for src, dsts in parents.items() if len(dsts) == 1}
    color: dict[int, int] = {}
    for start in edges:
        if color.get(start):
            continue
        path = []
        cur = start
        while cur in edges and color.get(cur) is None:
            color[cur] = 1
            path.append(cur)
            cur = edges[cur]
        if color.get(cur) == 1:
            cycle_start = path.index(cur)
            cycle = path[cycle_start:]
            out.append(
                Violation(
                    Rule.FOREST,
                    tuple(meta.link_var[(n, edges[n])] for n in cycle),
                    "links form a cycle through "
                    + ", ".join(meta.prop_ids[n] for n in cycle),
                )
            )
        for n in path:
            color[n] = 2
    return out


def _check_stance(g, a, cs) -> list[Violation]:
    meta: StanceMeta = g.metadata
    vals = a.values
    out: list[Violation] = []
    stances = [int(vals[meta.post_var[i]]) for i in range(len(meta.post_ids))]

    if Rule.EDGE_CONSISTENCY in cs.rules:
        for child, var in meta.edge_var.items():
            parent = meta.parents[child]
            expected = (
                AgreementLabel.AGREE
                if stances[child] == stances[parent]
                else AgreementLabel.DISAGREE
            )
            if int(vals[var]) != expected:
                out.append(
                    Violation(
                        Rule.EDGE_CONSISTENCY,
                        (var, meta.post_var[child], meta.post_var[parent]),
                        f"edge {meta.post_ids[child]}->{meta.post_ids[parent]} labeled "
                        f"{AgreementLabel(int(vals[var])).name} but stances are "
                        f"{'equal' if expected == AgreementLabel.AGREE else 'unequal'}",
                    )
                )
    if Rule.AUTHOR_AGREEMENT in cs.rules:
        by_author: dict[str, list[int]] = {}
        for i, author in enumerate(meta.authors):
            by_author.setdefault(author, []).append(i)
        for author, posts in by_author.items():
            if len({stances[i] for i in posts}) > 1:
                out.append(
                    Violation(
                        Rule.AUTHOR_AGREEMENT,
                        tuple(meta.post_var[i] for i in posts),
                        f"author {author} holds conflicting stances",
                    )
                )
    return out


def derive_node_labels(
    g: FactorGraph,
    structure: Sequence[Optional[int]],
    major_claim_roots: set[int],
) -> list[int]:
    """Complete proposition labels from a forest and a chosen major-claim root set.

    Roots outside the set become claims, children of major claims become
    claims, everything else is a premise. This is the unique completion
    compatible with the link typing rules.
    """
    meta: ArgMiningMeta = g.metadata
    n = len(meta.prop_ids)
    labels = [int(NodeLabel.PREMISE)] * n
    for i in range(n):
        if structure[i] is None:
            labels[i] = int(
                NodeLabel.MAJOR_CLAIM if i in major_claim_roots else NodeLabel.CLAIM
            )
    for i in range(n):
        parent = structure[i]
        if parent is not None and labels[parent] == NodeLabel.MAJOR_CLAIM:
            labels[i] = int(NodeLabel.CLAIM)
    return labels


def draw_major_claim_roots(
    g: FactorGraph,
    structure: Sequence[Optional[int]],
    cs: ConstraintSet,
    rng: np.random.Generator,
    required: bool = True,
) -> set[int]:
    """Pick which eligible roots become major claims.

    Each root in the first (last) paragraph is drawn with mc_first_prob
    (mc_last_prob). With ``required`` and an empty draw, one eligible root
    chosen uniformly is forced so the essay keeps at least one major claim.
    """
    meta: ArgMiningMeta = g.metadata
    roots = [i for i in range(len(meta.prop_ids)) if structure[i] is None]
    eligible = [
        i for i in roots if meta.prop_paragraph[i] in eligible_mc_paragraphs(meta)
    ]
    chosen: set[int] = set()
    for i in eligible:
        prob = (
            cs.mc_first_prob
            if meta.prop_paragraph[i] == meta.first_paragraph
            else cs.mc_last_prob
        )
        if rng.random() < prob:
            chosen.add(i)
    if required and not chosen:
        if not eligible:
            raise ConstraintError(
                f"graph {g.id}: no root in an eligible paragraph can host a major claim"
            )
        chosen.add(eligible[int(rng.integers(len(eligible)))])
    return chosen


def sample_valid_labeling(
    g: FactorGraph,
    structure: Sequence[Optional[int]],
    cs: ConstraintSet,
    rng: np.random.Generator,
) -> Assignment:
    """Draw a constraint-respecting assignment for a given forest skeleton.

    ``structure[i]`` is proposition i's parent (None for roots). Link
    indicators follow the skeleton; every link-label slot is drawn Support
    with probability ``support_prob``; node labels follow the major-claim
    draw plus the forced completion.
    """
    if g.task is not Task.ARG_MINING:
        raise ConstraintError("constrained forest labeling applies to essays only")
    meta: ArgMiningMeta = g.metadata
    mc_roots = draw_major_claim_roots(g, structure, cs, rng)
    labels = derive_node_labels(g, structure, mc_roots)
    values = np.zeros(g.num_variables, dtype=np.int16)
    for i, lab in enumerate(labels):
        values[meta.node_var[i]] = lab
    for src, dst in meta.pairs:
        values[meta.link_var[(src, dst)]] = 1 if structure[src] == dst else 0
    draws = rng.random(len(meta.pairs))
    for k, pair in enumerate(meta.pairs):
        values[meta.stance_var[pair]] = (
            LinkLabel.SUPPORT if draws[k] < cs.support_prob else LinkLabel.ATTACK
        )
    return Assignment(values)


def propagate_stance_edges(
    g: FactorGraph, a: Assignment, cs: ConstraintSet
) -> Assignment:
    """Complete a thread assignment by deriving every reply-edge label.

    Post stances must already be set; each edge becomes Agree exactly when
    its endpoint stances match. With author constraints enabled, per-author
    uniformity is a precondition.
    """
    if g.task is not Task.STANCE:
        raise ConstraintError("edge propagation applies to threads only")
    meta: StanceMeta = g.metadata
    values = a.values.copy()
    if cs.author_constraints_enabled:
        by_author: dict[str, set[int]] = {}
        for i, author in enumerate(meta.authors):
            by_author.setdefault(author, set()).add(int(values[meta.post_var[i]]))
        for author, stances in by_author.items():
            if len(stances) > 1:
                raise ConstraintError(
                    f"graph {g.id}: author {author} holds conflicting stances"
                )
    for child, var in meta.edge_var.items():
        parent = meta.parents[child]
        same = values[meta.post_var[child]] == values[meta.post_var[parent]]
        values[var] = AgreementLabel.AGREE if same else AgreementLabel.DISAGREE
    return Assignment(values)
