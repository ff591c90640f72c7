"""Restart-based randomized greedy inference.

Argument forests are searched by per-paragraph tree hill climbing over
uniformly sampled starting trees (with a phantom root so paragraphs may hold
several real roots); threads are searched by greedy stance flips seeded from
local classifier scores. Both run a fixed number of independent restarts and
keep the best-scoring result, with RNG streams derived from (seed, restart)
so outcomes are reproducible and independent of restart order.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .constraints import (
    ConstraintSet,
    derive_node_labels,
    draw_major_claim_roots,
    propagate_stance_edges,
    sample_valid_labeling,
)
from .errors import ConstraintError, GraphStructureError
from .graphs import (
    AgreementLabel,
    ArgMiningMeta,
    Assignment,
    FactorGraph,
    NodeLabel,
    StanceMeta,
    Task,
)
from .results import InferenceResult, Telemetry
from .scoring import (
    HammingMode,
    ScoreTable,
    ScorerBank,
    augmented_score,
    score_graph,
)

PHANTOM = -1


@dataclass
class RandConfig:
    restarts: int = 5
    constrained: bool = True
    hamming_mode: HammingMode = HammingMode.ADDITIVE
    hamming_weight: float = 1.0
    seed: int = 0
    max_moves: Optional[int] = None
    greedy_edge_labels: bool = False
    relabel_each_candidate: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ConstraintError("restarts must be >= 1")


@dataclass
class HillClimbState:
    """Mutable search state for one paragraph's tree."""

    parents: list[Optional[int]]
    level_list: list[int] = field(default_factory=list)
    iteration: int = 0
    cursor: tuple[int, int] = (0, 0)

    def refresh_level_list(self) -> None:
        self.level_list = level_order(self.parents)


def sample_random_tree(
    node_count: int, rng: np.random.Generator
) -> list[Optional[int]]:
    """Draw a uniformly random labeled tree over the nodes plus a phantom root.

    Returns parent pointers per real node; None marks a child of the phantom,
    so multi-root structures arise naturally. Uniformity comes from decoding
    a uniform random Pruefer sequence over node_count + 1 vertices.
    """
    if node_count < 1:
        raise GraphStructureError("node_count must be >= 1")
    k = node_count + 1
    phantom = k - 1
    if k == 2:
        adjacency = {0: [phantom], phantom: [0]}
    else:
        seq = [int(v) for v in rng.integers(0, k, size=k - 2)]
        adjacency = _prufer_to_adjacency(seq, k)
    parents: list[Optional[int]] = [None] * node_count
    seen = {phantom}
    queue = [phantom]
    while queue:
        cur = queue.pop()
        for nxt in adjacency[cur]:
            if nxt in seen:
                continue
            seen.add(nxt)
            parents[nxt] = None if cur == phantom else cur
            queue.append(nxt)
    return parents


def _prufer_to_adjacency(seq: Sequence[int], k: int) -> dict[int, list[int]]:
    degree = [1] * k
    for v in seq:
        degree[v] += 1
    adjacency: dict[int, list[int]] = {i: [] for i in range(k)}
    leaves = [i for i in range(k) if degree[i] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        adjacency[leaf].append(v)
        adjacency[v].append(leaf)
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    adjacency[u].append(w)
    adjacency[w].append(u)
    return adjacency


def level_order(parents: Sequence[Optional[int]]) -> list[int]:
    """Top-down BFS order of a phantom-rooted tree, phantom first."""
    children: dict[int, list[int]] = {PHANTOM: []}
    for i in range(len(parents)):
        children.setdefault(i, [])
    for i, p in enumerate(parents):
        key = PHANTOM if p is None else p
        children[key].append(i)
    order = [PHANTOM]
    queue = list(children[PHANTOM])
    while queue:
        node = queue.pop(0)
        order.append(node)
        queue.extend(children[node])
    return order


def subtree_nodes(parents: Sequence[Optional[int]], node: int) -> set[int]:
    """The node plus all of its descendants under the current tree."""
    children: dict[int, list[int]] = {}
    for i, p in enumerate(parents):
        if p is not None:
            children.setdefault(p, []).append(i)
    out = {node}
    stack = [node]
    while stack:
        for c in children.get(stack.pop(), []):
            out.add(c)
            stack.append(c)
    return out


def local_update_moves(
    state: HillClimbState, i: int
) -> Iterator[tuple[int, list[Optional[int]]]]:
    """Candidate trees from re-attaching the subtree at level position i.

    For j = i-1 down to 0, detaches the whole subtree rooted at level_list[i]
    and attaches it under level_list[j], skipping targets inside the subtree
    (cycles) and the current parent (identity move).
    """
    if not 1 <= i < len(state.level_list):
        raise GraphStructureError(
            f"level position {i} outside 1..{len(state.level_list) - 1}"
        )
    node = state.level_list[i]
    blocked = subtree_nodes(state.parents, node)
    current = state.parents[node]
    current_key = PHANTOM if current is None else current
    for j in range(i - 1, -1, -1):
        target = state.level_list[j]
        if target in blocked or target == current_key:
            continue
        candidate = list(state.parents)
        candidate[node] = None if target == PHANTOM else target
        yield j, candidate


class _EssayContext:
    """Shared state for one essay's randomized search.

    Holds the score tables, the current full structure (parent pointer per
    proposition) and the current assignment values, plus the labeling and
    scoring policies implied by the config.
    """

    def __init__(self, g, bank, cs, cfg, gold):
        self.g = g
        self.meta: ArgMiningMeta = g.metadata
        self.cs = cs
        self.cfg = cfg
        self.gold = gold
        self.table = ScoreTable(g, bank)
        if gold is not None and cfg.hamming_mode is HammingMode.ADDITIVE:
            self.eval_table = self.table.with_additive_bonus(gold, cfg.hamming_weight)
        else:
            self.eval_table = self.table
        self.score_scaled = (
            gold is not None and cfg.hamming_mode is HammingMode.SCORE_SCALED
        )
        self.paragraph_props = {
            p: self.meta.paragraph_props(p) for p in range(self.meta.paragraph_count)
        }
        self.structure: list[Optional[int]] = [None] * len(self.meta.prop_ids)
        self.values = np.zeros(g.num_variables, dtype=np.int16)

    # -- scoring ----------------------------------------------------------

    def paragraph_score(self, values: np.ndarray, paragraph: int) -> float:
        raw = self.eval_table.group_total(values, paragraph)
        if not self.score_scaled:
            return raw
        vids = self.eval_table.group_vars[paragraph]
        diff = np.mean(values[vids] != self.gold.values[vids])
        return raw * (1.0 - diff)

    def total_score(self, values: np.ndarray) -> float:
        return sum(
            self.paragraph_score(values, p) for p in range(self.meta.paragraph_count)
        )

    # -- structure bookkeeping --------------------------------------------

    def init_restart(self, rng: np.random.Generator) -> None:
        for p, props in self.paragraph_props.items():
            local = sample_random_tree(len(props), rng)
            for li, parent in enumerate(local):
                self.structure[props[li]] = None if parent is None else props[parent]
        if self.cfg.constrained:
            assignment = sample_valid_labeling(self.g, self.structure, self.cs, rng)
            self.values = assignment.values
            if self.cfg.greedy_edge_labels:
                self._greedy_edges(self.values, self.meta.pairs)
        else:
            self._random_labels_all(rng)

    def _random_labels_all(self, rng) -> None:
        meta = self.meta
        values = self.values
        for i in range(len(meta.prop_ids)):
            var = meta.node_var[i]
            dom = self.g.variables[var].domain
            values[var] = dom[int(rng.integers(len(dom)))]
        for src, dst in meta.pairs:
            values[meta.link_var[(src, dst)]] = 1 if self.structure[src] == dst else 0
        if self.cfg.greedy_edge_labels:
            self._greedy_edges(values, meta.pairs)
        else:
            for pair in meta.pairs:
                values[meta.stance_var[pair]] = int(rng.integers(2))

    def _greedy_edges(self, values: np.ndarray, pairs) -> None:
        for pair in pairs:
            var = self.meta.stance_var[pair]
            values[var] = int(np.argmax(self.eval_table.unary[var]))

    def mc_count_outside(self, paragraph: int) -> int:
        meta = self.meta
        return sum(
            1
            for i in range(len(meta.prop_ids))
            if meta.prop_paragraph[i] != paragraph
            and self.values[meta.node_var[i]] == NodeLabel.MAJOR_CLAIM
        )

    def relabel_paragraph(
        self,
        values: np.ndarray,
        structure: Sequence[Optional[int]],
        paragraph: int,
        rng: np.random.Generator,
        mc_outside: int,
    ) -> None:
        """Redraw the paragraph's labels in place for the given structure."""
        meta = self.meta
        props = self.paragraph_props[paragraph]
        if self.cfg.constrained:
            sub_rng = rng
            chosen = self._draw_paragraph_mc(structure, paragraph, sub_rng, mc_outside)
            labels = derive_node_labels(self.g, structure, chosen)
            for i in props:
                values[meta.node_var[i]] = labels[i]
        else:
            for i in props:
                var = meta.node_var[i]
                dom = self.g.variables[var].domain
                values[var] = dom[int(rng.integers(len(dom)))]
        pairs = [pr for pr in meta.pairs if meta.prop_paragraph[pr[0]] == paragraph]
        for src, dst in pairs:
            values[meta.link_var[(src, dst)]] = 1 if structure[src] == dst else 0
        if self.cfg.greedy_edge_labels:
            self._greedy_edges(values, pairs)
        elif self.cfg.constrained:
            draws = rng.random(len(pairs))
            for k, pair in enumerate(pairs):
                values[meta.stance_var[pair]] = (
                    0 if draws[k] < self.cs.support_prob else 1
                )
        else:
            for pair in pairs:
                values[meta.stance_var[pair]] = int(rng.integers(2))

    def _draw_paragraph_mc(self, structure, paragraph, rng, mc_outside) -> set[int]:
        meta = self.meta
        eligible_pars = {meta.first_paragraph, meta.last_paragraph}
        props = self.paragraph_props[paragraph]
        roots = [i for i in props if structure[i] is None]
        chosen: set[int] = set()
        if paragraph in eligible_pars:
            prob = (
                self.cs.mc_first_prob
                if paragraph == meta.first_paragraph
                else self.cs.mc_last_prob
            )
            for i in roots:
                if rng.random() < prob:
                    chosen.add(i)
            if mc_outside == 0 and not chosen and roots:
                chosen.add(roots[int(rng.integers(len(roots)))])
        # Major claims elsewhere keep their labels: only this paragraph is redrawn.
        return chosen

    def carryover_relabel(
        self,
        values: np.ndarray,
        structure: Sequence[Optional[int]],
        paragraph: int,
        mc_outside: int,
    ) -> None:
        """Deterministic relabel used when labels are redrawn only on acceptance.

        Surviving roots keep their major-claim status, new roots start as
        claims, derived labels are recomputed, and edge labels are carried
        over unchanged.
        """
        meta = self.meta
        props = self.paragraph_props[paragraph]
        eligible_pars = {meta.first_paragraph, meta.last_paragraph}
        keep: set[int] = set()
        for i in props:
            if (
                structure[i] is None
                and values[meta.node_var[i]] == NodeLabel.MAJOR_CLAIM
                and meta.prop_paragraph[i] in eligible_pars
            ):
                keep.add(i)
        roots = [i for i in props if structure[i] is None]
        if self.cfg.constrained and mc_outside == 0 and not keep:
            eligible_roots = [
                i for i in roots if meta.prop_paragraph[i] in eligible_pars
            ]
            if eligible_roots:
                keep.add(eligible_roots[0])
        if self.cfg.constrained:
            labels = derive_node_labels(self.g, structure, keep)
            for i in props:
                values[meta.node_var[i]] = labels[i]
        for src, dst in meta.pairs:
            if meta.prop_paragraph[src] == paragraph:
                values[meta.link_var[(src, dst)]] = (
                    1 if structure[src] == dst else 0
                )


def _climb_paragraph(
    ctx: _EssayContext,
    paragraph: int,
    rng: np.random.Generator,
    telemetry: Telemetry,
) -> None:
    """Greedy local search over one paragraph's tree, in place on ctx."""
    cfg = ctx.cfg
    props = ctx.paragraph_props[paragraph]
    if len(props) <= 1:
        return
    mc_outside = ctx.mc_count_outside(paragraph)
    local_parents = _local_parents(ctx.structure, props)
    state = HillClimbState(parents=local_parents)
    cur_score = ctx.paragraph_score(ctx.values, paragraph)

    while True:
        state.refresh_level_list()
        state.iteration += 1
        improved = False
        for i in range(1, len(state.level_list)):
            for j, cand_local in local_update_moves(state, i):
                if (
                    cfg.max_moves is not None
                    and telemetry.moves_evaluated >= cfg.max_moves
                ):
                    telemetry.truncated = True
                    return
                state.cursor = (i, j)
                telemetry.moves_evaluated += 1
                cand_structure = list(ctx.structure)
                for li, parent in enumerate(cand_local):
                    cand_structure[props[li]] = (
                        None if parent is None else props[parent]
                    )
                cand_values = ctx.values.copy()
                if cfg.relabel_each_candidate:
                    ctx.relabel_paragraph(
                        cand_values, cand_structure, paragraph, rng, mc_outside
                    )
                else:
                    ctx.carryover_relabel(
                        cand_values, cand_structure, paragraph, mc_outside
                    )
                cand_score = ctx.paragraph_score(cand_values, paragraph)
                if cand_score > cur_score:
                    state.parents = cand_local
                    ctx.structure = cand_structure
                    ctx.values = cand_values
                    cur_score = cand_score
                    improved = True
                    telemetry.accepted_moves += 1
                    telemetry.score_trace.append(cand_score)
                    if not cfg.relabel_each_candidate:
                        ctx.relabel_paragraph(
                            ctx.values, ctx.structure, paragraph, rng, mc_outside
                        )
                        cur_score = ctx.paragraph_score(ctx.values, paragraph)
        if not improved:
            return


def _local_parents(structure, props) -> list[Optional[int]]:
    index_of = {prop: k for k, prop in enumerate(props)}
    out: list[Optional[int]] = []
    for prop in props:
        parent = structure[prop]
        out.append(None if parent is None else index_of[parent])
    return out


def hill_climb(
    g: FactorGraph,
    paragraph: int,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    cfg: RandConfig,
    rng: np.random.Generator,
    gold: Optional[Assignment] = None,
) -> tuple[Assignment, Telemetry]:
    """Run one randomized greedy tree search over a single paragraph.

    The whole essay is initialized (random trees plus labels) and only the
    requested paragraph is climbed; the returned assignment embeds the
    locally optimal tree. The telemetry's score trace holds the accepted
    paragraph scores in order.
    """
    if g.task is not Task.ARG_MINING:
        raise ConstraintError("tree hill climbing applies to essays only")
    if cfg.constrained and cs is None:
        raise ConstraintError("constrained search requires a constraint set")
    ctx = _EssayContext(g, bank, cs, cfg, gold)
    ctx.init_restart(rng)
    telemetry = Telemetry(restarts_used=1)
    _climb_paragraph(ctx, paragraph, rng, telemetry)
    return Assignment(ctx.values.copy()), telemetry


def randomized_inference_argmining(
    g: FactorGraph,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    cfg: RandConfig,
    gold: Optional[Assignment] = None,
) -> InferenceResult:
    """Restart loop over per-paragraph hill climbs; keeps the best forest.

    Per-restart RNG streams derive from (seed, restart index), so the best
    result is independent of restart execution order and monotone in the
    number of restarts for a fixed seed.
    """
    if g.task is not Task.ARG_MINING:
        raise ConstraintError("this backend handles essays only")
    start = time.perf_counter()
    telemetry = Telemetry(restarts_used=cfg.restarts)
    best_values: Optional[np.ndarray] = None
    best_score = -np.inf
    ctx = _EssayContext(g, bank, cs, cfg, gold)
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        ctx.init_restart(rng)
        for p in range(ctx.meta.paragraph_count):
            _climb_paragraph(ctx, p, rng, telemetry)
            if telemetry.truncated:
                break
        score = ctx.total_score(ctx.values)
        if score > best_score:
            best_score = score
            best_values = ctx.values.copy()
        if telemetry.truncated:
            break
    telemetry.wall_time_s = time.perf_counter() - start
    return _finish(g, bank, best_values, gold, cfg, telemetry, "rand_c" if cfg.constrained else "rand")


def _finish(g, bank, values, gold, cfg, telemetry, backend) -> InferenceResult:
    assignment = Assignment(values.copy())
    if gold is None:
        breakdown = score_graph(g, assignment, bank)
    else:
        breakdown = augmented_score(
            g, assignment, gold, bank, cfg.hamming_mode, cfg.hamming_weight
        )
    return InferenceResult(
        assignment=assignment,
        breakdown=breakdown,
        telemetry=telemetry,
        proven_optimal=False,
        backend=backend,
    )


def randomized_inference_stance(
    g: FactorGraph,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    cfg: RandConfig,
    local_scores: Optional[np.ndarray] = None,
    gold: Optional[Assignment] = None,
) -> InferenceResult:
    """Greedy stance flip search with restarts over a reply thread.

    Stances start at the local argmax (per author group when author
    constraints are active); each sweep proposes flips in a random
    permutation and keeps only strict score improvements, recomputing the
    affected agreement edges after every flip. Unconstrained mode initializes
    edges from their own local scores and adjusts only edges adjacent to the
    flipped post.
    """
    if g.task is not Task.STANCE:
        raise ConstraintError("this backend handles threads only")
    if cfg.constrained and cs is None:
        raise ConstraintError("constrained search requires a constraint set")
    start = time.perf_counter()
    meta: StanceMeta = g.metadata
    n = len(meta.post_ids)
    table = ScoreTable(g, bank)
    if gold is not None and cfg.hamming_mode is HammingMode.ADDITIVE:
        eval_table = table.with_additive_bonus(gold, cfg.hamming_weight)
    else:
        eval_table = table
    score_scaled = gold is not None and cfg.hamming_mode is HammingMode.SCORE_SCALED

    def total(values: np.ndarray) -> float:
        raw = eval_table.total(values)
        if not score_scaled:
            return raw
        diff = float(np.mean(values != gold.values))
        return raw * (1.0 - diff)

    if local_scores is None:
        local_scores = np.stack([table.unary[meta.post_var[i]] for i in range(n)])
    elif local_scores.shape != (n, 2):
        raise GraphStructureError(
            f"local_scores must have shape ({n}, 2), got {local_scores.shape}"
        )

    use_authors = cfg.constrained and cs is not None and cs.author_constraints_enabled
    if use_authors:
        groups: list[list[int]] = []
        by_author: dict[str, list[int]] = {}
        for i, author in enumerate(meta.authors):
            by_author.setdefault(author, []).append(i)
        groups = [sorted(posts) for _, posts in sorted(by_author.items())]
    else:
        groups = [[i] for i in range(n)]

    adjacent_edges = {i: [] for i in range(n)}
    for child, var in meta.edge_var.items():
        adjacent_edges[child].append((child, var))
        adjacent_edges[meta.parents[child]].append((child, var))

    def init_values() -> np.ndarray:
        values = np.zeros(g.num_variables, dtype=np.int16)
        if use_authors:
            for posts in groups:
                sums = sum(local_scores[i] for i in posts)
                stance = int(np.argmax(sums))
                for i in posts:
                    values[meta.post_var[i]] = stance
        else:
            for i in range(n):
                values[meta.post_var[i]] = int(np.argmax(local_scores[i]))
        if cfg.constrained:
            values = propagate_stance_edges(g, Assignment(values), cs).values
        else:
            for child, var in meta.edge_var.items():
                values[var] = int(np.argmax(eval_table.unary[var]))
        return values

    def set_edges(values: np.ndarray, flipped: list[int]) -> None:
        seen = set()
        for post in flipped:
            for child, var in adjacent_edges[post]:
                if var in seen:
                    continue
                seen.add(var)
                parent = meta.parents[child]
                same = values[meta.post_var[child]] == values[meta.post_var[parent]]
                values[var] = (
                    AgreementLabel.AGREE if same else AgreementLabel.DISAGREE
                )

    telemetry = Telemetry(restarts_used=cfg.restarts)
    best_values: Optional[np.ndarray] = None
    best_score = -np.inf
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        values = init_values()
        cur = total(values)
        truncated = False
        while True:
            improved = False
            for gi in rng.permutation(len(groups)):
                if (
                    cfg.max_moves is not None
                    and telemetry.moves_evaluated >= cfg.max_moves
                ):
                    telemetry.truncated = True
                    truncated = True
                    break
                telemetry.moves_evaluated += 1
                posts = groups[int(gi)]
                cand = values.copy()
                for i in posts:
                    cand[meta.post_var[i]] = 1 - cand[meta.post_var[i]]
                set_edges(cand, posts)
                cand_score = total(cand)
                if cand_score > cur:
                    values = cand
                    cur = cand_score
                    improved = True
                    telemetry.accepted_moves += 1
                    telemetry.score_trace.append(cand_score)
            if truncated or not improved:
                break
        if cur > best_score:
            best_score = cur
            best_values = values.copy()
        if truncated:
            break
    telemetry.wall_time_s = time.perf_counter() - start
    return _finish(
        g, bank, best_values, gold, cfg, telemetry, "rand_c" if cfg.constrained else "rand"
    )
