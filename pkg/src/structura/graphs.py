"""Factor-graph data model for argument forests and stance threads.

A graph owns dense-integer variables (node labels, link indicators, link
labels), factors over those variables, and per-variable feature references.
Assignments are flat integer arrays indexed by variable id, which keeps the
hill-climbing hot path array-backed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import GraphStructureError, SizeBudgetError

DEFAULT_ENUMERATION_CAP = 262_144


class Task(str, Enum):
    ARG_MINING = "arg_mining"
    STANCE = "stance"


class VarKind(str, Enum):
    NODE_LABEL = "node_label"
    LINK_INDICATOR = "link_indicator"
    LINK_LABEL = "link_label"


class FactorType(str, Enum):
    NODE = "node"
    LINK = "link"
    STANCE = "stance"
    GRANDPARENT = "grandparent"
    COPARENT = "coparent"
    AGREEMENT = "agreement"


# Second-order factors contribute only when every link indicator in their
# scope is on; everything else scores unconditionally.
GATED_FACTOR_TYPES = frozenset({FactorType.GRANDPARENT, FactorType.COPARENT})


class NodeLabel(IntEnum):
    MAJOR_CLAIM = 0
    CLAIM = 1
    PREMISE = 2


class LinkLabel(IntEnum):
    SUPPORT = 0
    ATTACK = 1


class StanceLabel(IntEnum):
    PRO = 0
    CON = 1


class AgreementLabel(IntEnum):
    AGREE = 0
    DISAGREE = 1


@dataclass(frozen=True)
class Variable:
    """One decision unit: an integer label drawn from a small domain."""

    id: int
    kind: VarKind
    domain: tuple[int, ...]
    feature_ref: int = -1

    def __post_init__(self):
        if not self.domain:
            raise GraphStructureError(f"variable {self.id}: empty domain")
        if self.kind is VarKind.LINK_INDICATOR and tuple(self.domain) != (0, 1):
            raise GraphStructureError(
                f"variable {self.id}: link indicator domain must be (0, 1)"
            )


@dataclass(frozen=True)
class Factor:
    """A scoring site: a factor type, the variables it reads, and its input features."""

    id: int
    ftype: FactorType
    scope: tuple[int, ...]
    features: np.ndarray

    @property
    def gated(self) -> bool:
        return self.ftype in GATED_FACTOR_TYPES


@dataclass
class Assignment:
    """A total labeling of one graph's variables, stored as a flat int array."""

    values: np.ndarray

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.int16)

    def copy(self) -> "Assignment":
        return Assignment(self.values.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and np.array_equal(
            self.values, other.values
        )

    def __len__(self) -> int:
        return len(self.values)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.values)


@dataclass
class ArgMiningMeta:
    """Wiring between essay structure and variable ids.

    Propositions are indexed densely per essay; ``pairs`` lists every ordered
    within-paragraph proposition pair, each backed by one link-indicator and
    one link-label variable.
    """

    paragraph_count: int
    prop_ids: list[str]
    prop_paragraph: list[int]
    node_var: list[int]
    pairs: list[tuple[int, int]]
    link_var: dict[tuple[int, int], int]
    stance_var: dict[tuple[int, int], int]

    @property
    def first_paragraph(self) -> int:
        return 0

    @property
    def last_paragraph(self) -> int:
        return self.paragraph_count - 1

    def paragraph_props(self, paragraph: int) -> list[int]:
        return [i for i, p in enumerate(self.prop_paragraph) if p == paragraph]


@dataclass
class StanceMeta:
    """Wiring between a reply thread and variable ids.

    ``parents[i]`` is the post index replied to (None for the thread root);
    each non-root post owns one agreement variable on its reply edge.
    """

    post_ids: list[str]
    authors: list[str]
    parents: list[Optional[int]]
    post_var: list[int]
    edge_var: dict[int, int]
    topic: str = ""


Metadata = Union[ArgMiningMeta, StanceMeta]


@dataclass
class FactorGraph:
    """One structured instance: an essay's argument forest or a debate thread."""

    id: str
    task: Task
    variables: list[Variable]
    factors: list[Factor]
    groups: list[int]
    feature_store: list[np.ndarray] = field(default_factory=list)
    metadata: Optional[Metadata] = None

    def __post_init__(self):
        n = len(self.variables)
        for i, v in enumerate(self.variables):
            if v.id != i:
                raise GraphStructureError(
                    f"graph {self.id}: variable ids must be dense 0..n-1, got {v.id} at {i}"
                )
        if len(self.groups) != n:
            raise GraphStructureError(
                f"graph {self.id}: groups must cover every variable"
            )
        seen_scopes = set()
        for f in self.factors:
            for vid in f.scope:
                if not 0 <= vid < n:
                    raise GraphStructureError(
                        f"graph {self.id}: factor {f.id} references unknown variable {vid}"
                    )
            key = (f.ftype, f.scope)
            if key in seen_scopes:
                raise GraphStructureError(
                    f"graph {self.id}: duplicate factor {f.ftype.value} over scope {f.scope}"
                )
            seen_scopes.add(key)
        if self.task is Task.STANCE and isinstance(self.metadata, StanceMeta):
            _validate_reply_tree(self.id, self.metadata.parents)
        self._domain_sizes = np.array(
            [len(v.domain) for v in self.variables], dtype=np.int64
        )

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def domain_sizes(self) -> np.ndarray:
        return self._domain_sizes

    def assignment_space_size(self) -> int:
        return int(math.prod(int(s) for s in self._domain_sizes))

    def group_variables(self, group: int) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g == group]

    def validate_assignment(self, a: Assignment) -> None:
        if len(a.values) != self.num_variables:
            raise GraphStructureError(
                f"graph {self.id}: assignment covers {len(a.values)} of "
                f"{self.num_variables} variables"
            )
        for v in self.variables:
            if int(a.values[v.id]) not in v.domain:
                raise GraphStructureError(
                    f"graph {self.id}: value {a.values[v.id]} outside domain of variable {v.id}"
                )


def _validate_reply_tree(graph_id: str, parents: Sequence[Optional[int]]) -> None:
    n = len(parents)
    roots = [i for i, p in enumerate(parents) if p is None]
    if n and not roots:
        raise GraphStructureError(f"graph {graph_id}: reply structure has no root")
    for i, p in enumerate(parents):
        if p is None:
            continue
        if not 0 <= p < n or p == i:
            raise GraphStructureError(
                f"graph {graph_id}: post {i} has invalid parent {p}"
            )
        seen = {i}
        cur = p
        while cur is not None:
            if cur in seen:
                raise GraphStructureError(
                    f"graph {graph_id}: reply structure contains a cycle at post {i}"
                )
            seen.add(cur)
            cur = parents[cur]


def hamming_distance(
    a: Assignment,
    b: Assignment,
    normalize: bool = False,
    positions: Optional[Sequence[int]] = None,
) -> float:
    """Count differing variable values between two total assignments.

    With ``normalize`` the count is divided by the number of compared
    positions, so the result lies in [0, 1]. ``positions`` optionally
    restricts the comparison to a subset of variable ids; by default every
    variable counts, including link-label slots of absent links.
    """
    if len(a.values) != len(b.values):
        raise GraphStructureError(
            f"assignments cover different variable sets ({len(a.values)} vs {len(b.values)})"
        )
    if positions is None:
        av, bv = a.values, b.values
    else:
        idx = np.asarray(list(positions), dtype=np.int64)
        av, bv = a.values[idx], b.values[idx]
    total = len(av)
    if total == 0:
        return 0.0
    diff = int(np.count_nonzero(av != bv))
    return diff / total if normalize else float(diff)


def enumerate_assignments(
    g: FactorGraph,
    cs=None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Iterator[Assignment]:
    """Yield every total assignment of ``g`` in lexicographic order.

    When a constraint set is given, only assignments with zero violations
    are yielded. Raises SizeBudgetError before yielding anything if the
    assignment space exceeds ``cap``.
    """
    space = g.assignment_space_size()
    if space > cap:
        raise SizeBudgetError(
            f"graph {g.id}: assignment space {space} exceeds enumeration cap {cap}"
        )
    if cs is not None:
        from .constraints import check as _check

    def _generate():
        for combo in itertools.product(*(v.domain for v in g.variables)):
            a = Assignment(np.array(combo, dtype=np.int16))
            if cs is None or not _check(g, a, cs):
                yield a

    return _generate()


def active_factors(
    g: FactorGraph, a: Assignment
) -> list[tuple[int, tuple[int, ...]]]:
    """List (factor id, local label tuple) for every scoring factor.

    Grandparent and co-parent factors appear only when every link indicator
    in their scope is on; all other factor kinds always appear. Pure and
    deterministic in (g, a).
    """
    vals = a.values
    out = []
    for f in g.factors:
        labels = tuple(int(vals[vid]) for vid in f.scope)
        if f.gated and any(v == 0 for v in labels):
            continue
        out.append((f.id, labels))
    return out


def cartesian_assignments(g: FactorGraph) -> np.ndarray:
    """Materialize the full assignment space as a (space, n_vars) int matrix.

    Rows are in the same lexicographic order as enumerate_assignments.
    Intended for vectorized exhaustive search; callers must respect the
    enumeration cap themselves.
    """
    grids = np.meshgrid(
        *(np.asarray(v.domain, dtype=np.int16) for v in g.variables), indexing="ij"
    )
    return np.stack([grid.reshape(-1) for grid in grids], axis=1)
