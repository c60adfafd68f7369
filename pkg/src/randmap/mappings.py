"""Mappings of {1..n} as functional graphs: cycles, trees, crowns, branches.

A mapping f is stored through its image sequence (1-based).  Its
functional graph has an edge v -> f(v), and splits into cycles with
trees hanging off the cyclic vertices.  ``decompose`` recovers that
structure in linear time; ``crown_report`` measures the branches at a
given height level and the crown of the unique highest branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Mapping:
    """A mapping of {1..n} given by its image sequence (1-based)."""

    n: int
    image: np.ndarray

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.int32)
        if self.n < 1:
            raise ValueError("mapping size must be at least 1")
        if img.shape != (self.n,):
            raise ValueError("image length must equal n")
        if img.min() < 1 or img.max() > self.n:
            raise ValueError("image entries must lie in 1..n")
        object.__setattr__(self, "image", img)

    def __call__(self, v: int) -> int:
        return int(self.image[v - 1])


@dataclass(frozen=True)
class Decomposition:
    """Cycle/tree structure of a mapping.

    ``height`` is the edge-distance to the first cyclic vertex (0 on the
    cycle); ``tree_root`` the cyclic vertex a vertex's path first meets;
    ``tree_heights`` maps each cyclic root to the max height in its tree.
    All vertex labels are 1-based.
    """

    n: int
    cyclic: np.ndarray
    height: np.ndarray
    tree_root: np.ndarray
    lam: int
    tree_heights: dict[int, int] = field(repr=False)

    @property
    def max_height(self) -> int:
        return int(self.height.max())


@dataclass(frozen=True)
class CrownReport:
    """Branch profile at one height level, plus the crown when unique.

    Level-c branches are the subtrees rooted at vertices of height
    exactly c (for c = 0 these are the trees themselves).  Branch
    heights are relative to the branch root.  ``second_height`` is the
    height of the second branch counting multiplicity, 0 when only one
    branch exists.  The crown is nonempty only when the highest branch
    is unique: it holds the vertices of that branch with relative height
    at least second_height + 1, and ``crown_roots`` counts the ones at
    exactly second_height + 1.
    """

    level: int
    branch_count: int
    top_height: int
    second_height: int
    tie_count: int
    crown_vertices: frozenset[int]
    crown_size: int
    crown_roots: int
    margin: int


@dataclass(frozen=True)
class ClassificationFlags:
    """Event flags derived from a crown report."""

    branch_count: int
    tie_count: int
    unique_highest: bool
    margin_ge_2: bool
    crown_ok: bool

    def exactly_k_highest(self, k: int) -> bool:
        return self.branch_count >= 1 and self.tie_count == k


def sample_uniform(n: int, stream: np.random.Generator) -> Mapping:
    """Draw a uniform mapping of {1..n}: image entries iid uniform."""
    if n < 1:
        raise ValueError("mapping size must be at least 1")
    image = stream.integers(1, n + 1, size=n, dtype=np.int32)
    return Mapping(n, image)


def decompose(m: Mapping) -> Decomposition:
    """Cycle flags, heights and tree roots of a mapping, in linear time."""
    n = m.n
    f = m.image.astype(np.int32) - 1
    cyclic = np.empty(n, dtype=np.uint8)
    height = np.empty(n, dtype=np.int32)
    root = np.empty(n, dtype=np.int32)
    indeg = np.empty(n, dtype=np.int32)
    stack = np.empty(n, dtype=np.int32)
    lam = _kernels.decompose_into(f, cyclic, height, root, indeg, stack)
    tree_max = np.zeros(n, dtype=np.int32)
    _kernels.scatter_max(root, height, tree_max)
    roots = np.flatnonzero(cyclic)
    tree_heights = {int(r) + 1: int(tree_max[r]) for r in roots}
    return Decomposition(
        n=n,
        cyclic=cyclic.astype(bool),
        height=height.copy(),
        tree_root=root + 1,
        lam=int(lam),
        tree_heights=tree_heights,
    )


def crown_report(m: Mapping, c: int, d: Decomposition | None = None) -> CrownReport:
    """Branch statistics of ``m`` at level ``c`` and the crown if unique.

    ``d`` may pass a precomputed decomposition of the same mapping.
    """
    if c < 0:
        raise ValueError("branch level must be nonnegative")
    if d is None:
        d = decompose(m)
    n = m.n
    f = m.image.astype(np.int32) - 1
    height = d.height.astype(np.int32)
    stack = np.empty(n, dtype=np.int32)
    anchor = np.empty(n, dtype=np.int32)
    if c == 0:
        anchor = d.tree_root.astype(np.int32) - 1
    else:
        _kernels.anchors_into(f, height, c, anchor, stack)
    out = np.zeros((1, 6), dtype=np.int32)
    bh = np.empty(n, dtype=np.int32)
    _kernels.branch_stats_into(height, anchor, c, bh, out, 0)
    nb, top, second, tie, crown_size, crown_roots = (int(x) for x in out[0])
    crown = frozenset()
    if tie == 1 and crown_size > 0:
        thr = c + second + 1
        top_anchor = -1
        for v in np.flatnonzero(height == c):
            if bh[v] == top:
                top_anchor = int(v)
                break
        members = np.flatnonzero((height >= thr) & (anchor == top_anchor))
        crown = frozenset(int(v) + 1 for v in members)
    if nb == 0:
        return CrownReport(c, 0, 0, 0, 0, frozenset(), 0, 0, 0)
    return CrownReport(
        level=c,
        branch_count=nb,
        top_height=top,
        second_height=second,
        tie_count=tie,
        crown_vertices=crown,
        crown_size=crown_size,
        crown_roots=crown_roots,
        margin=top - second,
    )


def classify(cr: CrownReport) -> ClassificationFlags:
    """Event flags of a crown report (pure function)."""
    has_branch = cr.branch_count >= 1
    unique = has_branch and cr.tie_count == 1
    return ClassificationFlags(
        branch_count=cr.branch_count,
        tie_count=cr.tie_count,
        unique_highest=unique,
        margin_ge_2=unique and cr.margin >= 2,
        crown_ok=unique and cr.crown_roots > 0 and cr.crown_size > 2 * cr.crown_roots,
    )


def parse_mapping(text: str) -> Mapping:
    """Parse the one-line text format: space-separated 1-based images."""
    parts = text.split()
    if not parts:
        raise ValueError("empty mapping text")
    image = np.array([int(p) for p in parts], dtype=np.int32)
    return Mapping(len(image), image)


def format_mapping(m: Mapping) -> str:
    return " ".join(str(int(v)) for v in m.image)
