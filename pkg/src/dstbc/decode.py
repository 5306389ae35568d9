"""Group decoders for the whitened real model y = G x + n.

PIC decodes each group after projecting out the span of every other
group's columns; PIC-SIC walks the groups in order, projecting out only
later groups and subtracting each decision before moving on. ZF / ZF-SIC
are the same decoders under the all-singleton refinement of the grouping,
available when the group alphabets factor per coordinate. ML is exhaustive
search over the full product alphabet.

All decoders break metric ties toward the lowest candidate index, so equal
inputs always produce equal outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .constellation import SignalSet
from .construct import GroupingScheme

__all__ = [
    "DecodeProblem",
    "DecodeResult",
    "projector_complement",
    "pic_decode",
    "pic_sic_decode",
    "zf_decode",
    "zf_sic_decode",
    "ml_decode",
    "ML_CANDIDATE_CAP",
]

_RANK_TOL = 1e-10
ML_CANDIDATE_CAP = 2**20


@dataclass(frozen=True)
class DecodeProblem:
    G: np.ndarray
    y: np.ndarray
    grouping: GroupingScheme
    group_sets: tuple

    def __post_init__(self):
        g = np.asarray(self.G, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if g.shape[1] != self.grouping.K:
            raise ValueError("G must have one column per symbol")
        if g.shape[0] != y.shape[0]:
            raise ValueError("y length must match the rows of G")
        sets = tuple(self.group_sets)
        if len(sets) != self.grouping.g:
            raise ValueError("need one signal set per group")
        for s, grp in zip(sets, self.grouping.groups):
            if s.dim != len(grp):
                raise ValueError("signal set dimension must match group size")
        object.__setattr__(self, "G", g)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "group_sets", sets)


@dataclass(frozen=True)
class DecodeResult:
    x_hat: np.ndarray
    per_group_residuals: tuple
    group_indices: tuple

    def residual(self) -> float:
        return float(sum(self.per_group_residuals))


def projector_complement(m: np.ndarray, tol: float = _RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto the complement of the column space of m.

    Numerical rank counts singular values above tol times the largest; an
    empty m projects onto everything (identity).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[1] == 0:
        return np.eye(m.shape[0])
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(m.shape[0])
    r = int(np.sum(s > tol * s[0]))
    q = u[:, :r]
    return np.eye(m.shape[0]) - q @ q.T


def _best_point(proj: np.ndarray | None, g_cols: np.ndarray, target: np.ndarray,
                points: np.ndarray):
    """argmin_a || target - P g_cols a ||^2 over the rows of points.

    proj is applied to both the group's columns and the target; None means
    identity. Ties break to the lowest index (np.argmin convention).
    """
    if proj is not None:
        g_cols = proj @ g_cols
        target = proj @ target
    cand = g_cols @ points.T  # (dim_y, M)
    d = target[:, None] - cand
    metrics = np.einsum("dm,dm->m", d, d)
    idx = int(np.argmin(metrics))
    return idx, float(metrics[idx])


def pic_decode(p: DecodeProblem) -> DecodeResult:
    """Decode every group independently behind its interference-nulling projector."""
    x_hat = np.empty(p.grouping.K)
    residuals, indices = [], []
    for k, grp in enumerate(p.grouping.groups):
        comp = p.grouping.complement(k)
        proj = projector_complement(p.G[:, comp]) if comp else None
        idx, metric = _best_point(proj, p.G[:, grp], p.y, p.group_sets[k].points)
        point = p.group_sets[k].points[idx]
        x_hat[list(grp)] = point
        residuals.append(metric)
        indices.append(idx)
    return DecodeResult(x_hat, tuple(residuals), tuple(indices))


def pic_sic_decode(p: DecodeProblem) -> DecodeResult:
    """Groups in index order; each decision is subtracted before the next."""
    x_hat = np.empty(p.grouping.K)
    residuals, indices = [], []
    y_k = p.y.copy()
    for k, grp in enumerate(p.grouping.groups):
        tail = p.grouping.tail(k)
        proj = projector_complement(p.G[:, tail]) if tail else None
        g_cols = p.G[:, grp]
        idx, metric = _best_point(proj, g_cols, y_k, p.group_sets[k].points)
        point = p.group_sets[k].points[idx]
        x_hat[list(grp)] = point
        residuals.append(metric)
        indices.append(idx)
        y_k = y_k - g_cols @ point
    return DecodeResult(x_hat, tuple(residuals), tuple(indices))


def _separable_axes(s: SignalSet):
    """Per-coordinate level lists if the set is their full product, else None."""
    axes = [np.unique(np.round(s.points[:, d], 12)) for d in range(s.dim)]
    total = 1
    for a in axes:
        total *= a.size
    if total != s.size:
        return None
    got = {tuple(np.round(pt, 12)) for pt in s.points}
    want = {tuple(v) for v in itertools.product(*[a.tolist() for a in axes])}
    return axes if got == want else None


def _singleton_refinement(p: DecodeProblem) -> DecodeProblem:
    sets = []
    for k, s in enumerate(p.group_sets):
        if s.dim == 1:
            sets.append(s)
            continue
        axes = _separable_axes(s)
        if axes is None:
            raise ValueError(
                f"group {k} is not coordinate-separable; ZF decoding needs "
                "per-symbol alphabets (a rotated group alphabet couples its symbols)"
            )
        for levels in axes:
            m = levels.size
            bits = int(np.log2(m))
            if 2**bits != m:
                raise ValueError("coordinate alphabet size is not a power of two")
            sets.append(
                SignalSet(1, levels.reshape(-1, 1), bits, np.arange(m, dtype=np.int64))
            )
    grouping = GroupingScheme(tuple((i,) for i in range(p.grouping.K)))
    order = [i for g in p.grouping.groups for i in g]
    ordered_sets = [None] * p.grouping.K
    for pos, i in enumerate(order):
        ordered_sets[i] = sets[pos]
    return DecodeProblem(p.G, p.y, grouping, tuple(ordered_sets))


def zf_decode(p: DecodeProblem) -> DecodeResult:
    return pic_decode(_singleton_refinement(p))


def zf_sic_decode(p: DecodeProblem) -> DecodeResult:
    return pic_sic_decode(_singleton_refinement(p))


def ml_decode(p: DecodeProblem, cap: int = ML_CANDIDATE_CAP) -> DecodeResult:
    """Exhaustive minimization of ||y - G x||^2 over the product alphabet."""
    total = 1
    for s in p.group_sets:
        total *= s.size
    if total > cap:
        raise ValueError(f"product alphabet has {total} points, above the cap {cap}")
    sizes = [s.size for s in p.group_sets]
    # enumerate candidates with the last group varying fastest; candidate 0
    # is all-lowest-index, preserving the common tie-break
    x_all = np.empty((total, p.grouping.K))
    reps = total
    for k, (grp, s) in enumerate(zip(p.grouping.groups, p.group_sets)):
        reps //= sizes[k]
        tile = total // (reps * sizes[k])
        idx = np.tile(np.repeat(np.arange(sizes[k]), reps), tile)
        x_all[:, list(grp)] = s.points[idx]
    d = p.y[:, None] - p.G @ x_all.T
    metrics = np.einsum("dm,dm->m", d, d)
    best = int(np.argmin(metrics))
    x_hat = x_all[best]
    indices = []
    for k in range(p.grouping.g):
        stride = total // int(np.prod(sizes[: k + 1]))
        indices.append((best // stride) % sizes[k])
    return DecodeResult(x_hat, (float(metrics[best]),), tuple(int(i) for i in indices))
