"""Cographs, branch sets and separation conditions.

Branch points are found by solving ``(M_i - M_j) y = t_j - t_i`` exactly
(up to floating point); the only approximate step is deciding whether a
solution lies in the attractor K, which is done by pruned cell refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .exceptions import InvalidInputError, ResourceError
from .ifs import (
    IfsSystem,
    SampleGrid,
    _check_symbol,
    all_words,
    point_in_attractor,
    refine_cells,
)
from .regions import Region, are_disjoint, is_subset

DEFAULT_DEPTH = 10
RANK_TOL = 1e-12
HOLDS, FAILS, UNDETERMINED = "holds", "fails", "undetermined"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


@dataclass
class Verdict:
    """Outcome of a separation check."""

    status: str
    witness: Any = None
    depth: int | None = None
    tol: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def fails(self) -> bool:
        return self.status == FAILS

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "status": self.status,
                "witness": self.witness,
                "depth": self.depth,
                "tol": self.tol,
                "details": self.details,
            }
        )


# -- sheets and merge tables -------------------------------------------------


def sheet_points(system: IfsSystem, ys, tol=None):
    """Images ``gamma_i(y)`` with coincident sheets snapped together.

    Returns ``(X, labels)`` where ``X`` has shape (N, k, d) and
    ``labels[i, k]`` is the lowest 0-based symbol whose image coincides with
    ``gamma_i(y_k)``. Snapped images are bitwise identical, so any function of
    ``x`` agrees on merged sheets.
    """
    tol = system.coincidence_tol() if tol is None else tol
    X = system.apply_all(np.atleast_2d(ys))
    n = system.n_maps
    labels = np.tile(np.arange(n)[:, None], (1, X.shape[1]))
    for i in range(1, n):
        for j in range(i):
            close = (labels[i] == i) & (np.linalg.norm(X[i] - X[j], axis=1) <= tol)
            if close.any():
                labels[i, close] = labels[j, close]
    for i in range(1, n):
        moved = labels[i] != i
        if moved.any():
            X[i, moved] = X[labels[i, moved], np.nonzero(moved)[0]]
    return X, labels


class CographSample:
    """Sample of the cograph union over a grid: keys ``(i, y)`` for all symbols and grid points."""

    def __init__(self, system: IfsSystem, grid: SampleGrid, merge_tol=None):
        if grid.system is not system and grid.system.fingerprint() != system.fingerprint():
            raise InvalidInputError("grid belongs to a different system")
        self.system = system
        self.grid = grid
        self.merge_tol = system.coincidence_tol() if merge_tol is None else merge_tol
        self.images, self.labels = sheet_points(system, grid.points, self.merge_tol)

    def __repr__(self):
        return f"<CographSample N={self.system.n_maps} grid={len(self.grid)}>"

    @property
    def n_keys(self) -> int:
        return self.labels.size

    def merge_classes(self, k: int) -> list[tuple[int, ...]]:
        """Merge classes (1-based symbols) at grid point ``k``."""
        out: dict[int, list[int]] = {}
        for i, lab in enumerate(self.labels[:, k]):
            out.setdefault(int(lab), []).append(i + 1)
        return [tuple(v) for v in out.values()]

    def same_as(self, other) -> bool:
        return isinstance(other, CographSample) and self.grid.same_as(other.grid)


# -- branch points -----------------------------------------------------------


@dataclass
class BranchPoint:
    x: np.ndarray
    y: np.ndarray
    indices: tuple[int, ...]
    exact: bool = True

    @property
    def index(self) -> int:
        return len(self.indices)

    def to_dict(self):
        return _jsonable(
            {"x": self.x, "y": self.y, "indices": list(self.indices), "e": self.index,
             "exact": self.exact}
        )


@dataclass
class SolutionSegment:
    """Part of an affine solution set meeting K, described at cell resolution."""

    origin: np.ndarray
    basis: np.ndarray
    t_range: np.ndarray
    y_samples: np.ndarray
    x_samples: np.ndarray
    resolution: float

    def to_dict(self):
        return _jsonable(
            {
                "origin": self.origin,
                "basis": self.basis.T,
                "t_range": self.t_range,
                "n_samples": len(self.y_samples),
                "x_extent": [self.x_samples.min(axis=0), self.x_samples.max(axis=0)],
                "resolution": self.resolution,
            }
        )


@dataclass
class PairSolution:
    pair: tuple[int, int]
    kind: str  # "empty", "points" or "subspace"
    rank: int
    points: list[BranchPoint] = field(default_factory=list)
    segments: list[SolutionSegment] = field(default_factory=list)
    reason: str = ""
    depth: int = 0

    @property
    def is_empty(self) -> bool:
        return not self.points and not self.segments

    def to_dict(self):
        return _jsonable(
            {
                "pair": list(self.pair),
                "kind": self.kind,
                "rank": self.rank,
                "points": self.points,
                "segments": self.segments,
                "reason": self.reason,
                "depth": self.depth,
            }
        )


def fixed_point_orbit(system: IfsSystem, depth: int = 2) -> np.ndarray:
    """Points ``gamma_w(p_s)`` for every fixed point ``p_s`` and every word of length <= depth.

    All returned points lie exactly (up to rounding) in K; they serve as
    candidates for exact touching and branch points.
    """
    pts = [system.fixed_points()]
    current = pts[0]
    for _ in range(depth):
        current = system.apply_all(current).reshape(-1, system.dimension)
        pts.append(current)
    return np.concatenate(pts)


def _membership_tol(system):
    return 1e-9 * max(1.0, system.hull_radius)


def branch_solve(system: IfsSystem, i: int, j: int, depth: int = DEFAULT_DEPTH, tol=None) -> PairSolution:
    """Solutions ``y`` in K of ``gamma_i(y) = gamma_j(y)`` and the common images ``x``.

    Parameters
    ----------
    i, j : int
        Distinct 1-based symbols.
    depth : int
        Cell depth at which membership of solutions in K is decided.
    tol : float, optional
        Slack added to cell radii in membership tests.
    """
    i = _check_symbol(i, system.n_maps)
    j = _check_symbol(j, system.n_maps)
    if i == j:
        raise InvalidInputError("branch_solve needs two distinct symbols")
    tol = _membership_tol(system) if tol is None else tol
    pair = (min(i, j), max(i, j))
    mi, mj = system.matrices[i - 1], system.matrices[j - 1]
    D = mi - mj
    rhs = system.offsets[j - 1] - system.offsets[i - 1]
    U, S, Vt = np.linalg.svd(D)
    scale = max(1.0, np.linalg.norm(mi, 2) + np.linalg.norm(mj, 2))
    rank = int(np.sum(S > RANK_TOL * scale))
    y0 = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / S[:rank])
    if np.linalg.norm(D @ y0 - rhs) > RANK_TOL * scale * (1 + np.linalg.norm(rhs)):
        return PairSolution(pair, "empty", rank, reason="inconsistent linear system")
    d = system.dimension
    if rank == d:
        if not point_in_attractor(system, y0, depth, tol):
            return PairSolution(pair, "empty", rank, reason="solution outside K", depth=depth)
        bp = _branch_point(system, y0)
        return PairSolution(pair, "points", rank, points=[bp], depth=depth)
    basis = Vt[rank:].T
    return _subspace_solution(system, pair, rank, y0, basis, depth, tol)


def _branch_point(system, y, exact=True):
    groups = branch_index(system, y)
    best = max(groups, key=lambda g: (g[1], -g[2][0]))
    return BranchPoint(np.asarray(best[0]), np.asarray(y, dtype=float), best[2], exact)


def _subspace_solution(system, pair, rank, y0, basis, depth, tol):
    proj = basis @ basis.T

    def keep(c, r):
        off = (c - y0) - (c - y0) @ proj
        return np.linalg.norm(off, axis=1) <= r + tol

    front = refine_cells(system, depth, keep)
    if len(front) == 0:
        return PairSolution(pair, "empty", rank, reason="solution set misses K", depth=front.depth)
    centers, radii = front.centers, front.radii
    rmax = float(radii.max())
    tree = cKDTree(centers)
    links = tree.query_pairs(2 * rmax + tol, output_type="ndarray")
    if len(links):
        gap = np.linalg.norm(centers[links[:, 0]] - centers[links[:, 1]], axis=1)
        links = links[gap <= radii[links[:, 0]] + radii[links[:, 1]] + tol]
    m = len(centers)
    graph = coo_matrix((np.ones(len(links)), (links[:, 0], links[:, 1])), shape=(m, m)) if len(
        links
    ) else coo_matrix((m, m))
    n_comp, comp = connected_components(graph, directed=False)
    i = pair[0]
    cmap = system.maps[i - 1]
    candidates = None
    points, segments = [], []
    for k in range(n_comp):
        sel = comp == k
        t = (centers[sel] - y0) @ basis
        extent = float((t.max(axis=0) - t.min(axis=0)).max())
        if extent <= 4 * rmax:
            if candidates is None:
                candidates = fixed_point_orbit(system, 3 if system.n_maps <= 8 else 2)
            y = _snap_candidate(candidates, y0, proj, centers[sel], radii[sel], tol)
            if y is None:
                y = y0 + t.mean(axis=0) @ basis.T
                points.append(_branch_point(system, y, exact=False))
            else:
                points.append(_branch_point(system, y))
        else:
            ys = y0 + t @ basis.T
            segments.append(
                SolutionSegment(
                    origin=y0,
                    basis=basis,
                    t_range=np.stack([t.min(axis=0), t.max(axis=0)]),
                    y_samples=ys,
                    x_samples=cmap(ys),
                    resolution=rmax,
                )
            )
    return PairSolution(pair, "subspace", rank, points=points, segments=segments, depth=front.depth)


def _snap_candidate(candidates, y0, proj, centers, radii, tol):
    off = (candidates - y0) - (candidates - y0) @ proj
    on = np.linalg.norm(off, axis=1) <= 1e-10 * max(1.0, np.abs(y0).max())
    cand = candidates[on]
    if not len(cand):
        return None
    dist = np.linalg.norm(cand[:, None, :] - centers[None], axis=2)
    inside = np.any(dist <= radii[None] + tol, axis=1)
    if not inside.any():
        return None
    return cand[inside][0]


@dataclass
class BranchReport:
    """Branch set B aggregated over all pairs of symbols."""

    system_name: str
    depth: int
    tol: float
    pairs: list[PairSolution]
    points: list[BranchPoint]
    cardinality: str
    n_points: int

    @property
    def is_empty(self) -> bool:
        return self.cardinality == "empty"

    @property
    def segments(self) -> list[SolutionSegment]:
        return [s for p in self.pairs for s in p.segments]

    def samples(self) -> np.ndarray:
        """Points of B at cell resolution (finite points plus segment samples)."""
        parts = [np.array([p.x for p in self.points])] if self.points else []
        parts += [s.x_samples for s in self.segments]
        if not parts:
            return np.zeros((0, 0))
        return np.concatenate(parts)

    def to_dict(self):
        return _jsonable(
            {
                "system": self.system_name,
                "depth": self.depth,
                "tol": self.tol,
                "cardinality": self.cardinality,
                "n_points": self.n_points,
                "points": self.points,
                "pairs": self.pairs,
            }
        )


def branch_scan(system: IfsSystem, depth: int = DEFAULT_DEPTH, tol=None) -> BranchReport:
    """Run :func:`branch_solve` over all pairs ``i < j`` and classify B."""
    tol = _membership_tol(system) if tol is None else tol
    pairs = []
    n = system.n_maps
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            pairs.append(branch_solve(system, i, j, depth, tol))
    merged: list[BranchPoint] = []
    dedup = max(system.coincidence_tol(), 1e-9 * max(1.0, system.hull_radius))
    for p in pairs:
        for bp in p.points:
            for other in merged:
                if np.linalg.norm(other.x - bp.x) <= dedup and np.linalg.norm(other.y - bp.y) <= dedup:
                    other.indices = tuple(sorted(set(other.indices) | set(bp.indices)))
                    break
            else:
                merged.append(BranchPoint(bp.x, bp.y, bp.indices, bp.exact))
    distinct_x: list[np.ndarray] = []
    for bp in merged:
        if all(np.linalg.norm(bp.x - x) > dedup for x in distinct_x):
            distinct_x.append(bp.x)
    if any(p.segments for p in pairs):
        cardinality = "infinite-at-resolution"
    elif distinct_x:
        cardinality = f"finite({len(distinct_x)})"
    else:
        cardinality = "empty"
    return BranchReport(system.name, depth, tol, pairs, merged, cardinality, len(distinct_x))


def branch_index(system: IfsSystem, y, tol=None) -> list[tuple[np.ndarray, int, tuple[int, ...]]]:
    """Group ``gamma_i(y)`` by coincidence: list of ``(x, e(x, y), indices)``."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    X, labels = sheet_points(system, y, tol)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels[:, 0]):
        groups.setdefault(int(lab), []).append(i + 1)
    return [(X[lab, 0].copy(), len(idx), tuple(idx)) for lab, idx in groups.items()]


@dataclass
class IndexSet:
    members: tuple[int, ...]
    undetermined: tuple[int, ...]
    depth: int
    tol: float

    def as_set(self) -> set[int]:
        return set(self.members)


def index_set(system: IfsSystem, x, depth: int = DEFAULT_DEPTH, tol=None) -> IndexSet:
    """Symbols ``i`` with ``x = gamma_i(y)`` for some ``y`` in K (membership at ``depth``)."""
    tol = _membership_tol(system) if tol is None else tol
    x = np.asarray(x, dtype=float).reshape(-1)
    members, undetermined = [], []
    for i, m in enumerate(system.maps, start=1):
        s = np.linalg.svd(m.matrix, compute_uv=False)
        if s.min() <= RANK_TOL * max(1.0, s.max()):
            undetermined.append(i)
            continue
        if point_in_attractor(system, m.inverse(x), depth, tol):
            members.append(i)
    return IndexSet(tuple(members), tuple(undetermined), depth, tol)


# -- separation conditions ---------------------------------------------------


def check_graph_separation(system: IfsSystem, depth: int = DEFAULT_DEPTH, report: BranchReport | None = None) -> Verdict:
    """Holds iff the branch set is empty."""
    report = branch_scan(system, depth) if report is None else report
    if report.is_empty:
        return Verdict(HOLDS, depth=report.depth, tol=report.tol, details={"cardinality": "empty"})
    if report.points:
        bp = report.points[0]
        witness = {"x": bp.x, "y": bp.y, "indices": list(bp.indices)}
    else:
        seg = report.segments[0]
        witness = {"x": seg.x_samples[0], "y": seg.y_samples[0], "indices": None}
        for p in report.pairs:
            if p.segments:
                witness["indices"] = list(p.pair)
                break
    return Verdict(
        FAILS, witness=witness, depth=report.depth, tol=report.tol,
        details={"cardinality": report.cardinality},
    )


def check_strong_separation(
    system: IfsSystem,
    depth: int = DEFAULT_DEPTH,
    pair_cap: int = 400_000,
    candidate_depth: int = 2,
) -> Verdict:
    """Decide whether the pieces ``gamma_i(K)`` are pairwise disjoint.

    Exact touching points are searched among images of fixed-point orbits;
    disjointness is certified by refining cell pairs until every pair of
    bounding balls is separated. The reported gap is a certified lower bound
    on the distance between the pieces.
    """
    touch_tol = system.coincidence_tol()
    candidates = fixed_point_orbit(system, candidate_depth)
    n = system.n_maps
    gaps = {}
    reached = 0
    undetermined = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            hit = _touching(system, (i,), (j,), candidates, touch_tol)
            if hit is not None:
                return Verdict(FAILS, witness=hit, depth=1, tol=touch_tol)
            status, gap, level = _refine_pair(system, i, j, depth, pair_cap)
            reached = max(reached, level)
            if status == HOLDS:
                gaps[(i, j)] = gap
            else:
                hit = status if isinstance(status, dict) else None
                if hit is not None:
                    return Verdict(FAILS, witness=hit, depth=level, tol=touch_tol)
                undetermined.append(((i, j), gap))
    if undetermined:
        pair, gap = min(undetermined, key=lambda u: u[1])
        return Verdict(
            UNDETERMINED, depth=reached, tol=touch_tol,
            details={"pair": list(pair), "tightest_gap": gap},
        )
    pair = min(gaps, key=gaps.get)
    return Verdict(
        HOLDS, depth=reached, tol=touch_tol,
        details={"gap": gaps[pair], "closest_pair": list(pair)},
    )


def _word_map(system, word):
    d = system.dimension
    m, t = np.eye(d), np.zeros(d)
    for s in word:
        t = m @ system.offsets[s - 1] + t
        m = m @ system.matrices[s - 1]
    return m, t


def _touching(system, u, v, candidates, tol):
    mu, tu = _word_map(system, u)
    mv, tv = _word_map(system, v)
    pu = candidates @ mu.T + tu
    pv = candidates @ mv.T + tv
    dist, idx = cKDTree(pv).query(pu)
    k = int(np.argmin(dist))
    if dist[k] <= tol:
        return {
            "point": pu[k],
            "pair": [u[0], v[0]],
            "words": [list(u), list(v)],
            "preimages": [candidates[k], candidates[idx[k]]],
        }
    return None


def _refine_pair(system, i, j, depth, pair_cap):
    from .ifs import _spectral_norms

    d, n = system.dimension, system.n_maps
    c0, r0 = system.hull_center, system.hull_radius
    M, T = system.matrices, system.offsets
    # each side: matrices, offsets, words
    am, at, aw = M[i - 1][None], T[i - 1][None], [(i,)]
    bm, bt, bw = M[j - 1][None], T[j - 1][None], [(j,)]
    best_gap = np.inf
    level = 1
    while True:
        ac = np.einsum("kij,j->ki", am, c0) + at
        bc = np.einsum("kij,j->ki", bm, c0) + bt
        ar = _spectral_norms(am) * r0
        br = _spectral_norms(bm) * r0
        gap = np.linalg.norm(ac - bc, axis=1) - ar - br
        overlap = gap <= 0
        if (~overlap).any():
            best_gap = min(best_gap, float(gap[~overlap].min()))
        if not overlap.any():
            return HOLDS, best_gap, level
        keep = np.nonzero(overlap)[0]
        if level >= depth or len(keep) * n * n > pair_cap:
            # final attempt: exact touching among the closest remaining pairs
            order = keep[np.argsort(gap[keep])][:32]
            cand = system.fixed_points()
            for k in order:
                hit = _touching(system, aw[k], bw[k], cand, system.coincidence_tol())
                if hit is not None:
                    hit["pair"] = [i, j]
                    return hit, float(gap[k]), level
            return UNDETERMINED, float(gap[keep].min()), level
        am, at, bm, bt = am[keep], at[keep], bm[keep], bt[keep]
        aw = [aw[k] for k in keep]
        bw = [bw[k] for k in keep]
        # children: (u s, v t) for all s, t
        am2 = np.einsum("kij,sjl->ksil", am, M)
        at2 = np.einsum("kij,sj->ksi", am, T) + at[:, None, :]
        bm2 = np.einsum("kij,sjl->ksil", bm, M)
        bt2 = np.einsum("kij,sj->ksi", bm, T) + bt[:, None, :]
        p = len(keep)
        am = np.repeat(am2, n, axis=1).reshape(-1, d, d)
        at = np.repeat(at2, n, axis=1).reshape(-1, d)
        bm = np.tile(bm2, (1, n, 1, 1)).reshape(-1, d, d)
        bt = np.tile(bt2, (1, n, 1)).reshape(-1, d)
        aw = [aw[k] + (s + 1,) for k in range(p) for s in range(n) for _ in range(n)]
        bw = [bw[k] + (t + 1,) for k in range(p) for _ in range(n) for t in range(n)]
        level += 1


def check_open_set_condition(
    system: IfsSystem,
    witness: Region,
    depth: int | None = None,
    samples: int = 2000,
    seed: int = 0,
) -> Verdict:
    """Test a candidate open set ``V``: ``gamma_i(V) ⊂ V`` and disjoint images.

    Relations are decided exactly where the region kinds allow it; otherwise
    random points are used to search for a counterexample. ``fails`` refers to
    the supplied witness, not to the condition for the system in general.
    """
    if not isinstance(witness, Region):
        raise InvalidInputError("witness must be a Region")
    if witness.dimension != system.dimension:
        raise InvalidInputError("witness dimension does not match the system")
    rng = np.random.default_rng(seed)
    images = [witness.image(m) for m in system.maps]
    details = {"witness": _region_desc(witness), "checks": []}
    inconclusive = False
    for i, img in enumerate(images, start=1):
        ans = is_subset(img, witness)
        details["checks"].append({"check": f"image {i} inside V", "result": _tri(ans)})
        if ans is not True:
            pts = img.sample(rng, samples)
            out = ~witness.contains(pts, margin=-0.0)
            strictly = out & ~witness.contains(pts, margin=-1e-9)
            if strictly.any():
                w = {"point": pts[np.argmax(strictly)], "check": "containment", "map": i}
                return Verdict(FAILS, witness=w, depth=depth, tol=1e-9, details=details)
            if ans is False:
                w = {"point": None, "check": "containment", "map": i}
                return Verdict(FAILS, witness=w, depth=depth, tol=1e-9, details=details)
            inconclusive = True
    n = system.n_maps
    for i in range(n):
        for j in range(i + 1, n):
            ans = are_disjoint(images[i], images[j])
            details["checks"].append(
                {"check": f"images {i + 1},{j + 1} disjoint", "result": _tri(ans)}
            )
            if ans is not True:
                pts = images[i].sample(rng, samples)
                both = images[j].contains(pts, margin=1e-9)
                if both.any() or ans is False:
                    w = {
                        "point": pts[np.argmax(both)] if both.any() else None,
                        "check": "disjointness",
                        "maps": [i + 1, j + 1],
                    }
                    return Verdict(FAILS, witness=w, depth=depth, tol=1e-9, details=details)
                inconclusive = True
    status = UNDETERMINED if inconclusive else HOLDS
    return Verdict(status, depth=depth, tol=1e-9, details=details)


def _tri(ans):
    return {True: "holds", False: "fails", None: "inconclusive"}[ans]


def _region_desc(region):
    try:
        return region.to_dict()
    except InvalidInputError:
        return {"kind": region.kind}


# -- path spaces -------------------------------------------------------------


def word_digits(idx, n: int, n_maps: int) -> np.ndarray:
    """0-based symbols of the words with lexicographic indices ``idx``."""
    idx = np.asarray(idx, dtype=np.int64)
    if n == 0:
        return np.zeros((len(idx), 0), dtype=np.int64)
    powers = n_maps ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % n_maps


def path_tuples(system: IfsSystem, n: int, ys, word_idx=None) -> np.ndarray:
    """Tuples ``(gamma_{w_1..w_n}(y), ..., gamma_{w_n}(y), y)``; shape (W, k, n+1, d)."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if word_idx is None:
        digits = all_words(n, system.n_maps)
    else:
        digits = word_digits(word_idx, n, system.n_maps)
    W, k, d = len(digits), len(ys), system.dimension
    out = np.empty((W, k, n + 1, d))
    out[:, :, n, :] = ys[None]
    for pos in range(n - 1, -1, -1):
        s = digits[:, pos]
        out[:, :, pos, :] = (
            np.einsum("wij,wkj->wki", system.matrices[s], out[:, :, pos + 1, :])
            + system.offsets[s][:, None, :]
        )
    return out


@dataclass
class PathSample:
    """Materialized path tuples keyed by ``(w, y)`` for ``w`` in W_n and grid points ``y``."""

    system: IfsSystem
    depth: int
    grid: SampleGrid
    tuples: np.ndarray

    @property
    def n_keys(self) -> int:
        return self.tuples.shape[0] * self.tuples.shape[1]

    def key(self, word, k: int) -> np.ndarray:
        """Tuple for 1-based ``word`` and grid index ``k``."""
        idx = 0
        for s in word:
            idx = idx * self.system.n_maps + (_check_symbol(s, self.system.n_maps) - 1)
        if len(word) != self.depth:
            raise InvalidInputError(f"word length {len(word)} != path depth {self.depth}")
        return self.tuples[idx, k]


def build_path_sample(system: IfsSystem, n: int, grid: SampleGrid, cap: int = 2**24) -> PathSample:
    count = system.n_maps**n * len(grid)
    if count * (n + 1) * system.dimension > cap:
        raise ResourceError(f"path sample with {count} keys exceeds cap", required=count)
    return PathSample(system, n, grid, path_tuples(system, n, grid.points))
