"""Affine iterated function systems on R^d.

Symbols are 1-based in every public signature (``w = (1, 2)`` means
``gamma_1 o gamma_2``); arrays of words are stored 0-based internally.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .exceptions import HullViolationError, InvalidInputError, ResourceError

DEFAULT_CELL_CAP = 2**20
HULL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """Affine map ``x -> matrix @ x + offset``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, ndmin=2)
        t = np.array(self.offset, dtype=float, ndmin=1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"matrix must be square, got shape {m.shape}")
        if t.shape != (m.shape[0],):
            raise InvalidInputError(
                f"offset shape {t.shape} does not match matrix shape {m.shape}"
            )
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(t))):
            raise InvalidInputError("matrix and offset must be finite")
        m.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", t)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.solve(self.matrix, (x - self.offset).T).T

    def fixed_point(self) -> np.ndarray:
        eye = np.eye(self.dimension)
        return np.linalg.solve(eye - self.matrix, self.offset)


def contraction_bounds(cmap) -> tuple[float, float]:
    """Best two-sided Lipschitz constants ``(c, c')`` of an affine map.

    For ``x -> Mx + t`` these are the extreme singular values of ``M``.
    """
    if not isinstance(cmap, ContractionMap):
        cmap = ContractionMap(cmap, np.zeros(np.atleast_2d(cmap).shape[0]))
    s = np.linalg.svd(cmap.matrix, compute_uv=False)
    return float(s.min()), float(s.max())


def is_proper(cmap) -> bool:
    c, cp = contraction_bounds(cmap)
    return c > 0.0 and cp < 1.0


class IfsSystem:
    """A system of N >= 2 affine contractions with an invariant bounding ball.

    Parameters
    ----------
    maps : sequence of ContractionMap
    hull_center, hull_radius
        A closed ball mapped into itself by every map.
    name : str, optional
    """

    def __init__(self, maps: Sequence[ContractionMap], hull_center, hull_radius, name=""):
        maps = tuple(
            m if isinstance(m, ContractionMap) else ContractionMap(*m) for m in maps
        )
        if len(maps) < 2:
            raise InvalidInputError(f"need at least two maps, got {len(maps)}")
        dims = {m.dimension for m in maps}
        if len(dims) != 1:
            raise InvalidInputError(f"maps have mixed dimensions {sorted(dims)}")
        self.maps = maps
        self.dimension = dims.pop()
        self.hull_center = np.array(hull_center, dtype=float, ndmin=1)
        self.hull_radius = float(hull_radius)
        if self.hull_center.shape != (self.dimension,):
            raise InvalidInputError("hull center has wrong dimension")
        if not (self.hull_radius > 0 and math.isfinite(self.hull_radius)):
            raise InvalidInputError("hull radius must be positive and finite")
        self.name = name
        self.matrices = np.stack([m.matrix for m in maps])
        self.offsets = np.stack([m.offset for m in maps])
        self.matrices.setflags(write=False)
        self.offsets.setflags(write=False)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<IfsSystem{label} N={self.n_maps} d={self.dimension}>"

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def bounds(self) -> np.ndarray:
        """Array of shape (N, 2) holding ``(c_i, c'_i)``."""
        s = np.linalg.svd(self.matrices, compute_uv=False)
        return np.stack([s.min(axis=1), s.max(axis=1)], axis=1)

    @property
    def max_ratio(self) -> float:
        return float(self.bounds()[:, 1].max())

    def apply(self, i: int, x):
        """``gamma_i(x)`` with 1-based ``i``."""
        return self.maps[_check_symbol(i, self.n_maps) - 1](x)

    def apply_all(self, y) -> np.ndarray:
        """All images ``gamma_i(y)``; shape (N, k, d) for ``y`` of shape (k, d)."""
        y = np.asarray(y, dtype=float)
        return np.einsum("nij,kj->nki", self.matrices, y) + self.offsets[:, None, :]

    def base_point(self) -> np.ndarray:
        """Fixed point of ``gamma_1``."""
        return self.maps[0].fixed_point()

    def fixed_points(self) -> np.ndarray:
        return np.stack([m.fixed_point() for m in self.maps])

    def coincidence_tol(self) -> float:
        """Tolerance below which two computed points are treated as equal."""
        scale = self.hull_radius + float(np.abs(self.hull_center).max(initial=0.0))
        return 1e-12 * max(1.0, scale)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.matrices, self.offsets, self.hull_center):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(np.float64(self.hull_radius).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "hull": {"center": self.hull_center.tolist(), "radius": self.hull_radius},
            "maps": [
                {"matrix": m.matrix.tolist(), "offset": m.offset.tolist()} for m in self.maps
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IfsSystem":
        try:
            maps = [ContractionMap(m["matrix"], m["offset"]) for m in data["maps"]]
            hull = data["hull"]
            system = cls(maps, hull["center"], hull["radius"], name=data.get("name", ""))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed IFS definition: {exc!r}") from exc
        dim = data.get("dimension")
        if dim is not None and dim != system.dimension:
            raise InvalidInputError(
                f"declared dimension {dim} but maps act on R^{system.dimension}"
            )
        report = verify_proper(system)
        if not report.proper:
            raise InvalidInputError("; ".join(report.failures))
        return system


def invariant_ball(maps: Sequence[ContractionMap], center=None) -> tuple[np.ndarray, float]:
    """A ball mapped into itself by every map.

    Uses ``r = max_i |gamma_i(c) - c| / (1 - c'_i)``, with ``c`` defaulting
    to the mean of the fixed points.
    """
    if center is None:
        center = np.mean([m.fixed_point() for m in maps], axis=0)
    center = np.asarray(center, dtype=float)
    r = 0.0
    for m in maps:
        _, cp = contraction_bounds(m)
        if cp >= 1:
            raise InvalidInputError("invariant ball requires proper contractions")
        r = max(r, float(np.linalg.norm(m(center) - center)) / (1 - cp))
    return center, r


@dataclass
class PropernessReport:
    bounds: list[tuple[float, float]]
    max_ratio: float
    proper: bool
    hull_invariant: bool
    hull_slack: list[float]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.proper and self.hull_invariant

    def to_dict(self) -> dict:
        return {
            "bounds": [list(b) for b in self.bounds],
            "max_ratio": self.max_ratio,
            "proper": self.proper,
            "hull_invariant": self.hull_invariant,
            "hull_slack": self.hull_slack,
            "failures": self.failures,
            "passed": self.passed,
        }


def verify_proper(system: IfsSystem, raise_on_hull=True) -> PropernessReport:
    """Check properness of every map and invariance of the hull ball.

    Raises
    ------
    HullViolationError
        If some map does not send the hull into itself (and ``raise_on_hull``).
    """
    b = system.bounds()
    failures = []
    for i, (c, cp) in enumerate(b, start=1):
        if not c > 0:
            failures.append(f"map {i}: lower bound c = {c:g} is not positive")
        if not cp < 1:
            failures.append(f"map {i}: upper bound c' = {cp:g} is not < 1")
    c0, r = system.hull_center, system.hull_radius
    slack = []
    bad = None
    for i, m in enumerate(system.maps, start=1):
        reach = float(np.linalg.norm(m(c0) - c0)) + b[i - 1, 1] * r
        slack.append(r - reach)
        if reach > r * (1 + HULL_TOL) + HULL_TOL and bad is None:
            bad = i
    report = PropernessReport(
        bounds=[(float(c), float(cp)) for c, cp in b],
        max_ratio=float(b[:, 1].max()),
        proper=not failures,
        hull_invariant=bad is None,
        hull_slack=slack,
        failures=failures,
    )
    if bad is not None:
        msg = f"map {bad} does not send the hull ball into itself (slack {slack[bad - 1]:.3g})"
        report.failures.append(msg)
        if raise_on_hull:
            raise HullViolationError(msg, map_index=bad)
    return report


# -- words -------------------------------------------------------------------


def _check_symbol(i, n_maps) -> int:
    if isinstance(i, bool) or int(i) != i or not 1 <= i <= n_maps:
        raise InvalidInputError(f"symbol {i!r} outside 1..{n_maps}")
    return int(i)


def check_word(word, n_maps) -> tuple[int, ...]:
    return tuple(_check_symbol(s, n_maps) for s in word)


def all_words(n: int, n_maps: int) -> np.ndarray:
    """All words of length ``n`` as a 0-based (N^n, n) array in lexicographic order."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(n_maps**n, dtype=np.int64)
    powers = n_maps ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % n_maps


def word_maps(system: IfsSystem, n: int, cap=DEFAULT_CELL_CAP):
    """Composed maps ``gamma_w`` for all ``w`` in W_n, lexicographic.

    Returns ``(matrices, offsets)`` with shapes (N^n, d, d) and (N^n, d).
    """
    count = system.n_maps**n
    if count > cap:
        raise ResourceError(f"{count} words exceed cap {cap}", required=count)
    d = system.dimension
    mats = np.eye(d)[None]
    offs = np.zeros((1, d))
    for _ in range(n):
        mats, offs = _extend(mats, offs, system)
    return mats, offs


def _extend(mats, offs, system):
    # gamma_{w i} = gamma_w o gamma_i, child index = parent * N + i
    new_m = np.einsum("kij,njl->knil", mats, system.matrices)
    new_t = np.einsum("kij,nj->kni", mats, system.offsets) + offs[:, None, :]
    d = system.dimension
    return new_m.reshape(-1, d, d), new_t.reshape(-1, d)


def apply_word(system: IfsSystem, word, x):
    """``gamma_w(x)``, innermost map applied first."""
    word = check_word(word, system.n_maps)
    x = np.asarray(x, dtype=float)
    for s in reversed(word):
        x = system.maps[s - 1](x)
    return x


def _spectral_norms(mats):
    if mats.shape[1] == 1:
        return np.abs(mats[:, 0, 0])
    return np.linalg.svd(mats, compute_uv=False)[:, 0]


# -- cells -------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    """Bounding ball of ``K_w = gamma_w(K)``."""

    word: tuple[int, ...]
    center: np.ndarray
    radius: float


@dataclass
class CellTree:
    """All depth-n cells in lexicographic word order."""

    system: IfsSystem
    depth: int
    words: np.ndarray
    centers: np.ndarray
    radii: np.ndarray

    def __len__(self):
        return len(self.radii)

    def __iter__(self) -> Iterator[Cell]:
        for k in range(len(self)):
            yield self.cell(k)

    def cell(self, k) -> Cell:
        return Cell(tuple(int(s) + 1 for s in self.words[k]), self.centers[k], float(self.radii[k]))

    def contains(self, pts, tol=0.0) -> np.ndarray:
        """Mask of points lying in the union of cell balls (within ``tol``)."""
        from scipy.spatial import cKDTree

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tree = cKDTree(self.centers)
        rmax = float(self.radii.max())
        out = np.zeros(len(pts), dtype=bool)
        for k, nbrs in enumerate(tree.query_ball_point(pts, rmax + tol)):
            if nbrs:
                dist = np.linalg.norm(self.centers[nbrs] - pts[k], axis=1)
                out[k] = bool(np.any(dist <= self.radii[nbrs] + tol))
        return out


def attractor_cells(system: IfsSystem, n: int, cap=DEFAULT_CELL_CAP) -> CellTree:
    """Cells ``gamma_w(hull)`` for every ``w`` in W_n."""
    if n < 0:
        raise InvalidInputError("depth must be non-negative")
    mats, offs = word_maps(system, n, cap=cap)
    centers = np.einsum("kij,j->ki", mats, system.hull_center) + offs
    radii = _spectral_norms(mats) * system.hull_radius
    return CellTree(system, n, all_words(n, system.n_maps), centers, radii)


@dataclass
class CellFront:
    """Surviving cells of a pruned descent (words 0-based)."""

    depth: int
    words: np.ndarray
    mats: np.ndarray
    offs: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    counts: list[int]

    def __len__(self):
        return len(self.radii)


def refine_cells(
    system: IfsSystem,
    depth: int,
    keep: Callable[[np.ndarray, np.ndarray], np.ndarray],
    cap=4_000_000,
    stop_when_empty=True,
    roots: np.ndarray | None = None,
    base_center=None,
    base_radius=None,
) -> CellFront:
    """Descend the cell tree keeping only cells for which ``keep(centers, radii)``.

    Cells are images of the ball ``(base_center, base_radius)``, by default
    the hull. ``roots`` optionally restricts the first level to the given
    1-based symbols.
    """
    d = system.dimension
    base_c = system.hull_center if base_center is None else np.asarray(base_center, float)
    base_r = system.hull_radius if base_radius is None else float(base_radius)
    words = np.zeros((1, 0), dtype=np.int64)
    mats = np.eye(d)[None]
    offs = np.zeros((1, d))
    centers = base_c[None].copy()
    radii = np.array([base_r])
    counts = [1]
    n_maps = system.n_maps
    for level in range(depth):
        if len(radii) * n_maps > cap:
            raise ResourceError(
                f"pruned descent needs {len(radii) * n_maps} cells at depth {level + 1}",
                required=len(radii) * n_maps,
            )
        mats, offs = _extend(mats, offs, system)
        words = np.concatenate(
            [np.repeat(words, n_maps, axis=0), np.tile(np.arange(n_maps), len(words))[:, None]],
            axis=1,
        )
        centers = np.einsum("kij,j->ki", mats, base_c) + offs
        radii = _spectral_norms(mats) * base_r
        mask = np.asarray(keep(centers, radii), dtype=bool)
        if level == 0 and roots is not None:
            mask &= np.isin(words[:, 0], np.asarray(roots) - 1)
        words, mats, offs = words[mask], mats[mask], offs[mask]
        centers, radii = centers[mask], radii[mask]
        counts.append(int(mask.sum()))
        if stop_when_empty and len(radii) == 0:
            break
    return CellFront(len(counts) - 1, words, mats, offs, centers, radii, counts)


def point_in_attractor(system: IfsSystem, y, depth: int, tol: float) -> bool:
    """Whether ``y`` lies in some depth-``depth`` cell (enlarged by ``tol``).

    A ``False`` answer is certified since the cells cover K.
    """
    y = np.asarray(y, dtype=float)
    front = refine_cells(
        system, depth, lambda c, r: np.linalg.norm(c - y, axis=1) <= r + tol
    )
    return front.depth == depth and len(front) > 0


# -- sample grids and the coding map -----------------------------------------


class SampleGrid:
    """Points ``gamma_w(p*)`` for ``w`` in W_m, where ``p*`` is the fixed point of gamma_1."""

    def __init__(self, system: IfsSystem, depth: int, cap=DEFAULT_CELL_CAP):
        if depth < 0:
            raise InvalidInputError("grid depth must be non-negative")
        self.system = system
        self.depth = depth
        self.base_point = system.base_point()
        mats, offs = word_maps(system, depth, cap=cap)
        self.points = np.einsum("kij,j->ki", mats, self.base_point) + offs
        self.points.setflags(write=False)
        self.tol = 2 * system.max_ratio**depth * (2 * system.hull_radius)
        self._tree = None
        self._id = (system.fingerprint(), depth)

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"<SampleGrid depth={self.depth} points={len(self)} system={self.system.name!r}>"

    @property
    def key(self):
        return self._id

    @property
    def words(self) -> np.ndarray:
        return all_words(self.depth, self.system.n_maps)

    def same_as(self, other) -> bool:
        return isinstance(other, SampleGrid) and self._id == other._id

    def nearest(self, pts) -> np.ndarray:
        """Index of the nearest grid point; ties go to the lexicographically first word."""
        from scipy.spatial import cKDTree

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self._tree is None:
            self._tree = cKDTree(self.points)
        k = min(4, len(self.points))
        dist, idx = self._tree.query(pts, k=k)
        if k == 1:
            return np.asarray(idx, dtype=np.int64)
        dist = np.asarray(dist)
        idx = np.asarray(idx)
        tied = dist == dist[:, :1]
        return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)

    def descriptor(self) -> dict:
        return {"system": self._id[0], "depth": self.depth, "size": len(self), "tol": self.tol}


def sample_grid(system: IfsSystem, m: int) -> SampleGrid:
    return SampleGrid(system, m)


def default_grid_depth(system: IfsSystem, max_points=512) -> int:
    m = 0
    while system.n_maps ** (m + 1) <= max_points:
        m += 1
    return m


def coding_point(system: IfsSystem, prefix) -> tuple[np.ndarray, float]:
    """``gamma_prefix(p*)`` and a bound on its distance to pi(x) for any x extending ``prefix``."""
    prefix = check_word(prefix, system.n_maps)
    if not prefix:
        raise InvalidInputError("prefix must be non-empty")
    point = apply_word(system, prefix, system.base_point())
    bound = system.max_ratio ** len(prefix) * 2 * system.hull_radius
    return point, bound


def semiconjugacy_residual(system: IfsSystem, i: int, prefix) -> float:
    """Distance between ``pi(sigma_i x)`` and ``gamma_i(pi x)`` at prefix resolution."""
    i = _check_symbol(i, system.n_maps)
    prefix = check_word(prefix, system.n_maps)
    lhs, _ = coding_point(system, (i,) + prefix)
    rhs = system.apply(i, coding_point(system, prefix)[0])
    return float(np.linalg.norm(lhs - rhs))


def chaos_game(system: IfsSystem, seed: int, iterations: int, burn_in: int = 0) -> np.ndarray:
    """Random-iteration sampler started at ``p*``; returns ``iterations - burn_in`` points."""
    if iterations <= burn_in or burn_in < 0:
        raise InvalidInputError("iterations must exceed burn_in (and burn_in >= 0)")
    rng = np.random.default_rng(seed)
    symbols = rng.integers(0, system.n_maps, size=iterations)
    mats = system.matrices
    offs = system.offsets
    x = system.base_point()
    out = np.empty((iterations - burn_in, system.dimension))
    for k, s in enumerate(symbols):
        x = mats[s] @ x + offs[s]
        if k >= burn_in:
            out[k - burn_in] = x
    return out


def resolution_depth(system: IfsSystem, tol: float) -> int:
    """Smallest m with ``(max c')^m <= tol``."""
    return max(0, math.ceil(math.log(tol) / math.log(system.max_ratio)))
