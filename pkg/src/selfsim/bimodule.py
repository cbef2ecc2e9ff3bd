"""Sampled realizations of A = C(K), X = C(G) and Y_n = C(P_n).

Functions are evaluable at arbitrary points: either through an exact callable
or, for value-backed functions, by nearest-grid-point lookup with ties going
to the lexicographically first word. Grid values are the evaluations at the
canonical sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cograph import (
    BranchReport,
    CographSample,
    Verdict,
    check_open_set_condition,
    path_tuples,
    sheet_points,
)
from .exceptions import InvalidInputError, ResourceError
from .ifs import IfsSystem, SampleGrid, refine_cells
from .regions import Region

MAX_WORDS = 2**22


def _pts(ys):
    return np.atleast_2d(np.asarray(ys, dtype=float))


def _union_points(grid: SampleGrid, extra=None):
    if extra is None or len(np.atleast_1d(extra)) == 0:
        return grid.points
    return np.concatenate([grid.points, _pts(extra)])


# -- A = C(K) ----------------------------------------------------------------


class SampledFunction:
    """Element of C(K) over a sample grid.

    Parameters
    ----------
    grid : SampleGrid
    fn : callable, optional
        Vectorized ``fn(points) -> values`` for points of shape (k, d).
    values : array, optional
        One value per grid point; used when ``fn`` is omitted.
    """

    def __init__(self, grid: SampleGrid, fn: Callable | None = None, values=None):
        if fn is None and values is None:
            raise InvalidInputError("need either fn or values")
        self.grid = grid
        self._fn = fn
        if fn is None:
            v = np.asarray(values, dtype=complex).reshape(-1)
            if v.shape != (len(grid),):
                raise InvalidInputError(f"expected {len(grid)} values, got {v.shape}")
            if not np.all(np.isfinite(v)):
                raise InvalidInputError("values must be finite")
            self._values = v
        else:
            self._values = None

    def __repr__(self):
        kind = "callable" if self.is_exact else "values"
        return f"<SampledFunction {kind} grid={len(self.grid)}>"

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, lambda p: np.full(len(p), c, dtype=complex))

    @property
    def is_exact(self) -> bool:
        return self._fn is not None

    @property
    def system(self) -> IfsSystem:
        return self.grid.system

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.evaluate(self.grid.points)
        return self._values

    def evaluate(self, pts) -> np.ndarray:
        pts = _pts(pts)
        if self._fn is not None:
            return np.asarray(self._fn(pts), dtype=complex).reshape(len(pts))
        return self._values[self.grid.nearest(pts)]

    __call__ = evaluate

    def _combine(self, other, op):
        if isinstance(other, SampledFunction):
            _same_grid(self.grid, other.grid)
            return SampledFunction(self.grid, lambda p: op(self.evaluate(p), other.evaluate(p)))
        return SampledFunction(self.grid, lambda p: op(self.evaluate(p), other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, lambda p: -self.evaluate(p))

    def conj(self):
        return SampledFunction(self.grid, lambda p: np.conj(self.evaluate(p)))

    def apply(self, func):
        """Pointwise ``func`` (e.g. ``np.sqrt``) of the function."""
        return SampledFunction(self.grid, lambda p: func(self.evaluate(p)))

    def sup_norm(self, extra=None) -> float:
        return float(np.abs(self.evaluate(_union_points(self.grid, extra))).max())


def _same_grid(a: SampleGrid, b: SampleGrid):
    if a is not b and not a.same_as(b):
        raise InvalidInputError("functions live on different sample grids")


# -- X = C(G) ----------------------------------------------------------------


class CographFunction:
    """Element of C(G) sampled on the cograph union.

    Internally a function ``sheets(ys) -> (N, k)`` giving the values at
    ``(gamma_i(y), y)``. Coincident sheets share their value, which is what
    distinguishes the union of cographs from their disjoint union.
    """

    def __init__(self, sample: CographSample, sheets: Callable, exact=True):
        self.sample = sample
        self._sheets = sheets
        self.is_exact = exact
        self._values = None

    def __repr__(self):
        return f"<CographFunction N={self.system.n_maps} grid={len(self.grid)}>"

    @property
    def system(self) -> IfsSystem:
        return self.sample.system

    @property
    def grid(self) -> SampleGrid:
        return self.sample.grid

    @classmethod
    def from_callable(cls, sample: CographSample, fn: Callable) -> "CographFunction":
        """Wrap ``fn(x, y)`` taking arrays of shape (k, d) each."""
        system = sample.system

        def sheets(ys):
            ys = _pts(ys)
            X, _ = sheet_points(system, ys, sample.merge_tol)
            n, k, d = X.shape
            out = fn(X.reshape(n * k, d), np.tile(ys, (n, 1)))
            return np.asarray(out, dtype=complex).reshape(n, k)

        return cls(sample, sheets)

    @classmethod
    def from_values(cls, sample: CographSample, values) -> "CographFunction":
        """Value-backed function; values of shape (N, |grid|) keyed by ``(i, y)``."""
        v = np.asarray(values, dtype=complex)
        shape = sample.labels.shape
        if v.shape != shape:
            raise InvalidInputError(f"expected values of shape {shape}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("values must be finite")
        cols = np.arange(shape[1])[None, :]
        bad = v != v[sample.labels, cols]
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise InvalidInputError(
                f"values differ on merged sheets {i + 1} and {sample.labels[i, k] + 1} "
                f"at grid point {k}"
            )
        v = v.copy()
        grid = sample.grid

        def sheets(ys):
            return v[:, grid.nearest(_pts(ys))]

        return cls(sample, sheets, exact=False)

    @classmethod
    def constant(cls, sample, c):
        n = sample.system.n_maps
        return cls(sample, lambda ys: np.full((n, len(_pts(ys))), c, dtype=complex))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.sheets(self.grid.points)
        return self._values

    def sheets(self, ys) -> np.ndarray:
        return self._sheets(_pts(ys))

    def _lift(self, op, other=None):
        if isinstance(other, CographFunction):
            _same_sample(self.sample, other.sample)
            return CographFunction(self.sample, lambda ys: op(self.sheets(ys), other.sheets(ys)))
        return CographFunction(self.sample, lambda ys: op(self.sheets(ys), other))

    def __add__(self, other):
        return self._lift(np.add, other)

    def __sub__(self, other):
        return self._lift(np.subtract, other)

    def __mul__(self, other):
        return self._lift(np.multiply, other)

    __rmul__ = __mul__

    def conj(self):
        return CographFunction(self.sample, lambda ys: np.conj(self.sheets(ys)))

    def branch_consistent(self) -> bool:
        v = self.values
        cols = np.arange(v.shape[1])[None, :]
        return bool(np.array_equal(v, v[self.sample.labels, cols]))


def _same_sample(a: CographSample, b: CographSample):
    if a is not b and not a.same_as(b):
        raise InvalidInputError("cograph functions live on different samples")


def xi0(sample: CographSample) -> CographFunction:
    """The constant function ``1/sqrt(N)`` on the cograph union."""
    return CographFunction.constant(sample, 1 / np.sqrt(sample.system.n_maps))


def inner_product(f: CographFunction, g: CographFunction) -> SampledFunction:
    """``(f|g)_A(y) = sum_i conj(f(gamma_i(y), y)) g(gamma_i(y), y)``."""
    _same_sample(f.sample, g.sample)
    return SampledFunction(
        f.grid, lambda ys: np.sum(np.conj(f.sheets(ys)) * g.sheets(ys), axis=0)
    )


def left_action(a: SampledFunction, f: CographFunction) -> CographFunction:
    """``(phi(a) f)(x, y) = a(x) f(x, y)``."""
    _same_grid(a.grid, f.grid)
    system, tol = f.system, f.sample.merge_tol

    def sheets(ys):
        X, _ = sheet_points(system, ys, tol)
        n, k, d = X.shape
        return a.evaluate(X.reshape(n * k, d)).reshape(n, k) * f.sheets(ys)

    return CographFunction(f.sample, sheets)


def right_action(f: CographFunction, a: SampledFunction) -> CographFunction:
    """``(f a)(x, y) = f(x, y) a(y)``."""
    _same_grid(a.grid, f.grid)
    return CographFunction(f.sample, lambda ys: f.sheets(ys) * a.evaluate(ys)[None, :])


def norm2(f, extra=None) -> float:
    """``||f||_2 = sup_y (f|f)_A(y)^(1/2)`` over the grid (plus ``extra`` points)."""
    if isinstance(f, PathFunction):
        ip = path_inner_product(f, f)
    else:
        ip = inner_product(f, f)
    vals = ip.evaluate(_union_points(f.grid, extra)).real
    return float(np.sqrt(max(vals.max(), 0.0)))


def sup_norm(f, extra=None) -> float:
    """Uniform norm over the sampled keys."""
    ys = _union_points(f.grid, extra)
    if isinstance(f, PathFunction):
        return float(np.abs(f.values_on(ys)).max(initial=0.0))
    if isinstance(f, SampledFunction):
        return f.sup_norm(extra)
    return float(np.abs(f.sheets(ys)).max())


def rank_one_apply(xi: CographFunction, eta: CographFunction, zeta: CographFunction) -> CographFunction:
    """``theta_{xi, eta}(zeta) = xi (eta|zeta)_A``."""
    return right_action(xi, inner_product(eta, zeta))


# -- Y_n = C(P_n) ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathSpace:
    """Index data of Y_n: system, path length ``n`` and base grid."""

    system: IfsSystem
    depth: int
    grid: SampleGrid

    @property
    def n_words(self) -> int:
        return self.system.n_maps**self.depth

    def same_as(self, other) -> bool:
        return self.depth == other.depth and self.grid.same_as(other.grid)


def _as_space(space) -> PathSpace:
    if isinstance(space, PathSpace):
        return space
    return PathSpace(space.system, space.depth, space.grid)


class PathFunction:
    """Element of C(P_n) keyed by ``(w, y)``.

    ``evaluator(ys, words)`` returns values of shape (len(words), k) for
    0-based lexicographic word indices. ``support`` optionally lists the only
    words on which the function can be nonzero.
    """

    def __init__(self, space, evaluator: Callable, support=None, exact=True):
        self.space = _as_space(space)
        self._eval = evaluator
        self.support = None if support is None else np.unique(np.asarray(support, dtype=np.int64))
        self.is_exact = exact
        if self.support is None and self.space.n_words > MAX_WORDS:
            raise ResourceError("dense path function too large", required=self.space.n_words)

    def __repr__(self):
        sup = "all" if self.support is None else len(self.support)
        return f"<PathFunction n={self.depth} words={sup}>"

    @property
    def system(self) -> IfsSystem:
        return self.space.system

    @property
    def grid(self) -> SampleGrid:
        return self.space.grid

    @property
    def depth(self) -> int:
        return self.space.depth

    @property
    def words(self) -> np.ndarray:
        if self.support is not None:
            return self.support
        return np.arange(self.space.n_words, dtype=np.int64)

    @classmethod
    def from_callable(cls, space, fn: Callable, support=None) -> "PathFunction":
        """Wrap ``fn(tuples, words)`` where ``tuples`` has shape (W, k, n+1, d)."""
        space = _as_space(space)

        def evaluator(ys, words):
            tup = path_tuples(space.system, space.depth, ys, words)
            return np.asarray(fn(tup, words), dtype=complex).reshape(len(words), len(ys))

        return cls(space, evaluator, support)

    @classmethod
    def from_values(cls, space, values) -> "PathFunction":
        """Value-backed function; values of shape (N^n, |grid|)."""
        space = _as_space(space)
        v = np.asarray(values, dtype=complex)
        if v.shape != (space.n_words, len(space.grid)):
            raise InvalidInputError(f"expected shape {(space.n_words, len(space.grid))}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("values must be finite")
        v = v.copy()
        grid = space.grid
        return cls(space, lambda ys, words: v[np.asarray(words)][:, grid.nearest(ys)], exact=False)

    @classmethod
    def constant(cls, space, c) -> "PathFunction":
        return cls(space, lambda ys, words: np.full((len(words), len(ys)), c, dtype=complex))

    def values_on(self, ys, words=None) -> np.ndarray:
        ys = _pts(ys)
        words = self.words if words is None else np.asarray(words, dtype=np.int64)
        if len(words) == 0:
            return np.zeros((0, len(ys)), dtype=complex)
        if self.support is None:
            return self._eval(ys, words)
        out = np.zeros((len(words), len(ys)), dtype=complex)
        inside = np.isin(words, self.support)
        if inside.any():
            out[inside] = self._eval(ys, words[inside])
        return out

    @property
    def values(self) -> np.ndarray:
        """Dense values of shape (N^n, |grid|)."""
        return self.values_on(self.grid.points, np.arange(self.space.n_words))

    def __mul__(self, other):
        if isinstance(other, PathFunction):
            _same_space(self.space, other.space)
            sup = _intersect(self.support, other.support)
            return PathFunction(
                self.space, lambda ys, w: self.values_on(ys, w) * other.values_on(ys, w), sup
            )
        return PathFunction(self.space, lambda ys, w: self.values_on(ys, w) * other, self.support)

    __rmul__ = __mul__

    def __sub__(self, other):
        _same_space(self.space, other.space)
        sup = _union(self.support, other.support)
        return PathFunction(
            self.space, lambda ys, w: self.values_on(ys, w) - other.values_on(ys, w), sup
        )

    def __add__(self, other):
        _same_space(self.space, other.space)
        sup = _union(self.support, other.support)
        return PathFunction(
            self.space, lambda ys, w: self.values_on(ys, w) + other.values_on(ys, w), sup
        )


def _intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return np.intersect1d(a, b)


def _union(a, b):
    if a is None or b is None:
        return None
    return np.union1d(a, b)


def _same_space(a: PathSpace, b: PathSpace):
    if a is not b and not a.same_as(b):
        raise InvalidInputError("path functions live on different path spaces")


def path_inner_product(f: PathFunction, g: PathFunction) -> SampledFunction:
    """``(f|g)_A(y) = sum_{w in W_n} conj(f(w, y)) g(w, y)``."""
    _same_space(f.space, g.space)
    words = _intersect(f.support, g.support)
    if words is None:
        words = np.arange(f.space.n_words, dtype=np.int64)

    def fn(ys):
        if len(words) == 0:
            return np.zeros(len(ys), dtype=complex)
        return np.sum(np.conj(f.values_on(ys, words)) * g.values_on(ys, words), axis=0)

    return SampledFunction(f.grid, fn)


def path_left_action(a: SampledFunction, f: PathFunction) -> PathFunction:
    """Multiply by ``a`` at the first tuple coordinate ``gamma_w(y)``."""
    _same_grid(a.grid, f.grid)
    system, n = f.system, f.depth

    def evaluator(ys, words):
        z0 = path_tuples(system, n, ys, words)[:, :, 0, :]
        W, k, d = z0.shape
        return a.evaluate(z0.reshape(W * k, d)).reshape(W, k) * f.values_on(ys, words)

    return PathFunction(f.space, evaluator, f.support, exact=a.is_exact and f.is_exact)


def path_right_action(f: PathFunction, a: SampledFunction) -> PathFunction:
    _same_grid(a.grid, f.grid)
    return PathFunction(
        f.space, lambda ys, w: f.values_on(ys, w) * a.evaluate(ys)[None, :], f.support
    )


def tensor_to_path(factors: list[CographFunction]) -> PathFunction:
    """Image of ``f_1 ⊗ ... ⊗ f_n`` in C(P_n).

    The value at ``(w, y)`` is ``prod_k f_k(z_{k-1}, z_k)`` for the path tuple
    ``(z_0, ..., z_n)``, with factor ``k`` read on sheet ``w_k``.
    """
    if not factors:
        raise InvalidInputError("need at least one factor")
    sample = factors[0].sample
    for f in factors[1:]:
        _same_sample(sample, f.sample)
    n = len(factors)
    system = sample.system
    space = PathSpace(system, n, sample.grid)
    from .cograph import word_digits

    def evaluator(ys, words):
        tup = path_tuples(system, n, ys, words)
        digits = word_digits(words, n, system.n_maps)
        W, k = len(words), len(ys)
        out = np.ones((W, k), dtype=complex)
        for pos, f in enumerate(factors):
            vals = f.sheets(tup[:, :, pos + 1, :].reshape(W * k, -1))
            out *= vals[np.repeat(digits[:, pos], k), np.arange(W * k)].reshape(W, k)
        return out

    return PathFunction(space, evaluator, exact=all(f.is_exact for f in factors))


def tensor_inner_product(fs: list[CographFunction], gs: list[CographFunction]) -> SampledFunction:
    """Iterated inner product of elementary tensors.

    Computed by the module recursion
    ``(f_1 ⊗ ... ⊗ f_k | g_1 ⊗ ... ⊗ g_k) = (f_k | phi(c_{k-1}) g_k)``, which
    never forms path tuples; it serves as an independent check of
    :func:`tensor_to_path`.
    """
    if len(fs) != len(gs) or not fs:
        raise InvalidInputError("factor lists must be nonempty and of equal length")
    c = inner_product(fs[0], gs[0])
    for f, g in zip(fs[1:], gs[1:]):
        c = inner_product(f, left_action(c, g))
    return c


def cograph_pullback(space, fn: Callable | None = None, values=None, tol=1e-12) -> PathFunction:
    """Pull back a function on G_n = {(gamma_w(y), y)} to the path space.

    Parameters
    ----------
    fn : callable, optional
        ``fn(x, y)`` on arrays of shape (k, d).
    values : array, optional
        Values keyed by ``(w, y)`` of shape (N^n, |grid|); must agree on words
        whose endpoint maps coincide at ``y``.
    """
    space = _as_space(space)
    system, n = space.system, space.depth
    if fn is not None:

        def evaluator(ys, words):
            tup = path_tuples(system, n, ys, words)
            W, k, _, d = tup.shape
            x = tup[:, :, 0, :].reshape(W * k, d)
            y = np.broadcast_to(tup[:, :, n, :], (W, k, d)).reshape(W * k, d)
            return np.asarray(fn(x, y), dtype=complex).reshape(W, k)

        return PathFunction(space, evaluator)
    if values is None:
        raise InvalidInputError("need fn or values")
    v = np.asarray(values, dtype=complex)
    ends = path_tuples(system, n, space.grid.points)[:, :, 0, :]
    merge = system.coincidence_tol()
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))
    for k in range(ends.shape[1]):
        pts = ends[:, k, :]
        order = np.lexsort(pts.T[::-1])
        p, vv = pts[order], v[order, k]
        same = np.linalg.norm(np.diff(p, axis=0), axis=1) <= merge
        if np.any(same & (np.abs(np.diff(vv)) > tol * scale)):
            raise InvalidInputError(f"values not well defined on G_n at grid point {k}")
        if len(pts) > 1:
            # catch coincidences that the lexicographic sort separates
            from scipy.spatial import cKDTree

            pairs = cKDTree(pts).query_pairs(merge, output_type="ndarray")
            if len(pairs) and np.any(np.abs(v[pairs[:, 0], k] - v[pairs[:, 1], k]) > tol * scale):
                raise InvalidInputError(f"values not well defined on G_n at grid point {k}")
    return PathFunction.from_values(space, v)


# -- operators ---------------------------------------------------------------


class FiniteRankOperator:
    """``zeta -> sum_c xi_c (eta_c | zeta)_A``.

    For cograph functions the pairs are stored in batched form:
    ``xi(ys)`` and ``eta(ys)`` return arrays of shape (C, N, k).
    """

    def __init__(self, sample: CographSample, xi: Callable, eta: Callable, rank: int):
        self.sample = sample
        self._xi = xi
        self._eta = eta
        self.rank = rank

    def __repr__(self):
        return f"<FiniteRankOperator rank={self.rank}>"

    @classmethod
    def from_pairs(cls, pairs) -> "FiniteRankOperator":
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("need at least one pair")
        sample = pairs[0][0].sample
        for xi, eta in pairs:
            _same_sample(sample, xi.sample)
            _same_sample(sample, eta.sample)
        return cls(
            sample,
            lambda ys: np.stack([p[0].sheets(ys) for p in pairs]),
            lambda ys: np.stack([p[1].sheets(ys) for p in pairs]),
            len(pairs),
        )

    @classmethod
    def zero(cls, sample):
        n = sample.system.n_maps
        z = lambda ys: np.zeros((0, n, len(_pts(ys))), dtype=complex)  # noqa: E731
        return cls(sample, z, z, 0)

    def adjoint(self) -> "FiniteRankOperator":
        return FiniteRankOperator(self.sample, self._eta, self._xi, self.rank)

    def apply(self, zeta: CographFunction) -> CographFunction:
        _same_sample(self.sample, zeta.sample)

        def sheets(ys):
            if self.rank == 0:
                return np.zeros_like(zeta.sheets(ys))
            coef = np.einsum("cnk,nk->ck", np.conj(self._eta(ys)), zeta.sheets(ys))
            return np.einsum("cnk,ck->nk", self._xi(ys), coef)

        return CographFunction(self.sample, sheets)

    __call__ = apply


def path_rank_one_apply(xi: PathFunction, eta: PathFunction, zeta: PathFunction) -> PathFunction:
    return path_right_action(xi, path_inner_product(eta, zeta))


class PathOperator:
    """Fiberwise operator on Y_n: an N^n x N^n matrix per base point ``y``.

    ``fiber(ys)`` returns an array of shape (k, N^n, N^n).
    """

    def __init__(self, space, fiber: Callable):
        self.space = _as_space(space)
        if self.space.n_words > 4096:
            raise ResourceError("fiber matrices too large", required=self.space.n_words)
        self._fiber = fiber

    def __repr__(self):
        return f"<PathOperator n={self.space.depth} fiber={self.space.n_words}>"

    @property
    def depth(self) -> int:
        return self.space.depth

    def fiber(self, ys) -> np.ndarray:
        return np.asarray(self._fiber(_pts(ys)), dtype=complex)

    @classmethod
    def identity(cls, space):
        space = _as_space(space)
        W = space.n_words
        return cls(space, lambda ys: np.broadcast_to(np.eye(W), (len(ys), W, W)))

    @classmethod
    def zero(cls, space):
        space = _as_space(space)
        W = space.n_words
        return cls(space, lambda ys: np.zeros((len(ys), W, W)))

    @classmethod
    def multiplication(cls, space, a: SampledFunction):
        """Left action ``phi(a)``: diagonal with entries ``a(gamma_w(y))``."""
        space = _as_space(space)
        W = space.n_words

        def fiber(ys):
            z0 = path_tuples(space.system, space.depth, ys)[:, :, 0, :]
            vals = a.evaluate(z0.reshape(W * len(ys), -1)).reshape(W, len(ys)).T
            out = np.zeros((len(ys), W, W), dtype=complex)
            idx = np.arange(W)
            out[:, idx, idx] = vals
            return out

        return cls(space, fiber)

    @classmethod
    def finite_rank(cls, pairs):
        """``sum_c theta_{xi_c, eta_c}`` for path functions."""
        pairs = list(pairs)
        space = pairs[0][0].space

        def fiber(ys):
            out = 0
            for xi, eta in pairs:
                out = out + np.einsum("wk,vk->kwv", xi.values_on(ys, np.arange(space.n_words)),
                                      np.conj(eta.values_on(ys, np.arange(space.n_words))))
            return out

        return cls(space, fiber)

    def apply(self, f: PathFunction) -> PathFunction:
        _same_space(self.space, f.space)
        W = self.space.n_words

        def evaluator(ys, words):
            full = f.values_on(ys, np.arange(W))
            res = np.einsum("kwv,vk->wk", self.fiber(ys), full)
            return res[np.asarray(words)]

        return PathFunction(self.space, evaluator)

    __call__ = apply

    def left_multiply(self, a: SampledFunction) -> "PathOperator":
        """The operator ``phi(a) T``."""
        mult = PathOperator.multiplication(self.space, a)
        return PathOperator(self.space, lambda ys: mult.fiber(ys) @ self.fiber(ys))

    def fiber_norms(self, ys) -> np.ndarray:
        mats = self.fiber(ys)
        if mats.shape[1] == 0:
            return np.zeros(len(mats))
        return np.linalg.svd(mats, compute_uv=False)[:, 0]

    def norm(self, extra=None) -> float:
        """Sup over the grid (plus ``extra``) of fiber spectral norms."""
        return float(self.fiber_norms(_union_points(self.space.grid, extra)).max())


# -- compactness probe -------------------------------------------------------


@dataclass
class CompactApproxResult:
    """Outcome of the partition-of-unity construction for ``phi(a)``.

    ``status`` is ``approximant`` (``operator`` approximates ``phi(a)``),
    ``obstructed`` (a is nonzero on B; ``lower_bound`` certifies a distance
    from the constructed candidate) or ``unsupported`` (no verified open set).
    """

    status: str
    operator: FiniteRankOperator | None
    candidate: FiniteRankOperator | None
    residual: float | None
    lower_bound: float | None
    partition_depth: int
    n_cells: int
    meets_branch: bool
    probes: list[dict] = field(default_factory=list)

    def to_dict(self):
        return {
            "status": self.status,
            "residual": self.residual,
            "lower_bound": self.lower_bound,
            "partition_depth": self.partition_depth,
            "n_cells": self.n_cells,
            "meets_branch": self.meets_branch,
            "rank": None if self.candidate is None else self.candidate.rank,
            "probes": self.probes,
        }


def _bump(center, radius):
    center = np.asarray(center, dtype=float)

    def fn(x, y):
        z = np.concatenate([x, y], axis=1)
        return np.clip(1 - np.linalg.norm(z - center, axis=1) / radius, 0.0, 1.0)

    return fn


def compact_approx(
    a: SampledFunction,
    branch: BranchReport,
    partition_depth: int,
    osc: Verdict | Region | None = None,
    n_random: int = 50,
    seed: int = 0,
    sample: CographSample | None = None,
    support_depth: int | None = None,
) -> CompactApproxResult:
    """Approximate ``phi(a)`` by a finite-rank operator from a partition of unity.

    Cells of depth ``partition_depth`` meeting the support of ``a`` carry
    tent functions ``phi_c`` (1 on the cell ball, 0 outside its double);
    ``f_c = phi_c / max(sum phi, 1)`` and ``T = sum theta_{a sqrt(f_c), sqrt(f_c)}``.
    The residual is the largest ratio ``||(phi(a) - T) zeta||_2 / ||zeta||_2``
    over bump probes at branch points, one-sheet probes near them and random
    probes. Bump probes have sup norm 1, so ``||zeta||_2 <= sqrt(N)`` and the
    reported lower bound on ``||phi(a) - T||`` is certified for the sampled
    base points.
    """
    from .randfun import random_cograph_function

    system, grid = a.system, a.grid
    sample = CographSample(system, grid) if sample is None else sample
    n = system.n_maps
    if isinstance(osc, Region):
        osc = check_open_set_condition(system, osc)
    meets = False
    b_pts = branch.samples()
    if len(b_pts):
        meets = bool(np.any(np.abs(a.evaluate(b_pts)) > 1e-12))
    if osc is None or not osc.holds:
        return CompactApproxResult("unsupported", None, None, None, None, partition_depth, 0, meets)

    # sampled support of a
    if support_depth is None:
        support_depth = max(grid.depth, 1)
        while n ** (support_depth + 1) <= 8192:
            support_depth += 1
    fine = SampleGrid(system, support_depth)
    fine_vals = np.abs(a.evaluate(fine.points))
    supp = fine.points[fine_vals > 0]
    if len(supp) == 0:
        zero = FiniteRankOperator.zero(sample)
        return CompactApproxResult("approximant", zero, zero, 0.0, None, partition_depth, 0, meets)
    from scipy.spatial import cKDTree

    tree = cKDTree(supp)
    slack = fine.tol

    def keep(c, r):
        dist, _ = tree.query(c)
        return dist <= r + slack

    front = refine_cells(system, partition_depth, keep)
    centers, radii = front.centers, front.radii
    tol = sample.merge_tol

    def partition(ys):
        X, _ = sheet_points(system, ys, tol)
        k = X.shape[1]
        flat = X.reshape(n * k, -1)
        dist = np.linalg.norm(flat[None, :, :] - centers[:, None, :], axis=2)
        phi = np.clip(2 - dist / radii[:, None], 0.0, 1.0)
        f = phi / np.maximum(phi.sum(axis=0), 1.0)[None, :]
        return np.sqrt(f).reshape(len(centers), n, k), a.evaluate(flat).reshape(n, k)

    def xi(ys):
        root, av = partition(ys)
        return root * av[None]

    def eta(ys):
        return partition(ys)[0].astype(complex)

    T = FiniteRankOperator(sample, xi, eta, len(centers))

    def diff(zeta):
        return left_action(a, zeta) - T.apply(zeta)

    probes, extras = _branch_probes(system, branch, grid, sample)
    ys_eval = _union_points(grid, np.array(extras) if extras else None)
    report = []
    residual, lower = 0.0, 0.0
    for label, fn in probes:
        zeta = CographFunction.from_callable(sample, fn)
        h = diff(zeta).sheets(ys_eval)
        num = float(np.sqrt((np.abs(h) ** 2).sum(axis=0).max()))
        den = float(np.sqrt((np.abs(zeta.sheets(ys_eval)) ** 2).sum(axis=0).max()))
        bound = num / np.sqrt(n)
        lower = max(lower, bound)
        ratio = num / den if den > 0 else 0.0
        residual = max(residual, ratio)
        report.append({"probe": label, "ratio": ratio, "certified_bound": bound})
    rng = np.random.default_rng(seed)
    for k in range(n_random):
        zeta = random_cograph_function(sample, rng)
        h = diff(zeta).sheets(ys_eval)
        num = float(np.sqrt((np.abs(h) ** 2).sum(axis=0).max()))
        den = float(np.sqrt((np.abs(zeta.sheets(ys_eval)) ** 2).sum(axis=0).max()))
        residual = max(residual, num / den)
    report.append({"probe": f"random x{n_random}", "ratio": residual})
    if meets:
        return CompactApproxResult(
            "obstructed", None, T, residual, lower, partition_depth, len(centers), True, report
        )
    return CompactApproxResult(
        "approximant", T, T, residual, lower, partition_depth, len(centers), False, report
    )


def _branch_probes(system, branch, grid, sample, limit=4):
    """Bump probes at branch points ``(c, d)`` and one-sheet probes nearby."""
    probes, extras = [], []
    scale = system.hull_radius
    for bp in branch.points[:limit]:
        c, d = np.asarray(bp.x, float), np.asarray(bp.y, float)
        others = [
            np.linalg.norm(system.apply(j, d) - c)
            for j in range(1, system.n_maps + 1)
            if j not in bp.indices
        ]
        gap = min(others) if others else scale
        rho = min(0.25 * gap, 0.05 * scale)
        probes.append((f"bump at branch point {np.round(c, 6).tolist()}", _bump(np.concatenate([c, d]), rho)))
        extras.append(d)
        # one-sheet probe at a nearby grid point where the sheet is unbranched
        i0 = bp.indices[0]
        order = np.argsort(np.linalg.norm(grid.points - d, axis=1))
        for k in order[1:64]:
            yn = grid.points[k]
            xn = system.apply(i0, yn)
            dist = [np.linalg.norm(system.apply(j, yn) - xn) for j in range(1, system.n_maps + 1) if j != i0]
            sep = min(dist)
            if sep > sample.merge_tol * 1e3:
                rho_n = min(0.25 * sep, 0.05 * scale)
                probes.append((f"one-sheet probe near {np.round(c, 6).tolist()}",
                               _bump(np.concatenate([xn, yn]), rho_n)))
                extras.append(yn)
                break
    return probes, extras


def probe_lower_bound(result: CompactApproxResult) -> float | None:
    return result.lower_bound
