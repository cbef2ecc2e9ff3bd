"""Endomorphisms beta_i, the transfer map E, invariant functions and the
constructive witnesses used for simplicity and pure infiniteness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bimodule import (
    CographFunction,
    PathFunction,
    PathOperator,
    PathSpace,
    SampledFunction,
    left_action,
    norm2,
    path_inner_product,
    path_left_action,
    path_right_action,
    right_action,
    tensor_to_path,
)
from .cograph import _word_map, check_open_set_condition, path_tuples
from .exceptions import InconsistencyError, InvalidInputError, ResourceError
from .ifs import (
    IfsSystem,
    SampleGrid,
    CellFront,
    _check_symbol,
    _extend,
    _spectral_norms,
    attractor_cells,
    refine_cells,
    word_maps,
)
from .regions import Region

INVARIANCE_TOL = 1e-9


def beta(system: IfsSystem, i: int, a: SampledFunction) -> SampledFunction:
    """``beta_i(a)(y) = a(gamma_i(y))``."""
    cmap = system.maps[_check_symbol(i, system.n_maps) - 1]
    return SampledFunction(a.grid, lambda y: a.evaluate(cmap(y)))


def transfer_op(system: IfsSystem, a: SampledFunction) -> SampledFunction:
    """``E(a)(y) = (1/N) sum_i a(gamma_i(y))``."""
    n = system.n_maps

    def fn(y):
        X = system.apply_all(y)
        return a.evaluate(X.reshape(-1, system.dimension)).reshape(n, len(y)).mean(axis=0)

    return SampledFunction(a.grid, fn)


def beta_power(system: IfsSystem, k: int, a: SampledFunction) -> SampledFunction:
    """``a(gamma_1^k(y))``; equals ``beta^k(a)`` for W_k-invariant ``a``."""
    cmap = system.maps[0]

    def fn(y):
        for _ in range(k):
            y = cmap(y)
        return a.evaluate(y)

    return SampledFunction(a.grid, fn)


@dataclass
class InvariantFunction:
    """A function certified ``(gamma_w)_{w in W_n}``-invariant on the grid."""

    function: SampledFunction
    depth: int
    tol: float
    violations: list[float]

    @property
    def certified(self) -> bool:
        return True

    @property
    def grid(self) -> SampleGrid:
        return self.function.grid

    def evaluate(self, pts):
        return self.function.evaluate(pts)

    def beta(self, k: int = 1) -> SampledFunction:
        if not 0 <= k <= self.depth:
            raise InvalidInputError(f"beta^{k} is only defined for k <= {self.depth}")
        return beta_power(self.function.system, k, self.function)


@dataclass
class InvariantFailure:
    """Worst violation found while certifying invariance."""

    level: int
    words: tuple[tuple[int, ...], tuple[int, ...]]
    point: np.ndarray
    violation: float
    violations: list[float]

    @property
    def certified(self) -> bool:
        return False


def certify_invariant(
    system: IfsSystem, a: SampledFunction, n: int, tol: float = INVARIANCE_TOL, points=None
):
    """Check ``a(gamma_w(y)) = a(gamma_v(y))`` for all words of each length ``<= n``.

    Returns an :class:`InvariantFunction` or the worst :class:`InvariantFailure`.
    The descent (W_k-invariance implies W_{k-1}-invariance) is
    asserted on success.
    """
    ys = a.grid.points if points is None else np.atleast_2d(points)
    violations = []
    worst = None
    for k in range(1, n + 1):
        mats, offs = word_maps(system, k)
        pts = np.einsum("wij,kj->wki", mats, ys) + offs[:, None, :]
        vals = a.evaluate(pts.reshape(-1, system.dimension)).reshape(len(mats), len(ys))
        dev = np.abs(vals - vals[:1])
        v = float(dev.max(initial=0.0))
        violations.append(v)
        if v > tol and worst is None:
            w, y = np.unravel_index(int(np.argmax(dev)), dev.shape)
            words = (_word_tuple(w, k, system.n_maps), (1,) * k)
            worst = InvariantFailure(k, words, ys[y], v, violations)
    if worst is not None:
        worst.violations = violations
        return worst
    if any(v > tol for v in violations):
        raise InconsistencyError("invariance descent violated")
    return InvariantFunction(a, n, tol, violations)


def _word_tuple(idx, k, n_maps):
    out = []
    idx = int(idx)
    for _ in range(k):
        out.append(idx % n_maps + 1)
        idx //= n_maps
    return tuple(reversed(out))


def commutation_check(system: IfsSystem, a: InvariantFunction, f) -> float:
    """``||phi(a) f - f beta^n(a)||_2`` for a cograph function or a list of ``n`` factors."""
    if not isinstance(a, InvariantFunction):
        raise InvalidInputError("commutation_check needs a certified InvariantFunction")
    if isinstance(f, CographFunction):
        if a.depth < 1:
            raise InvalidInputError("invariance depth must be at least 1")
        diff = left_action(a.function, f) - right_action(f, a.beta(1))
        return norm2(diff)
    factors = list(f)
    if len(factors) > a.depth:
        raise InvalidInputError("more factors than the certified invariance depth")
    p = tensor_to_path(factors)
    diff = path_left_action(a.function, p) - path_right_action(p, a.beta(len(factors)))
    return norm2(diff)


def shift_pullback(system: IfsSystem, b: SampledFunction, max_cells: int = 4096) -> SampledFunction:
    """``a(x) = b(gamma_i^{-1}(x))`` with ``i`` the first symbol such that ``x`` lies in ``gamma_i(K)``.

    For systems of inverse branches of a map ``h`` this is ``b o h``, which is
    invariant at depth 1.
    """
    depth = 0
    while system.n_maps ** (depth + 1) <= max_cells:
        depth += 1
    tree = attractor_cells(system, depth)
    tol = 1e-9 * max(1.0, system.hull_radius)

    def fn(x):
        x = np.atleast_2d(x)
        choice = np.full(len(x), -1)
        pre = np.stack([m.inverse(x) for m in system.maps])
        for i in range(system.n_maps):
            free = choice < 0
            if not free.any():
                break
            inside = tree.contains(pre[i][free], tol)
            idx = np.nonzero(free)[0][inside]
            choice[idx] = i
        choice[choice < 0] = 0
        return b.evaluate(pre[choice, np.arange(len(x))])

    return SampledFunction(b.grid, fn)


# -- amplification witnesses -------------------------------------------------


@dataclass
class AmplifyResult:
    n: int
    f: PathFunction
    word: tuple[int, ...]
    x0: np.ndarray
    half_widths: dict
    norm_a: float
    bounds: tuple[float, float]
    support_size: int
    attempts: int

    def to_dict(self):
        return {
            "n": self.n,
            "word": list(self.word),
            "x0": self.x0.tolist(),
            "half_widths": self.half_widths,
            "norm_a": self.norm_a,
            "bounds": list(self.bounds),
            "support_size": self.support_size,
            "attempts": self.attempts,
        }


def _fine_grid(system, base_depth, max_points=4096):
    m = base_depth
    while system.n_maps ** (m + 1) <= max_points:
        m += 1
    return SampleGrid(system, m)


def _box_ball_dist(c, x0, h):
    # euclidean distance from ball centers to the closed box of half-width h around x0
    excess = np.maximum(np.abs(c - x0) - h, 0.0)
    return np.linalg.norm(excess, axis=1)


def _search_word(system, x0, h, base_center, base_radius, max_depth):
    """Lexicographically first shortest word whose image ball fits in the box."""
    def keep(c, r):
        return _box_ball_dist(c, x0, h) <= r

    front = None
    for level in range(1, max_depth + 1):
        if front is None:
            front = refine_cells(system, 1, keep, base_center=base_center, base_radius=base_radius)
        else:
            front = _extend_front(system, front, keep, base_center, base_radius)
        if len(front) == 0:
            break
        inside = np.all(np.abs(front.centers - x0) + front.radii[:, None] <= h, axis=1)
        if inside.any():
            k = int(np.argmax(inside))
            return tuple(int(s) + 1 for s in front.words[k])
    deepest = float(front.radii.min()) if front is not None and len(front) else None
    raise ResourceError(
        f"no word of length <= {max_depth} maps into the target box "
        f"(half-width {h:.3g}; smallest cell radius {deepest})",
        required=max_depth + 1,
    )


def _extend_front(system, front, keep, base_center, base_radius):
    n = system.n_maps
    mats, offs = _extend(front.mats, front.offs, system)
    words = np.concatenate(
        [np.repeat(front.words, n, axis=0), np.tile(np.arange(n), len(front.words))[:, None]], axis=1
    )
    centers = np.einsum("kij,j->ki", mats, np.asarray(base_center, float)) + offs
    radii = _spectral_norms(mats) * base_radius
    mask = np.asarray(keep(centers, radii), dtype=bool)
    return CellFront(front.depth + 1, words[mask], mats[mask], offs[mask], centers[mask],
                     radii[mask], front.counts + [int(mask.sum())])


def _local_points(system, center, radius, depth, cap=2**16):
    """Grid-type points ``gamma_w(p)`` of depth-``depth`` cells within ``radius`` of ``center``."""
    front = refine_cells(
        system, depth, lambda c, r: np.linalg.norm(c - center, axis=1) <= radius + r, cap=cap
    )
    return np.einsum("wij,j->wi", front.mats, system.base_point()) + front.offs


def amplify(
    system: IfsSystem, a: SampledFunction, eps: float, max_depth: int = 40, max_attempts: int = 8
) -> AmplifyResult:
    """Find ``n`` and ``f`` in Y_n with ``(f|f) = 1`` and ``||a|| - eps <= (f|phi(a) f) <= ||a||``.

    ``||a||`` is the maximum of ``a`` over every point where it is evaluated:
    a fine grid, the base grid and the endpoints ``gamma_w(y)`` used by ``f``.

    Raises
    ------
    ResourceError
        If no word of length ``<= max_depth`` maps K into the target box.
    """
    grid = a.grid
    fine = _fine_grid(system, grid.depth)
    vals = a.evaluate(fine.points)
    if np.abs(vals.imag).max() > 1e-12 or vals.real.min() < -1e-12:
        raise InvalidInputError("amplify needs a positive function")
    vals = vals.real
    norm0 = float(vals.max())
    if not norm0 > 0:
        raise InvalidInputError("amplify needs a nonzero function")
    if not 0 < eps < norm0:
        raise InvalidInputError(f"need 0 < eps < ||a|| = {norm0:g}")
    x0 = fine.points[int(np.argmax(vals))]
    h0 = system.hull_radius
    n_bits = np.log2(system.n_maps)
    for attempt in range(1, max_attempts + 1):
        while True:
            near = np.all(np.abs(fine.points - x0) <= h0, axis=1)
            if np.all(vals[near] >= norm0 - eps / 2) or h0 < 1e-12:
                break
            h0 /= 2
        word = _search_word(system, x0, h0 / 3, system.hull_center, system.hull_radius, max_depth)
        n = len(word)
        if n * n_bits > 60:
            raise ResourceError("word index overflow", required=n)
        front = refine_cells(system, n, lambda c, r: _box_ball_dist(c, x0, h0) <= r)
        powers = system.n_maps ** np.arange(n - 1, -1, -1, dtype=np.int64)
        support = front.words @ powers
        mats, offs = front.mats, front.offs

        def g(x, x0=x0, h0=h0):
            return np.clip((h0 - np.abs(x - x0).max(axis=-1)) / (h0 / 3), 0.0, 1.0)

        def endpoints(ys, pos, mats=mats, offs=offs):
            return np.einsum("wij,kj->wki", mats[pos], ys) + offs[pos][:, None, :]

        def bfun(ys, mats=mats, offs=offs, g=g):
            pts = np.einsum("wij,kj->wki", mats, ys) + offs[:, None, :]
            return (g(pts) ** 2).sum(axis=0)

        def evaluator(ys, words, support=support, g=g, endpoints=endpoints, bfun=bfun):
            pos = np.searchsorted(support, words)
            return g(endpoints(ys, pos)) / np.sqrt(bfun(ys))[None, :]

        space = PathSpace(system, n, grid)
        f = PathFunction(space, evaluator, support)
        ends = endpoints(grid.points, np.arange(len(support)))
        a_ends = a.evaluate(ends.reshape(-1, system.dimension)).real
        norm_a = max(norm0, float(a.evaluate(grid.points).real.max()), float(a_ends.max()))
        c = path_inner_product(f, path_left_action(a, f)).values.real
        ff = path_inner_product(f, f).values.real
        ok = (
            np.abs(ff - 1).max() <= 1e-9
            and c.min() >= norm_a - eps
            and c.max() <= norm_a + 1e-9
        )
        if ok:
            return AmplifyResult(
                n, f, word, x0, {"U0": h0, "K1": 2 * h0 / 3, "U1": h0 / 3}, norm_a,
                (float(c.min()), float(c.max())), len(support), attempt,
            )
        if norm_a > norm0:
            x0 = ends.reshape(-1, system.dimension)[int(np.argmax(a_ends))]
            norm0 = norm_a
            vals = np.maximum(vals, 0)
        h0 /= 2
    raise InconsistencyError("amplify did not meet its bounds after refinement")


@dataclass
class NormalizedWitness:
    u: PathFunction
    c: SampledFunction
    c_min: float
    norm_u: float
    bound: float

    def to_dict(self):
        return {"c_min": self.c_min, "norm_u": self.norm_u, "bound": self.bound}


def normalize_witness(system: IfsSystem, a: SampledFunction, eps: float, amp: AmplifyResult) -> NormalizedWitness:
    """``u = f c^{-1/2}`` with ``c = (f|phi(a) f)``, so that ``(u|phi(a) u) = 1``."""
    f = amp.f
    c_raw = path_inner_product(f, path_left_action(a, f))
    c = c_raw.apply(np.real)
    c_min = float(c.values.real.min())
    if not c_min > 0 or c_min < amp.norm_a - eps - 1e-9:
        raise InconsistencyError(f"(f|a f) not bounded below on the grid (min {c_min:g})")
    inv_sqrt = c.apply(lambda v: 1 / np.sqrt(v.real))
    u = path_right_action(f, inv_sqrt)
    bound = (amp.norm_a - eps) ** -0.5
    return NormalizedWitness(u, c, c_min, norm2(u), bound)


# -- separating functions ----------------------------------------------------


@dataclass
class SeparatingResult:
    a: InvariantFunction
    f: PathFunction
    word: tuple[int, ...]
    y0: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    radius: float
    norm_T: float
    norm_phiTf_sq: float
    contracts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.contracts.values())

    def to_dict(self):
        return {
            "word": list(self.word),
            "y0": self.y0.tolist(),
            "y1": self.y1.tolist(),
            "y2": self.y2.tolist(),
            "radius": self.radius,
            "norm_T": self.norm_T,
            "norm_phiTf_sq": self.norm_phiTf_sq,
            "contracts": self.contracts,
        }


def separating_function(
    system: IfsSystem,
    T: PathOperator,
    eps: float,
    V: Region,
    max_depth: int = 40,
    max_attempts: int = 10,
) -> SeparatingResult:
    """Positive ``W_n``-invariant ``a`` with disjoint ``beta^p(a)`` and ``||phi(a) T f||^2 > ||T||^2 - eps``.

    Follows the construction: a unit vector ``f`` nearly attaining ``||T||``,
    a point ``y1`` of V where ``||T f||`` stays large, a word ``j_1 ... j_r``
    pushing V into a box around ``y1``, extended by ``2, 1, ..., 1``, and a
    tent bump ``b`` inside the resulting image, spread over all ``gamma_w``
    with ``|w| = n``.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    osc = check_open_set_condition(system, V)
    if not osc.holds:
        raise InvalidInputError(f"open set condition not verified for the witness ({osc.status})")
    n = T.depth
    if n < 1:
        raise InvalidInputError("operator depth must be at least 1")
    grid = T.space.grid
    ys = grid.points
    # ||T|| is estimated on a finer grid (a superset of the base grid); a
    # larger fiber norm met at y2 joins the candidates and restarts the search
    cand = _fine_grid(system, grid.depth, max_points=max(2048, len(ys))).points
    floor = 1e-9 * max(1.0, system.hull_radius)
    mats_n, offs_n = word_maps(system, n)
    inv_n = np.linalg.inv(mats_n)
    cV, rV = V.bounding_ball()
    contracts = {}
    for _ in range(max_attempts):
        res = _separate_once(system, T, eps, V, n, cand, floor, mats_n, offs_n, inv_n, cV, rV,
                             max_depth, max_attempts)
        if isinstance(res, SeparatingResult):
            return res
        contracts, y2 = res
        if y2 is None:
            break
        cand = np.concatenate([cand, y2[None]])
    raise InconsistencyError(f"separating function contracts failed: {contracts}")


def _separate_once(system, T, eps, V, n, cand, floor, mats_n, offs_n, inv_n, cV, rV,
                   max_depth, max_attempts):
    """One pass of the construction for the norm estimated on ``cand``.

    Returns a :class:`SeparatingResult`, or ``(contracts, y2)`` where ``y2`` is
    a point whose fiber norm exceeds the estimate (``None`` otherwise).
    """
    space = T.space
    grid = space.grid
    d = system.dimension
    fibers = T.fiber(cand)
    norms = T.fiber_norms(cand)
    norm_est = float(norms.max())
    k0 = int(np.argmax(norms))
    y0 = cand[k0]
    if norms[k0] > 0:
        v0 = np.linalg.svd(fibers[k0])[2][0].conj()
    else:
        v0 = np.zeros(space.n_words, dtype=complex)
        v0[0] = 1.0
    f = PathFunction(space, lambda yy, words: np.broadcast_to(v0[np.asarray(words)][:, None], (len(words), len(yy))).copy())

    def q(pts):
        return (np.abs(T.fiber(pts) @ v0) ** 2).sum(axis=1)

    ps = cand
    qv = q(ps)
    inner = V.inner_radius(ps)
    thr = norm_est**2 - eps
    good = (qv > thr) & (inner > floor)
    depth, radius = grid.depth, system.hull_radius
    while not good.any():
        # zoom into K around y0; points of K in V accumulate everywhere on K
        depth += 4
        radius *= system.max_ratio**4
        if depth > max_depth:
            raise ResourceError("no point of V near y0 keeps ||T f|| near ||T||", required=depth)
        local = _local_points(system, y0, 4 * radius, depth)
        ps = np.concatenate([ps, local])
        qv = np.concatenate([qv, q(local)])
        inner = np.concatenate([inner, V.inner_radius(local)])
        good = (qv > thr) & (inner > floor)
    strong = good & (qv > norm_est**2 - eps / 2)
    # deepest point of V among the admissible ones
    pick = strong if strong.any() else good
    k1 = int(np.argmax(np.where(pick, inner, -np.inf)))
    y1 = ps[k1]
    h = float(inner[k1]) / np.sqrt(d)
    ks = int(np.argmax(inner))
    y_star, rho_star = ps[ks], float(inner[ks])
    contracts = {}
    for attempt in range(max_attempts):
        box_ok = np.all(np.abs(ps - y1) <= h, axis=1)
        while np.any(qv[box_ok] <= thr) and h > floor:
            h /= 2
            box_ok = np.all(np.abs(ps - y1) <= h, axis=1)
        j0 = _search_word(system, y1, h, cV, rV, max_depth)
        word = j0 + (2,) + (1,) * (n - 1)
        mJ, tJ = _word_map(system, word)
        y2 = mJ @ y_star + tJ
        rho2 = np.linalg.svd(mJ, compute_uv=False).min() * rho_star * 0.5

        def bump(x, y2=y2, rho2=rho2):
            return np.clip(1 - np.linalg.norm(x - y2, axis=-1) / rho2, 0.0, 1.0)

        def a_fn(x, bump=bump):
            pre = np.einsum("wij,wkj->wki", inv_n, x[None, :, :] - offs_n[:, None, :])
            return bump(pre).sum(axis=0).astype(complex)

        a = SampledFunction(grid, a_fn)
        inv = certify_invariant(system, a, n)
        pts = np.concatenate([cand, y2[None]])
        norm_T = float(T.fiber_norms(pts).max())
        if norm_T > norm_est * (1 + 1e-12):
            return contracts, y2
        tf = np.einsum("kwv,v->kw", T.fiber(pts), v0)
        z0 = path_tuples(system, n, pts)[:, :, 0, :]
        a_vals = a.evaluate(z0.reshape(-1, d)).reshape(space.n_words, len(pts)).T
        phi_tf_sq = float((np.abs(a_vals * tf) ** 2).sum(axis=1).max())
        disjoint = True
        betas = [beta_power(system, p, a).values for p in range(1, n + 1)]
        for p in range(n):
            for qq in range(p + 1, n):
                if np.any(betas[p] * betas[qq] != 0):
                    disjoint = False
        contracts = {
            "invariant": bool(inv.certified),
            "disjoint_supports": disjoint,
            "norm": phi_tf_sq > norm_T**2 - eps,
        }
        if all(contracts.values()):
            return SeparatingResult(
                inv, f, word, y0, y1, y2, float(rho2), norm_T, phi_tf_sq, contracts
            )
        h /= 2
    return contracts, None
