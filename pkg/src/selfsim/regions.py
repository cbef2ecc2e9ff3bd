"""Open regions of R^d used as open-set witnesses.

Every region is open. Containment and disjointness tests return ``True`` or
``False`` when decided exactly and ``None`` when the available criteria are
inconclusive.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError
from .ifs import ContractionMap

_EPS = 1e-12


def _as_map(cmap) -> ContractionMap:
    if not isinstance(cmap, ContractionMap):
        raise InvalidInputError("expected a ContractionMap")
    return cmap


class Region:
    """Base class for open regions."""

    kind = "region"

    def contains(self, pts, margin=0.0) -> np.ndarray:
        """Points lying in the region at distance more than ``margin`` from its boundary."""
        raise NotImplementedError

    def inner_radius(self, pts) -> np.ndarray:
        """Radius of a ball around each point known to lie inside (0 if outside)."""
        raise NotImplementedError

    def bounding_ball(self) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def image(self, cmap: ContractionMap) -> "Region":
        raise NotImplementedError

    def sample(self, rng, k: int) -> np.ndarray:
        raise NotImplementedError

    def parts(self) -> list["Region"]:
        return [self]

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def dimension(self) -> int:
        return len(self.bounding_ball()[0])


class Ball(Region):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.array(center, dtype=float, ndmin=1)
        self.radius = float(radius)
        if not self.radius > 0:
            raise InvalidInputError("ball radius must be positive")

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius:g})"

    def contains(self, pts, margin=0.0):
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - self.center, axis=1) < self.radius - margin

    def inner_radius(self, pts):
        pts = np.atleast_2d(pts)
        return np.maximum(self.radius - np.linalg.norm(pts - self.center, axis=1), 0.0)

    def bounding_ball(self):
        return self.center, self.radius

    def image(self, cmap):
        cmap = _as_map(cmap)
        s = np.linalg.svd(cmap.matrix, compute_uv=False)
        if s.max() - s.min() <= _EPS * s.max():
            return Ball(cmap(self.center), s.max() * self.radius)
        return AffineImage(self, cmap)

    def sample(self, rng, k):
        d = len(self.center)
        v = rng.normal(size=(k, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = self.radius * rng.random(k) ** (1 / d) * 0.999
        return self.center + v * r[:, None]

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


class Polytope(Region):
    """Interior of the convex hull of finitely many vertices."""

    kind = "polytope"

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or len(v) < v.shape[1] + 1:
            raise InvalidInputError("polytope needs at least d + 1 vertices")
        self.vertices = v
        self.normals, self.levels = _halfspaces(v)

    def __repr__(self):
        return f"Polytope({self.vertices.tolist()})"

    def _slack(self, pts):
        # positive inside, distance to each facet plane
        return self.levels[None, :] - np.atleast_2d(pts) @ self.normals.T

    def contains(self, pts, margin=0.0):
        return np.all(self._slack(pts) > margin, axis=1)

    def inner_radius(self, pts):
        return np.maximum(self._slack(pts).min(axis=1), 0.0)

    def bounding_ball(self):
        c = self.vertices.mean(axis=0)
        return c, float(np.linalg.norm(self.vertices - c, axis=1).max())

    def image(self, cmap):
        return Polytope(_as_map(cmap)(self.vertices))

    def sample(self, rng, k):
        w = rng.dirichlet(np.ones(len(self.vertices)), size=k)
        return w @ self.vertices

    def to_dict(self):
        return {"kind": "polytope", "vertices": self.vertices.tolist()}


class Box(Polytope):
    """Open axis-aligned box ``prod (lower_k, upper_k)``."""

    kind = "box"

    def __init__(self, lower, upper):
        self.lower = np.array(lower, dtype=float, ndmin=1)
        self.upper = np.array(upper, dtype=float, ndmin=1)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise InvalidInputError("box needs lower < upper in every coordinate")
        d = len(self.lower)
        corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
        self.vertices = self.lower + corners * (self.upper - self.lower)
        eye = np.eye(d)
        self.normals = np.concatenate([eye, -eye])
        self.levels = np.concatenate([self.upper, -self.lower])

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"

    def bounding_ball(self):
        c = (self.lower + self.upper) / 2
        return c, float(np.linalg.norm(self.upper - c))

    def image(self, cmap):
        cmap = _as_map(cmap)
        m = cmap.matrix
        # signed permutation times diagonal keeps boxes as boxes
        if np.all(np.count_nonzero(m, axis=1) == 1) and np.all(np.count_nonzero(m, axis=0) == 1):
            pts = cmap(self.vertices)
            return Box(pts.min(axis=0), pts.max(axis=0))
        return Polytope(cmap(self.vertices))

    def sample(self, rng, k):
        u = rng.random((k, len(self.lower))) * 0.998 + 0.001
        return self.lower + u * (self.upper - self.lower)

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Union(Region):
    kind = "union"

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise InvalidInputError("union needs at least one part")
        flat = []
        for p in parts:
            flat.extend(p.parts())
        self._parts = flat

    def __repr__(self):
        return f"Union({self._parts!r})"

    def parts(self):
        return list(self._parts)

    def contains(self, pts, margin=0.0):
        return np.any([p.contains(pts, margin) for p in self._parts], axis=0)

    def inner_radius(self, pts):
        return np.max([p.inner_radius(pts) for p in self._parts], axis=0)

    def bounding_ball(self):
        balls = [p.bounding_ball() for p in self._parts]
        c = np.mean([b[0] for b in balls], axis=0)
        return c, max(float(np.linalg.norm(b[0] - c)) + b[1] for b in balls)

    def image(self, cmap):
        return Union([p.image(cmap) for p in self._parts])

    def sample(self, rng, k):
        which = rng.integers(0, len(self._parts), size=k)
        out = np.empty((k, self.dimension))
        for j, p in enumerate(self._parts):
            sel = which == j
            if sel.any():
                out[sel] = p.sample(rng, int(sel.sum()))
        return out

    def to_dict(self):
        return {"kind": "union", "parts": [p.to_dict() for p in self._parts]}


class AffineImage(Region):
    """Image of a region under an affine map with no closed-form shape."""

    kind = "image"

    def __init__(self, base: Region, cmap: ContractionMap):
        self.base = base
        self.cmap = cmap

    def contains(self, pts, margin=0.0):
        s_min = np.linalg.svd(self.cmap.matrix, compute_uv=False).min()
        return self.base.contains(self.cmap.inverse(np.atleast_2d(pts)), margin / s_min)

    def inner_radius(self, pts):
        s_min = np.linalg.svd(self.cmap.matrix, compute_uv=False).min()
        return self.base.inner_radius(self.cmap.inverse(np.atleast_2d(pts))) * s_min

    def bounding_ball(self):
        c, r = self.base.bounding_ball()
        s = np.linalg.svd(self.cmap.matrix, compute_uv=False).max()
        return self.cmap(c), s * r

    def image(self, cmap):
        m = ContractionMap(cmap.matrix @ self.cmap.matrix, cmap(self.cmap.offset))
        return AffineImage(self.base, m)

    def sample(self, rng, k):
        return self.cmap(self.base.sample(rng, k))

    def to_dict(self):
        raise InvalidInputError("affine images are not serializable witnesses")


def hull_interior(system) -> Ball:
    return Ball(system.hull_center, system.hull_radius)


def region_from_dict(data: dict, system=None) -> Region:
    try:
        kind = data["kind"]
        if kind == "box":
            return Box(data["lower"], data["upper"])
        if kind == "ball":
            return Ball(data["center"], data["radius"])
        if kind == "polytope":
            return Polytope(data["vertices"])
        if kind == "union":
            return Union([region_from_dict(p, system) for p in data["parts"]])
        if kind == "hull":
            if system is None:
                raise InvalidInputError("hull region needs a system")
            return hull_interior(system)
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed region: {exc!r}") from exc
    raise InvalidInputError(f"unsupported region kind {data.get('kind')!r}")


def _halfspaces(vertices):
    d = vertices.shape[1]
    if d == 1:
        lo, hi = vertices.min(), vertices.max()
        if hi - lo <= _EPS:
            raise InvalidInputError("degenerate interval")
        return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(vertices)
    except QhullError as exc:
        raise InvalidInputError(f"degenerate polytope: {exc}") from exc
    eq = hull.equations
    normals, levels = eq[:, :-1], -eq[:, -1]
    # drop duplicate facets from triangulated faces
    key = np.round(np.concatenate([normals, levels[:, None]], axis=1), 12)
    _, keep = np.unique(key, axis=0, return_index=True)
    keep.sort()
    return normals[keep], levels[keep]


# -- exact relations ---------------------------------------------------------


def is_subset(inner: Region, outer: Region):
    """Decide ``inner ⊂ outer``; ``None`` when inconclusive."""
    parts = inner.parts()
    if len(parts) > 1:
        answers = [is_subset(p, outer) for p in parts]
        if all(a is True for a in answers):
            return True
        if any(a is False for a in answers):
            return False
        return None
    if isinstance(outer, Union):
        answers = [is_subset(inner, p) for p in outer.parts()]
        if any(a is True for a in answers):
            return True
        return None
    return _convex_subset(inner, outer)


def _convex_subset(a: Region, b: Region):
    tol = _EPS * max(1.0, a.bounding_ball()[1])
    if isinstance(a, Polytope):
        if isinstance(b, Polytope):
            return bool(np.all(b._slack(a.vertices) >= -tol))
        if isinstance(b, Ball):
            return bool(np.all(np.linalg.norm(a.vertices - b.center, axis=1) <= b.radius + tol))
    if isinstance(a, Ball):
        if isinstance(b, Ball):
            return bool(np.linalg.norm(a.center - b.center) + a.radius <= b.radius + tol)
        if isinstance(b, Polytope):
            return bool(np.all(b._slack(a.center[None])[0] >= a.radius - tol))
    # fall back on bounding balls, which only certify the positive answer
    c, r = a.bounding_ball()
    if isinstance(b, (Ball, Polytope)) and _convex_subset(Ball(c, r), b):
        return True
    return None


def are_disjoint(a: Region, b: Region):
    """Decide whether two open regions are disjoint; ``None`` when inconclusive."""
    answers = [_convex_disjoint(p, q) for p in a.parts() for q in b.parts()]
    if any(x is False for x in answers):
        return False
    if all(x is True for x in answers):
        return True
    return None


def _convex_disjoint(a: Region, b: Region):
    ca, ra = a.bounding_ball()
    cb, rb = b.bounding_ball()
    scale = max(1.0, ra, rb)
    if np.linalg.norm(ca - cb) >= ra + rb:
        return True
    if isinstance(a, Polytope) and isinstance(b, Polytope):
        return _polytopes_disjoint(a, b, scale)
    if isinstance(a, Ball) and isinstance(b, Ball):
        return bool(np.linalg.norm(a.center - b.center) >= a.radius + b.radius - _EPS * scale)
    if isinstance(b, Ball) and isinstance(a, Polytope):
        a, b = b, a
    if isinstance(a, Ball) and isinstance(b, Polytope):
        slack = b._slack(a.center[None])[0]
        if np.any(slack <= -a.radius + _EPS * scale):
            return True
        if np.all(slack > 0):
            return False
    return None


def _polytopes_disjoint(a: Polytope, b: Polytope, scale):
    from scipy.optimize import linprog

    # maximize s subject to n.x + s <= level for all facets of both polytopes
    normals = np.concatenate([a.normals, b.normals])
    levels = np.concatenate([a.levels, b.levels])
    norms = np.linalg.norm(normals, axis=1)
    A = np.concatenate([normals / norms[:, None], np.ones((len(normals), 1))], axis=1)
    ub = levels / norms
    d = normals.shape[1]
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    bounds = [(None, None)] * d + [(None, scale)]
    res = linprog(cost, A_ub=A, b_ub=ub, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return bool(-res.fun <= 1e-10 * scale)
