"""Property suites run by ``selfsim verify``.

Each suite returns a JSON-ready dict with one record per check and an overall
``passed`` flag. The suites are small instances of the properties exercised
by the test-suite, seeded for reproducibility.
"""

from __future__ import annotations

import numpy as np

from .bimodule import (
    FiniteRankOperator,
    PathOperator,
    PathSpace,
    SampledFunction,
    inner_product,
    left_action,
    norm2,
    path_inner_product,
    path_left_action,
    sup_norm,
    tensor_inner_product,
    tensor_to_path,
    xi0,
)
from .classify import load_registry, registry_verify
from .cograph import DEFAULT_DEPTH, CographSample
from .ifs import SampleGrid, default_grid_depth
from .randfun import random_cograph_function, random_function, random_positive_function
from .transfer import (
    amplify,
    certify_invariant,
    commutation_check,
    normalize_witness,
    separating_function,
    shift_pullback,
    transfer_op,
)

SUITES = ("bimodule", "transfer", "registry")


def _check(name, value, bound, passed=None, **extra):
    ok = bool(value <= bound) if passed is None else bool(passed)
    rec = {"name": name, "passed": ok, "value": float(value), "bound": float(bound)}
    rec.update(extra)
    return rec


def _grid(system, max_points):
    return SampleGrid(system, default_grid_depth(system, max_points))


def bimodule_suite(seed: int = 0, n_random: int = 20) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for entry in load_registry():
        system = entry.system
        grid = _grid(system, 128)
        sample = CographSample(system, grid)
        # norm equivalence
        worst = 0.0
        for _ in range(n_random):
            f = random_cograph_function(sample, rng)
            s, n2 = sup_norm(f), norm2(f)
            viol = max(s - n2, n2 - np.sqrt(system.n_maps) * s)
            worst = max(worst, viol / max(s, 1e-300))
        out.append(_check(f"{entry.name}: sup <= norm2 <= sqrt(N) sup", worst, 1e-14))
        # adjoint identity for finite-rank operators
        xi, eta, z1, z2 = (random_cograph_function(sample, rng) for _ in range(4))
        op = FiniteRankOperator.from_pairs([(xi, eta)])
        lhs = inner_product(z1, op(z2)).values
        rhs = inner_product(op.adjoint()(z1), z2).values
        out.append(_check(f"{entry.name}: (z|Tw) = (T*z|w)", np.abs(lhs - rhs).max(), 1e-10))
        # left action is a *-representation
        a = random_function(grid, rng)
        lhs = inner_product(left_action(a, z1), z2).values
        rhs = inner_product(z1, left_action(a.conj(), z2)).values
        out.append(_check(f"{entry.name}: (az|w) = (z|a*w)", np.abs(lhs - rhs).max(), 1e-10))
        # tensor product isometry
        small = SampleGrid(system, max(1, int(np.log(64) / np.log(system.n_maps))))
        ssample = CographSample(system, small)
        worst = 0.0
        for n in (1, 2, 3):
            fs = [random_cograph_function(ssample, rng) for _ in range(n)]
            gs = [random_cograph_function(ssample, rng) for _ in range(n)]
            path = path_inner_product(tensor_to_path(fs), tensor_to_path(gs)).values
            worst = max(worst, np.abs(path - tensor_inner_product(fs, gs).values).max())
        out.append(_check(f"{entry.name}: tensor isometry n<=3", worst, 1e-10))
    return out


def transfer_suite(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for entry in load_registry():
        system = entry.system
        grid = _grid(system, 256)
        sample = CographSample(system, grid)
        one = SampledFunction.constant(grid, 1.0)
        out.append(_check(f"{entry.name}: E(1) = 1", np.abs(transfer_op(system, one).values - 1).max(), 1e-14))
        worst = 0.0
        x0 = xi0(sample)
        for _ in range(10):
            a = random_function(grid, rng)
            lhs = transfer_op(system, a).values
            rhs = inner_product(x0, left_action(a, x0)).values
            worst = max(worst, np.abs(lhs - rhs).max())
        out.append(_check(f"{entry.name}: E(a) = (xi0|a xi0)", worst, 1e-12))
        a = random_positive_function(grid, rng)
        eps = 0.1
        amp = amplify(system, a, eps)
        ff = path_inner_product(amp.f, amp.f).values.real
        c = path_inner_product(amp.f, path_left_action(a, amp.f)).values.real
        ok = c.min() >= amp.norm_a - eps and c.max() <= amp.norm_a + 1e-9
        out.append(_check(f"{entry.name}: amplify (f|f) = 1", np.abs(ff - 1).max(), 1e-9))
        out.append(_check(f"{entry.name}: amplify bounds", c.max() - c.min(), eps, passed=ok, n=amp.n))
        nw = normalize_witness(system, a, eps, amp)
        uu = path_inner_product(nw.u, path_left_action(a, nw.u)).values.real
        out.append(_check(f"{entry.name}: (u|a u) = 1", np.abs(uu - 1).max(), 1e-9))
        out.append(_check(f"{entry.name}: ||u|| bound", nw.norm_u, nw.bound + 1e-9))
    for name in ("tent", "cantor", "gasket-modified"):
        entry = next(e for e in load_registry() if e.name == name)
        system = entry.system
        grid = SampleGrid(system, default_grid_depth(system, 32))
        for n in (1, 2, 3):
            T = PathOperator.multiplication(PathSpace(system, n, grid), random_function(grid, rng))
            res = separating_function(system, T, 0.1, entry.witness)
            out.append(_check(f"{name}: separating function n={n}", 0, 0, passed=res.ok,
                              contracts=res.contracts, word=list(res.word)))
    tent = next(e for e in load_registry() if e.name == "tent").system
    grid = SampleGrid(tent, 8)
    b = random_function(grid, rng)
    inv = certify_invariant(tent, shift_pullback(tent, b), 1)
    if inv.certified:
        f = random_cograph_function(CographSample(tent, grid), rng)
        out.append(_check("tent: commutation of pullback", commutation_check(tent, inv, f), grid.tol))
    else:
        out.append(_check("tent: pullback invariance", inv.violation, 1e-9))
    return out


def registry_suite(depth: int = DEFAULT_DEPTH, tol: float = 1e-9) -> list[dict]:
    table = registry_verify(depth, tol)
    return [
        {"name": r.name, "passed": r.passed, "deltas": r.deltas, "observed": r.observed}
        for r in table.rows
    ]


def run_suite(suite: str, seed: int = 0, depth: int = DEFAULT_DEPTH, tol: float = 1e-9) -> dict:
    """Run one property suite; the output is deterministic given the arguments."""
    if suite == "bimodule":
        checks = bimodule_suite(seed)
    elif suite == "transfer":
        checks = transfer_suite(seed)
    elif suite == "registry":
        checks = registry_suite(depth, tol)
    else:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    return {
        "suite": suite,
        "seed": seed,
        "depth": depth,
        "tol": tol,
        "passed": all(c["passed"] for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c["passed"] for c in checks),
        "checks": checks,
    }
