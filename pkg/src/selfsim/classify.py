"""Classification verdicts and the builtin registry of example systems."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.spatial import cKDTree

from .cograph import (
    DEFAULT_DEPTH,
    FAILS,
    HOLDS,
    UNDETERMINED,
    BranchReport,
    Verdict,
    branch_scan,
    check_graph_separation,
    check_open_set_condition,
    check_strong_separation,
)
from .ifs import IfsSystem
from .regions import Region, region_from_dict

REGISTRY_TOL = 1e-9
QUALITATIVE_TAG = "simple, purely infinite"


# -- verdicts ----------------------------------------------------------------


@dataclass
class CuntzAlgebra:
    n: int

    @property
    def label(self) -> str:
        return f"O_{self.n}"

    def to_dict(self):
        return {"kind": "CuntzAlgebra", "n": self.n, "label": self.label}


@dataclass
class NotGraphSeparated:
    """Obstruction report: the branch set and the ideal it cuts out."""

    cardinality: str
    n_branch_points: int | None
    quotient_dim: int | None
    points: list
    n_segments: int
    tags: list[str] = field(default_factory=list)

    @property
    def label(self) -> None:
        return None

    @property
    def ideal(self) -> str:
        return "I_X = {a in C(K) : a vanishes on B}"

    def to_dict(self):
        return {
            "kind": "NotGraphSeparated",
            "cardinality": self.cardinality,
            "n_branch_points": self.n_branch_points,
            "dim_A_mod_I_X": self.quotient_dim,
            "I_X": self.ideal,
            "branch_points": self.points,
            "n_segments": self.n_segments,
            "tags": self.tags,
        }


@dataclass
class Undetermined:
    reason: str

    @property
    def label(self) -> None:
        return None

    def to_dict(self):
        return {"kind": "Undetermined", "reason": self.reason}


@dataclass
class ClassificationReport:
    system_name: str
    n_maps: int
    depth: int
    tol: float
    strong: Verdict
    graph: Verdict
    osc: Verdict
    branch: BranchReport
    verdict: CuntzAlgebra | NotGraphSeparated | Undetermined
    finite_projective: bool
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "system": self.system_name,
            "n_maps": self.n_maps,
            "depth": self.depth,
            "tol": self.tol,
            "separation": {
                "strong": self.strong.to_dict(),
                "graph": self.graph.to_dict(),
                "osc": self.osc.to_dict(),
            },
            "branch": self.branch.to_dict(),
            "verdict": self.verdict.to_dict(),
            "finite_projective": self.finite_projective,
            "metadata": self.metadata,
        }


def resolution_tol(system: IfsSystem, depth: int) -> float:
    """Cell resolution ``tol_depth = 2 (max c')^depth * 2r`` (the grid tolerance)."""
    return 2 * system.max_ratio**depth * 2 * system.hull_radius


def finite_projectivity_flag(branch: BranchReport) -> bool:
    """True iff the branch set is empty, i.e. the left action is by compacts."""
    return branch.is_empty


def quotient_dimension(system: IfsSystem, points, seed: int = 0) -> int:
    """``dim C(B)`` for a finite set ``B``: rank of evaluation on random functions.

    Computed independently of the branch-point count, as the rank of the
    matrix ``[f_k(b_j)]`` for smooth random ``f_k``.
    """
    if len(points) == 0:
        return 0
    pts = np.asarray(points, dtype=float).reshape(len(points), -1)
    rng = np.random.default_rng(seed)
    scale = 1.0 / max(system.hull_radius, 1e-300)
    n_funcs = 2 * len(pts) + 4
    freq = rng.normal(size=(n_funcs, pts.shape[1])) * 5 * scale
    phase = rng.uniform(0, 2 * np.pi, n_funcs)
    mat = np.cos(pts @ freq.T + phase)
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > 1e-8 * sv[0]))


def classify(
    system: IfsSystem,
    depth: int = DEFAULT_DEPTH,
    tol: float | None = None,
    witness: Region | None = None,
    metadata: dict | None = None,
) -> ClassificationReport:
    """Separation checks plus branch scan, turned into a verdict.

    A Cuntz algebra is reported only when graph separation holds. Otherwise
    the report describes B and the ideal ``I_X``; the qualitative tag is added
    when the open set condition is verified for the supplied witness.
    """
    branch = branch_scan(system, depth, tol)
    graph = check_graph_separation(system, depth, report=branch)
    strong = check_strong_separation(system, depth)
    if witness is None:
        osc = Verdict(UNDETERMINED, depth=depth, details={"reason": "no witness supplied"})
    else:
        osc = check_open_set_condition(system, witness)
    if graph.status == HOLDS:
        verdict = CuntzAlgebra(system.n_maps)
    elif graph.status == FAILS:
        finite = branch.cardinality.startswith("finite")
        pts = [bp.x for bp in _distinct_points(branch)]
        verdict = NotGraphSeparated(
            branch.cardinality,
            branch.n_points if finite else None,
            quotient_dimension(system, pts) if finite else None,
            [np.asarray(p).tolist() for p in pts],
            len(branch.segments),
            [QUALITATIVE_TAG + " (open set condition verified)"] if osc.holds else [],
        )
    else:
        verdict = Undetermined("graph separation undetermined at this depth")
    return ClassificationReport(
        system.name, system.n_maps, depth, branch.tol, strong, graph, osc, branch,
        verdict, finite_projectivity_flag(branch), dict(metadata or {}),
    )


def _distinct_points(branch: BranchReport):
    out = []
    for bp in branch.points:
        if all(np.linalg.norm(bp.x - o.x) > 1e-9 for o in out):
            out.append(bp)
    return out


# -- registry ----------------------------------------------------------------


@dataclass
class ExampleRegistryEntry:
    name: str
    family: str
    system: IfsSystem
    witness: Region | None
    expected: dict
    metadata: dict
    notes: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return dict(self.raw)


@lru_cache(maxsize=1)
def _registry_data() -> dict:
    text = resources.files("selfsim").joinpath("data/registry.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_registry() -> list[ExampleRegistryEntry]:
    """All builtin example systems, in registry order."""
    out = []
    for raw in _registry_data()["entries"]:
        system = IfsSystem.from_dict(raw["system"])
        wit = raw.get("witness")
        out.append(
            ExampleRegistryEntry(
                raw["name"], raw["family"], system,
                region_from_dict(wit, system) if wit else None,
                raw["expected"], raw["metadata"], raw.get("notes", ""), raw,
            )
        )
    return out


def registry_names() -> list[str]:
    return [e["name"] for e in _registry_data()["entries"]]


def get_entry(name: str) -> ExampleRegistryEntry:
    for entry in load_registry():
        if entry.name == name:
            return entry
    raise KeyError(name)


def get_system(name: str) -> IfsSystem:
    return get_entry(name).system


def segment_samples(segments, spacing: float) -> np.ndarray:
    """Evenly spaced points on a union of segments ``[[a, b], ...]``."""
    parts = []
    for a, b in segments:
        a, b = np.asarray(a, float), np.asarray(b, float)
        k = max(2, int(np.ceil(np.linalg.norm(b - a) / spacing)) + 1)
        t = np.linspace(0.0, 1.0, k)[:, None]
        parts.append(a + t * (b - a))
    return np.concatenate(parts)


def match_segments(detected: np.ndarray, segments, tol: float, n_per_unit: int = 2000) -> dict:
    """Hausdorff-type comparison of detected samples with a segment union.

    ``hausdorff`` is the max distance from detected samples to the union
    (measured against a dense sampling of it, corrected by half the spacing);
    ``coverage`` is the fraction of union samples within ``tol`` of a detected
    sample.
    """
    spacing = 1.0 / n_per_unit
    ref = segment_samples(segments, spacing)
    if len(detected) == 0:
        return {"hausdorff": float("inf"), "coverage": 0.0, "n_reference": len(ref)}
    d_det, _ = cKDTree(ref).query(detected)
    exact = _segment_distance(detected, segments)
    d_ref, _ = cKDTree(detected).query(ref)
    return {
        "hausdorff": float(exact.max()),
        "max_sample_gap": float(d_det.max()),
        "coverage": float(np.mean(d_ref <= tol)),
        "n_reference": len(ref),
        "n_detected": len(detected),
    }


def _segment_distance(pts, segments):
    best = np.full(len(pts), np.inf)
    for a, b in segments:
        a, b = np.asarray(a, float), np.asarray(b, float)
        ab = b - a
        t = np.clip((pts - a) @ ab / (ab @ ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(pts - (a + t[:, None] * ab), axis=1))
    return best


@dataclass
class RegistryRow:
    name: str
    family: str
    passed: bool
    deltas: dict
    observed: dict
    metadata: dict
    seconds: float

    def to_dict(self):
        return {
            "name": self.name,
            "family": self.family,
            "passed": self.passed,
            "deltas": self.deltas,
            "observed": self.observed,
            "metadata": self.metadata,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class RegistryTable:
    depth: int
    tol: float
    rows: list[RegistryRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> RegistryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> list[RegistryRow]:
        return [r for r in self.rows if not r.passed]

    def to_dict(self):
        return {
            "depth": self.depth,
            "tol": self.tol,
            "passed": self.passed,
            "rows": [r.to_dict() for r in self.rows],
        }


def verify_entry(entry: ExampleRegistryEntry, depth: int = DEFAULT_DEPTH, tol: float = REGISTRY_TOL) -> RegistryRow:
    """Classify one registry system and compare with its expected data."""
    start = time.perf_counter()
    system = entry.system
    report = classify(system, depth, tol, entry.witness, entry.metadata)
    exp = entry.expected
    verdict = report.verdict
    observed = {
        "strong": report.strong.status,
        "graph": report.graph.status,
        "osc": report.osc.status,
        "cardinality": report.branch.cardinality,
        "algebra": verdict.label,
    }
    deltas = {}
    for key, value in observed.items():
        if exp.get(key) != value:
            deltas[key] = {"expected": exp.get(key), "observed": value}
    if "strong_witness" in exp:
        w = report.strong.witness or {}
        got = w.get("point")
        if got is None or np.linalg.norm(np.asarray(got) - exp["strong_witness"]) > tol:
            deltas["strong_witness"] = {"expected": exp["strong_witness"], "observed": got}
    if "branch_points" in exp:
        want = np.asarray(exp["branch_points"], float)
        got = np.asarray([bp.x for bp in _distinct_points(report.branch)], float)
        observed["branch_points"] = got.tolist()
        if got.shape != want.shape or not _same_point_sets(got, want, tol):
            deltas["branch_points"] = {"expected": want.tolist(), "observed": got.tolist()}
        if isinstance(verdict, NotGraphSeparated):
            observed["dim_A_mod_I_X"] = verdict.quotient_dim
            if verdict.quotient_dim != verdict.n_branch_points:
                deltas["dim_A_mod_I_X"] = {
                    "expected": verdict.n_branch_points, "observed": verdict.quotient_dim,
                }
    if "branch_segments" in exp:
        res = resolution_tol(system, depth)
        m = match_segments(report.branch.samples(), exp["branch_segments"], res)
        m["tol_depth"] = res
        observed["segments"] = m
        if not (m["hausdorff"] <= res and m["coverage"] >= 0.99):
            deltas["branch_segments"] = m
    if exp.get("osc") == HOLDS and isinstance(verdict, NotGraphSeparated):
        if not verdict.tags:
            deltas["tags"] = {"expected": QUALITATIVE_TAG, "observed": None}
    return RegistryRow(
        entry.name, entry.family, not deltas, deltas, observed, entry.metadata,
        time.perf_counter() - start,
    )


def _same_point_sets(a, b, tol):
    if len(a) == 0:
        return len(b) == 0
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return bool(np.all(d.min(axis=0) <= tol) and np.all(d.min(axis=1) <= tol))


def registry_verify(depth: int = DEFAULT_DEPTH, tol: float = REGISTRY_TOL, names=None) -> RegistryTable:
    """Per-entry pass/fail table against the registry's expected verdicts."""
    entries = load_registry()
    if names is not None:
        entries = [e for e in entries if e.name in set(names)]
    return RegistryTable(depth, tol, [verify_entry(e, depth, tol) for e in entries])
