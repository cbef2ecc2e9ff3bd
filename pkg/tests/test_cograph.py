import numpy as np
import pytest

from selfsim.cograph import (
    FAILS,
    HOLDS,
    CographSample,
    branch_index,
    branch_scan,
    branch_solve,
    build_path_sample,
    check_graph_separation,
    check_open_set_condition,
    check_strong_separation,
    index_set,
    path_tuples,
    sheet_points,
)
from selfsim.exceptions import InvalidInputError, ResourceError
from selfsim.ifs import SampleGrid, apply_word
from selfsim.regions import Box, Polytope

from conftest import REGISTRY_NAMES, system, witness

S3 = np.sqrt(3)


def test_branch_solve_cantor_is_inconsistent():
    sol = branch_solve(system("cantor"), 1, 2)
    assert sol.kind == "empty"
    assert "inconsistent" in sol.reason


def test_branch_solve_tent_single_point():
    sol = branch_solve(system("tent"), 1, 2)
    assert sol.kind == "points"
    (bp,) = sol.points
    # y/2 = 1 - y/2 gives y = 1 and x = 1/2, exactly
    assert bp.y.tolist() == [1.0]
    assert bp.x.tolist() == [0.5]
    assert bp.index == 2


def test_branch_solve_is_symmetric():
    for name in ("tent", "gasket-modified", "koch-modified"):
        s = system(name)
        a, b = branch_solve(s, 1, 2), branch_solve(s, 2, 1)
        assert a.kind == b.kind
        assert [p.x.tolist() for p in a.points] == [p.x.tolist() for p in b.points]


def test_branch_solve_rejects_equal_symbols():
    with pytest.raises(InvalidInputError):
        branch_solve(system("tent"), 1, 1)


def test_branch_solve_carpet_modified_segment():
    # gamma_1(y) = y/3 and gamma_4(y) = (y1/3, 2/3 - y2/3) meet on y2 = 1
    sol = branch_solve(system("carpet-modified"), 1, 4)
    assert sol.segments
    xs = np.concatenate([seg.x_samples for seg in sol.segments])
    assert np.allclose(xs[:, 1], 1 / 3)
    assert xs[:, 0].min() == pytest.approx(0, abs=1e-4)
    assert xs[:, 0].max() == pytest.approx(1 / 3, abs=1e-4)


def test_branch_scan_examples(entries):
    tent = branch_scan(system("tent"))
    assert tent.cardinality == "finite(1)"
    gm = branch_scan(system("gasket-modified"))
    assert gm.cardinality == "finite(3)"
    got = sorted(tuple(np.round(p.x, 12)) for p in gm.points)
    want = sorted(tuple(np.round(p, 12)) for p in entries["gasket-modified"].expected["branch_points"])
    assert got == want
    assert branch_scan(system("gasket")).is_empty


def test_branch_index_examples():
    tent = system("tent")
    (group,) = branch_index(tent, [1.0])
    assert group[0].tolist() == [0.5] and group[1:] == (2, (1, 2))
    groups = branch_index(tent, [0.0])
    assert [(g[0].tolist(), g[1], g[2]) for g in groups] == [([0.0], 1, (1,)), ([1.0], 1, (2,))]
    assert [g[1] for g in branch_index(system("cantor"), [0.4])] == [1, 1]


@pytest.mark.parametrize("name", REGISTRY_NAMES)
def test_branch_indices_sum_to_n(name):
    s = system(name)
    for y in SampleGrid(s, 2).points:
        assert sum(g[1] for g in branch_index(s, y)) == s.n_maps


def test_index_set_examples():
    cantor = system("cantor")
    assert index_set(cantor, [0.5]).as_set() == set()
    # 0.25 = gamma_1(0.75) and 0.75 is in K (0.2 is not: 0.6 lies in a gap)
    assert index_set(cantor, [0.25]).as_set() == {1}
    assert index_set(cantor, [0.2]).as_set() == set()
    assert index_set(system("tent"), [0.5]).as_set() == {1, 2}


def test_graph_separation_examples():
    assert check_graph_separation(system("tent-modified")).status == HOLDS
    v = check_graph_separation(system("tent"))
    assert v.status == FAILS
    assert v.witness["x"].tolist() == [0.5] and v.witness["y"].tolist() == [1.0]
    assert check_graph_separation(system("carpet")).status == HOLDS


def test_strong_separation_examples():
    v = check_strong_separation(system("cantor"))
    assert v.status == HOLDS
    assert v.details["gap"] == pytest.approx(1 / 3)
    v = check_strong_separation(system("tent-modified"))
    assert v.status == FAILS
    assert v.witness["point"] == pytest.approx([0.5])
    v = check_strong_separation(system("gasket"))
    assert v.status == FAILS
    # the touching point lies in two different pieces
    s = system("gasket")
    assert len(index_set(s, v.witness["point"]).as_set()) >= 2


def test_open_set_condition_examples():
    tent = system("tent")
    assert check_open_set_condition(tent, Box([0], [1])).holds
    v = check_open_set_condition(tent, Box([0], [0.4]))
    assert v.fails and v.witness["check"] == "containment"
    tri = Polytope([[0, 0], [1, 0], [0.5, S3 / 2]])
    assert check_open_set_condition(system("gasket-modified"), tri).holds


def test_open_set_condition_rejects_non_region():
    with pytest.raises(InvalidInputError):
        check_open_set_condition(system("tent"), {"kind": "box"})


@pytest.mark.parametrize("name", REGISTRY_NAMES)
def test_separation_implications(name):
    s = system(name)
    report = branch_scan(s)
    graph = check_graph_separation(s, report=report)
    strong = check_strong_separation(s)
    assert graph.holds == report.is_empty
    if strong.holds:
        assert graph.holds
        assert check_open_set_condition(s, witness(name)).holds


def test_cograph_sample_merges_branch_sheets():
    tent = system("tent")
    grid = SampleGrid(tent, 3)
    sample = CographSample(tent, grid)
    k = int(np.argmin(np.abs(grid.points[:, 0] - 1.0)))
    assert sample.merge_classes(k) == [(1, 2)]
    X, labels = sheet_points(tent, [[1.0], [0.0]])
    # labels are indexed (sheet, point): both sheets merge at y = 1 only
    assert labels.tolist() == [[0, 0], [0, 1]]
    assert X[0, 0, 0] == X[1, 0, 0] == 0.5


def test_path_sample_counts_and_composition():
    tent = system("tent")
    grid = SampleGrid(tent, 2)
    assert build_path_sample(tent, 0, grid).n_keys == len(grid)
    assert build_path_sample(tent, 1, grid).n_keys == 8
    cantor = system("cantor")
    grid = SampleGrid(cantor, 1)
    ps = build_path_sample(cantor, 2, grid)
    assert ps.n_keys == 8
    for k, y in enumerate(grid.points):
        tup = ps.key((1, 2), k)
        assert tup[0] == pytest.approx(apply_word(cantor, (1, 2), y))
        assert tup[1] == pytest.approx(apply_word(cantor, (2,), y))
        assert tup[2] == pytest.approx(y)


def test_path_sample_cap():
    with pytest.raises(ResourceError):
        build_path_sample(system("carpet"), 4, SampleGrid(system("carpet"), 3), cap=10_000)


def test_path_tuples_subset_of_words():
    s = system("gasket")
    full = path_tuples(s, 2, [[0.2, 0.1]])
    part = path_tuples(s, 2, [[0.2, 0.1]], word_idx=np.array([4, 7]))
    assert np.array_equal(part, full[[4, 7]])
