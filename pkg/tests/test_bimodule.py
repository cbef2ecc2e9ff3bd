import numpy as np
import pytest

from selfsim.bimodule import (
    CographFunction,
    FiniteRankOperator,
    PathFunction,
    PathOperator,
    PathSpace,
    SampledFunction,
    compact_approx,
    cograph_pullback,
    inner_product,
    left_action,
    norm2,
    path_inner_product,
    rank_one_apply,
    right_action,
    sup_norm,
    tensor_inner_product,
    tensor_to_path,
    xi0,
)
from selfsim.cograph import CographSample, branch_scan, check_open_set_condition
from selfsim.exceptions import InvalidInputError, ResourceError
from selfsim.ifs import ContractionMap, IfsSystem, SampleGrid
from selfsim.randfun import random_cograph_function, random_function
from selfsim.regions import Box

from conftest import system, witness


def sample_of(name, depth=4):
    s = system(name)
    return CographSample(s, SampleGrid(s, depth))


def quarter_squares():
    maps = [ContractionMap(np.eye(2) * 0.5, off) for off in ([0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5])]
    return IfsSystem(maps, [0.5, 0.5], np.sqrt(0.5))


def test_inner_product_constants():
    smp = sample_of("gasket")
    one = CographFunction.constant(smp, 1.0)
    assert np.allclose(inner_product(one, one).values, 3)
    zero = CographFunction.constant(smp, 0.0)
    assert np.allclose(inner_product(zero, one).values, 0)


def test_inner_product_tent_coordinate():
    smp = sample_of("tent", 5)
    f = CographFunction.from_callable(smp, lambda x, y: x[:, 0])
    y = smp.grid.points[:, 0]
    want = (y / 2) ** 2 + (1 - y / 2) ** 2
    assert np.allclose(inner_product(f, f).values, want, atol=1e-14)


def test_inner_product_module_laws(rng):
    smp = sample_of("gasket-modified", 3)
    f = random_cograph_function(smp, rng)
    g = random_cograph_function(smp, rng)
    a = random_function(smp.grid, rng)
    lhs = inner_product(f, right_action(g, a)).values
    assert np.allclose(lhs, inner_product(f, g).values * a.values, atol=1e-12)
    lhs = inner_product(right_action(f, a), g).values
    assert np.allclose(lhs, np.conj(a.values) * inner_product(f, g).values, atol=1e-12)
    assert np.allclose(inner_product(g, f).values, np.conj(inner_product(f, g).values), atol=1e-12)


def test_left_action_examples():
    smp = sample_of("tent", 4)
    grid = smp.grid
    one = CographFunction.constant(smp, 1.0)
    f = left_action(SampledFunction(grid, lambda p: p[:, 0]), one)
    y = grid.points[:, 0]
    assert np.allclose(f.values, [y / 2, 1 - y / 2])
    g = random_cograph_function(smp, np.random.default_rng(0))
    assert np.allclose(left_action(SampledFunction.constant(grid, 1.0), g).values, g.values)


def test_left_and_right_actions_commute(rng):
    smp = sample_of("koch-modified", 2)
    f = random_cograph_function(smp, rng)
    a, b = random_function(smp.grid, rng), random_function(smp.grid, rng)
    one = left_action(a, right_action(f, b)).values
    two = right_action(left_action(a, f), b).values
    assert np.allclose(one, two, atol=1e-13)


def test_norm2_examples():
    smp = sample_of("carpet", 2)
    assert norm2(CographFunction.constant(smp, 1.0)) == pytest.approx(np.sqrt(8))
    assert norm2(CographFunction.constant(smp, 0.0)) == 0.0


def test_norm_equivalence(rng):
    smp = sample_of("gasket", 3)
    for _ in range(10):
        f = random_cograph_function(smp, rng)
        s, n2 = sup_norm(f), norm2(f)
        assert s <= n2 * (1 + 1e-14)
        assert n2 <= np.sqrt(3) * s * (1 + 1e-14)


def test_xi0_examples():
    smp = sample_of("cantor")
    xi = xi0(smp)
    assert np.allclose(inner_product(xi, xi).values, 1)
    sq = quarter_squares()
    smp4 = CographSample(sq, SampleGrid(sq, 2))
    assert np.allclose(xi0(smp4).values, 0.5)
    a = random_function(smp.grid, np.random.default_rng(4))
    # (xi0 | phi(a) xi0) is the mean of a over the N images
    ip = inner_product(xi, left_action(a, xi)).values
    ys = smp.grid.points
    mean = np.mean([a.evaluate(ys / 3), a.evaluate(ys / 3 + 2 / 3)], axis=0)
    assert np.allclose(ip, mean, atol=1e-14)


def test_rank_one_examples(rng):
    smp = sample_of("gasket-modified", 3)
    xi = xi0(smp)
    assert np.allclose(rank_one_apply(xi, xi, xi).values, xi.values)
    zeta = random_cograph_function(smp, rng)
    eta = random_cograph_function(smp, rng)
    # make zeta orthogonal to eta pointwise in y
    c = inner_product(eta, zeta).values / inner_product(eta, eta).values
    coef = SampledFunction(smp.grid, values=c)
    ortho = zeta - right_action(eta, coef)
    out = rank_one_apply(random_cograph_function(smp, rng), eta, ortho).values
    assert np.abs(out).max() < 1e-12


def test_finite_rank_adjoint(rng):
    smp = sample_of("tent", 4)
    pairs = [(random_cograph_function(smp, rng), random_cograph_function(smp, rng)) for _ in range(3)]
    T = FiniteRankOperator.from_pairs(pairs)
    f, g = random_cograph_function(smp, rng), random_cograph_function(smp, rng)
    lhs = inner_product(T.apply(f), g).values
    rhs = inner_product(f, T.adjoint().apply(g)).values
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert FiniteRankOperator.zero(smp).apply(f).values.max() == 0


def test_from_values_rejects_inconsistent_sheets():
    smp = sample_of("tent", 3)
    v = np.ones(smp.labels.shape)
    k = int(np.argmin(np.abs(smp.grid.points[:, 0] - 1.0)))
    v[1, k] = 2.0
    with pytest.raises(InvalidInputError):
        CographFunction.from_values(smp, v)
    with pytest.raises(InvalidInputError):
        CographFunction.from_values(smp, np.ones((3, len(smp.grid))))
    ok = CographFunction.from_values(smp, np.ones(smp.labels.shape))
    assert ok.branch_consistent()


def test_operations_stay_branch_consistent(rng):
    smp = sample_of("tent", 4)
    f = random_cograph_function(smp, rng)
    g = random_cograph_function(smp, rng)
    a = random_function(smp.grid, rng)
    for h in (f + g, f * g, left_action(a, f), right_action(f, a), rank_one_apply(f, g, f)):
        assert h.branch_consistent()


def test_tensor_to_path_constant_and_product(rng):
    smp = sample_of("gasket-modified", 2)
    one = CographFunction.constant(smp, 1.0)
    p = tensor_to_path([one, one])
    assert np.allclose(p.values, 1)
    assert np.allclose(path_inner_product(p, p).values, 9)
    f, g = random_cograph_function(smp, rng), random_cograph_function(smp, rng)
    pf = tensor_to_path([f, g])
    ip_path = path_inner_product(pf, pf).values
    ip_rec = tensor_inner_product([f, g], [f, g]).values
    assert np.allclose(ip_path, ip_rec, atol=1e-12)


def test_tensor_to_path_single_factor_matches_inner_product(rng):
    smp = sample_of("cantor", 3)
    f, g = random_cograph_function(smp, rng), random_cograph_function(smp, rng)
    lhs = path_inner_product(tensor_to_path([f]), tensor_to_path([g])).values
    assert np.allclose(lhs, inner_product(f, g).values, atol=1e-13)


def test_tensor_to_path_rejects_empty():
    with pytest.raises(InvalidInputError):
        tensor_to_path([])


def test_path_inner_product_disjoint_support():
    s = system("cantor")
    space = PathSpace(s, 2, SampleGrid(s, 2))
    first = PathFunction(space, lambda ys, w: np.where(np.asarray(w)[:, None] == 0, 1.0, 0.0) * np.ones(len(ys)))
    last = PathFunction(space, lambda ys, w: np.where(np.asarray(w)[:, None] == 3, 1.0, 0.0) * np.ones(len(ys)))
    assert np.allclose(path_inner_product(first, last).values, 0)
    assert np.allclose(path_inner_product(first, first).values, 1)


def test_cograph_pullback_constant_and_norm():
    s = system("cantor")
    space = PathSpace(s, 2, SampleGrid(s, 2))
    one = cograph_pullback(space, lambda x, y: np.ones(len(x)))
    assert np.allclose(path_inner_product(one, one).values, 4)
    fx = cograph_pullback(space, lambda x, y: x[:, 0] + 1j * y[:, 0])
    # sum over the four words of |gamma_w(y)|^2 + |y|^2
    y = space.grid.points[:, 0]
    ends = [y / 9, y / 9 + 2 / 9, y / 9 + 2 / 3, y / 9 + 8 / 9]
    want = sum(e**2 for e in ends) + 4 * y**2
    assert np.allclose(path_inner_product(fx, fx).values.real, want, atol=1e-14)


def test_cograph_pullback_rejects_ill_defined_values():
    tent = system("tent")
    space = PathSpace(tent, 1, SampleGrid(tent, 3))
    v = np.ones((2, len(space.grid)))
    k = int(np.argmin(np.abs(space.grid.points[:, 0] - 1.0)))
    v[0, k] = 5.0
    with pytest.raises(InvalidInputError):
        cograph_pullback(space, values=v)
    with pytest.raises(InvalidInputError):
        cograph_pullback(space)


def test_path_operators(rng):
    s = system("tent")
    space = PathSpace(s, 2, SampleGrid(s, 3))
    assert PathOperator.identity(space).norm() == pytest.approx(1)
    assert PathOperator.zero(space).norm() == 0
    a = SampledFunction(space.grid, lambda p: 2 * p[:, 0])
    assert PathOperator.multiplication(space, a).norm() == pytest.approx(2)
    with pytest.raises(ResourceError):
        PathOperator.identity(PathSpace(system("carpet"), 5, SampleGrid(system("carpet"), 1)))


def test_compact_approx_zero_function():
    tent = system("tent")
    smp = CographSample(tent, SampleGrid(tent, 4))
    res = compact_approx(SampledFunction.constant(smp.grid, 0.0), branch_scan(tent), 3,
                         osc=Box([0], [1]), sample=smp)
    assert res.status == "approximant"
    assert res.residual == 0.0


def test_compact_approx_tent_support_away_from_branch():
    tent = system("tent")
    smp = CographSample(tent, SampleGrid(tent, 8))
    osc = check_open_set_condition(tent, witness("tent"))

    def a_fn(p):
        x = p[:, 0]
        return np.clip(1 - np.abs(x - 0.75) / 0.15, 0, None)

    a = SampledFunction(smp.grid, a_fn)
    res = [compact_approx(a, branch_scan(tent), m, osc=osc, sample=smp, n_random=10) for m in (1, 2, 3)]
    assert all(r.status == "approximant" for r in res)
    assert res[0].residual > res[1].residual > res[2].residual
    assert res[0].residual > 0.1
    assert res[2].residual < 1e-10


def test_compact_approx_obstructed_at_branch_point():
    tent = system("tent")
    smp = CographSample(tent, SampleGrid(tent, 5))
    a = SampledFunction(smp.grid, lambda p: np.clip(1 - np.abs(p[:, 0] - 0.5) / 0.2, 0, None))
    res = compact_approx(a, branch_scan(tent), 6, osc=witness("tent"), sample=smp, n_random=5)
    assert res.status == "obstructed"
    assert res.meets_branch
    assert res.lower_bound >= 0.5


def test_compact_approx_without_osc_is_unsupported():
    tent = system("tent")
    smp = CographSample(tent, SampleGrid(tent, 3))
    res = compact_approx(SampledFunction.constant(smp.grid, 1.0), branch_scan(tent), 2, sample=smp)
    assert res.status == "unsupported"
