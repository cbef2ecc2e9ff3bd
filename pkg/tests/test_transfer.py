import numpy as np
import pytest

from selfsim.bimodule import (
    CographFunction,
    PathOperator,
    PathSpace,
    SampledFunction,
    path_inner_product,
    path_left_action,
)
from selfsim.cograph import CographSample
from selfsim.exceptions import InvalidInputError, ResourceError
from selfsim.ifs import SampleGrid
from selfsim.randfun import random_cograph_function, random_positive_function
from selfsim.regions import Box
from selfsim.transfer import (
    InvariantFunction,
    amplify,
    beta,
    beta_power,
    certify_invariant,
    commutation_check,
    normalize_witness,
    separating_function,
    shift_pullback,
    transfer_op,
)

from conftest import system, witness


def tent_map(x):
    return 1 - np.abs(1 - 2 * x)


def test_beta_examples():
    tent = system("tent")
    grid = SampleGrid(tent, 4)
    a = SampledFunction(grid, lambda p: p[:, 0])
    y = grid.points[:, 0]
    assert np.allclose(beta(tent, 1, a).values, y / 2)
    assert np.allclose(beta(tent, 2, a).values, 1 - y / 2)
    with pytest.raises(InvalidInputError):
        beta(tent, 3, a)


def test_transfer_op_examples():
    tent = system("tent")
    grid = SampleGrid(tent, 4)
    assert np.allclose(transfer_op(tent, SampledFunction.constant(grid, 1.0)).values, 1)
    # (y/2 + 1 - y/2) / 2
    assert np.allclose(transfer_op(tent, SampledFunction(grid, lambda p: p[:, 0])).values, 0.5)


def test_transfer_op_is_mean_of_betas(rng):
    s = system("gasket-modified")
    grid = SampleGrid(s, 3)
    a = random_positive_function(grid, rng)
    mean = np.mean([beta(s, i, a).values for i in (1, 2, 3)], axis=0)
    assert np.allclose(transfer_op(s, a).values, mean, atol=1e-15)


def test_certify_invariant_failure_tent_coordinate():
    tent = system("tent")
    a = SampledFunction(SampleGrid(tent, 4), lambda p: p[:, 0])
    res = certify_invariant(tent, a, 1)
    assert not res.certified
    assert res.level == 1
    assert res.words == ((2,), (1,))
    assert res.point.tolist() == [0.0]
    assert res.violation == pytest.approx(1.0)


def test_certify_invariant_tent_pullbacks():
    tent = system("tent")
    grid = SampleGrid(tent, 5)
    for n in (1, 2, 3):

        def fn(p, n=n):
            x = p[:, 0]
            for _ in range(n):
                x = tent_map(x)
            return np.cos(3 * x)

        a = SampledFunction(grid, fn)
        res = certify_invariant(tent, a, n)
        assert res.certified and res.depth == n
        assert max(res.violations) <= 1e-12
        assert not certify_invariant(tent, a, n + 1).certified


def test_beta_power_matches_iterated_beta():
    tent = system("tent")
    grid = SampleGrid(tent, 4)
    a = SampledFunction(grid, lambda p: np.sin(5 * p[:, 0]))
    two = beta(tent, 1, beta(tent, 1, a))
    assert np.allclose(beta_power(tent, 2, a).values, two.values)


def test_invariant_beta_depth_guard():
    tent = system("tent")
    inv = certify_invariant(tent, SampledFunction.constant(SampleGrid(tent, 3), 2.0), 2)
    assert np.allclose(inv.beta(2).values, 2)
    with pytest.raises(InvalidInputError):
        inv.beta(3)


def test_shift_pullback_is_tent_composition():
    tent = system("tent")
    grid = SampleGrid(tent, 5)
    b = SampledFunction(grid, lambda p: p[:, 0] ** 2)
    a = shift_pullback(tent, b)
    x = np.linspace(0, 1, 33)[:, None]
    assert np.allclose(a.evaluate(x), tent_map(x[:, 0]) ** 2, atol=1e-14)
    assert certify_invariant(tent, a, 1).certified


def test_commutation_examples(rng):
    s = system("gasket-modified")
    grid = SampleGrid(s, 3)
    smp = CographSample(s, grid)
    f = random_cograph_function(smp, rng)
    const = certify_invariant(s, SampledFunction.constant(grid, 3.0), 2)
    assert commutation_check(s, const, f) == pytest.approx(0, abs=1e-14)
    a = certify_invariant(s, shift_pullback(s, random_positive_function(grid, rng)), 1)
    assert a.certified
    assert commutation_check(s, a, f) <= 1e-9
    with pytest.raises(InvalidInputError):
        commutation_check(s, a, [f, f])


def test_commutation_detects_non_invariance():
    tent = system("tent")
    grid = SampleGrid(tent, 4)
    a = SampledFunction(grid, lambda p: p[:, 0])
    fake = InvariantFunction(a, 1, 1e-9, [1.0])
    one = CographFunction.constant(CographSample(tent, grid), 1.0)
    assert commutation_check(tent, fake, one) > 0.1
    with pytest.raises(InvalidInputError):
        commutation_check(tent, a, one)


def test_amplify_constant():
    s = system("gasket")
    a = SampledFunction.constant(SampleGrid(s, 3), 2.0)
    res = amplify(s, a, 0.1)
    assert res.norm_a == pytest.approx(2.0)
    assert 1.9 <= res.bounds[0] <= res.bounds[1] <= 2.0 + 1e-9


def test_amplify_tent_coordinate():
    tent = system("tent")
    a = SampledFunction(SampleGrid(tent, 5), lambda p: p[:, 0])
    res = amplify(tent, a, 0.1)
    assert res.norm_a == pytest.approx(1.0)
    lo, hi = res.bounds
    assert 0.9 <= lo <= hi <= 1.0 + 1e-9
    f = res.f
    assert np.allclose(path_inner_product(f, f).values, 1, atol=1e-12)
    c = path_inner_product(f, path_left_action(a, f)).values.real
    assert np.all(c >= 0.9) and np.all(c <= 1 + 1e-9)


def test_amplify_cantor_bump_near_zero():
    cantor = system("cantor")
    a = SampledFunction(SampleGrid(cantor, 4), lambda p: np.clip(1 - np.abs(p[:, 0]) / 0.1, 0, None))
    res = amplify(cantor, a, 0.2)
    assert res.x0.tolist() == [0.0]
    assert set(res.word) == {1}
    assert res.bounds[0] >= res.norm_a - 0.2


def test_amplify_rejects_bad_input():
    tent = system("tent")
    grid = SampleGrid(tent, 3)
    with pytest.raises(InvalidInputError):
        amplify(tent, SampledFunction(grid, lambda p: p[:, 0] - 0.5), 0.1)
    with pytest.raises(InvalidInputError):
        amplify(tent, SampledFunction.constant(grid, 1.0), 2.0)


def test_amplify_resource_limit():
    cantor = system("cantor")
    a = SampledFunction(SampleGrid(cantor, 4), lambda p: np.clip(1 - np.abs(p[:, 0]) / 1e-6, 0, None))
    with pytest.raises(ResourceError):
        amplify(cantor, a, 0.01, max_depth=3)


def test_normalize_witness_bound(rng):
    tent = system("tent")
    grid = SampleGrid(tent, 4)
    for eps in (0.05, 0.1, 0.2):
        a = random_positive_function(grid, rng)
        amp = amplify(tent, a, eps)
        w = normalize_witness(tent, a, eps, amp)
        assert w.c_min >= amp.norm_a - eps - 1e-12
        assert w.norm_u <= w.bound + 1e-12
        u = w.u
        assert np.allclose(path_inner_product(u, path_left_action(a, u)).values, 1, atol=1e-12)


def test_normalize_witness_unit_norm_constant():
    s = system("carpet")
    a = SampledFunction.constant(SampleGrid(s, 2), 1.0)
    w = normalize_witness(s, a, 0.1, amplify(s, a, 0.1))
    assert w.norm_u == pytest.approx(1.0)
    assert w.bound == pytest.approx(0.9**-0.5)


@pytest.mark.parametrize("name", ["tent", "cantor", "gasket-modified"])
def test_separating_function_contracts(name, rng):
    s = system(name)
    grid = SampleGrid(s, 3)
    for n in (1, 2):
        space = PathSpace(s, n, grid)
        for T in (PathOperator.identity(space),
                  PathOperator.multiplication(space, random_positive_function(grid, rng))):
            res = separating_function(s, T, 0.1, witness(name))
            assert res.ok, res.contracts
            assert res.a.certified and res.a.depth == n
            assert res.norm_phiTf_sq > res.norm_T**2 - 0.1


def test_separating_function_zero_operator():
    tent = system("tent")
    space = PathSpace(tent, 1, SampleGrid(tent, 3))
    res = separating_function(tent, PathOperator.zero(space), 0.5, witness("tent"))
    assert res.ok
    assert res.norm_T == 0


def test_separating_function_requires_osc():
    tent = system("tent")
    space = PathSpace(tent, 1, SampleGrid(tent, 3))
    with pytest.raises(InvalidInputError):
        separating_function(tent, PathOperator.identity(space), 0.1, Box([0], [0.4]))
    with pytest.raises(InvalidInputError):
        separating_function(tent, PathOperator.identity(space), 0.0, witness("tent"))
