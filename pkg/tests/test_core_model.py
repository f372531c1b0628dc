import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from satseek.core_model import (
    PlantSpec,
    PolytopicHessian,
    SimplexWeight,
    deadzone,
    hessian_at,
    map_eval,
    sample_simplex,
    saturate,
)
from satseek.exceptions import InputError

from conftest import H0

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_map_at_optimizer_is_optimum(plant):
    assert map_eval(plant, [0.3, 0.7], [2.0, 4.0]) == 10.0


@pytest.mark.parametrize("theta, expected", [([3.0, 4.0], 60.0), ([2.0, 5.0], 20.0)])
def test_map_hand_values_at_nominal(theta, expected):
    plant = PlantSpec(10.0, [2.0, 4.0], PolytopicHessian((H0,)), [2.0, 2.0])
    assert map_eval(plant, [1.0], theta) == pytest.approx(expected, abs=1e-12)


def test_map_rejects_wrong_dimension(plant):
    with pytest.raises(InputError):
        map_eval(plant, [1.0, 0.0], [1.0, 2.0, 3.0])


@pytest.mark.parametrize(
    "alpha, factor", [((1.0, 0.0), 0.9), ((0.5, 0.5), 1.0), ((0.0, 1.0), 1.1)]
)
def test_hessian_combinations(hess, alpha, factor):
    np.testing.assert_allclose(hessian_at(hess, alpha), factor * H0, rtol=1e-14)


def test_hessian_rejects_bad_weight(hess):
    with pytest.raises(InputError):
        hessian_at(hess, [0.7, 0.7])
    with pytest.raises(InputError):
        hessian_at(hess, [1.2, -0.2])


def test_polytope_validation():
    with pytest.raises(InputError):
        PolytopicHessian(([[1.0, 0.5], [0.4, 1.0]],))
    with pytest.raises(InputError):
        PolytopicHessian(([[1.0, 0.0], [0.0, -1.0]],))
    neg = PolytopicHessian((-H0,), "negative")
    assert neg.definiteness_sign == "negative"


def test_plant_validation(hess):
    with pytest.raises(InputError):
        PlantSpec(10.0, [2.0, 4.0], hess, [2.0, 0.0])
    with pytest.raises(InputError):
        PlantSpec(10.0, [2.0], hess, [2.0, 2.0])


def test_plant_arrays_are_read_only(plant):
    with pytest.raises(ValueError):
        plant.optimizer[0] = 1.0


@pytest.mark.parametrize(
    "u, sat, dz",
    [([3.0, -1.0], [2.0, -1.0], [1.0, 0.0]), ([0.0, 0.0], [0.0, 0.0], [0.0, 0.0]),
     ([-5.0, 2.0], [-2.0, 2.0], [-3.0, 0.0]), ([1.0, 1.0], [1.0, 1.0], [0.0, 0.0])],
)
def test_saturate_and_deadzone_examples(u, sat, dz):
    np.testing.assert_array_equal(saturate(u, [2.0, 2.0]), sat)
    np.testing.assert_array_equal(deadzone(u, [2.0, 2.0]), dz)


def test_saturate_dimension_mismatch():
    with pytest.raises(InputError):
        saturate([1.0, 2.0, 3.0], [1.0, 1.0])


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=st.floats(1e-3, 1e3)))
def test_saturation_properties(u, limits):
    s = saturate(u, limits)
    np.testing.assert_array_equal(saturate(s, limits), s)
    # exact whenever |u| <= 2 limit (Sterbenz); one rounding otherwise
    np.testing.assert_array_max_ulp(s + deadzone(u, limits), u, maxulp=1)
    small = np.abs(u) <= 2 * limits
    np.testing.assert_array_equal((s + deadzone(u, limits))[small], u[small])
    inside = np.abs(u) <= limits
    assert np.all(deadzone(u, limits)[inside] == 0.0)


@given(arrays(float, 2, elements=st.floats(-50, 50)), st.floats(0.0, 1.0))
def test_map_is_minimized_at_optimizer(theta, a):
    hess = PolytopicHessian.scaled(H0, 0.1)
    plant = PlantSpec(10.0, [2.0, 4.0], hess, [2.0, 2.0])
    y = map_eval(plant, [a, 1.0 - a], theta)
    assert y >= 10.0
    if np.any(theta != [2.0, 4.0]) and np.linalg.norm(theta - [2.0, 4.0]) > 1e-6:
        assert y > 10.0


@given(st.integers(0, 2**32 - 1))
def test_hessian_eigenvalues_between_vertex_bounds(seed):
    hess = PolytopicHessian.scaled(H0, 0.1)
    ev = np.linalg.eigvalsh(hessian_at(hess, sample_simplex(2, seed)))
    lo = min(np.linalg.eigvalsh(v)[0] for v in hess.vertices)
    hi = max(np.linalg.eigvalsh(v)[-1] for v in hess.vertices)
    assert lo - 1e-9 <= ev[0] and ev[-1] <= hi + 1e-9


def test_sample_simplex():
    assert sample_simplex(1, 5).weights.tolist() == [1.0]
    w = sample_simplex(2, 11).weights
    assert np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-12
    a, b = sample_simplex(3, 1).weights, sample_simplex(3, 2).weights
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, sample_simplex(3, 1).weights)
    with pytest.raises(InputError):
        sample_simplex(0, 1)


def test_simplex_vertex_helper():
    np.testing.assert_array_equal(SimplexWeight.vertex(1, 3).weights, [0.0, 1.0, 0.0])
