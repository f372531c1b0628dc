import math

import numpy as np
import pytest

from satseek.core_model import PolytopicHessian, hessian_at, sample_simplex
from satseek.exceptions import CrossValidationError, InputError
from satseek.lmi import (
    Certificate,
    CvxpyBackend,
    FallbackBackend,
    LMIProblem,
    analysis_matrix,
    check_analysis,
    check_inclusion,
    default_margin_tol,
    ellipsoid_of,
    get_backend,
    solve_analysis,
    solve_synthesis,
)
from satseek.lmi.synthesis import search_epsilon, synthesis_problem
from satseek.verify import sector_check

from conftest import LIMITS, REFERENCE_GAIN

SCALAR = PolytopicHessian(([[1.0]],))
SCALAR_BAND = PolytopicHessian(([[0.9]], [[1.1]]))


def scalar_cert(P=1.0, L=0.0, U=1.0, eta=0.1):
    return Certificate([[P]], [[L]], [[U]], eta)


# ---- check_analysis / check_inclusion hand oracles


def test_scalar_analysis_matrix_by_hand():
    m = analysis_matrix([[1.0]], [[-1.0]], scalar_cert())
    np.testing.assert_allclose(m, [[-1.8, -1.0], [-1.0, -2.0]])
    # det 2.6 > 0 and trace < 0: both eigenvalues negative
    assert np.linalg.det(m) == pytest.approx(2.6)
    assert check_analysis(SCALAR, [[-1.0]], scalar_cert()).passed


def test_positive_gain_fails_analysis():
    rep = check_analysis(SCALAR, [[1.0]], scalar_cert())
    assert not rep.passed and rep.vertex_max_eigs[0] > 0


def test_analysis_rejects_bad_dims():
    with pytest.raises(InputError):
        check_analysis(SCALAR, np.eye(2), scalar_cert())


def test_certificate_validation():
    with pytest.raises(InputError):
        Certificate(np.eye(2), np.eye(2), [[1.0, 0.1], [0.0, 1.0]], 1.0)
    with pytest.raises(InputError):
        Certificate(np.eye(1), np.eye(1), np.eye(1), 0.0)
    c = Certificate(np.diag([4.0, 1.0]), np.eye(2), np.eye(2), 1.0)
    back = Certificate.from_dict(c.to_dict())
    for name in ("P", "L", "U"):
        np.testing.assert_array_equal(getattr(back, name), getattr(c, name))
    assert c.kappa == pytest.approx(2.0)


@pytest.mark.parametrize("P, passed", [(1.0, False), (4.0, True)])
def test_scalar_inclusion_by_determinant(P, passed):
    # K - L = 3, limit 2: [[P, 3], [3, 4]] has det 4P - 9
    rep = check_inclusion(scalar_cert(P=P, L=0.0), [[3.0]], [2.0])
    assert rep.passed is passed
    assert (rep.row_min_eigs[0] > 0) is (4 * P - 9 > 0)


def test_inclusion_with_l_equal_k_always_passes():
    cert = Certificate(np.diag([0.3, 2.0]), REFERENCE_GAIN, np.eye(2), 1.0)
    rep = check_inclusion(cert, REFERENCE_GAIN, LIMITS)
    assert rep.passed and rep.sampled_max_ratio == 0.0


def test_scalar_boundary_points_fit_limits():
    # P = 4, K - L = 3: |3 g| on g'Pg = 1 is 1.5 <= 2
    rep = check_inclusion(scalar_cert(P=4.0), [[3.0]], [2.0])
    assert rep.sampled_max_ratio == pytest.approx(1.5 / 2.0)


def test_ellipsoid_examples():
    e = ellipsoid_of(np.eye(2))
    np.testing.assert_allclose(e.semi_axes, [1.0, 1.0])
    assert e.volume == pytest.approx(math.pi)
    np.testing.assert_allclose(sorted(ellipsoid_of(np.diag([4.0, 1.0])).semi_axes), [0.5, 1.0])
    w = np.array([[2.0, 0.3], [0.3, 1.0]])
    q0 = w - 0.2 * np.eye(2)
    pts = ellipsoid_of(w).boundary_points(200)
    assert np.all(ellipsoid_of(q0).contains(pts))


# ---- solve_analysis


def test_scalar_analysis_solves():
    res = solve_analysis(SCALAR, [[-1.0]], 0.1, [2.0])
    assert res.status in ("optimal", "feasible") and res.feasible
    assert res.certificate.P[0, 0] > 0 and res.certificate.U[0, 0] > 0


def test_scalar_positive_gain_infeasible():
    for eta in (0.01, 0.1, 1.0):
        res = solve_analysis(SCALAR, [[1.0]], eta, [2.0])
        assert res.status == "infeasible" and not res.feasible


def test_reference_gain_is_certified(hess):
    res = solve_analysis(hess, REFERENCE_GAIN, 1.0, LIMITS)
    assert res.feasible
    assert res.analysis.margin > default_margin_tol(hess)
    assert res.inclusion.passed


# ---- solve_synthesis


def test_benchmark_synthesis_cross_validates(synthesis, hess):
    assert synthesis.feasible
    assert synthesis.analysis.passed and synthesis.analysis.margin > 0
    assert synthesis.inclusion.passed
    assert all(e > 0 for e in synthesis.inclusion.row_min_eigs)
    # the synthesized gain certifies the averaged system at every vertex
    for h in hess.vertices:
        assert np.all(np.linalg.eigvals(h @ synthesis.gain).real < 0)


def test_recovery_identities(synthesis):
    T = synthesis.slack
    cert = synthesis.recovered_certificate
    np.testing.assert_allclose(synthesis.gain @ T, synthesis.Z, atol=1e-8)
    np.testing.assert_allclose(cert.L @ T, synthesis.Y, atol=1e-8)
    np.testing.assert_allclose(cert.U @ synthesis.V, np.eye(2), atol=1e-8)
    np.testing.assert_allclose(T.T @ cert.P @ T, synthesis.W, atol=1e-8 * np.abs(synthesis.W).max())
    assert np.linalg.eigvalsh(synthesis.W - synthesis.Q0)[0] >= -1e-8
    assert np.linalg.eigvalsh(synthesis.Q0)[0] > 0


def test_affinity_in_alpha(synthesis, hess):
    cert, K = synthesis.recovered_certificate, synthesis.gain
    tol = default_margin_tol(hess)
    for seed in range(200):
        h = hessian_at(hess, sample_simplex(2, seed))
        assert np.linalg.eigvalsh(analysis_matrix(h, K, cert)).max() < -tol


def test_synthesis_decay_blocks_affine(synthesis, hess):
    prob = synthesis.problem
    values = {k: getattr(synthesis, k) for k in ("W", "V", "Z", "Y")}
    values.update(T=synthesis.slack, Q0=synthesis.Q0)
    blocks = [c.evaluate(values) for c in prob.constraints if c.name.startswith("decay")]
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.dirichlet([1, 1])
        mixed = a[0] * blocks[0] + a[1] * blocks[1]
        assert np.linalg.eigvalsh(mixed).max() < 0


def test_sector_condition(synthesis):
    assert sector_check(synthesis.recovered_certificate, synthesis.gain, LIMITS, 1000) <= 1e-12


def test_scalar_synthesis_sign():
    res = solve_synthesis(SCALAR_BAND, [1.0], 0.5, 0.5)
    assert res.feasible and res.gain[0, 0] < 0


def test_objective_monotone_in_limits():
    objs = [solve_synthesis(SCALAR_BAND, [u], 0.5, 0.5).objective for u in (0.5, 1.0, 2.0, 4.0)]
    assert all(b >= a - 1e-6 for a, b in zip(objs, objs[1:]))


@pytest.mark.parametrize("eta", [100.0, 1e6])
def test_large_decay_rate_infeasible(hess, eta):
    res = solve_synthesis(hess, LIMITS, eta, 0.5)
    assert res.status == "infeasible" and res.gain is None


def test_with_z_block_fails_cross_validation(hess):
    with pytest.raises(CrossValidationError) as info:
        solve_synthesis(hess, LIMITS, 1.0, 0.5, lmi_31_block="with_z")
    assert info.value.analysis is not None and info.value.inclusion is not None


def test_synthesis_input_checks(hess):
    with pytest.raises(InputError):
        solve_synthesis(hess, LIMITS, -1.0)
    with pytest.raises(InputError):
        solve_synthesis(hess, [2.0], 1.0)
    with pytest.raises(InputError):
        synthesis_problem(hess, LIMITS, 1.0, 0.5, 1e-6, lmi_31_block="other")


def test_epsilon_search_keeps_best():
    res = search_epsilon(SCALAR_BAND, [1.0], 0.5, grid=(0.1, 0.5, 2.0))
    assert res.feasible
    assert res.objective >= solve_synthesis(SCALAR_BAND, [1.0], 0.5, 0.5).objective - 1e-6


# ---- problem description and backends


def test_problem_dump_and_replay(synthesis, tmp_path):
    path = tmp_path / "problem.json"
    synthesis.problem.dump(path)
    replay = LMIProblem.load(path)
    assert [v.name for v in replay.variables] == ["W", "V", "Z", "Y", "T", "Q0"]
    assert replay.objective == {"sense": "maximize", "type": "logdet", "variable": "Q0"}
    res = CvxpyBackend("clarabel").solve(replay)
    assert res.ok
    assert res.objective == pytest.approx(synthesis.objective, rel=1e-5)


def test_problem_affine_extraction():
    prob = LMIProblem("toy")
    prob.add_variable("X", (2, 2), "symmetric")
    prob.add_variable("d", (2, 2), "diagonal")
    lmi = prob.add_lmi("c", lambda v: v["X"] + 2 * v["d"] - np.eye(2), "psd")
    vals = {"X": np.array([[1.0, 0.5], [0.5, 3.0]]), "d": np.diag([0.2, 0.4])}
    np.testing.assert_allclose(lmi.evaluate(vals), vals["X"] + 2 * vals["d"] - np.eye(2))
    assert prob.n_scalars == 5
    with pytest.raises(InputError):
        prob.add_lmi("bad", lambda v: np.array([[0.0, v["X"][0, 0]], [0.0, 0.0]]))


def test_backend_selection(monkeypatch):
    assert isinstance(get_backend("scs"), CvxpyBackend)
    chain = get_backend("clarabel")
    assert isinstance(chain, FallbackBackend) and chain.name == "clarabel+scs"
    monkeypatch.setenv("SATSEEK_BACKEND", "scs")
    assert get_backend().name == "scs"
    with pytest.raises(InputError):
        get_backend("nope")


def test_cvxopt_geometric_mean_surrogate():
    pytest.importorskip("cvxopt")
    res = solve_synthesis(SCALAR_BAND, [1.0], 0.5, 0.5, backend=CvxpyBackend("cvxopt"))
    assert res.feasible and res.gain[0, 0] < 0
