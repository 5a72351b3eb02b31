import dataclasses
import math

import numpy as np
import pytest

from mdirand import sdp_core as core
from mdirand.sdp_solver import (
    CertificationError,
    SolverOptions,
    certify_upper_bound,
    solve,
)


def _sym(m):
    return 0.5 * (m + m.T)


def _prep(dims, objective, constraints, b):
    raw = core.SdpProblem(tuple(dims), objective, constraints, np.asarray(b, float))
    out, _ = core.preprocess(raw)
    return out


def _max_eig_problem(c):
    d = c.shape[0]
    return _prep((d,), {0: c}, [{0: np.eye(d)}], [1.0])


def _random_bounded(rng, dims=(3,), extra=5):
    """Strictly feasible, bounded random instance: trace row plus b = A(X0)."""
    x0 = []
    for s in dims:
        r = rng.standard_normal((s, s))
        x0.append(r @ r.T + 0.3 * np.eye(s))
    cons = [{k: np.eye(s) for k, s in enumerate(dims)}]
    for _ in range(extra):
        cons.append({k: _sym(rng.standard_normal((s, s))) for k, s in enumerate(dims)})
    b = [sum(float(np.sum(mm * x0[k])) for k, mm in blk.items()) for blk in cons]
    obj = {k: _sym(rng.standard_normal((s, s))) for k, s in enumerate(dims)}
    return _prep(dims, obj, cons, b)


def _reference_optimum(p):
    cp = pytest.importorskip("cvxpy")
    xs = [cp.Variable((s, s), symmetric=True) for s in p.block_dims]
    cons = [x >> 0 for x in xs]
    for i, blk in enumerate(p.constraints):
        cons.append(
            sum(cp.sum(cp.multiply(mm, xs[k])) for k, mm in blk.items()) == p.b[i]
        )
    obj = sum(cp.sum(cp.multiply(mm, xs[k])) for k, mm in p.objective.items())
    prob = cp.Problem(cp.Maximize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    assert prob.status in ("optimal", "optimal_inaccurate")
    return float(prob.value)


def test_max_eigenvalue_diagonal():
    # max tr(CX) with tr X = 1, X >= 0 picks out the largest eigenvalue
    p = _max_eig_problem(np.diag([1.0, 2.0]))
    sol = solve(p)
    assert sol.status == core.OPTIMAL
    assert abs(sol.primal_objective - 2.0) < 1e-8
    assert abs(sol.certified_upper_bound - 2.0) < 1e-8
    assert sol.certified_upper_bound >= 2.0 - 1e-9


def test_max_eigenvalue_rotated():
    c, s = math.cos(0.7), math.sin(0.7)
    q = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    cmat = q @ np.diag([2.0, -1.0, 0.5]) @ q.T
    sol = solve(_max_eig_problem(_sym(cmat)))
    assert sol.status == core.OPTIMAL
    assert abs(sol.certified_upper_bound - 2.0) < 1e-8


def test_fully_determined_instance():
    # constraints pin X = I/2 entirely; optimum is trace(C)/2
    rng = np.random.default_rng(11)
    c = _sym(rng.standard_normal((2, 2)))
    e01 = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = _prep(
        (2,),
        {0: c},
        [{0: np.diag([1.0, 0.0])}, {0: np.diag([0.0, 1.0])}, {0: e01}],
        [0.5, 0.5, 0.0],
    )
    sol = solve(p)
    assert sol.status == core.OPTIMAL
    assert abs(sol.certified_upper_bound - 0.5 * np.trace(c)) < 1e-8
    assert np.max(np.abs(sol.x_blocks[0] - 0.5 * np.eye(2))) < 1e-7


def test_solution_iterate_quality_when_optimal():
    rng = np.random.default_rng(21)
    p = _random_bounded(rng)
    sol = solve(p)
    assert sol.status == core.OPTIMAL
    assert sol.primal_residual < 1e-8
    for blk in sol.x_blocks:
        assert np.min(np.linalg.eigvalsh(blk)) > -1e-9
    assert sol.certified_upper_bound >= sol.primal_objective - 1e-6
    assert sol.certified_upper_bound >= sol.dual_objective - 1e-12


def test_certify_matches_solution_field():
    rng = np.random.default_rng(22)
    p = _random_bounded(rng)
    sol = solve(p)
    again = certify_upper_bound(p, sol)
    assert abs(again - sol.certified_upper_bound) < 1e-12


def test_certified_bound_valid_under_small_dual_perturbations():
    p = _max_eig_problem(np.diag([1.0, 2.0]))
    sol = solve(p)
    assert p.cert_vector is not None
    for t in (0.0, 1e-9, 1e-7, 1e-5):
        moved = dataclasses.replace(sol, y=sol.y - t * p.cert_vector)
        bound = certify_upper_bound(p, moved)
        assert bound >= 2.0 - 1e-9
    # sliding further along the identity direction only flattens the bound
    far = dataclasses.replace(sol, y=sol.y - 5e-5 * p.cert_vector)
    assert certify_upper_bound(p, far) >= 2.0 - 1e-9


def test_certify_refuses_badly_infeasible_dual():
    p = _max_eig_problem(np.diag([1.0, 2.0]))
    sol = solve(p)
    wrecked = dataclasses.replace(sol, y=sol.y - 1.0 * p.cert_vector)
    with pytest.raises(CertificationError):
        certify_upper_bound(p, wrecked)


def test_certify_refuses_without_identity_direction():
    # row space without the identity: no shift is available, small dual
    # infeasibility cannot be repaired
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = _prep((2,), {0: -np.eye(2)}, [{0: a}], [0.0])
    assert p.cert_vector is None
    sol = solve(p)
    assert sol.status == core.OPTIMAL
    # rows are unit-Frobenius after preprocessing, so A = (E01+E10)/sqrt(2)
    # and the slack y*A + I first goes negative at y = sqrt(2)
    bad = dataclasses.replace(sol, y=np.array([math.sqrt(2.0) * (1.0 + 1e-5)]))
    with pytest.raises(CertificationError):
        certify_upper_bound(p, bad)


def test_weak_duality_on_logged_iterates():
    # every finite per-iteration certified bound is a true upper bound
    p = _max_eig_problem(np.diag([1.0, 2.0]))
    sol = solve(p)
    seen = 0
    for rec in sol.iterations:
        if math.isfinite(rec.certified_bound):
            assert rec.certified_bound >= 2.0 - 1e-9
            seen += 1
    assert seen > 0
    assert sol.certified_upper_bound <= min(
        rec.certified_bound for rec in sol.iterations
        if math.isfinite(rec.certified_bound)
    ) + 1e-9


def test_determinism_bit_identical_logs():
    def build():
        rng = np.random.default_rng(33)
        return _random_bounded(rng, dims=(3, 2), extra=6)

    a = solve(build())
    b = solve(build())
    assert len(a.iterations) == len(b.iterations)
    for ra, rb in zip(a.iterations, b.iterations):
        for f in dataclasses.fields(ra):
            va, vb = getattr(ra, f.name), getattr(rb, f.name)
            if isinstance(va, float) and math.isnan(va):
                assert math.isnan(vb)
            else:
                assert va == vb
    for xa, xb in zip(a.x_blocks, b.x_blocks):
        assert np.array_equal(xa, xb)
    assert np.array_equal(a.y, b.y)
    assert a.certified_upper_bound == b.certified_upper_bound


def test_primal_infeasible_instance_detected():
    # X00 = X11 = 1 with X01 = 5 admits no PSD completion
    e01 = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = _prep(
        (2,),
        {0: np.eye(2)},
        [{0: np.diag([1.0, 0.0])}, {0: np.diag([0.0, 1.0])}, {0: e01}],
        [1.0, 1.0, 10.0],
    )
    sol = solve(p)
    assert sol.status == core.INFEASIBLE


def test_trace_negative_infeasible_detected():
    p = _prep((1,), {0: np.eye(1)}, [{0: np.eye(1)}], [-1.0])
    sol = solve(p)
    assert sol.status == core.INFEASIBLE


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(step_fraction=0.0)
    with pytest.raises(ValueError):
        SolverOptions(step_fraction=1.0)
    with pytest.raises(ValueError):
        SolverOptions(gap_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(feas_tol=-1e-9)
    with pytest.raises(ValueError):
        SolverOptions(relax=-0.1)


def test_solve_rejects_unpreprocessed_or_oversized():
    raw = core.SdpProblem((2,), {0: np.eye(2)}, [{0: np.eye(2)}], np.array([1.0]))
    with pytest.raises(ValueError):
        solve(raw)
    p = _max_eig_problem(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        solve(p, SolverOptions(max_block_dim=2))
    with pytest.raises(ValueError):
        solve(
            _prep((2,), {0: np.eye(2)},
                  [{0: np.diag([1.0, 0.0])}, {0: np.diag([0.0, 1.0])}],
                  [0.3, 0.3]),
            SolverOptions(max_constraints=1),
        )


@pytest.mark.parametrize("seed", range(12))
def test_random_instances_match_reference_single_block(seed):
    rng = np.random.default_rng(1000 + seed)
    p = _random_bounded(rng, dims=(3,), extra=int(rng.integers(2, 6)))
    ref = _reference_optimum(p)
    sol = solve(p)
    assert sol.status in (core.OPTIMAL, core.NEAR_OPTIMAL)
    scale = 1.0 + abs(ref)
    assert abs(sol.certified_upper_bound - ref) / scale < 1e-6
    # logged per-iterate bounds must sit above the reference optimum
    for rec in sol.iterations:
        if math.isfinite(rec.certified_bound):
            assert rec.certified_bound >= ref - 1e-7 * scale


@pytest.mark.parametrize("seed", range(8))
def test_random_instances_match_reference_multi_block(seed):
    rng = np.random.default_rng(2000 + seed)
    p = _random_bounded(rng, dims=(3, 2), extra=int(rng.integers(3, 7)))
    ref = _reference_optimum(p)
    sol = solve(p)
    assert sol.status in (core.OPTIMAL, core.NEAR_OPTIMAL)
    assert abs(sol.certified_upper_bound - ref) / (1.0 + abs(ref)) < 1e-6
