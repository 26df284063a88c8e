import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussgme import conic
from gaussgme.exceptions import InvalidArgumentError


def test_embed_real_symmetric_is_block_diagonal():
    h = np.array([[2.0, 1.0], [1.0, 3.0]])
    e = conic.hermitian_embed(h)
    assert np.array_equal(e[:2, :2], h) and np.array_equal(e[2:, 2:], h)
    assert not e[:2, 2:].any()


def test_embed_pauli_y_spectrum():
    e = conic.hermitian_embed(np.array([[0, 1j], [-1j, 0]]))
    assert np.allclose(np.sort(np.linalg.eigvalsh(e)), [-1, -1, 1, 1])


def test_embed_rejects_non_hermitian():
    with pytest.raises(InvalidArgumentError):
        conic.hermitian_embed(np.array([[0, 1.0], [0, 0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_embed_doubles_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = g + g.conj().T
    ev = np.linalg.eigvalsh(h)
    emb = np.linalg.eigvalsh(conic.hermitian_embed(h))
    assert np.allclose(np.sort(np.repeat(ev, 2)), emb, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10_000))
def test_svec_round_trip_and_inner_product(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    a, b = a + a.T, b + b.T
    assert np.allclose(conic.smat(conic.svec(a)), a)
    assert np.isclose(conic.svec(a) @ conic.svec(b), np.sum(a * b))


def test_affine_algebra_matches_numpy():
    prog = conic.ConicProgram()
    x = prog.add_variable("X", (3, 3), "symmetric")
    y = prog.add_variable("Y", (3, 3), "antisymmetric")
    expr = (2.0 * x - y.T + np.eye(3)).take([0, 2], [1, 2])
    rng = np.random.default_rng(0)
    xv = rng.normal(size=(3, 3))
    xv = xv + xv.T
    yv = rng.normal(size=(3, 3))
    yv = yv - yv.T
    full_x = prog._full["X"]
    full_y = prog._full["Y"]
    px = np.linalg.lstsq(full_x.terms["X"].toarray(), xv.reshape(-1), rcond=None)[0]
    py = np.linalg.lstsq(full_y.terms["Y"].toarray(), yv.reshape(-1), rcond=None)[0]
    params = {"X": px, "Y": py}
    ref = (2 * xv - yv.T + np.eye(3))[np.ix_([0, 2], [1, 2])]
    assert np.allclose(expr.evaluate(params), ref)
    assert np.isclose(x.trace().evaluate(params)[0], np.trace(xv))


def test_trace_pinned_objective():
    prog = conic.ConicProgram()
    w = prog.add_variable("W", (3, 3), "symmetric")
    prog.add_psd(w, name="psd")
    prog.add_eq(w.trace(), 1.0, name="trace")
    prog.minimize(w.trace())
    rep = conic.solve(prog)
    assert rep.status is conic.Status.OPTIMAL
    assert abs(rep.primal_value - 1) < 1e-8
    assert rep.duality_gap < 1e-7


def test_min_eigenvalue_program_and_dual_certificate():
    c = np.diag([3.0, 1.0, 2.0])
    prog = conic.ConicProgram()
    w = prog.add_variable("W", (3, 3), "symmetric")
    prog.add_psd(w, name="psd")
    prog.add_eq(w.trace(), 1.0, name="trace")
    prog.minimize(w.inner(c))
    rep = conic.solve(prog)
    assert abs(rep.primal_value - 1.0) < 1e-7
    dual = rep.dual_certificates["psd"]
    assert np.linalg.eigvalsh(dual).min() > -1e-7
    # Stationarity: C = dual + lambda I with lambda the optimum.
    assert np.allclose(dual, c - np.eye(3), atol=1e-6)


def test_primal_feasibility_of_returned_solution():
    rng = np.random.default_rng(3)
    c = rng.normal(size=(4, 4))
    c = c + c.T
    prog = conic.ConicProgram()
    w = prog.add_variable("W", (4, 4), "symmetric")
    prog.add_psd(w, name="psd")
    prog.add_psd(np.eye(4) * 2.0 - w, name="upper")
    prog.add_eq(w.trace(), 1.5, name="trace")
    prog.minimize(w.inner(c))
    rep = conic.solve(prog)
    sol = rep.primal_solution["W"]
    assert np.linalg.eigvalsh(sol).min() > -1e-7
    assert np.linalg.eigvalsh(2 * np.eye(4) - sol).min() > -1e-7
    assert abs(np.trace(sol) - 1.5) < 1e-7
    again = conic.solve(prog)
    assert abs(again.primal_value - rep.primal_value) < 1e-8


def test_infeasible_program_is_reported():
    prog = conic.ConicProgram()
    w = prog.add_variable("W", (2, 2), "symmetric")
    prog.add_psd(w, name="psd")
    prog.add_eq(w.trace(), -1.0, name="trace")
    prog.minimize(w.trace())
    rep = conic.solve(prog)
    assert rep.status is conic.Status.INFEASIBLE


def test_duplicate_variable_and_unknown_references_rejected():
    prog = conic.ConicProgram()
    prog.add_variable("W", (2, 2), "symmetric")
    with pytest.raises(InvalidArgumentError):
        prog.add_variable("W", (2, 2), "symmetric")
    other = conic.ConicProgram().add_variable("Z", (2, 2), "symmetric")
    with pytest.raises(InvalidArgumentError):
        prog.add_psd(other)


def test_program_json_dump():
    prog = conic.ConicProgram()
    w = prog.add_variable("W", (2, 2), "symmetric")
    prog.add_psd(w, name="psd")
    prog.add_eq(w.trace(), 1.0, name="trace")
    prog.minimize(w.trace())
    data = json.loads(prog.to_json())
    assert "W" in json.dumps(data)
