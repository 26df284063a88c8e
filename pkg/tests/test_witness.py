import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussgme.exceptions import InvalidArgumentError
from gaussgme.fock import DensityBlock, project_to_qudits
from gaussgme.moments import Bipartition, family_moments
from gaussgme.witness import (
    WitnessStatus,
    bisep_inequality_margin,
    fully_decomposable_witness,
    ghh_default_sweep,
    ghh_product_criterion,
    parity_sectors,
    partial_transpose_dm,
    partial_transpose_matrix,
)

from oracles import partial_transpose_dense, random_density, random_partition_product


def ket(d, *occ):
    v = np.zeros(d**3, dtype=complex)
    v[(occ[0] * d + occ[1]) * d + occ[2]] = 1
    return v


def ghz(d=2):
    v = (ket(d, 0, 0, 0) + ket(d, 1, 1, 1)) / np.sqrt(2)
    return DensityBlock.from_matrix(np.outer(v, v.conj()), d)


def w_state():
    v = (ket(2, 0, 0, 1) + ket(2, 0, 1, 0) + ket(2, 1, 0, 0)) / np.sqrt(3)
    return DensityBlock.from_matrix(np.outer(v, v.conj()), 2)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.sampled_from(list(Bipartition)), st.integers(0, 10_000))
def test_partial_transpose_matches_loop_reference(d, b, seed):
    rho = random_density(d**3, np.random.default_rng(seed))
    fast = partial_transpose_matrix(rho, d, b)
    assert np.array_equal(fast, partial_transpose_dense(rho, d, b.mode))
    assert np.array_equal(partial_transpose_matrix(fast, d, b), rho)


def test_partial_transpose_of_product_is_product_of_transpose():
    rng = np.random.default_rng(1)
    a, bc = random_density(2, rng), random_density(4, rng)
    rho = np.kron(a, bc)
    assert np.allclose(partial_transpose_matrix(rho, 2, Bipartition.A), np.kron(a.T, bc))


def test_partial_transpose_shape_checked():
    with pytest.raises(InvalidArgumentError):
        partial_transpose_matrix(np.eye(9), 2, Bipartition.A)


def test_ghz_partial_transpose_is_negative_on_every_cut():
    rho = ghz()
    for b in Bipartition:
        assert partial_transpose_dm(rho, b).min_eigenvalue < -0.4


def test_product_criterion_on_ghz_coherence():
    res = ghh_product_criterion(ghz(), (0, 0, 0), (1, 1, 1))
    assert np.isclose(res.lhs, 0.5) and res.rhs == 0 and res.detected
    best, pair = ghh_default_sweep(ghz())
    assert np.isclose(best.margin, 0.5) and set(pair) == {(0, 0, 0), (1, 1, 1)}


def test_product_criterion_silent_on_diagonal_states():
    rng = np.random.default_rng(0)
    rho = DensityBlock.from_matrix(np.diag(rng.random(8)), 2)
    best, _ = ghh_default_sweep(rho)
    assert best.margin <= 0 and not best.detected


def test_product_criterion_validates_indices():
    with pytest.raises(InvalidArgumentError):
        ghh_product_criterion(ghz(), (0, 0, 0), (0, 0, 0))
    with pytest.raises(InvalidArgumentError):
        ghh_product_criterion(ghz(), (0, 0, 2), (1, 1, 1))


def test_occupation_one_inequality_on_w_state():
    # W has no coherence with |000>, so the left side vanishes.
    res = bisep_inequality_margin(w_state())
    assert res.lhs == 0 and not res.detected


def test_occupation_one_inequality_is_silent_on_vacuum():
    res = bisep_inequality_margin(project_to_qudits(family_moments("vac", {"r": 0.0}), 2, normalize=False))
    assert res.lhs == 0 and res.rhs == 0 and not res.detected


@pytest.mark.parametrize("family,detected,missed", [("vac", 0.2, 0.3), ("smsv", 0.15, 0.25)])
def test_occupation_one_inequality_on_families(family, detected, missed):
    def margin(r):
        return bisep_inequality_margin(project_to_qudits(family_moments(family, {"r": r}), 2, normalize=False))

    assert margin(detected).detected
    assert not margin(missed).detected


def test_occupation_one_inequality_scales_linearly():
    raw = project_to_qudits(family_moments("vac", {"r": 0.2}), 2, normalize=False)
    a, b = bisep_inequality_margin(raw), bisep_inequality_margin(raw.scaled(3.0))
    assert np.isclose(b.margin, 3 * a.margin) and a.detected == b.detected


def _check_certificate(outcome, d):
    n = d**3
    assert abs(np.trace(outcome.witness).real - 1) < 1e-7
    for b, p, q in zip(Bipartition, outcome.p_parts, outcome.q_parts):
        assert np.allclose(outcome.witness, p + partial_transpose_matrix(q, d, b), atol=1e-9)
        assert np.linalg.eigvalsh(p).min() > -1e-6
        assert np.linalg.eigvalsh(q).min() > -1e-6
    assert outcome.witness.shape == (n, n)


def test_witness_detects_ghz_and_w():
    for rho in (ghz(), w_state()):
        out = fully_decomposable_witness(rho)
        assert out.status is WitnessStatus.OPTIMAL and out.detects
        _check_certificate(out, 2)
        assert np.isclose(np.real(np.trace(out.witness @ rho.matrix)), out.value, atol=1e-9)


def test_witness_is_nonnegative_on_biseparable_states_it_was_not_fit_to():
    # The witness optimized for GHZ must stay >= 0 on unrelated partition products.
    out = fully_decomposable_witness(ghz())
    rng = np.random.default_rng(5)
    for k in range(3):
        for _ in range(10):
            sigma = random_partition_product(2, k, rng)
            assert np.real(np.trace(out.witness @ sigma)) >= -1e-7


def test_witness_on_product_state_is_not_negative():
    rng = np.random.default_rng(2)
    sigma = random_partition_product(2, 1, rng)
    out = fully_decomposable_witness(DensityBlock.from_matrix(sigma, 2))
    assert out.status is WitnessStatus.OPTIMAL
    assert out.value >= -1e-7 and not out.detects


def test_symmetry_reductions_do_not_change_the_optimum():
    rho = project_to_qudits(family_moments("vac", {"r": 0.9}), 2)
    fast = fully_decomposable_witness(rho)
    full = fully_decomposable_witness(rho, use_symmetries=False)
    assert fast.reduction == "parity+real" and full.reduction == "none+complex"
    assert abs(fast.value - full.value) < 1e-6
    _check_certificate(fast, 2)
    _check_certificate(full, 2)


def test_complex_path_on_random_state():
    rng = np.random.default_rng(7)
    rho = 0.7 * ghz().matrix + 0.3 * random_density(8, rng)
    out = fully_decomposable_witness(DensityBlock.from_matrix(rho, 2))
    assert out.reduction == "none+complex" and out.status is WitnessStatus.OPTIMAL
    _check_certificate(out, 2)


def test_qutrit_witness_certificate():
    rho = project_to_qudits(family_moments("vac", {"r": 0.7}), 3)
    out = fully_decomposable_witness(rho)
    assert out.status is WitnessStatus.OPTIMAL and out.detects
    _check_certificate(out, 3)


def test_parity_sectors_partition_the_basis():
    even, odd = parity_sectors(3)
    assert len(even) + len(odd) == 27 and not set(even) & set(odd)


def test_witness_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        fully_decomposable_witness(DensityBlock(2, np.triu(np.ones((8, 8))), 1.0, True))


def test_outcome_serializes():
    out = fully_decomposable_witness(ghz())
    data = json.loads(out.to_json(include_matrices=True))
    assert data["status"] == "optimal" and data["detects"] and len(data["witness_real"]) == 8
