import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussgme.exceptions import DomainError, InvalidArgumentError
from gaussgme.moments import (
    Bipartition,
    Family,
    GaussianMoments,
    MixtureComponent,
    coherent_moments,
    direct_sum,
    embed_modes,
    family_moments,
    is_valid_cm,
    mix_gaussian_moments,
    permute_modes,
    symplectic_form,
    tmsv_cm,
    vacuum_moments,
)

from oracles import coherent_ket, moments_from_fock


def test_symplectic_form_is_antisymmetric_and_squares_to_minus_one():
    omega = symplectic_form(3)
    assert np.array_equal(omega, -omega.T)
    assert np.allclose(omega @ omega, -np.eye(6))


def test_vacuum_is_identity_and_valid():
    vac = vacuum_moments(3)
    assert np.array_equal(vac.cm, np.eye(6))
    ok, eig = is_valid_cm(vac)
    assert ok and abs(eig) < 1e-12


def test_half_identity_violates_uncertainty():
    ok, eig = is_valid_cm(GaussianMoments(0.5 * np.eye(2)))
    assert not ok and eig < 0
    with pytest.raises(InvalidArgumentError):
        GaussianMoments(0.5 * np.eye(2), physical=True)


def test_asymmetric_cm_rejected():
    cm = np.eye(2)
    cm[0, 1] = 1e-6
    with pytest.raises(InvalidArgumentError):
        GaussianMoments(cm)


def test_bad_shapes_rejected():
    with pytest.raises(InvalidArgumentError):
        GaussianMoments(np.eye(3))
    with pytest.raises(InvalidArgumentError):
        GaussianMoments(np.eye(2), mean=[0.0, 0.0, 0.0])


def test_arrays_are_read_only():
    m = vacuum_moments(1)
    with pytest.raises(ValueError):
        m.cm[0, 0] = 2.0


def test_json_round_trip():
    m = family_moments(Family.THERMAL, {"r": 0.3, "nbar": 0.2})
    back = GaussianMoments.from_json(m.to_json())
    assert back.allclose(m, atol=0)
    data = json.loads(m.to_json())
    assert data["ordering"] == "xp_block" and data["n_modes"] == 3


def test_tmsv_is_pure_state():
    m = tmsv_cm(0.7)
    assert np.isclose(np.linalg.det(m.cm), 1.0)
    assert is_valid_cm(m)[0]


def test_negative_squeezing_is_domain_error():
    with pytest.raises(DomainError):
        tmsv_cm(-0.1)
    with pytest.raises(DomainError):
        family_moments("noisy_ghz", {"r": 0.5, "eta": 1.5})


def test_family_parameter_checks():
    with pytest.raises(InvalidArgumentError):
        family_moments("thermal", {"r": 0.5})
    with pytest.raises(InvalidArgumentError):
        family_moments("vac", {"r": 0.5, "eta": 0.2})
    with pytest.raises(InvalidArgumentError):
        family_moments("nonsense", {"r": 0.5})


def test_mixture_cm_matches_truncated_fock_mixture():
    # Two displaced vacua mixed with unequal weights, measured in Fock space.
    dim = 30
    k1, k2 = coherent_ket(0.6, dim), coherent_ket(-0.3, dim)
    rho = 0.3 * np.outer(k1, k1.conj()) + 0.7 * np.outer(k2, k2.conj())
    cm_ref, mean_ref = moments_from_fock(rho, dim, 1)
    comps = [MixtureComponent(0.3, coherent_moments(0.6)),
             MixtureComponent(0.7, GaussianMoments(np.eye(2), [-0.3 * np.sqrt(2), 0.0]))]
    mixed = mix_gaussian_moments(comps)
    assert np.allclose(mixed.cm, cm_ref, atol=1e-10)
    assert np.allclose(mixed.mean, mean_ref, atol=1e-10)


def test_mixture_weights_validated():
    v = vacuum_moments(1)
    with pytest.raises(InvalidArgumentError):
        mix_gaussian_moments([MixtureComponent(0.5, v), MixtureComponent(0.4, v)])
    with pytest.raises(InvalidArgumentError):
        mix_gaussian_moments([])


def test_coherent_family_matches_closed_form():
    r, alpha = 0.45, 0.7
    a = 8 * alpha**2 + 6 * np.cosh(2 * r) + 3
    b = 3 * np.sinh(2 * r) - 4 * alpha**2
    c = 2 * np.cosh(2 * r) + 1
    d = -np.sinh(2 * r)
    ones = np.ones((3, 3))
    x = (b * ones + (a - b) * np.eye(3)) / 9
    p = (d * ones + (c - d) * np.eye(3)) / 3
    expected = np.block([[x, np.zeros((3, 3))], [np.zeros((3, 3)), p]])
    m = family_moments(Family.COHERENT, {"r": r, "alpha": alpha})
    assert np.allclose(m.cm, expected, atol=1e-12)
    assert np.all(m.mean == 0)


def test_vacuum_family_at_zero_squeezing_is_vacuum():
    assert np.allclose(family_moments("vac", {"r": 0.0}).cm, np.eye(6))


def test_thermal_at_zero_occupation_equals_vacuum_family():
    a = family_moments("thermal", {"r": 0.8, "nbar": 0.0})
    b = family_moments("vac", {"r": 0.8})
    assert a.allclose(b)


def test_noisy_ghz_uses_linear_interpolation_with_vacuum():
    m0 = family_moments("noisy_ghz", {"r": 1.0, "eta": 0.0})
    m1 = family_moments("noisy_ghz", {"r": 1.0, "eta": 1.0})
    mh = family_moments("noisy_ghz", {"r": 1.0, "eta": 0.4})
    assert np.allclose(m0.cm, np.eye(6))
    assert np.allclose(mh.cm, 0.4 * m1.cm + 0.6 * np.eye(6))
    assert np.isclose(np.linalg.det(m1.cm), 1.0)


@pytest.mark.parametrize("family", list(Family))
def test_families_are_mode_permutation_symmetric(family):
    params = {"r": 0.6, "nbar": 0.3} if family is Family.THERMAL else {"r": 0.6}
    if family is Family.COHERENT:
        params["alpha"] = 0.4
    if family is Family.NOISY_GHZ:
        params["eta"] = 0.5
    m = family_moments(family, params)
    for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
        assert permute_modes(m, perm).allclose(m, atol=1e-12)


def test_embed_and_direct_sum_agree():
    t = tmsv_cm(0.3)
    one = vacuum_moments(1)
    assert embed_modes(t, [0, 1]).allclose(direct_sum(t, one))
    swapped = embed_modes(t, [1, 2])
    assert swapped.allclose(permute_modes(direct_sum(one, t), [0, 1, 2]))
    with pytest.raises(InvalidArgumentError):
        embed_modes(t, [0, 0])


def test_bipartition_labels():
    assert Bipartition.A.label == "A|BC"
    assert Bipartition.C.complement == (0, 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_families_always_physical(r, s):
    for fam, params in [(Family.VAC, {"r": r}), (Family.SMSV, {"r": r}),
                        (Family.THERMAL, {"r": r, "nbar": s}), (Family.COHERENT, {"r": r, "alpha": s}),
                        (Family.NOISY_GHZ, {"r": r, "eta": s / 2})]:
        ok, _ = is_valid_cm(family_moments(fam, params), tol=1e-9)
        assert ok
