"""Independent reference computations used by the tests.

Nothing here goes through the package's element formulas: states are built
directly in a truncated Fock space (matrix exponentials of ladder
operators) or taken from closed forms.
"""

import itertools

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply


def ladder(dim):
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def two_mode_pure_state(coeffs, dim=40):
    """``exp(-iH)|00>`` for a quadratic-plus-linear Hamiltonian; returns (psi, cm, mean).

    ``coeffs`` weight ``a^2, b^2, ab, a^dag b, a`` (plus Hermitian conjugates).
    The moments are measured on the truncated state, so they only rely on
    the quadrature definitions ``x = (a + a^dag)/sqrt2``, ``p = (a - a^dag)/(i sqrt2)``.
    """
    one = sparse.csr_matrix(ladder(dim))
    eye = sparse.identity(dim, format="csr")
    a = sparse.kron(one, eye, format="csr")
    b = sparse.kron(eye, one, format="csr")
    c = coeffs
    h = c[0] * a @ a + c[1] * b @ b + c[2] * a @ b + c[3] * a.conj().T @ b + c[4] * a
    h = (h + h.conj().T).tocsc()
    vac = np.zeros(dim * dim, dtype=complex)
    vac[0] = 1
    psi = expm_multiply(-1j * h, vac)
    ops = [(a + a.T) / np.sqrt(2), (b + b.T) / np.sqrt(2), (a - a.T) / (1j * np.sqrt(2)), (b - b.T) / (1j * np.sqrt(2))]
    ev = lambda op: np.vdot(psi, op @ psi)  # noqa: E731
    mean = np.array([ev(op).real for op in ops])
    cm = np.array([[(ev(o1 @ o2 + o2 @ o1) - 2 * mean[i] * mean[j]).real for j, o2 in enumerate(ops)]
                   for i, o1 in enumerate(ops)])
    return psi, cm, mean


def pure_element(psi, dim, k, kp):
    i = k[0] * dim + k[1]
    j = kp[0] * dim + kp[1]
    return psi[i] * np.conj(psi[j])


def tmsv_element(r, n, m, n2, m2):
    """``<n m| TMSV(r) |n2 m2>``: nonzero only on the diagonal-pair sector."""
    lam = np.tanh(r)
    if n != m or n2 != m2:
        return 0.0
    return (1 - lam**2) * lam ** (n + n2)


def thermal_element(nbar, m, m2):
    if m != m2:
        return 0.0
    return nbar**m / (1 + nbar) ** (m + 1)


def moments_from_fock(rho, dim, n_modes):
    """Covariance matrix and mean of a truncated density matrix (XP_BLOCK ordering)."""
    a1 = ladder(dim)
    ops_a = []
    for k in range(n_modes):
        mats = [np.eye(dim)] * n_modes
        mats[k] = a1
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        ops_a.append(op)
    xs = [(a + a.T) / np.sqrt(2) for a in ops_a]
    ps = [(a - a.T) / (1j * np.sqrt(2)) for a in ops_a]
    ops = xs + ps
    ev = lambda op: np.trace(rho @ op)  # noqa: E731
    mean = np.array([ev(op).real for op in ops])
    cm = np.array([[(ev(o1 @ o2 + o2 @ o1) - 2 * mean[i] * mean[j]).real for j, o2 in enumerate(ops)]
                   for i, o1 in enumerate(ops)])
    return cm, mean


def coherent_ket(alpha, dim):
    from math import factorial

    n = np.arange(dim)
    coeffs = np.array([alpha**k / np.sqrt(float(factorial(k))) for k in n], dtype=complex)
    return np.exp(-abs(alpha) ** 2 / 2) * coeffs


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def reorder_tensor(rho, dims, order):
    """Reorder tensor factors of ``rho``: new factor ``i`` is old factor ``order[i]``."""
    n = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    axes = list(order) + [n + o for o in order]
    new_dims = [dims[o] for o in order]
    size = int(np.prod(new_dims))
    return t.transpose(axes).reshape(size, size)


def random_partition_product(d, k, rng):
    """``rho_k (x) rho_rest`` with the isolated mode ``k`` put back in ABC order."""
    single = random_density(d, rng)
    rest = random_density(d * d, rng)
    rho = np.kron(single, rest)  # factor order (k, rest0, rest1)
    others = [m for m in range(3) if m != k]
    current = [k] + others
    order = [current.index(m) for m in range(3)]
    return reorder_tensor(rho, [d, d, d], order)


def partial_transpose_dense(rho, d, k):
    """Reference partial transpose via explicit loops over basis indices."""
    n = d**3
    out = np.zeros_like(rho)
    basis = list(itertools.product(range(d), repeat=3))
    index = {b: i for i, b in enumerate(basis)}
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            ni, nj = list(bi), list(bj)
            ni[k], nj[k] = bj[k], bi[k]
            out[index[tuple(ni)], index[tuple(nj)]] = rho[i, j]
    assert out.shape == (n, n)
    return out
