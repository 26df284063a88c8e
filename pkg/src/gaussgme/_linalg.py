"""Small dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import numpy as np


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def real_embedding(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    """``[[re, -im], [im, re]]``: the real image of ``re + i im``."""
    return np.block([[re, -im], [im, re]])


def min_eigh(m: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized (or hermitized) input."""
    if np.iscomplexobj(m):
        return float(np.linalg.eigvalsh(hermitize(m))[0])
    return float(np.linalg.eigvalsh(symmetrize(m))[0])


def max_asymmetry(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.T))) if m.size else 0.0


def max_antihermiticity(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
