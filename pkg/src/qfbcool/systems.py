"""Preset models: the driven qutrit and the antiferromagnetic Heisenberg triangle."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ValidationError
from .model import ModelSpec
from .quantum import dagger, spectral_decompose

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def build_qutrit_preset(f0: str = "default", mode: str = "cooling") -> ModelSpec:
    """``H0 = L = diag(-1, 2, 3)`` with all-ones off-diagonal feedback Hamiltonian.

    ``f0="zero"`` replaces the feedback Hamiltonian with zero, which breaks
    uniqueness of the controlled equilibrium (useful as a negative control).
    """
    H0 = np.diag([-1.0, 2.0, 3.0]).astype(complex)
    if f0 == "default":
        F0 = np.ones((3, 3)) - np.eye(3)
    elif f0 == "zero":
        F0 = np.zeros((3, 3))
    else:
        raise ValidationError(f"unknown f0 variant {f0!r}; expected 'default' or 'zero'")
    return ModelSpec(H0=H0, L=H0, F0=F0, mode=mode, name="qutrit")


def pauli_site_operator(k: str, i: int, n_sites: int = 3) -> np.ndarray:
    """Pauli ``k`` acting on site ``i`` (1-based; site 1 is the leftmost tensor factor)."""
    if k not in PAULI:
        raise ValidationError(f"Pauli label must be one of x, y, z; got {k!r}")
    if not 1 <= i <= n_sites:
        raise ValidationError(f"site index must be in 1..{n_sites}, got {i}")
    factors = [np.eye(2, dtype=complex)] * n_sites
    factors[i - 1] = PAULI[k]
    return reduce(np.kron, factors)


@dataclass(frozen=True)
class HeisenbergParams:
    jx: float = 1.0
    jy: float = 1.0
    jz: float = 2.0
    n_sites: int = 3

    def __post_init__(self):
        if self.n_sites != 3:
            raise ValidationError("only the 3-site ring is supported")
        if not all(np.isfinite([self.jx, self.jy, self.jz])):
            raise ValidationError("couplings must be finite")


def heisenberg_hamiltonian(p: HeisenbergParams) -> np.ndarray:
    n = p.n_sites
    H = np.zeros((2**n, 2**n), dtype=complex)
    for k, J in zip("xyz", (p.jx, p.jy, p.jz)):
        for i in range(1, n + 1):
            j = i % n + 1
            H += J * pauli_site_operator(k, i, n) @ pauli_site_operator(k, j, n)
    return H


def tridiagonal_feedback(dim: int, value: float = 4.0) -> np.ndarray:
    return value * (np.eye(dim, k=1) + np.eye(dim, k=-1))


def build_heisenberg_preset(p: HeisenbergParams | None = None, f0: str = "default", mode: str = "cooling") -> ModelSpec:
    """Heisenberg ring with ``L = H0``.

    The feedback Hamiltonian is tridiagonal (zero diagonal, 4 on the first
    off-diagonals) in the canonical ascending eigenbasis of ``H0`` and is
    rotated back to the computational basis.
    """
    p = p or HeisenbergParams()
    H0 = heisenberg_hamiltonian(p)
    if f0 == "default":
        U = spectral_decompose(H0).eigenbasis
        F0 = U @ tridiagonal_feedback(H0.shape[0]) @ dagger(U)
        F0 = 0.5 * (F0 + dagger(F0))
    elif f0 == "zero":
        F0 = np.zeros_like(H0)
    else:
        raise ValidationError(f"unknown f0 variant {f0!r}; expected 'default' or 'zero'")
    return ModelSpec(H0=H0, L=H0, F0=F0, mode=mode, name="heisenberg")


PRESETS = {
    "qutrit": "3-level system, H0 = L = diag(-1, 2, 3), all-ones off-diagonal F0",
    "heisenberg": "antiferromagnetic Heisenberg triangle (3 qubits, ring), L = H0, tridiagonal F0 in the H0 eigenbasis",
}


def get_preset(name: str, *, jx: float = 1.0, jy: float = 1.0, jz: float = 2.0,
               f0: str = "default", mode: str = "cooling") -> ModelSpec:
    if name == "qutrit":
        return build_qutrit_preset(f0=f0, mode=mode)
    if name == "heisenberg":
        return build_heisenberg_preset(HeisenbergParams(jx, jy, jz), f0=f0, mode=mode)
    raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
