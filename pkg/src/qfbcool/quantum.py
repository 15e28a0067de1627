"""Dense quantum linear algebra: states, Hermitian operators, superoperators.

Operators and states are plain complex ``numpy`` arrays. The validating
constructors (:func:`as_hermitian`, :func:`validate_density`) return
read-only copies so that validated objects can be shared freely between
trajectory workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDimension,
    NotHermitian,
    NotPositive,
    SingleEigenvalue,
    TraceNotOne,
)

HERMIT_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
CLUSTER_TOL = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _square(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDimension(f"{name} must be a square 2-D array, got shape {m.shape}")
    return m


def hermiticity_residual(m: np.ndarray) -> float:
    """Largest entrywise deviation ``max |m - m^dagger|``."""
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def as_hermitian(m, hermit_tol: float = HERMIT_TOL) -> np.ndarray:
    """Validate ``m`` as a Hermitian operator of dimension >= 2.

    Returns a read-only complex copy.
    """
    m = _square(m, "operator")
    if m.shape[0] < 2:
        raise InvalidDimension(f"operator dimension must be >= 2, got {m.shape[0]}")
    res = hermiticity_residual(m)
    if res > hermit_tol:
        raise NotHermitian(f"max |A - A^dagger| = {res:.3e} exceeds hermit_tol={hermit_tol:.1e}")
    return _frozen(m)


def validate_density(
    m,
    hermit_tol: float = HERMIT_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> np.ndarray:
    """Validate ``m`` as a density matrix and return a read-only copy.

    Raises
    ------
    NotHermitian, TraceNotOne, NotPositive
        The message carries the measured violation.
    """
    m = _square(m, "density matrix")
    res = hermiticity_residual(m)
    if res > hermit_tol:
        raise NotHermitian(f"max |rho - rho^dagger| = {res:.3e} exceeds hermit_tol={hermit_tol:.1e}")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_tol:
        raise TraceNotOne(f"|Tr[rho] - 1| = {abs(tr - 1.0):.3e} exceeds trace_tol={trace_tol:.1e}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + dagger(m)))[0])
    if min_eig < -psd_tol:
        raise NotPositive(f"minimum eigenvalue {min_eig:.3e} is below -psd_tol={-psd_tol:.1e}")
    return _frozen(m)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _check_dims(op: np.ndarray, rho: np.ndarray) -> None:
    if op.shape[-2:] != rho.shape[-2:]:
        raise DimensionMismatch(f"operator shape {op.shape[-2:]} vs state shape {rho.shape[-2:]}")


def apply_dissipator(L, rho) -> np.ndarray:
    """Lindblad dissipator ``L rho L^+ - 1/2 {L^+ L, rho}``.

    Accepts a stack of states with shape ``(..., N, N)``.
    """
    L = np.asarray(L, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    _check_dims(L, rho)
    Ld = dagger(L)
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def apply_innovation(L, rho) -> np.ndarray:
    """Measurement backaction term ``L rho + rho L^+ - Tr[(L + L^+) rho] rho``."""
    L = np.asarray(L, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    _check_dims(L, rho)
    Ld = dagger(L)
    expect = np.einsum("...ij,ji->...", rho, L + Ld)
    return L @ rho + rho @ Ld - expect[..., None, None] * rho


def expectation(op, rho) -> np.ndarray | float:
    """``Re Tr[op rho]``; broadcasts over leading axes of ``rho``."""
    op = np.asarray(op, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    _check_dims(op, rho)
    val = np.einsum("...ij,ji->...", rho, op).real
    return float(val) if np.ndim(val) == 0 else val


def subspace_fidelity(rho, projector) -> np.ndarray | float:
    """Population ``Tr[P rho]`` of the subspace with orthogonal projector ``P``.

    The projector is not re-validated; build it with :func:`spectral_decompose`.
    """
    return expectation(projector, rho)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues (ascending) of a Hermitian operator with projectors.

    ``bases[i]`` is an ``N x m_i`` matrix whose orthonormal columns span the
    i-th eigenspace, in a canonical basis (see :func:`spectral_decompose`).
    """

    eigenvalues: np.ndarray
    projectors: tuple
    bases: tuple

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.bases)

    @property
    def n_distinct(self) -> int:
        return len(self.eigenvalues)

    @property
    def gap_low(self) -> float:
        """``lambda_2 - lambda_1`` (positive)."""
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def gap_high(self) -> float:
        """``lambda_{r-1} - lambda_r`` (negative)."""
        return float(self.eigenvalues[-2] - self.eigenvalues[-1])

    @property
    def eigenbasis(self) -> np.ndarray:
        """Unitary whose columns are the canonical eigenvectors, ascending."""
        return np.hstack(self.bases)


def _canonical_basis(vecs: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    # Gram-Schmidt over the columns of the eigenspace projector, in index order.
    # The projector is basis independent, so the result does not depend on
    # which eigenvectors the solver happened to return.
    m = vecs.shape[1]
    proj = vecs @ dagger(vecs)
    out: list[np.ndarray] = []
    for col in range(proj.shape[0]):
        v = proj[:, col].copy()
        for u in out:
            v -= (u.conj() @ v) * u
        for u in out:  # second pass for orthogonality at machine precision
            v -= (u.conj() @ v) * u
        nrm = np.linalg.norm(v)
        if nrm > tol:
            out.append(v / nrm)
        if len(out) == m:
            break
    if len(out) < m:  # pragma: no cover - projector columns always span the space
        raise RuntimeError("failed to build eigenspace basis")
    basis = np.column_stack(out)
    for k in range(m):
        col = basis[:, k]
        mag = np.abs(col)
        idx = int(np.flatnonzero(mag >= mag.max() - 1e-10)[0])
        basis[:, k] = col * (abs(col[idx]) / col[idx])
    return basis


def spectral_decompose(A, cluster_tol: float = CLUSTER_TOL) -> SpectralDecomposition:
    """Group the eigenvalues of a Hermitian operator into distinct levels.

    Two consecutive sorted eigenvalues belong to the same level iff their gap
    is at most ``cluster_tol``. Within a level the eigenvectors are
    orthonormalised in a canonical order and phase-fixed so that the
    largest-magnitude entry of each vector is real and positive.

    Raises
    ------
    SingleEigenvalue
        If only one distinct level exists.
    """
    A = as_hermitian(A)
    w, v = np.linalg.eigh(A)
    groups: list[list[int]] = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[k - 1] > cluster_tol:
            groups.append([k])
        else:
            groups[-1].append(k)
    if len(groups) < 2:
        raise SingleEigenvalue(f"operator has a single distinct eigenvalue {w.mean():.6g}")
    eigenvalues = np.array([w[g].mean() for g in groups])
    bases = tuple(_frozen(_canonical_basis(v[:, g])) for g in groups)
    projectors = tuple(_frozen(b @ dagger(b)) for b in bases)
    eigenvalues.setflags(write=False)
    return SpectralDecomposition(eigenvalues=eigenvalues, projectors=projectors, bases=bases)


def maximally_mixed(dim: int) -> np.ndarray:
    return _frozen(np.eye(dim) / dim)


def random_density(dim: int, rng: np.random.Generator, pure: bool = False) -> np.ndarray:
    """Haar-random pure state or Ginibre-ensemble mixed state."""
    if dim < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {dim}")
    if pure:
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
