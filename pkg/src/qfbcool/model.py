"""Control model ``(H0, L, F0)``: structural checks and average dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, InvalidDimension, StepTooLarge, ValidationError
from .quantum import (
    SpectralDecomposition,
    _frozen,
    apply_dissipator,
    as_hermitian,
    commutator,
    hermiticity_residual,
    spectral_decompose,
)

COMMUTE_TOL = 1e-10
RANK_TOL = 1e-9
MODES = ("cooling", "heating")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Free Hamiltonian ``H0``, measurement operator ``L`` and feedback Hamiltonian ``F0``.

    ``H0`` and ``F0`` must be Hermitian. ``L`` is only required to be square:
    its Hermiticity and the commutation ``[H0, L] = 0`` are reported by
    :func:`check_assumptions` rather than enforced here, so that a failing
    model can still be inspected.
    """

    H0: np.ndarray
    L: np.ndarray
    F0: np.ndarray
    mode: str = "cooling"
    name: str = "custom"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        H0 = as_hermitian(self.H0)
        F0 = as_hermitian(self.F0)
        L = np.asarray(self.L, dtype=np.complex128)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise InvalidDimension(f"L must be square, got shape {L.shape}")
        if not (H0.shape == L.shape == F0.shape):
            raise DimensionMismatch(f"H0 {H0.shape}, L {L.shape}, F0 {F0.shape} must share a dimension")
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "L", _frozen(L))

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return spectral_decompose(self.L)

    @property
    def sign(self) -> int:
        """+1 when cooling towards the lowest eigenvalue, -1 when heating."""
        return 1 if self.mode == "cooling" else -1

    @property
    def target_index(self) -> int:
        return 0 if self.mode == "cooling" else self.spectrum.n_distinct - 1

    @property
    def target_eigenvalue(self) -> float:
        return float(self.spectrum.eigenvalues[self.target_index])

    @property
    def target_projector(self) -> np.ndarray:
        return self.spectrum.projectors[self.target_index]

    @property
    def delta(self) -> float:
        """Signed gap: ``lambda_2 - lambda_1`` (cooling) or ``lambda_{r-1} - lambda_r`` (heating)."""
        return self.spectrum.gap_low if self.mode == "cooling" else self.spectrum.gap_high

    def with_(self, **changes) -> "ModelSpec":
        kw = dict(H0=self.H0, L=self.L, F0=self.F0, mode=self.mode, name=self.name)
        kw.update(changes)
        return ModelSpec(**kw)


@dataclass(frozen=True)
class Check:
    passed: bool
    value: float


@dataclass(frozen=True)
class AssumptionReport:
    a1_hermitian: Check
    a2_commute: Check
    a3_spectral: Check
    unique_equilibrium: Check
    mode: str = "cooling"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks().values())

    def checks(self) -> dict[str, Check]:
        return {
            "a1_hermitian": self.a1_hermitian,
            "a2_commute": self.a2_commute,
            "a3_spectral": self.a3_spectral,
            "unique_equilibrium": self.unique_equilibrium,
        }

    def format(self) -> str:
        labels = {
            "a1_hermitian": "residual",
            "a2_commute": "residual",
            "a3_spectral": "margin",
            "unique_equilibrium": "rank",
        }
        lines = [f"mode: {self.mode}"]
        for key, chk in self.checks().items():
            val = f"{int(chk.value)}" if key == "unique_equilibrium" else f"{chk.value:.6g}"
            lines.append(f"{key}: {'PASS' if chk.passed else 'FAIL'} ({labels[key]}={val})")
        return "\n".join(lines)


def check_assumptions(
    spec: ModelSpec,
    hermit_tol: float = 1e-10,
    commute_tol: float = COMMUTE_TOL,
    rank_tol: float = RANK_TOL,
) -> AssumptionReport:
    """Evaluate the structural assumptions the feedback law relies on.

    The spectral margin is ``N*lambda_2 - Tr[L]`` for cooling and
    ``Tr[L] - N*lambda_{r-1}`` for heating; it passes iff strictly positive.
    Failures are report entries, never exceptions.
    """
    res1 = hermiticity_residual(spec.L)
    a1 = Check(res1 <= hermit_tol, res1)
    res2 = float(np.linalg.norm(commutator(spec.H0, spec.L)))
    a2 = Check(res2 <= commute_tol, res2)
    if a1.passed:
        try:
            spectrum = spec.spectrum
        except ValidationError:
            a3 = Check(False, float("nan"))
        else:
            n = spec.dim
            tr = float(np.trace(spec.L).real)
            if spec.mode == "cooling":
                margin = n * spectrum.eigenvalues[1] - tr
            else:
                margin = tr - n * spectrum.eigenvalues[-2]
            a3 = Check(bool(margin > 0), float(margin))
    else:
        a3 = Check(False, float("nan"))
    eq = verify_unique_equilibrium(spec, rank_tol=rank_tol)
    return AssumptionReport(a1, a2, a3, Check(eq.unique, float(eq.rank)), mode=spec.mode)


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of ``n x n`` Hermitian matrices, shape ``(n*n, n, n)``."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), complex)
            e[i, j] = e[j, i] = s
            out.append(e)
            e = np.zeros((n, n), complex)
            e[i, j] = -1j * s
            e[j, i] = 1j * s
            out.append(e)
    return np.array(out)


def vectorize(rho) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in :func:`hermitian_basis`."""
    rho = np.asarray(rho, dtype=np.complex128)
    basis = hermitian_basis(rho.shape[-1])
    return np.einsum("aij,...ji->...a", basis, rho).real


def unvectorize(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    n = int(round(np.sqrt(vec.shape[-1])))
    return np.einsum("...a,aij->...ij", vec, hermitian_basis(n))


def lindblad_generator(H, L, rho) -> np.ndarray:
    """``-i[H, rho] + D_L[rho]``."""
    H = np.asarray(H, dtype=np.complex128)
    return -1j * (H @ rho - rho @ H) + apply_dissipator(L, rho)


def build_liouvillian(H, L) -> np.ndarray:
    """Real ``N^2 x N^2`` matrix of ``rho -> -i[H, rho] + D_L[rho]`` on Hermitian matrices."""
    H = np.asarray(H, dtype=np.complex128)
    L = np.asarray(L, dtype=np.complex128)
    if H.shape != L.shape or H.ndim != 2:
        raise DimensionMismatch(f"H {H.shape} and L {L.shape} must be equal square shapes")
    basis = hermitian_basis(H.shape[0])
    images = lindblad_generator(H, L, basis)
    return np.einsum("aij,bji->ab", basis, images).real


@dataclass(frozen=True)
class EquilibriumReport:
    unique: bool
    rank: int
    singular_values: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)


def verify_unique_equilibrium(spec: ModelSpec, rank_tol: float = RANK_TOL, f: float = 1.0) -> EquilibriumReport:
    """Rank test for uniqueness of the maximally mixed equilibrium.

    Singular values below ``rank_tol * s_max`` count as zero; the equilibrium
    is unique iff the rank of the controlled Liouvillian is ``N^2 - 1``.
    ``kernel`` holds the right-singular vectors of the zero singular values.
    """
    lv = build_liouvillian(spec.H0 + f * spec.F0, spec.L)
    _, s, vh = np.linalg.svd(lv)
    rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    n2 = spec.dim ** 2
    return EquilibriumReport(unique=rank == n2 - 1, rank=rank, singular_values=s, kernel=vh[rank:].T)


@dataclass(frozen=True)
class AverageEvolution:
    """Sampled deterministic trajectory of the average state.

    ``lyapunov`` holds ``V(sigma_t) = Tr[L sigma_t] - lambda_target``;
    ``witness_time`` is the first step time at which ``V`` is on the target
    side of ``delta`` (below it when cooling), or ``None``.
    """

    times: np.ndarray
    states: np.ndarray
    lyapunov: np.ndarray
    delta: float
    witness_time: float | None


def evolve_average(
    spec: ModelSpec,
    f: int,
    rho0,
    T: float,
    dt: float = 1e-3,
    sample_every: int = 100,
    trace_tol: float = 1e-6,
) -> AverageEvolution:
    """Integrate ``d sigma/dt = -i[H0 + f F0, sigma] + D_L[sigma]`` with classical RK4.

    Raises
    ------
    StepTooLarge
        If the trace drifts by more than ``trace_tol`` or the Frobenius norm
        of the state exceeds one (unstable step size).
    """
    if not dt > 0 or T < dt:
        raise ValidationError(f"need dt > 0 and T >= dt, got dt={dt}, T={T}")
    if f not in (0, 1):
        raise ValidationError(f"f must be 0 or 1, got {f}")
    H = spec.H0 + f * spec.F0
    L = spec.L
    sigma = np.array(rho0, dtype=np.complex128)
    lam = spec.target_eigenvalue
    delta = spec.delta
    sign = spec.sign
    n_steps = int(round(T / dt))

    def rhs(s):
        return lindblad_generator(H, L, s)

    def V(s):
        return float(np.einsum("ij,ji->", L, s).real) - lam

    times, states, vs = [0.0], [sigma.copy()], [V(sigma)]
    witness = 0.0 if sign * vs[0] < sign * delta else None
    for k in range(1, n_steps + 1):
        k1 = rhs(sigma)
        k2 = rhs(sigma + 0.5 * dt * k1)
        k3 = rhs(sigma + 0.5 * dt * k2)
        k4 = rhs(sigma + dt * k3)
        sigma = sigma + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(np.trace(sigma) - 1.0)
        if drift > trace_tol:
            raise StepTooLarge(f"trace drifted by {drift:.3e} at t={k * dt:.6g}; reduce dt")
        # RK4 keeps the trace exactly, so instability shows up as growth instead
        nrm = np.linalg.norm(sigma)
        if not nrm <= 1.0 + trace_tol:
            raise StepTooLarge(f"state norm {nrm:.3e} exceeds 1 at t={k * dt:.6g}; reduce dt")
        v = V(sigma)
        if witness is None and sign * v < sign * delta:
            witness = k * dt
        if k % sample_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(sigma.copy())
            vs.append(v)
    return AverageEvolution(
        times=np.array(times),
        states=np.array(states),
        lyapunov=np.array(vs),
        delta=delta,
        witness_time=witness,
    )
