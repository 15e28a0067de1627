"""Positivity-preserving integration of the controlled diffusive SME.

Each step applies the Kraus-form update

    dy  = Tr[(L + L^+) rho] dt + dW
    M   = I + (-i H_eff - L^+ L / 2) dt + L dy
    rho <- M rho M^+ / Tr[M rho M^+]

which keeps ``rho`` positive semidefinite and trace one by construction.
The same ``dW`` drives the state update and the measurement record.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kraus_step_batch
from .controllers import Controller
from .errors import ControllerFault, DegenerateNormalization, DimensionMismatch, ValidationError
from .model import ModelSpec
from .quantum import dagger, expectation

NORM_FLOOR = 1e-14
NOISE_CHUNK = 4096


@dataclass(frozen=True)
class StepResult:
    rho_next: np.ndarray
    dy: np.ndarray | float
    x_true: np.ndarray | float


def rouchon_step(H_eff, L, rho, dt: float, dW) -> StepResult:
    """One Kraus-form step; ``rho`` may carry leading batch axes matching ``dW``.

    ``x_true`` is ``Tr[(L + L^+) rho]`` evaluated before the step.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    H_eff = np.asarray(H_eff, dtype=np.complex128)
    L = np.asarray(L, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    if not (H_eff.shape == L.shape == rho.shape[-2:]):
        raise DimensionMismatch(f"H_eff {H_eff.shape}, L {L.shape}, rho {rho.shape[-2:]}")
    n = L.shape[0]
    Ld = dagger(L)
    x = expectation(L + Ld, rho)
    dy = np.asarray(x) * dt + np.asarray(dW, dtype=float)
    M = np.eye(n) + (-1j * H_eff - 0.5 * Ld @ L) * dt + np.asarray(dy)[..., None, None] * L
    out = M @ rho @ dagger(M)
    tr = np.einsum("...ii->...", out).real
    if np.min(tr) < NORM_FLOOR:
        raise DegenerateNormalization(f"Tr[M rho M^+] = {np.min(tr):.3e}; dt={dt} is too large for this model")
    out = out / np.asarray(tr)[..., None, None]
    if np.ndim(dy) == 0:
        return StepResult(out, float(dy), float(x))
    return StepResult(out, dy, x)


def step_factors(spec: ModelSpec, dt: float):
    """Precomputed ``(A0, A1, L, L + L^+)`` for :func:`qfbcool._kernels.kraus_step_batch`."""
    n = spec.dim
    L = np.ascontiguousarray(spec.L)
    LdL = dagger(L) @ L
    base = np.eye(n) - 0.5 * LdL * dt
    A0 = np.ascontiguousarray(base - 1j * spec.H0 * dt)
    A1 = np.ascontiguousarray(base - 1j * (spec.H0 + spec.F0) * dt)
    return A0, A1, L, np.ascontiguousarray(L + dagger(L))


@dataclass
class BatchRecord:
    """Sampled observables of ``B`` trajectories; per-trajectory arrays have shape ``(B, S)``."""

    sample_times: np.ndarray
    fidelity: np.ndarray
    x_true: np.ndarray
    x_estimate: np.ndarray
    control: np.ndarray
    y_cumulative: np.ndarray
    final_states: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TrajectoryRecord:
    sample_times: np.ndarray
    fidelity: np.ndarray
    x_true: np.ndarray
    x_estimate: np.ndarray
    control: np.ndarray
    y_cumulative: np.ndarray
    final_state: np.ndarray = field(repr=False)
    seed_info: str = ""


def n_steps_for(T: float, dt: float) -> int:
    if not dt > 0 or T < dt:
        raise ValidationError(f"need dt > 0 and T >= dt, got dt={dt}, T={T}")
    return int(round(T / dt))


def simulate_batch(
    spec: ModelSpec,
    controller: Controller,
    rho0,
    T: float,
    dt: float,
    rngs,
    sample_every: int = 100,
) -> BatchRecord:
    """Integrate ``B`` closed-loop trajectories side by side.

    ``rngs[b]`` is the private noise stream of trajectory ``b``; draws are
    consumed strictly in step order, so a trajectory's path does not depend
    on which other trajectories share its batch. At step ``k`` the control
    value comes from the controller *before* it sees ``dy_k``.
    """
    rho = np.array(rho0, dtype=np.complex128)
    if rho.ndim == 2:
        rho = rho[None]
    B, n = rho.shape[0], rho.shape[-1]
    if n != spec.dim:
        raise DimensionMismatch(f"initial state dim {n} vs model dim {spec.dim}")
    if len(rngs) != B:
        raise ValidationError(f"need one noise stream per trajectory ({B}), got {len(rngs)}")
    sample_every = int(sample_every)
    if sample_every < 1:
        raise ValidationError("sample_every must be >= 1")
    n_steps = n_steps_for(T, dt)
    n_samples = n_steps // sample_every + 1
    A0, A1, L, Lsum = step_factors(spec, dt)
    proj = spec.target_projector
    sqdt = np.sqrt(dt)

    fid = np.empty((B, n_samples))
    xt = np.empty((B, n_samples))
    xe = np.empty((B, n_samples))
    ctl = np.empty((B, n_samples), dtype=np.int8)
    ycum = np.empty((B, n_samples))
    y = np.zeros(B)

    controller.reset(rho)
    if controller.batch_size != B:
        raise ControllerFault("controller batch size does not match the number of trajectories")

    def current_f():
        f = np.asarray(controller.current_f())
        if f.shape != (B,) or not np.all((f == 0) | (f == 1)):
            raise ControllerFault(f"controller returned a non-binary control {f!r}")
        return f.astype(np.int8, copy=False)

    def record(m):
        fid[:, m] = expectation(proj, rho)
        xt[:, m] = expectation(Lsum, rho)
        xe[:, m] = controller.x_estimate
        ctl[:, m] = current_f()
        ycum[:, m] = y

    record(0)
    x_buf = np.empty(B)
    dy_buf = np.empty(B)
    noise = np.empty((0, B))
    draw = np.empty((B, NOISE_CHUNK))
    for k in range(n_steps):
        c = k % NOISE_CHUNK
        if c == 0:
            size = min(NOISE_CHUNK, n_steps - k)
            for b in range(B):
                rngs[b].standard_normal(size, out=draw[b, :size])
            noise = np.ascontiguousarray(draw[:, :size].T) * sqdt
        f = current_f()
        min_tr = kraus_step_batch(rho, A0, A1, L, Lsum, f, noise[c], dt, x_buf, dy_buf)
        if not min_tr >= NORM_FLOOR:
            raise DegenerateNormalization(
                f"Tr[M rho M^+] = {min_tr:.3e} at t={(k + 1) * dt:.6g}; dt={dt} is too large for this model"
            )
        y += dy_buf
        controller.observe(dy_buf, dt, rho)
        if (k + 1) % sample_every == 0:
            record((k + 1) // sample_every)

    times = np.arange(n_samples) * (sample_every * dt)
    return BatchRecord(times, fid, xt, xe, ctl, ycum, rho)


def _seed_info(rng) -> str:
    seq = getattr(rng.bit_generator, "seed_seq", None)
    name = type(rng.bit_generator).__name__
    if seq is None:
        return name
    return f"{name}(entropy={seq.entropy}, spawn_key={tuple(seq.spawn_key)})"


def simulate_trajectory(
    spec: ModelSpec,
    controller: Controller,
    rho0,
    T: float,
    dt: float,
    rng,
    sample_every: int = 100,
) -> TrajectoryRecord:
    """Single closed-loop trajectory; ``rng`` is a ``Generator`` or an integer seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))
    rec = simulate_batch(spec, controller, np.asarray(rho0)[None], T, dt, [rng], sample_every)
    return TrajectoryRecord(
        sample_times=rec.sample_times,
        fidelity=rec.fidelity[0],
        x_true=rec.x_true[0],
        x_estimate=rec.x_estimate[0],
        control=rec.control[0],
        y_cumulative=rec.y_cumulative[0],
        final_state=rec.final_states[0],
        seed_info=_seed_info(rng),
    )
