"""Monte Carlo ensembles: many initial conditions, repeated runs per condition.

Randomness is keyed, not sequential. The initial state of condition ``i``
comes from ``SeedSequence(master_seed, spawn_key=(0, i))`` and the noise of
run ``j`` of that condition from ``spawn_key=(1, i, j)``, both feeding the
counter-based Philox generator. Any trajectory can therefore be replayed in
isolation, and results do not depend on how trajectories are spread across
workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .controllers import KINDS, make_controller
from .errors import AssumptionViolation, InvalidDimension, ValidationError
from .integrator import n_steps_for, simulate_batch
from .model import ModelSpec, check_assumptions
from .quantum import random_density, validate_density
from .systems import get_preset

log = logging.getLogger(__name__)

INIT_SCHEMES = ("haar_pure", "ginibre_mixed", "fixed")


def _stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=key)))


def initial_stream(master_seed: int, i: int) -> np.random.Generator:
    return _stream(master_seed, 0, i)


def trajectory_stream(master_seed: int, i: int, j: int) -> np.random.Generator:
    return _stream(master_seed, 1, i, j)


def sample_initial_state(scheme: str, dim: int, rng: np.random.Generator | None = None, rho=None) -> np.ndarray:
    """Draw an initial density matrix.

    ``haar_pure`` normalises a complex Gaussian vector; ``ginibre_mixed``
    returns ``G G^+ / Tr[G G^+]`` for a complex Gaussian ``G``; ``fixed``
    returns ``rho`` after validation.
    """
    if dim < 2:
        raise InvalidDimension(f"dimension must be >= 2, got {dim}")
    if scheme == "fixed":
        if rho is None:
            raise ValidationError("init scheme 'fixed' needs an initial state")
        rho = validate_density(rho)
        if rho.shape[0] != dim:
            raise InvalidDimension(f"fixed initial state has dim {rho.shape[0]}, model has {dim}")
        return np.array(rho)
    if scheme not in INIT_SCHEMES:
        raise ValidationError(f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}")
    return random_density(dim, rng, pure=scheme == "haar_pure")


@dataclass(frozen=True)
class EnsembleConfig:
    preset: str = "qutrit"
    model_params: dict = field(default_factory=dict)
    controller: str = "ideal"
    controller_params: dict = field(default_factory=dict)
    n_initial: int = 1000
    runs_per_initial: int = 20
    T: float = 20.0
    dt: float = 1e-4
    master_seed: int = 0
    sample_every: int = 100
    init_scheme: str = "haar_pure"
    init_state: np.ndarray | None = None

    def __post_init__(self):
        if self.n_initial < 1 or self.runs_per_initial < 1:
            raise ValidationError("n_initial and runs_per_initial must be >= 1")
        n_steps_for(self.T, self.dt)
        if self.sample_every < 1:
            raise ValidationError("sample_every must be >= 1")
        if self.controller not in KINDS:
            raise ValidationError(f"unknown controller kind {self.controller!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValidationError(f"unknown init scheme {self.init_scheme!r}")
        if self.init_scheme == "fixed" and self.init_state is None:
            raise ValidationError("init scheme 'fixed' needs init_state")

    def with_(self, **changes) -> "EnsembleConfig":
        return replace(self, **changes)

    def build_model(self) -> ModelSpec:
        return get_preset(self.preset, **self.model_params)


@dataclass
class EnsembleResult:
    """Ensemble statistics per sample time.

    ``stderr_fidelity`` is the standard error over the per-condition means;
    ``control_duty_cycle`` the fraction of trajectories with ``f = 1``.
    """

    sample_times: np.ndarray
    mean_fidelity: np.ndarray
    stderr_fidelity: np.ndarray
    mean_x_estimate: np.ndarray
    control_duty_cycle: np.ndarray
    n_trajectories_total: int
    condition_fidelity: np.ndarray = field(repr=False)
    mean_x_true: np.ndarray = field(repr=False)
    trajectories: dict | None = field(default=None, repr=False)

    @property
    def final_fidelity(self) -> float:
        return float(self.mean_fidelity[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr_fidelity[-1])


def _run_chunk(spec: ModelSpec, config: EnsembleConfig, rho0s: np.ndarray, keys: list[tuple[int, int]]):
    ctrl = make_controller(config.controller, spec, **config.controller_params)
    rngs = [trajectory_stream(config.master_seed, i, j) for i, j in keys]
    rho0 = np.stack([rho0s[i] for i, _ in keys])
    rec = simulate_batch(spec, ctrl, rho0, config.T, config.dt, rngs, config.sample_every)
    return rec


def run_ensemble(
    config: EnsembleConfig,
    spec: ModelSpec | None = None,
    workers: int = 1,
    batch_size: int = 256,
    keep_trajectories: bool = False,
) -> EnsembleResult:
    """Run ``n_initial x runs_per_initial`` trajectories and reduce them in index order.

    Trajectories are grouped into fixed batches of ``batch_size`` (in
    ``(i, j)`` order) independently of ``workers``, so the result is
    bitwise identical for any worker count.

    Raises
    ------
    AssumptionViolation
        If the model fails :func:`qfbcool.model.check_assumptions`.
    """
    spec = spec if spec is not None else config.build_model()
    report = check_assumptions(spec)
    if not report.passed:
        raise AssumptionViolation("model fails the structural checks:\n" + report.format())
    make_controller(config.controller, spec, **config.controller_params)  # fail fast on bad params

    n_i, n_j = config.n_initial, config.runs_per_initial
    rho0s = np.stack([
        sample_initial_state(config.init_scheme, spec.dim, initial_stream(config.master_seed, i), config.init_state)
        for i in range(n_i)
    ])
    keys = [(i, j) for i in range(n_i) for j in range(n_j)]
    chunks = [keys[s:s + batch_size] for s in range(0, len(keys), batch_size)]
    log.info("running %d trajectories in %d batches (%s controller)", len(keys), len(chunks), config.controller)

    if workers > 1 and len(chunks) > 1:
        from joblib import Parallel, delayed

        recs = Parallel(n_jobs=workers)(delayed(_run_chunk)(spec, config, rho0s, c) for c in chunks)
    else:
        recs = [_run_chunk(spec, config, rho0s, c) for c in chunks]

    fid = np.concatenate([r.fidelity for r in recs]).reshape(n_i, n_j, -1)
    xe = np.concatenate([r.x_estimate for r in recs])
    xt = np.concatenate([r.x_true for r in recs])
    ctl = np.concatenate([r.control for r in recs])

    per_condition = fid.mean(axis=1)
    mean_fid = per_condition.mean(axis=0)
    if n_i > 1:
        stderr = per_condition.std(axis=0, ddof=1) / np.sqrt(n_i)
    else:
        stderr = np.zeros_like(mean_fid)

    trajectories = None
    if keep_trajectories:
        trajectories = {}
        for rec, chunk in zip(recs, chunks):
            for b, key in enumerate(chunk):
                trajectories[key] = {
                    "fidelity": rec.fidelity[b],
                    "x_true": rec.x_true[b],
                    "x_estimate": rec.x_estimate[b],
                    "control": rec.control[b],
                    "y_cumulative": rec.y_cumulative[b],
                }

    return EnsembleResult(
        sample_times=recs[0].sample_times,
        mean_fidelity=mean_fid,
        stderr_fidelity=stderr,
        mean_x_estimate=xe.mean(axis=0),
        control_duty_cycle=ctl.mean(axis=0, dtype=float),
        n_trajectories_total=len(keys),
        condition_fidelity=per_condition,
        mean_x_true=xt.mean(axis=0),
        trajectories=trajectories,
    )
