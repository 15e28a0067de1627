"""Hysteresis switching feedback and its three signal sources.

All controllers are batched: one instance drives ``B`` independent
trajectories and keeps per-trajectory state in arrays of length ``B``.
A single trajectory is simply ``B = 1``.

The simulation loop talks to a controller through three calls::

    ctrl.reset(rho0)              # rho0 has shape (B, N, N)
    f = ctrl.current_f()          # int8 array (B,), applied to the next step
    ctrl.observe(dy, dt, rho)     # after the step; rho is the updated state

Only :class:`IdealController` reads ``rho``; the output-based controllers use
nothing but the measurement increments ``dy``.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import DomainError, InvalidGamma, ValidationError
from .model import ModelSpec
from .quantum import expectation

KINDS = ("free", "ideal", "ergodic", "windowed")


def compute_tau_s(beta: float, epsilon: float) -> float:
    """Activation delay ``[Phi^{-1}((1 + beta)/2) / epsilon]^2``.

    It is the first time at which the estimator noise ``W_t / t`` (variance
    ``1/t``) exceeds ``epsilon`` in magnitude with probability at most
    ``1 - beta``.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    q = NormalDist().inv_cdf(0.5 * (1.0 + beta))
    return (q / epsilon) ** 2


@dataclass(frozen=True)
class HysteresisThresholds:
    """Switch-on (``upper``) and switch-off (``lower``) levels for the signal.

    Cooling: ``f = 1`` once ``x >= upper``, ``f = 0`` once ``x <= lower``.
    Heating (``sign = -1``) mirrors every inequality, so ``upper`` is then
    numerically the smaller of the two levels.
    """

    upper: float
    lower: float
    gamma: float
    sign: int = 1

    @classmethod
    def from_model(cls, spec: ModelSpec, gamma: float | None = None) -> "HysteresisThresholds":
        delta = spec.delta
        lam = spec.target_eigenvalue
        if gamma is None:
            gamma = 0.5 * delta
        lo, hi = sorted((0.0, delta))
        if not lo < gamma < hi:
            raise InvalidGamma(
                f"gamma={gamma} must lie strictly inside ({lo:g}, {hi:g}) for {spec.mode} with delta={delta:g}"
            )
        return cls(
            upper=2 * delta - gamma + 2 * lam,
            lower=2 * delta - 2 * gamma + 2 * lam,
            gamma=float(gamma),
            sign=spec.sign,
        )

    def initial_latch(self, x):
        """Latch value before any history: on only if already past the on-level."""
        x = np.asarray(x, dtype=float)
        return (self.sign * x >= self.sign * self.upper).astype(np.int8)


def hysteresis_update(latch, x, thr: HysteresisThresholds):
    """New control value; inside the band the previous value is kept.

    NaN signals never cross a threshold, so they also keep the latch.
    """
    s = thr.sign
    x = np.asarray(x, dtype=float)
    latch = np.asarray(latch, dtype=np.int8)
    on = s * x >= s * thr.upper
    off = s * x <= s * thr.lower
    out = np.where(on, np.int8(1), np.where(off, np.int8(0), latch)).astype(np.int8)
    return out if out.ndim else int(out)


def ideal_signal(rho, L):
    """``x = 2 Tr[L rho]``, the drift of the measurement record."""
    return 2.0 * expectation(L, rho)


def _ratio(num, span):
    num = np.asarray(num, dtype=float)
    span = np.asarray(span, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(span > 0, num / np.where(span > 0, span, 1.0), np.nan)


def _pack(active, x_hat):
    if np.ndim(x_hat) == 0 and np.ndim(active) == 0:
        return bool(active), float(x_hat)
    return np.broadcast_to(active, np.shape(x_hat)).copy(), x_hat


def ergodic_signal(y_total, t_now, tau_s: float):
    """Running-mean estimate ``y_t / t``.

    Returns ``(active, x_hat)``; ``active`` is false while ``t_now < tau_s``.
    ``x_hat`` is NaN at ``t_now = 0``.
    """
    return _pack(np.asarray(t_now) >= tau_s, _ratio(y_total, t_now))


def windowed_signal(window_sum, t_now, delta: float, tau_s: float):
    """Moving-average estimate ``y^Delta_t / min(t, Delta)``, gated like :func:`ergodic_signal`."""
    return _pack(np.asarray(t_now) >= tau_s, _ratio(window_sum, np.minimum(t_now, delta)))


class Controller:
    """Base class; subclasses implement :meth:`_observe`."""

    kind = "base"

    def __init__(self, thresholds: HysteresisThresholds | None = None):
        self.thresholds = thresholds
        self._latch = np.zeros(0, dtype=np.int8)

    @property
    def batch_size(self) -> int:
        return self._latch.shape[0]

    def reset(self, rho0) -> None:
        rho0 = np.asarray(rho0)
        if rho0.ndim == 2:
            rho0 = rho0[None]
        self._latch = np.zeros(rho0.shape[0], dtype=np.int8)
        self._reset(rho0)

    def _reset(self, rho0) -> None:
        pass

    def observe(self, dy, dt: float, rho=None) -> None:
        self._observe(np.asarray(dy, dtype=float).reshape(self.batch_size), dt, rho)

    def _observe(self, dy, dt, rho) -> None:
        raise NotImplementedError

    def current_f(self) -> np.ndarray:
        return self._latch

    @property
    def x_estimate(self) -> np.ndarray:
        return np.full(self.batch_size, np.nan)

    def describe(self) -> dict:
        return {"kind": self.kind}


class FreeController(Controller):
    """Open loop: ``f`` is always 0."""

    kind = "free"

    def _observe(self, dy, dt, rho) -> None:
        pass


class IdealController(Controller):
    """Hysteresis law driven by the exact drift ``2 Tr[L rho_t]`` of the conditional state."""

    kind = "ideal"

    def __init__(self, thresholds: HysteresisThresholds, L):
        super().__init__(thresholds)
        self.L = np.asarray(L, dtype=np.complex128)
        self._x = np.zeros(0)

    def _reset(self, rho0) -> None:
        self._x = np.atleast_1d(ideal_signal(rho0, self.L))
        self._latch = self.thresholds.initial_latch(self._x)

    def _observe(self, dy, dt, rho) -> None:
        if rho is None:
            raise ValidationError("the ideal controller needs the conditional state")
        rho = np.asarray(rho)
        self._x = np.atleast_1d(ideal_signal(rho.reshape(self.batch_size, *rho.shape[-2:]), self.L))
        self._latch = hysteresis_update(self._latch, self._x, self.thresholds)

    @property
    def x_estimate(self) -> np.ndarray:
        return self._x

    def describe(self) -> dict:
        t = self.thresholds
        return {"kind": self.kind, "gamma": t.gamma, "upper": t.upper, "lower": t.lower}


class ErgodicController(Controller):
    """Hysteresis law driven by ``y_t / t``, held off until ``tau_s``."""

    kind = "ergodic"

    def __init__(self, thresholds: HysteresisThresholds, tau_s: float):
        super().__init__(thresholds)
        self.tau_s = float(tau_s)
        self._dt: float | None = None
        self._count = 0
        self._y = np.zeros(0)

    def _reset(self, rho0) -> None:
        self._dt = None
        self._count = 0
        self._y = np.zeros(self.batch_size)

    def _tick(self, dt: float) -> None:
        if self._dt is None:
            self._dt = float(dt)
        elif dt != self._dt:
            raise ValidationError("output-based controllers require a constant step size")
        self._count += 1

    @property
    def t_now(self) -> float:
        return self._count * self._dt if self._dt is not None else 0.0

    @property
    def y_total(self) -> np.ndarray:
        return self._y

    def signal(self):
        return ergodic_signal(self._y, np.full(self.batch_size, self.t_now), self.tau_s)

    def _observe(self, dy, dt, rho) -> None:
        self._tick(dt)
        self._y += dy
        self._apply(*self.signal())

    def _apply(self, active, x_hat) -> None:
        if np.all(active):
            self._latch = hysteresis_update(self._latch, x_hat, self.thresholds)
        else:
            self._latch = np.zeros(self.batch_size, dtype=np.int8)

    @property
    def x_estimate(self) -> np.ndarray:
        return self.signal()[1]

    def describe(self) -> dict:
        t = self.thresholds
        return {"kind": self.kind, "gamma": t.gamma, "upper": t.upper, "lower": t.lower, "tau_s": self.tau_s}


class WindowedController(ErgodicController):
    """Hysteresis law driven by the moving average of the last ``window_k`` increments.

    Increments live in a ring buffer; the window sum is updated incrementally
    and recomputed exactly after every ``window_k`` further insertions once
    the buffer has filled.
    """

    kind = "windowed"

    def __init__(self, thresholds: HysteresisThresholds, tau_s: float, window_k: int):
        super().__init__(thresholds, tau_s)
        if int(window_k) < 1:
            raise ValidationError(f"window_k must be a positive integer, got {window_k}")
        self.window_k = int(window_k)
        self._buf = np.zeros((0, 0))
        self._pos = 0

    def _reset(self, rho0) -> None:
        super()._reset(rho0)
        self._buf = np.zeros((self.window_k, self.batch_size))
        self._pos = 0

    @property
    def window_sum(self) -> np.ndarray:
        return self._y

    @property
    def delta(self) -> float:
        return self.window_k * self._dt if self._dt is not None else float("nan")

    def signal(self):
        return windowed_signal(self._y, np.full(self.batch_size, self.t_now), self.delta, self.tau_s)

    def _observe(self, dy, dt, rho) -> None:
        self._tick(dt)
        k = self.window_k
        self._y += dy
        if self._count > k:
            self._y -= self._buf[self._pos]
        self._buf[self._pos] = dy
        self._pos = (self._pos + 1) % k
        if self._count > k and (self._count - k) % k == 0:
            self._y = self._buf.sum(axis=0)
        self._apply(*self.signal())

    def describe(self) -> dict:
        d = super().describe()
        d["window_k"] = self.window_k
        return d


def make_controller(
    kind: str,
    spec: ModelSpec,
    gamma: float | None = None,
    beta: float = 0.6,
    epsilon: float | None = None,
    window_k: int = 5000,
    tau_s_override: float | None = None,
) -> Controller:
    """Build a controller for ``spec``.

    ``gamma`` defaults to half the signed spectral gap and ``epsilon`` to its
    magnitude; ``tau_s_override`` bypasses :func:`compute_tau_s`.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown controller kind {kind!r}; expected one of {KINDS}")
    if kind == "free":
        return FreeController()
    thr = HysteresisThresholds.from_model(spec, gamma)
    if kind == "ideal":
        return IdealController(thr, spec.L)
    if tau_s_override is not None:
        tau_s = float(tau_s_override)
        if tau_s < 0:
            raise DomainError(f"tau_s_override must be non-negative, got {tau_s}")
    else:
        tau_s = compute_tau_s(beta, abs(spec.delta) if epsilon is None else epsilon)
    if kind == "ergodic":
        return ErgodicController(thr, tau_s)
    return WindowedController(thr, tau_s, window_k)
