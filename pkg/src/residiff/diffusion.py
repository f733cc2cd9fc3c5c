"""Forward and reverse diffusion over solution vectors.

Two processes share one interface: a discrete-grid DDPM that noises the
residue x_res = X_d - x0 under a schedule (alpha, beta), and a decoupled
continuous process x_t = x0 + t*x_res + sqrt(t)*eps whose reverse step is
analytical, so one network call per step suffices at any step count.

Reverse steps are exact Gaussian conditionals of their forward marginals:
given x_t and predictions (x_res, eps), the previous-time mean and variance
follow in closed form, and variance 0 makes the step deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decoding import Heatmap
from .instances import SolutionVector

PROCESSES = ("decoupled", "residual_ddpm")


class ShapeError(ValueError):
    """Vector length does not match the instance's variable space."""


class DegenerateScheduleError(ValueError):
    """Schedule coefficients vanish where the reverse step divides by them."""


class AlreadyTerminalError(ValueError):
    """Reverse step requested at t = 0."""


@dataclass(eq=False)
class Schedule:
    """Noise schedule: scalar maps alpha, beta on [0, 1] plus grid size T.

    alpha must fall from 1, beta must rise from 0; both are checked on the
    uniform T-point grid at construction.
    """

    alpha: Callable[[float], float]
    beta: Callable[[float], float]
    T: int = 1000

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        grid = np.linspace(0.0, 1.0, self.T + 1)
        a = np.array([self.alpha(float(t)) for t in grid])
        b = np.array([self.beta(float(t)) for t in grid])
        if abs(a[0] - 1.0) > 1e-12 or abs(b[0]) > 1e-12:
            raise ValueError("schedule must satisfy alpha(0)=1, beta(0)=0")
        if np.any(np.diff(a) > 1e-12) or np.any(a < -1e-12) or np.any(a > 1 + 1e-12):
            raise ValueError("alpha must be non-increasing with values in [0, 1]")
        if np.any(np.diff(b) < -1e-12) or np.any(b < -1e-12):
            raise ValueError("beta must be non-decreasing and non-negative")


def linear_schedule(T: int = 1000) -> Schedule:
    """alpha_t = 1 - t, beta_t = sqrt(t): variance grows linearly in t,
    which makes the discrete-grid process agree with the decoupled one."""
    return Schedule(alpha=lambda t: 1.0 - t, beta=math.sqrt, T=T)


@dataclass(eq=False)
class DiffusionState:
    """Noisy solution vector x at time t."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.x.ndim != 1:
            raise ValueError("state x must be one-dimensional")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("state x must be finite")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"state t must lie in [0, 1], got {self.t}")


@dataclass(eq=False)
class ResiduePair:
    """(x_res, eps) pair, predicted or ground truth.

    Ground-truth pairs satisfy x_res = X_d - x0 exactly.
    """

    x_res: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        self.x_res = np.ascontiguousarray(self.x_res, dtype=np.float64)
        self.eps = np.ascontiguousarray(self.eps, dtype=np.float64)
        if self.x_res.shape != self.eps.shape or self.x_res.ndim != 1:
            raise ValueError("x_res and eps must be one-dimensional, same length")
        if not (np.all(np.isfinite(self.x_res)) and np.all(np.isfinite(self.eps))):
            raise ValueError("residue pair must be finite")


@dataclass(eq=False)
class SamplerConfig:
    """Reverse-process settings: K steps of the chosen process.

    The decoupled process uses the uniform step size 1/K; the DDPM variant
    walks the same uniform grid through ``schedule``.
    """

    K: int
    process: str = "decoupled"
    seed: int | None = None
    schedule: Schedule = field(default_factory=linear_schedule)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}, got {self.process!r}")


def _check_t(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")


def forward_residual(
    x0: SolutionVector,
    x_res: np.ndarray,
    t: float,
    sched: Schedule,
    rng: np.random.Generator,
) -> tuple[DiffusionState, np.ndarray]:
    """Draw x_t = x0 + (1 - alpha_t) * x_res + beta_t * eps.

    Returns the state together with the drawn eps so callers can build
    ground-truth training pairs.
    """
    _check_t(t)
    x_res = np.asarray(x_res, dtype=np.float64)
    if x_res.shape != x0.values.shape:
        raise ShapeError("x_res length does not match x0")
    eps = rng.standard_normal(x0.values.shape[0])
    a, b = sched.alpha(t), sched.beta(t)
    x = x0.values + (1.0 - a) * x_res + b * eps
    return DiffusionState(x=x, t=t), eps


def reverse_residual_step(
    state: DiffusionState,
    pred: ResiduePair,
    t_prev: float,
    sched: Schedule,
    rng: np.random.Generator,
) -> DiffusionState:
    """One DDPM reverse step from state.t back to t_prev.

    The transition is the conditional of the forward marginal:

        u      = x_t - (a_prev - a_t) * x_res - (b_t^2 - b_prev^2)/b_t * eps
        sigma2 = b_prev^2 * (b_t^2 - b_prev^2) / b_t^2

    so equal adjacent schedule values give u = x_t with sigma2 = 0, and a
    final step onto beta = 0 is deterministic.
    """
    if not 0.0 <= t_prev < state.t:
        raise ValueError(f"need 0 <= t_prev < t, got t_prev={t_prev}, t={state.t}")
    if pred.x_res.shape != state.x.shape:
        raise ShapeError("prediction length does not match state")
    a_t, b_t = sched.alpha(state.t), sched.beta(state.t)
    a_prev, b_prev = sched.alpha(t_prev), sched.beta(t_prev)
    if a_prev * b_t * b_t == 0.0:
        raise DegenerateScheduleError(
            f"alpha({t_prev}) * beta({state.t})^2 vanishes; step undefined"
        )
    gap = b_t * b_t - b_prev * b_prev
    u = state.x - (a_prev - a_t) * pred.x_res - (gap / b_t) * pred.eps
    sigma2 = b_prev * b_prev * gap / (b_t * b_t)
    if sigma2 > 0.0:
        u = u + math.sqrt(sigma2) * rng.standard_normal(u.shape[0])
    return DiffusionState(x=u, t=t_prev)


def forward_decoupled(
    x0: SolutionVector,
    x_res: np.ndarray,
    t: float,
    rng: np.random.Generator,
) -> tuple[DiffusionState, np.ndarray]:
    """Draw x_t = x0 + t * x_res + sqrt(t) * eps.

    The residue is constant over the trajectory, so its drift integrates
    to t * x_res.  Returns the state and the drawn eps.
    """
    _check_t(t)
    x_res = np.asarray(x_res, dtype=np.float64)
    if x_res.shape != x0.values.shape:
        raise ShapeError("x_res length does not match x0")
    eps = rng.standard_normal(x0.values.shape[0])
    x = x0.values + t * x_res + math.sqrt(t) * eps
    return DiffusionState(x=x, t=t), eps


def reverse_decoupled_step(
    state: DiffusionState,
    pred: ResiduePair,
    dt: float,
    rng: np.random.Generator,
) -> DiffusionState:
    """One analytical reverse step of size dt.

        u      = x_t - dt * x_res - dt * eps / sqrt(t)
        sigma2 = dt * (t - dt) / t

    dt = t lands exactly on t = 0 with zero variance, recovering x0 in a
    single step when the predictions are exact.
    """
    t = state.t
    if t == 0.0:
        raise AlreadyTerminalError("state is already at t = 0")
    if not 0.0 < dt <= t:
        raise ValueError(f"need 0 < dt <= t, got dt={dt}, t={t}")
    if pred.x_res.shape != state.x.shape:
        raise ShapeError("prediction length does not match state")
    u = state.x - dt * pred.x_res - (dt / math.sqrt(t)) * pred.eps
    sigma2 = dt * (t - dt) / t
    if sigma2 > 0.0:
        u = u + math.sqrt(sigma2) * rng.standard_normal(u.shape[0])
    return DiffusionState(x=u, t=t - dt)


def _as_pair(out, n: int) -> ResiduePair:
    x_res = np.asarray(out.x_res_hat, dtype=np.float64)
    eps = np.asarray(out.eps_hat, dtype=np.float64)
    if x_res.shape != (n,) or eps.shape != (n,):
        raise ShapeError(
            f"denoiser returned shapes {x_res.shape}/{eps.shape}, expected ({n},)"
        )
    return ResiduePair(x_res=x_res, eps=eps)


def sample_heatmap(
    denoiser,
    inst,
    X_d: SolutionVector,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    trace: list | None = None,
) -> Heatmap:
    """Run the reverse process from x_1 = X_d + eps down to t = 0.

    The denoiser is queried exactly K times, once per step.  The terminal
    x_0 estimate maps to scores h = 0.5 * (x_0 + 1), clamped to [0, 1].
    When ``trace`` is a list, every visited (t, x_t) is appended to it.
    """
    n = inst.num_variables
    if X_d.values.shape[0] != n:
        raise ShapeError("X_d length does not match the instance")
    x = X_d.values + rng.standard_normal(n)
    state = DiffusionState(x=x, t=1.0)
    if trace is not None:
        trace.append((state.t, state.x.copy()))
    K = cfg.K
    for j in range(1, K + 1):
        pred = _as_pair(denoiser(inst, state), n)
        if cfg.process == "decoupled":
            t_next = (K - j) / K
            state = reverse_decoupled_step(state, pred, state.t - t_next, rng)
        else:
            state = reverse_residual_step(state, pred, (K - j) / K, cfg.schedule, rng)
        if trace is not None:
            trace.append((state.t, state.x.copy()))
    return Heatmap(scores=np.clip(0.5 * (state.x + 1.0), 0.0, 1.0))
