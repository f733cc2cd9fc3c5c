"""Supervised training of the predictor and its gradient verification.

Each step draws a random time, noises the label through the decoupled
forward process, and regresses both the residue and the drawn noise.
Gradients are the exact reverse-mode ones from nets._backward; grad_check
compares them against central finite differences parameter by parameter.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import nets
from .diffusion import DiffusionState, ResiduePair, ShapeError, forward_decoupled


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the offending step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass(eq=False)
class TrainConfig:
    """Optimizer and schedule settings.

    time_rule fixes how diffusion times are drawn per example; "uniform"
    means t ~ U(0, 1] (zero excluded so the noise term never vanishes).
    optimizer is "sgd" (plain, with optional momentum) or "adam"; clip
    bounds the global gradient norm per update, because the sum-form loss
    produces occasional spikes that plain SGD cannot survive.
    """

    lr: float = 1e-3
    epochs: int = 1
    batch_size: int = 32
    seed: int = 0
    momentum: float = 0.0
    time_rule: str = "uniform"
    optimizer: str = "sgd"
    clip: float = 10.0

    def __post_init__(self):
        if self.lr < 0:
            # 0 is admitted so a no-op run can prove params stay untouched
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.time_rule != "uniform":
            raise ValueError(f"unknown time_rule {self.time_rule!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.clip > 0:
            raise ValueError(f"clip must be > 0, got {self.clip}")


def loss(pred: nets.DenoiserOutput, truth: ResiduePair) -> float:
    """Sum of squared errors over both targets and all coordinates."""
    if pred.x_res_hat.shape != truth.x_res.shape:
        raise ShapeError(
            f"prediction length {pred.x_res_hat.shape} != truth {truth.x_res.shape}"
        )
    dr = pred.x_res_hat - truth.x_res
    de = pred.eps_hat - truth.eps
    return float(dr @ dr + de @ de)


def _loss_and_grads(params, fs, inst, x0, X_d, t, rng):
    """One example's loss and exact parameter gradients."""
    x_res = X_d.values - x0.values
    state, eps = forward_decoupled(x0, x_res, t, rng)
    res, eps_hat, cache = nets._forward(params, fs, state.x, state.t)
    dr = res - x_res
    de = eps_hat - eps
    value = float(dr @ dr + de @ de)
    grads = nets._backward(params, fs, cache, 2.0 * dr, 2.0 * de)
    return value, grads


def train(dataset, cfg: TrainConfig, params=None):
    """Minibatch gradient descent over (inst, x0, X_d) triples.

    Returns (params, trace) where trace holds one mean loss per update.
    Raises TrainingDivergedError at the first non-finite loss.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    first_inst = dataset[0][0]
    if params is None:
        params = nets.params_for(first_inst, seed=cfg.seed)
    feats = [nets.build_feats(inst) for inst, _, _ in dataset]
    names = [nm for nm, _ in params.tensors()]
    velocity = {nm: np.zeros_like(a) for nm, a in params.tensors()}
    second = {nm: np.zeros_like(a) for nm, a in params.tensors()}

    trace = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            total = 0.0
            acc = {nm: None for nm in names}
            for idx in batch:
                inst, x0, X_d = dataset[idx]
                t = 1.0 - rng.random()
                value, grads = _loss_and_grads(
                    params, feats[idx], inst, x0, X_d, t, rng
                )
                total += value
                for nm in names:
                    acc[nm] = grads[nm] if acc[nm] is None else acc[nm] + grads[nm]
            mean_loss = total / batch.size
            if not np.isfinite(mean_loss):
                raise TrainingDivergedError(step)
            trace.append(mean_loss)
            inv = 1.0 / batch.size
            norm_sq = 0.0
            for nm in names:
                acc[nm] *= inv
                norm_sq += float((acc[nm] * acc[nm]).sum())
            scale = min(1.0, cfg.clip / max(np.sqrt(norm_sq), 1e-30))
            step += 1
            if cfg.optimizer == "adam":
                bc1 = 1.0 - 0.9**step
                bc2 = 1.0 - 0.999**step
                for nm, a in params.tensors():
                    g = acc[nm] * scale
                    m = velocity[nm]
                    v = second[nm]
                    m *= 0.9
                    m += 0.1 * g
                    v *= 0.999
                    v += 0.001 * g * g
                    a -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + 1e-8)
            else:
                for nm, a in params.tensors():
                    v = velocity[nm]
                    v *= cfg.momentum
                    v += acc[nm] * scale
                    a -= cfg.lr * v
    return params, np.array(trace)


def grad_check(
    params: nets.NetParams,
    example,
    h: float = 1e-5,
    tol: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    example is an (inst, state, truth) triple.  Every parameter entry is
    checked unless max_entries caps the count, in which case a seeded
    uniform subsample of entries is used.  The relative error of a pair
    (a, f) is |a - f| / max(|a|, |f|, floor).  The floor is 1e-8 raised,
    when the loss is large, to 4*eps*|loss|/(h*tol): a central difference
    cannot resolve gradients below the rounding noise eps*|loss|/h, so
    coordinates down there would otherwise report noise as error even for
    an exact gradient.  Callers compare the result against tol.
    """
    inst, state, truth = example
    fs = nets.build_feats(inst)
    res, eps_hat, cache = nets._forward(params, fs, state.x, state.t)
    dr = res - truth.x_res
    de = eps_hat - truth.eps
    grads = nets._backward(params, fs, cache, 2.0 * dr, 2.0 * de)

    arrays = list(params.tensors())
    sizes = np.array([a.size for _, a in arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    if max_entries is None or max_entries >= total:
        chosen = np.arange(total)
    else:
        chosen = np.random.default_rng(seed).choice(total, max_entries, replace=False)

    def loss_value() -> float:
        r, e, _ = nets._forward(params, fs, state.x, state.t)
        a = r - truth.x_res
        b = e - truth.eps
        return float(a @ a + b @ b)

    eps_mach = float(np.finfo(np.float64).eps)
    floor = max(1e-8, 4.0 * eps_mach * abs(loss_value()) / (h * tol))

    worst = 0.0
    for flat in chosen:
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, arr = arrays[which]
        local = np.unravel_index(int(flat - offsets[which]), arr.shape)
        keep = arr[local]
        arr[local] = keep + h
        up = loss_value()
        arr[local] = keep - h
        down = loss_value()
        arr[local] = keep
        fd = (up - down) / (2.0 * h)
        an = grads[name][local]
        rel = abs(an - fd) / max(abs(an), abs(fd), floor)
        worst = max(worst, rel)
    return worst


class GnnDenoiser:
    """Callable (inst, state) -> DenoiserOutput with cached static features.

    Safe to share across threads for inference: params are read-only by
    convention and the feature cache is keyed by instance identity.  The
    cache holds weak references, so entries die with their instance and a
    recycled id can never serve another instance's features.
    """

    def __init__(self, params: nets.NetParams):
        self.params = params
        self._feats = weakref.WeakKeyDictionary()

    def __call__(self, inst, state: DiffusionState) -> nets.DenoiserOutput:
        fs = self._feats.get(inst)
        if fs is None:
            fs = nets.build_feats(inst)
            self._feats[inst] = fs
        return nets.forward_on_feats(self.params, fs, inst, state)


def make_training_triples(instances, labels, seed: int = 0):
    """Pair each instance with its label x0 and a degraded X_d."""
    from .instances import degraded_solution

    triples = []
    for i, (inst, x0) in enumerate(zip(instances, labels)):
        X_d = degraded_solution(inst, seed=seed + i)
        triples.append((inst, x0, X_d))
    return triples
