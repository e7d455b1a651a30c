"""End-to-end optimisation: MSE loss, Adam with coupled weight decay,
rigid-transform augmentation, and per-sample on-the-fly mask generation.

The loss is normalized per pixel (mean over H*W, summed over the two
channels) so the learning rate transfers across image sizes. Weight decay is
the classic L2 penalty folded into the gradient before the moment updates,
not the decoupled variant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cascade import CascadeModel, cascade_backward, cascade_forward
from .errors import InvalidParameterError, InvalidShapeError, TrainingDivergedError
from .sampling import apply_encoding, generate_mask, zero_filled
from .tensorcore import ComplexImage, Rng

MAX_AUGMENT_SHIFT = 4


@dataclass
class TrainConfig:
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-7
    batch_size: int = 10
    epochs: int = 1
    acceleration: float = 3.0
    n_low: int = 8
    augment: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidParameterError(f"alpha must be > 0, got {self.alpha}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidParameterError("beta1 and beta2 must lie in (0, 1)")
        if self.weight_decay < 0:
            raise InvalidParameterError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise InvalidParameterError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def init_adam_state(params: list) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidShapeError("params, grads and optimizer state are misaligned")
    state.t += 1
    t = state.t
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        p -= cfg.alpha * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)


def mse_loss(x_cnn: ComplexImage, x_t: ComplexImage):
    """Per-pixel mean squared error and its gradient wrt the reconstruction."""
    if x_cnn.channels.shape != x_t.channels.shape:
        raise InvalidShapeError(
            f"shape mismatch {x_cnn.channels.shape} vs {x_t.channels.shape}"
        )
    n = x_cnn.height * x_cnn.width
    diff = x_cnn.channels - x_t.channels
    loss = float(np.sum(np.square(diff, dtype=np.float64))) / n
    grad = ComplexImage((2.0 / n) * diff)
    return loss, grad


def apply_rigid(img: ComplexImage, quarter_turns: int, hflip: bool, shift: tuple) -> ComplexImage:
    """Apply one element of the augmentation group, identically to both
    channels: rotation by multiples of 90 degrees, optional horizontal flip,
    and integer circular shifts. All are pixel permutations, so image energy
    is preserved exactly."""
    c = img.channels
    if quarter_turns % 4:
        if img.height != img.width and quarter_turns % 2:
            raise InvalidParameterError("90/270 degree rotations require square images")
        c = np.rot90(c, k=quarter_turns % 4, axes=(1, 2))
    if hflip:
        c = np.flip(c, axis=2)
    si, sj = shift
    if si or sj:
        c = np.roll(c, (int(si), int(sj)), axis=(1, 2))
    return ComplexImage(np.ascontiguousarray(c))


def augment(rng: Rng, img: ComplexImage) -> ComplexImage:
    """Uniformly drawn rigid transform: rotation x flip x circular shift."""
    if img.height == img.width:
        quarter_turns = int(rng.gen.integers(4))
    else:
        quarter_turns = 2 * int(rng.gen.integers(2))
    hflip = bool(rng.gen.integers(2))
    shift = tuple(int(s) for s in rng.gen.integers(-MAX_AUGMENT_SHIFT, MAX_AUGMENT_SHIFT + 1, 2))
    return apply_rigid(img, quarter_turns, hflip, shift)


def train_epoch(
    model: CascadeModel,
    dataset: list,
    cfg: TrainConfig,
    rng: Rng,
    state: AdamState,
    log_fn=None,
    epoch: int = 0,
):
    """One pass over the dataset: per sample, augment the target, draw a
    fresh mask, simulate the acquisition, run forward/backward; per batch,
    average the gradients and take one Adam step.

    Samples are processed by a single worker, which makes epochs bit-for-bit
    reproducible for a given seed. Returns ``(model, mean per-sample loss)``.
    Raises :class:`TrainingDivergedError` on a non-finite loss.
    """
    if not dataset:
        raise InvalidParameterError("dataset must be nonempty")
    order = rng.gen.permutation(len(dataset))
    params = model.parameters()
    losses = []
    for step, start in enumerate(range(0, len(order), cfg.batch_size)):
        t0 = time.perf_counter()
        batch = order[start : start + cfg.batch_size]
        grads = model.zero_grads()
        batch_losses = []
        for idx in batch:
            x_t = dataset[int(idx)]
            if cfg.augment:
                x_t = augment(rng, x_t)
            mask = generate_mask(rng, x_t.height, x_t.width, cfg.acceleration, cfg.n_low)
            meas = apply_encoding(x_t, mask)
            x_u = zero_filled(meas)
            x_cnn, cache = cascade_forward(model, x_u, meas)
            loss, grad = mse_loss(x_cnn, x_t)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} step {step}",
                    diagnostics={
                        "epoch": epoch,
                        "step": step,
                        "loss": loss,
                        "param_max": max(float(np.max(np.abs(p))) for p in params),
                    },
                )
            batch_losses.append(loss)
            for acc, g in zip(grads, cascade_backward(model, cache, grad)):
                acc += g
        for g in grads:
            g /= len(batch)
        adam_step(params, grads, state, cfg)
        losses.extend(batch_losses)
        if log_fn is not None:
            log_fn(epoch, step, float(np.mean(batch_losses)), (time.perf_counter() - t0) * 1e3)
    return model, float(np.mean(losses))
