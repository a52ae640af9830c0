"""Adam optimizer and learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class LrSchedule:
    """Piecewise-constant decay.

    kinds:
      constant          lr never changes
      halve             lr *= 0.5 after every `period` iterations
      quarter           lr *= 0.75 (decreased by a quarter) after every
                        `period` epochs/steps, whichever unit the caller feeds
    """

    initial_lr: float
    decay_kind: str = "constant"
    period: int = 0

    def lr_at(self, step: int) -> float:
        if self.decay_kind == "constant" or self.period <= 0:
            return self.initial_lr
        k = step // self.period
        if self.decay_kind == "halve":
            return self.initial_lr * 0.5**k
        if self.decay_kind == "quarter":
            return self.initial_lr * 0.75**k
        raise ValueError(f"unknown decay kind {self.decay_kind!r}")


@dataclass
class AdamState:
    """Per-parameter Adam moments. m/v always match the parameter shape."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float | None = None) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter value."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient in adam_step")
    if state.m is None:
        state.m = np.zeros_like(param)
        state.v = np.zeros_like(param)
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    mhat = state.m / (1.0 - b1**t)
    vhat = state.v / (1.0 - b2**t)
    step_lr = state.lr if lr is None else lr
    return param - step_lr * mhat / (np.sqrt(vhat) + state.eps)


class Adam:
    """Adam over a list of named parameter tensors.

    Gradients are read from each tensor's .grad; call zero_grad() after
    step(). A NaN/inf gradient aborts with the offending parameter's name.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 names=None):
        self.params: list[Tensor] = list(params)
        self.names = list(names) if names else [
            f"param{i}" for i in range(len(self.params))
        ]
        self.states = [
            AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
            for _ in self.params
        ]

    def step(self, lr: float | None = None):
        for name, p, st in zip(self.names, self.params, self.states):
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient on {name!r}")
            p.data = adam_step(p.data, p.grad, st, lr=lr)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
