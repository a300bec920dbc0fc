"""Reverse-mode gradient tape.

Ops executed while a tape is active append one record each (inputs,
output, backward closure). Walking the records in reverse from a scalar
loss accumulates gradients for every tensor the loss touched, parameters
included. Tapes are single-owner: one tape per task, tracked on a
thread-local stack so concurrent tasks never share state.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor

_state = threading.local()


def _stack() -> list["GradTape"]:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def active_tape() -> "GradTape | None":
    stack = _stack()
    return stack[-1] if stack else None


@dataclass
class Record:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    # maps d(loss)/d(output) to a tuple of d(loss)/d(input) arrays,
    # one per input, None for inputs with no defined gradient
    backward: Callable[[np.ndarray], tuple]


class GradTape:
    """Records kernel ops for one forward pass; replays them backward."""

    def __init__(self):
        self.records: list[Record] = []

    def __enter__(self) -> "GradTape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _stack().pop()
        assert popped is self, "tapes must unwind in LIFO order"

    def record(self, op, inputs, output, backward) -> None:
        self.records.append(Record(op, tuple(inputs), output, backward))

    def gradients(self, loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradients of the scalar `loss` w.r.t. each tensor in `wrt`.

        Tensors the loss never touched get all-zero gradients.
        """
        if loss.size != 1:
            raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
        accum: dict[int, np.ndarray] = {
            id(loss): np.ones(loss.shape, dtype=loss.dtype)
        }
        for rec in reversed(self.records):
            g_out = accum.get(id(rec.output))
            if g_out is None:
                continue
            for tensor, grad in zip(rec.inputs, rec.backward(g_out)):
                if grad is None:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"{rec.op} backward produced shape {grad.shape} "
                        f"for input of shape {tensor.shape}"
                    )
                held = accum.get(id(tensor))
                if held is None:
                    accum[id(tensor)] = grad.astype(tensor.dtype, copy=True)
                else:
                    held += grad
        return [
            accum.get(id(t), np.zeros(t.shape, dtype=t.dtype)).copy() for t in wrt
        ]

    def min_kink_margin(self) -> float:
        """Smallest |pre-activation| seen at any kinked op (relu, abs).

        Gradient checks are only meaningful at points bounded away from
        these kinks; returns +inf when no kinked op was recorded.
        """
        margin = np.inf
        for rec in self.records:
            if rec.op in ("relu", "abs"):
                margin = min(margin, float(np.abs(rec.inputs[0].data).min()))
        return margin
