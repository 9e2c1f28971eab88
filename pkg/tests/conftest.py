"""Shared test helpers: independent finite-difference oracles."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


def central_diff(
    fn: Callable[[np.ndarray], float],
    params: np.ndarray,
    coords: Iterable[int],
    h: float = 1e-6,
) -> dict[int, float]:
    """Central finite differences of a scalar function at chosen coordinates."""
    out = {}
    for k in coords:
        probe = params.copy()
        probe[k] += h
        up = fn(probe)
        probe[k] -= 2.0 * h
        down = fn(probe)
        out[k] = (up - down) / (2.0 * h)
    return out


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def max_grad_rel_err(
    fn: Callable[[np.ndarray], float],
    params: np.ndarray,
    grad: np.ndarray,
    coords: Iterable[int],
    h: float = 1e-6,
) -> float:
    fd = central_diff(fn, params, coords, h)
    return max(rel_err(fd[k], grad[k]) for k in fd)
