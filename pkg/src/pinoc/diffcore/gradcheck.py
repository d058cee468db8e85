"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, grad_params


def finite_diff_grad(loss_fn, params, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of loss_fn() w.r.t. the entries of params.

    ``loss_fn`` is a closure over the parameter tensors; entries are perturbed
    in place and restored, so it must re-read ``p.value`` on every call.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    parts = []
    for p in params:
        flat = p.value.reshape(-1)
        g = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(loss_fn().value)
            flat[i] = orig - h
            f_minus = float(loss_fn().value)
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * h)
        parts.append(g)
    return np.concatenate(parts) if parts else np.zeros(0)


def check_gradient(loss_fn, params, h: float = 1e-5) -> float:
    """Max over components of |AD - FD| / (|FD| + 1e-12), central differences."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    params = list(params)
    ad = grad_params(loss_fn(), params)
    fd = finite_diff_grad(loss_fn, params, h)
    return float(np.max(np.abs(ad - fd) / (np.abs(fd) + 1e-12))) if ad.size else 0.0
