"""Numeric kernels for the n-gram classifier hot path.

Batches are CSR triples (indptr, indices, data); weights are a dense
(num_labels x num_features+1) matrix with the bias in the last column.
Each kernel ships twice: a numba @njit build and a pure-numpy fallback.
Which one runs is controlled by the SATDSCAN_KERNELS environment
variable: "numba", "numpy", or "auto" (default; numba when importable).
Both builds use the same accumulation order, so results agree to
floating-point noise; tests pin the parity.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

KERNELS_ENV = "SATDSCAN_KERNELS"

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        raise RuntimeError("numba is not importable")


def _logits_py(indptr, indices, data, weights):
    n = indptr.shape[0] - 1
    num_labels = weights.shape[0]
    out = np.empty((n, num_labels))
    for i in range(n):
        for l in range(num_labels):
            out[i, l] = weights[l, -1]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for l in range(num_labels):
                out[i, l] += v * weights[l, j]
    return out


def _softmax_py(logits):
    n, num_labels = logits.shape
    out = np.empty_like(logits)
    for i in range(n):
        m = logits[i, 0]
        for l in range(1, num_labels):
            if logits[i, l] > m:
                m = logits[i, l]
        s = 0.0
        for l in range(num_labels):
            out[i, l] = np.exp(logits[i, l] - m)
            s += out[i, l]
        for l in range(num_labels):
            out[i, l] /= s
    return out


def _xent_grad_py(indptr, indices, data, probs, labels, n_features):
    n, num_labels = probs.shape
    grad = np.zeros((num_labels, n_features + 1))
    err = np.empty(num_labels)
    loss = 0.0
    for i in range(n):
        loss -= np.log(probs[i, labels[i]])
        for l in range(num_labels):
            e = probs[i, l]
            if l == labels[i]:
                e -= 1.0
            err[l] = e / n
            grad[l, n_features] += err[l]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for l in range(num_labels):
                grad[l, j] += v * err[l]
    return loss / n, grad


def _logits_np(indptr, indices, data, weights):
    n = indptr.shape[0] - 1
    out = np.tile(weights[:, -1], (n, 1))
    if indices.size:
        rows = np.repeat(np.arange(n), np.diff(indptr))
        contrib = weights[:, indices].T * data[:, None]
        np.add.at(out, rows, contrib)
    return out


def _softmax_np(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _xent_grad_np(indptr, indices, data, probs, labels, n_features):
    n, num_labels = probs.shape
    err = probs.copy()
    err[np.arange(n), labels] -= 1.0
    err /= n
    grad = np.zeros((num_labels, n_features + 1))
    grad[:, n_features] = err.sum(axis=0)
    if indices.size:
        rows = np.repeat(np.arange(n), np.diff(indptr))
        scatter = np.zeros((n_features, num_labels))
        np.add.at(scatter, indices, data[:, None] * err[rows])
        grad[:, :n_features] = scatter.T
    loss = -np.log(probs[np.arange(n), labels]).sum() / n
    return loss, grad


@dataclass(frozen=True)
class KernelBackend:
    name: str
    logits: Callable
    softmax: Callable
    xent_grad: Callable


NUMPY_BACKEND = KernelBackend("numpy", _logits_np, _softmax_np, _xent_grad_np)

if _HAVE_NUMBA:
    _NUMBA_BACKEND = KernelBackend(
        "numba",
        njit(cache=True)(_logits_py),
        njit(cache=True)(_softmax_py),
        njit(cache=True)(_xent_grad_py),
    )
else:
    _NUMBA_BACKEND = None


def available_backends() -> tuple:
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def get_backend(name: Optional[str] = None) -> KernelBackend:
    """Resolve a kernel backend by name, or by SATDSCAN_KERNELS when omitted."""
    if name is None:
        name = os.environ.get(KERNELS_ENV, "auto")
    if name == "auto":
        return _NUMBA_BACKEND if _HAVE_NUMBA else NUMPY_BACKEND
    if name == "numpy":
        return NUMPY_BACKEND
    if name == "numba":
        if _NUMBA_BACKEND is None:
            raise RuntimeError("numba kernels requested but numba is not importable")
        return _NUMBA_BACKEND
    raise ValueError(f"unknown kernel backend {name!r} (use auto, numba, or numpy)")


def as_csr(rows: list) -> tuple:
    """Pack per-row (index, value) pair lists into CSR arrays."""
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indices = []
    data = []
    for i, row in enumerate(rows):
        for j, v in row:
            indices.append(j)
            data.append(v)
        indptr[i + 1] = len(indices)
    return (indptr,
            np.asarray(indices, dtype=np.int64),
            np.asarray(data, dtype=np.float64))
