"""Correlation kernels: compiled core with a pure-numpy fallback.

The backward solver spends nearly all its time sweeping short tap kernels
(Lagrange stencils, or quadrature-collapsed stencils) across stored grid
functions.  A compiled extension implements the sweep as typed loops; this
module selects it at import time and otherwise falls back to a vectorized
numpy implementation with the same contract and the same floating-point
accumulation order (per output element, taps are added first-to-last), so
results are bit-identical across backends.

Set the environment variable ``RKBSDE_FORCE_FALLBACK=1`` before import to
skip the compiled extension deliberately (e.g. for benchmarking).
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "correlate", "correlate_pair"]


def _check_window(source_len: int, kernel_len: int, shift: int, out_len: int) -> None:
    if out_len == 0:
        return
    if kernel_len == 0:
        raise ValueError("kernel must have at least one tap")
    if shift < 0 or shift + (out_len - 1) + (kernel_len - 1) >= source_len:
        raise ValueError(
            "kernel window [%d, %d] exceeds source extent %d"
            % (shift, shift + out_len - 1 + kernel_len - 1, source_len)
        )


def _correlate_fallback(
    g: np.ndarray, kernel: np.ndarray, shift: int, out: np.ndarray
) -> None:
    """out[i] = sum_t kernel[t] * g[i + shift + t] for 0 <= i < len(out).

    ``shift`` locates the first tap of the window for out[0] inside ``g``.
    The whole window must lie inside ``g``; raises ``ValueError`` otherwise.
    """
    nout = out.shape[0]
    _check_window(g.shape[0], kernel.shape[0], shift, nout)
    if nout == 0:
        return
    out[:] = kernel[0] * g[shift : shift + nout]
    for t in range(1, kernel.shape[0]):
        out += kernel[t] * g[shift + t : shift + t + nout]


def _correlate_pair_fallback(
    ga: np.ndarray,
    gb: np.ndarray,
    kernel: np.ndarray,
    shift: int,
    outa: np.ndarray,
    outb: np.ndarray,
) -> None:
    """Correlate two equally sized sources with one kernel in a single sweep."""
    if gb.shape[0] != ga.shape[0]:
        raise ValueError("sources must have equal length")
    if outb.shape[0] != outa.shape[0]:
        raise ValueError("outputs must have equal length")
    _correlate_fallback(ga, kernel, shift, outa)
    _correlate_fallback(gb, kernel, shift, outb)


if os.environ.get("RKBSDE_FORCE_FALLBACK") == "1":
    BACKEND = "fallback"
    correlate = _correlate_fallback
    correlate_pair = _correlate_pair_fallback
else:
    try:
        from ._corekernels import correlate, correlate_pair

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        BACKEND = "fallback"
        correlate = _correlate_fallback
        correlate_pair = _correlate_pair_fallback
