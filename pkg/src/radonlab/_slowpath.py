"""Pure-numpy implementations of the oscillatory inner loops.

Same call signatures as the compiled module; selected automatically when the
extension is unavailable (or when RADONLAB_BACKEND=python).  Works in blocks
of output rows so the (rows x cols) phase matrix never gets too large.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 1024


def _power_products(coords: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """prod_d coords[:, d]^exps[t, d] for every term t -> (T, N) float array."""
    coords = coords.astype(np.float64)
    T = exps.shape[0]
    out = np.ones((T, coords.shape[0]), dtype=np.float64)
    for t in range(T):
        for d, e in enumerate(exps[t]):
            if e:
                out[t] *= coords[:, d] ** int(e)
    return out


def _kernel_rows(out_block: np.ndarray, in_coords: np.ndarray,
                 kern: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Gather kernel values at pairwise offsets out - in -> (b, M)."""
    idx = None
    strides = np.cumprod((kern.shape + (1,))[::-1])[::-1][1:]
    for d in range(in_coords.shape[1]):
        off = out_block[:, d, None] - in_coords[None, :, d] + origin[d]
        part = off * strides[d]
        idx = part if idx is None else idx + part
    return kern.ravel()[idx]


def osc_apply(out_coords, in_coords, fvals, coeffs, alphas, betas, kern, origin):
    """y[i] = sum_j e(phase(n_i, m_j)) K[n_i - m_j] f[j], phase reduced mod 1."""
    out_coords = np.ascontiguousarray(out_coords, dtype=np.int64)
    in_coords = np.ascontiguousarray(in_coords, dtype=np.int64)
    pm = _power_products(in_coords, betas)
    pn = _power_products(out_coords, alphas)
    scaled = coeffs[:, None] * pn
    y = np.zeros(out_coords.shape[0], dtype=np.complex128)
    for i0 in range(0, out_coords.shape[0], _BLOCK):
        sl = slice(i0, min(i0 + _BLOCK, out_coords.shape[0]))
        phase = scaled[:, sl].T @ pm
        np.mod(phase, 1.0, out=phase)
        rows = _kernel_rows(out_coords[sl], in_coords, kern, origin)
        y[sl] = (np.exp(2j * np.pi * phase) * rows) @ fvals
    return y


def osc_materialize(out_coords, in_coords, coeffs, alphas, betas, kern, origin):
    """Dense matrix M[i, j] = e(phase(n_i, m_j)) K[n_i - m_j]."""
    out_coords = np.ascontiguousarray(out_coords, dtype=np.int64)
    in_coords = np.ascontiguousarray(in_coords, dtype=np.int64)
    pm = _power_products(in_coords, betas)
    pn = _power_products(out_coords, alphas)
    phase = (coeffs[:, None] * pn).T @ pm
    np.mod(phase, 1.0, out=phase)
    rows = _kernel_rows(out_coords, in_coords, kern, origin)
    return np.exp(2j * np.pi * phase) * rows
