"""Hot polynomial-evaluation kernels.

Spline evaluation sits inside the projection descent, the Frenet-Serret
frame construction and the arclength quadrature, so it dominates the
runtime of closed-loop simulations.  The kernels here are compiled with
numba when available; set ``SPLINEFOLLOW_NO_NUMBA=1`` to force the pure
numpy path (same semantics, useful for debugging and benchmarking).
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("SPLINEFOLLOW_NO_NUMBA", "") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def _poly_eval_py(coeffs, lam, order):
    """Evaluate the order-th derivative of a polynomial bundle at lam.

    coeffs has shape (p, ncoef), ascending powers; returns shape (p,).
    """
    p, ncoef = coeffs.shape
    out = np.zeros(p)
    for i in range(order, ncoef):
        # falling factorial i * (i-1) * ... * (i-order+1)
        fac = 1.0
        for r in range(order):
            fac *= i - r
        out += fac * coeffs[:, i] * lam ** (i - order)
    return out


def _poly_eval_many_py(coeffs, lams, order):
    """Vectorized variant: lams has shape (m,); returns (m, p)."""
    p, ncoef = coeffs.shape
    m = lams.shape[0]
    out = np.zeros((m, p))
    for i in range(order, ncoef):
        fac = 1.0
        for r in range(order):
            fac *= i - r
        out += fac * np.outer(lams ** (i - order), coeffs[:, i])
    return out


if USE_NUMBA:

    @njit(cache=True)
    def poly_eval(coeffs, lam, order):  # noqa: D103 - mirrors _poly_eval_py
        p, ncoef = coeffs.shape
        out = np.zeros(p)
        if order >= ncoef:
            return out
        # Horner on the derivative coefficients
        for j in range(p):
            acc = 0.0
            for i in range(ncoef - 1, order - 1, -1):
                fac = 1.0
                for r in range(order):
                    fac *= i - r
                acc = acc * lam + fac * coeffs[j, i]
            out[j] = acc
        return out

    @njit(cache=True)
    def poly_eval_many(coeffs, lams, order):  # noqa: D103
        p, ncoef = coeffs.shape
        m = lams.shape[0]
        out = np.zeros((m, p))
        if order >= ncoef:
            return out
        for k in range(m):
            lam = lams[k]
            for j in range(p):
                acc = 0.0
                for i in range(ncoef - 1, order - 1, -1):
                    fac = 1.0
                    for r in range(order):
                        fac *= i - r
                    acc = acc * lam + fac * coeffs[j, i]
                out[k, j] = acc
        return out

else:
    poly_eval = _poly_eval_py
    poly_eval_many = _poly_eval_many_py
