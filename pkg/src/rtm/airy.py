"""Airy function Ai, its derivative, and the zeros of Ai on the negative axis.

Ai is evaluated from its Maclaurin series for |x| <= 8 (summed in extended
precision to survive the cancellation between the two series) and from the
standard large-argument expansions beyond that.  At |x| = 8 the expansions
are truncated near their smallest term, where the remainder is ~1e-13.
"""
from __future__ import annotations

import math

import numpy as np

SERIES_LIMIT = 8.0

# Ai(0) and -Ai'(0)
_C1 = np.longdouble("0.355028053887817239260063186004183176")
_C2 = np.longdouble("0.258819403792806798405183560189203963")

_SERIES_TERMS = 45
_ASYMPTOTIC_TERMS = 31


def _asymptotic_coefficients(count: int) -> tuple[np.ndarray, np.ndarray]:
    """u_k and v_k of the large-argument expansions (DLMF 9.7.2)."""
    u = np.empty(count)
    v = np.empty(count)
    u[0] = v[0] = 1.0
    for k in range(1, count):
        # u_k = (6k-5)(6k-3)(6k-1) / ((2k-1) 216 k) u_{k-1}
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v[k] = -(6 * k + 1) / (6 * k - 1) * u[k]
    return u, v


_U, _V = _asymptotic_coefficients(_ASYMPTOTIC_TERMS)


def _series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = x.astype(np.longdouble)
    x3 = x**3
    f = np.ones_like(x)
    g = x.copy()
    df = x**2 / 2
    dg = np.ones_like(x)
    tf, tg, tdf, tdg = f.copy(), g.copy(), df.copy(), dg.copy()
    for k in range(1, _SERIES_TERMS):
        tf = tf * x3 / ((3 * k - 1) * (3 * k))
        tg = tg * x3 / ((3 * k) * (3 * k + 1))
        tdg = tdg * x3 / ((3 * k) * (3 * k - 2))
        f += tf
        g += tg
        dg += tdg
        if k >= 2:
            tdf = tdf * x3 / ((3 * k - 1) * (3 * k - 3))
            df += tdf
    ai = _C1 * f - _C2 * g
    aip = _C1 * df - _C2 * dg
    return ai.astype(float), aip.astype(float)


def _positive_tail(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    zeta = 2.0 / 3.0 * x**1.5
    inv = -1.0 / zeta
    su = np.zeros_like(x)
    sv = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(_ASYMPTOTIC_TERMS):
        su += _U[k] * p
        sv += _V[k] * p
        p = p * inv
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    q = x**0.25
    return pref / q * su, -pref * q * sv


def _negative_tail(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # y = -x > 0
    zeta = 2.0 / 3.0 * y**1.5
    inv2 = -1.0 / zeta**2
    eu = np.zeros_like(y)
    ou = np.zeros_like(y)
    ev = np.zeros_like(y)
    ov = np.zeros_like(y)
    p = np.ones_like(y)
    for k in range(0, _ASYMPTOTIC_TERMS - 1, 2):
        eu += _U[k] * p
        ev += _V[k] * p
        ou += _U[k + 1] * p / zeta
        ov += _V[k + 1] * p / zeta
        p = p * inv2
    phase = zeta - math.pi / 4
    c, s = np.cos(phase), np.sin(phase)
    q = y**0.25
    ai = (c * eu + s * ou) / (math.sqrt(math.pi) * q)
    aip = q * (s * ev - c * ov) / math.sqrt(math.pi)
    return ai, aip


def airy_ai(x):
    """Ai(x) and Ai'(x) for scalar or array ``x``."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ai = np.empty_like(x)
    aip = np.empty_like(x)
    mid = np.abs(x) <= SERIES_LIMIT
    hi = x > SERIES_LIMIT
    lo = x < -SERIES_LIMIT
    if mid.any():
        ai[mid], aip[mid] = _series(x[mid])
    if hi.any():
        ai[hi], aip[hi] = _positive_tail(x[hi])
    if lo.any():
        ai[lo], aip[lo] = _negative_tail(-x[lo])
    if scalar:
        return float(ai[0]), float(aip[0])
    return ai, aip


def asymptotic_zero(n):
    """|a_n| from f(zeta) = zeta^(2/3) (1 + 5/(48 zeta^2) - 5/(36 zeta^4)).

    zeta = 3 pi (n - 1/4) / 2.  Higher terms of the expansion are dropped;
    the first neglected term is +77125/82944 zeta^(-6), which bounds the
    residual (2e-4 relative at n = 1, below 1e-10 for n >= 10).
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("Airy zero index must be >= 1")
    zeta = 1.5 * math.pi * (n - 0.25)
    z2 = zeta**-2
    out = zeta ** (2.0 / 3.0) * (1.0 + 5.0 / 48.0 * z2 - 5.0 / 36.0 * z2**2)
    return float(out) if out.ndim == 0 else out


def airy_zeros(n_max: int, tol: float = 1e-14) -> np.ndarray:
    """First ``n_max`` zeros of Ai as positive numbers z_n (Ai(-z_n) = 0).

    Each zero is bracketed around the asymptotic estimate, narrowed by
    bisection and finished with safeguarded Newton steps.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(1, n_max + 1, dtype=float)
    guess = asymptotic_zero(n)
    # half the local zero spacing; the estimate is far closer than that
    half = 0.5 * math.pi / np.sqrt(guess) * 0.5
    lo = guess - half
    hi = guess + half
    f_lo = airy_ai(-lo)[0]
    f_hi = airy_ai(-hi)[0]
    if np.any(np.sign(f_lo) == np.sign(f_hi)):
        bad = np.flatnonzero(np.sign(f_lo) == np.sign(f_hi)) + 1
        raise ArithmeticError(f"failed to bracket Airy zeros n={bad.tolist()}")

    for _ in range(12):
        mid = 0.5 * (lo + hi)
        f_mid = airy_ai(-mid)[0]
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)

    z = 0.5 * (lo + hi)
    for _ in range(50):
        ai, aip = airy_ai(-z)
        left = np.sign(ai) == np.sign(f_lo)
        lo = np.where(left, z, lo)
        f_lo = np.where(left, ai, f_lo)
        hi = np.where(left, hi, z)
        # d/dz Ai(-z) = -Ai'(-z)
        step = ai / aip
        trial = z + step
        slack = 4 * np.finfo(float).eps * z
        outside = (trial < lo - slack) | (trial > hi + slack)
        done = ~outside & (np.abs(step) <= tol * np.maximum(1.0, z))
        z = np.where(outside, 0.5 * (lo + hi), trial)
        if done.all():
            break
    else:
        raise ArithmeticError("Newton refinement of Airy zeros did not converge")
    return z


_ZERO_TABLE = np.empty(0)


def airy_zero(n: int, mode: str = "exact") -> float:
    """The n-th zero magnitude z_n, ``mode`` is 'exact' or 'asymptotic'.

    Exact zeros are served from a table that is extended (doubled) on demand.
    """
    global _ZERO_TABLE
    if int(n) != n or n < 1:
        raise ValueError(f"Airy zero index must be a positive integer, got {n!r}")
    if mode == "asymptotic":
        return asymptotic_zero(int(n))
    if mode == "exact":
        if n > _ZERO_TABLE.size:
            _ZERO_TABLE = airy_zeros(max(int(n), 2 * _ZERO_TABLE.size, 64))
        return float(_ZERO_TABLE[int(n) - 1])
    raise ValueError(f"unknown mode {mode!r}")
