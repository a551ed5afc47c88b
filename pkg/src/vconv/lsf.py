"""LPC <-> line spectral frequency conversion and rectification.

For the inverse filter A(z) = 1 - sum a_k z^-k of even order p, form

    P(z) = A(z) + z^-(p+1) A(1/z)      (palindromic)
    Q(z) = A(z) - z^-(p+1) A(1/z)      (antipalindromic)

P carries a trivial root at z = -1 and Q one at z = +1; after deflating
those, each polynomial has p/2 conjugate root pairs exactly on the unit
circle whose angles interleave.  The merged ascending angles are the LSF
vector; the filter is stable iff the angles are strictly ascending in
(0, pi).  Root angles are located by evaluating the deflated polynomials'
real cosine form on a uniform grid and bisecting each sign change.
"""

from __future__ import annotations

import numpy as np

from .lpc import LpcFrame

MIN_GAP = 1e-4  # smallest admissible spacing between adjacent frequencies
GRID_SIZE = 4096  # uniform subintervals of (0, pi) scanned for sign changes
_BISECT_TOL = 1e-13  # interval width at which bisection stops


class LsfConversionError(ValueError):
    """The frame has no valid LSF representation (unstable or defective)."""


def _cosine_form(sym_coeffs: np.ndarray) -> np.ndarray:
    """Weights g such that G(w) = sum_k g[k] cos(k*w) matches the deflated
    palindromic polynomial on the unit circle (up to a phase factor)."""
    m = (len(sym_coeffs) - 1) // 2
    g = np.empty(m + 1)
    g[0] = sym_coeffs[m]
    g[1:] = 2.0 * sym_coeffs[m - 1::-1]
    return g


def _eval_cos(g: np.ndarray, omega: np.ndarray) -> np.ndarray:
    k = np.arange(len(g))
    return g @ np.cos(np.outer(k, omega))


def _unit_circle_angles(g: np.ndarray, expected: int) -> np.ndarray:
    """Angles in (0, pi) where the cosine form crosses zero."""
    omega = np.linspace(0.0, np.pi, GRID_SIZE + 1)
    values = _eval_cos(g, omega)
    sign_change = values[:-1] * values[1:] < 0
    hits = np.flatnonzero(sign_change)
    exact = np.flatnonzero(values[1:-1] == 0.0) + 1  # grid point is a root

    if len(hits) + len(exact) != expected:
        raise LsfConversionError(
            f"found {len(hits) + len(exact)} unit-circle roots, expected "
            f"{expected} (filter unstable or roots closer than the grid)")

    lo = omega[hits]
    hi = omega[hits + 1]
    vlo = values[hits]
    while np.max(hi - lo, initial=0.0) > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        vmid = _eval_cos(g, mid)
        take_lo = np.sign(vmid) == np.sign(vlo)
        lo = np.where(take_lo, mid, lo)
        vlo = np.where(take_lo, vmid, vlo)
        hi = np.where(take_lo, hi, mid)
    roots = 0.5 * (lo + hi)
    if len(exact):
        roots = np.sort(np.concatenate([roots, omega[exact]]))
    return roots


def lpc_to_lsf(lpc: LpcFrame) -> np.ndarray:
    """Line spectral frequencies of a stable even-order predictor, ascending."""
    p = lpc.order
    if p % 2 != 0 or p == 0:
        raise ValueError(f"only even orders are supported, got {p}")
    a_ext = np.concatenate([[1.0], -np.asarray(lpc.coefficients, np.float64), [0.0]])
    psum = a_ext + a_ext[::-1]
    qdiff = a_ext - a_ext[::-1]

    # deflate the trivial roots: P by (1 + z^-1), Q by (1 - z^-1)
    p1 = np.empty(p + 1)
    q1 = np.empty(p + 1)
    p1[0] = psum[0]
    q1[0] = qdiff[0]
    for i in range(1, p + 1):
        p1[i] = psum[i] - p1[i - 1]
        q1[i] = qdiff[i] + q1[i - 1]

    half = p // 2
    omegas_p = _unit_circle_angles(_cosine_form(p1), half)
    omegas_q = _unit_circle_angles(_cosine_form(q1), half)

    interleaved = np.all(omegas_p < omegas_q) and np.all(
        omegas_q[:-1] < omegas_p[1:])
    if not interleaved:
        raise LsfConversionError("sum/difference root angles do not interleave")
    omegas = np.sort(np.concatenate([omegas_p, omegas_q]))
    if not validate_lsf(omegas):
        raise LsfConversionError("computed angles are not strictly ascending in (0, pi)")
    return omegas


def lsf_to_lpc(lsf: np.ndarray, gain: float = 1.0) -> LpcFrame:
    """Rebuild the predictor from ascending line spectral frequencies.

    Even positions (0-based) of the ascending vector belong to the
    palindromic polynomial, odd positions to the antipalindromic one.
    """
    omegas = np.asarray(lsf, dtype=np.float64)
    p = len(omegas)
    if p % 2 != 0 or p == 0:
        raise ValueError(f"only even orders are supported, got {p}")
    if not validate_lsf(omegas):
        raise ValueError("LSF vector must be strictly ascending in (0, pi)")

    def expand(angles, trivial):
        poly = np.array(trivial, dtype=np.float64)
        for w in angles:
            poly = np.convolve(poly, [1.0, -2.0 * np.cos(w), 1.0])
        return poly

    psum = expand(omegas[0::2], [1.0, 1.0])
    qdiff = expand(omegas[1::2], [1.0, -1.0])
    a_full = 0.5 * (psum + qdiff)  # degree p+1; leading 1, trailing ~0
    return LpcFrame(coefficients=-a_full[1:p + 1], gain=float(gain))


def validate_lsf(omegas) -> bool:
    """True iff strictly ascending and inside the open interval (0, pi)."""
    om = np.asarray(omegas, dtype=np.float64)
    if len(om) == 0:
        return False
    if not np.all(np.isfinite(om)):
        return False
    return bool(om[0] > 0.0 and om[-1] < np.pi and np.all(np.diff(om) > 0.0))


def rectify_lsf(raw) -> np.ndarray:
    """Force an arbitrary real vector into a valid LSF vector.

    Clamps into [MIN_GAP, pi - MIN_GAP], sorts, then sweeps forward pushing
    each value at least MIN_GAP above its predecessor; if the forward sweep
    overshoots the upper bound a backward sweep pulls values down.  Total
    and idempotent.
    """
    x = np.asarray(raw, dtype=np.float64)
    x = np.where(np.isfinite(x), x, 0.5 * np.pi)
    x = np.sort(np.clip(x, MIN_GAP, np.pi - MIN_GAP))
    for i in range(1, len(x)):
        floor = x[i - 1] + MIN_GAP
        if x[i] < floor:
            x[i] = floor
    if len(x) and x[-1] > np.pi - MIN_GAP:
        x[-1] = np.pi - MIN_GAP
        for i in range(len(x) - 2, -1, -1):
            ceil = x[i + 1] - MIN_GAP
            if x[i] > ceil:
                x[i] = ceil
    return x
