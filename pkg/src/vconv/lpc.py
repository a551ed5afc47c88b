"""Linear predictive analysis: autocorrelation method, streaming filters, poles.

Sign convention, used everywhere in this package: the predictor is
s_hat(n) = sum_k a_k * s(n-k), so the analysis (inverse) filter is
A(z) = 1 - sum_k a_k z^-k and the synthesis filter is 1/A(z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SILENCE_FLOOR = 1e-12
UNSTABLE_LIMIT = 1e12

_DK_MOVE_TOL = 1e-12
_DK_MAX_ITER = 1000
_DK_RESIDUAL_TOL = 1e-8


class FilterUnstableError(RuntimeError):
    """Synthesis output blew up (non-finite or beyond UNSTABLE_LIMIT).

    Carries the offending output and the updated state so a streaming caller
    can decide how to continue.
    """

    def __init__(self, message, output=None, state=None):
        super().__init__(message)
        self.output = output
        self.state = state


class RootConvergenceError(RuntimeError):
    """Durand-Kerner iteration failed to converge; carries the best iterate."""

    def __init__(self, message, roots=None):
        super().__init__(message)
        self.roots = roots


@dataclass
class LpcFrame:
    """Order-p predictor: coefficients a_1..a_p plus the prediction gain.

    `gain` is sqrt of the final prediction-error power.  `degenerate` is set
    when the recursion hit a reflection coefficient of magnitude >= 1 and
    stopped early (remaining coefficients are zero).
    """

    coefficients: np.ndarray
    gain: float
    degenerate: bool = field(default=False)

    @property
    def order(self) -> int:
        return len(self.coefficients)


def autocorrelate(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r[tau] = (1/N) sum_t x[t] x[t+tau], tau = 0..max_lag.

    The 1/N normalization makes the Toeplitz system positive semidefinite,
    which keeps the resulting predictor minimum phase.
    """
    x = np.asarray(frame, dtype=np.float64)
    n = len(x)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag {max_lag} out of range for frame of {n} samples")
    full = np.correlate(x, x, mode="full")
    return full[n - 1:n + max_lag] / n


def levinson_durbin(r: np.ndarray, order: int) -> LpcFrame:
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Returns zero coefficients and zero gain for (near-)silent input
    (r[0] <= SILENCE_FLOOR).  If a reflection coefficient reaches magnitude
    1 the recursion stops and the frame is flagged degenerate.
    """
    r = np.asarray(r, dtype=np.float64)
    if len(r) < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {len(r)}")
    a = np.zeros(order)
    if r[0] <= SILENCE_FLOOR:
        return LpcFrame(coefficients=a, gain=0.0)

    energy = r[0]
    for i in range(1, order + 1):
        acc = np.dot(a[:i - 1], r[i - 1:0:-1])
        k = (r[i] - acc) / energy
        if abs(k) >= 1.0:
            a[i - 1:] = 0.0
            return LpcFrame(coefficients=a, gain=float(np.sqrt(energy)),
                            degenerate=True)
        a[:i - 1] = a[:i - 1] - k * a[:i - 1][::-1]
        a[i - 1] = k
        energy *= 1.0 - k * k
    return LpcFrame(coefficients=a, gain=float(np.sqrt(max(energy, 0.0))))


def analyze_frame(frame: np.ndarray, order: int) -> LpcFrame:
    """Autocorrelation analysis of one (windowed) frame at the given order."""
    return levinson_durbin(autocorrelate(frame, order), order)


def inverse_filter(segment, lpc: LpcFrame, state):
    """Prediction error e[n] = s[n] - sum_k a_k s[n-k], streaming across segments.

    `state` holds the last p input samples (oldest first) from the previous
    segment; the returned state continues the stream.
    """
    a = np.asarray(lpc.coefficients, dtype=np.float64)
    p = len(a)
    state = np.asarray(state, dtype=np.float64)
    if len(state) != p:
        raise ValueError(f"state length {len(state)} != filter order {p}")
    seg = np.asarray(segment, dtype=np.float64)
    ext = np.concatenate([state, seg])
    kernel = np.concatenate([[1.0], -a])
    residual = np.convolve(ext, kernel)[p:p + len(seg)]
    new_state = ext[len(ext) - p:] if p else state
    return residual, new_state.copy()


def synthesis_filter(residual, lpc: LpcFrame, state):
    """All-pole synthesis s[n] = e[n] + sum_k a_k s[n-k], streaming across segments.

    `state` holds the last p output samples (oldest first).  Raises
    FilterUnstableError if the output goes non-finite or beyond
    UNSTABLE_LIMIT in magnitude; the exception carries the output and state.
    """
    a = np.asarray(lpc.coefficients, dtype=np.float64)
    p = len(a)
    state = np.asarray(state, dtype=np.float64)
    if len(state) != p:
        raise ValueError(f"state length {len(state)} != filter order {p}")
    e = np.asarray(residual, dtype=np.float64)
    n = len(e)
    buf = np.concatenate([state, np.zeros(n)])
    for i in range(n):
        buf[p + i] = e[i] + np.dot(a, buf[i:p + i][::-1])
    out = buf[p:]
    new_state = buf[len(buf) - p:].copy() if p else state
    peak = np.max(np.abs(out)) if n else 0.0
    if not np.isfinite(peak) or peak > UNSTABLE_LIMIT:
        raise FilterUnstableError(
            f"synthesis output reached magnitude {peak:.3g}",
            output=out, state=new_state)
    return out, new_state


def _horner(coeffs, z):
    v = np.zeros_like(z)
    for c in coeffs:
        v = v * z + c
    return v


def lpc_poles(lpc: LpcFrame) -> np.ndarray:
    """Roots of z^p - a_1 z^(p-1) - ... - a_p via Durand-Kerner iteration.

    Starts from points on a perturbed circle of radius 1 + max|coef| and
    iterates all roots simultaneously until the largest movement is below
    1e-12 (at most 1000 iterations).  Every returned root must satisfy
    |poly(root)| <= 1e-8, else RootConvergenceError carries the best iterate.
    """
    p = lpc.order
    if p < 1:
        raise ValueError("need order >= 1 to compute poles")
    coeffs = np.concatenate([[1.0], -np.asarray(lpc.coefficients, dtype=np.float64)])
    coeffs = coeffs.astype(np.complex128)

    radius = 1.0 + np.max(np.abs(coeffs[1:]))
    angles = 2.0 * np.pi * np.arange(p) / p + 0.4  # offset breaks conjugate symmetry
    z = radius * np.exp(1j * angles)

    for _ in range(_DK_MAX_ITER):
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        denom = diff.prod(axis=1)
        if np.any(denom == 0):
            z = z + 1e-12 * np.exp(1j * np.arange(p))
            continue
        step = _horner(coeffs, z) / denom
        z = z - step
        if np.max(np.abs(step)) <= _DK_MOVE_TOL:
            break

    # the movement threshold is only the stop rule; near the unit circle at
    # high order the steps bottom out around 1e-11 on rounding noise while
    # the roots are already exact to machine precision, so acceptance rests
    # on the polynomial residual alone
    z = np.sort_complex(z)
    residual = np.max(np.abs(_horner(coeffs, z)))
    if residual > _DK_RESIDUAL_TOL:
        raise RootConvergenceError(
            f"root finding did not converge (residual {residual:.3g})", roots=z)
    return z
