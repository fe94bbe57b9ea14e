"""Equivalence of the three-term loss to a two-term form, and the ideal
closed-loop response predictor.

With Q' = Q + T2^T S T2 and W' = Q'^+ (Q W + T2^T S T3 y), the three-term
loss equals ||W' - Y_P||^2_{Q'} + ||dU||^2_R up to a constant, so the
increment weighting acts as an implicit first-order reference trajectory
with time constant sqrt(s/q) samples.  The predictor turns that into the
closed-loop output series for the idealized (R = 0, long-horizon) loop,
including the geometric decay rate alpha for delayed outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dmc import WeightingSet, difference_matrix, current_output_selector
from .errors import ShapeError, SingularityError

__all__ = [
    "EquivalentWeights",
    "ReferenceTrajectory",
    "ResponsePrediction",
    "equivalent_qprime",
    "qprime_block",
    "exact_reference",
    "closed_form_reference",
    "alpha_coefficient",
    "predict_closed_loop",
]


@dataclass(frozen=True)
class EquivalentWeights:
    qprime: np.ndarray  # pP x pP, symmetric block tridiagonal


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Shaped path from the current output toward the setpoint, one output."""

    values: np.ndarray            # length P, samples k+1 .. k+P
    kind: str                     # exact | first_order | ramp_shifted
    time_constant: float          # samples; sqrt(s/q) for the closed forms


@dataclass(frozen=True)
class ResponsePrediction:
    values: np.ndarray
    alpha: float
    delay: int


def equivalent_qprime(weights: WeightingSet) -> EquivalentWeights:
    """Q' = Q + T2^T S T2; exact matrix identity, no approximation."""
    T2 = weights.T2()
    qprime = np.diag(weights.q_diag) + (T2.T * weights.s_diag) @ T2
    return EquivalentWeights(qprime)


def qprime_block(q: float, s: float, P: int, delay: int = 1) -> np.ndarray:
    """One output's Q' block written out entry by entry.

    Interior diagonal q + 2s with -s off-diagonals and q + s in the last
    slot; a delay of d leaves d - 2 fully zero rows and a bare s corner at
    the boundary sample k + d - 1 (0-based row d - 2), the one sample the
    increment term still touches.
    """
    if delay < 1 or delay > P:
        raise ValueError("delay must be in 1..P")
    B = np.zeros((P, P))
    corner = delay - 2  # -1 when undelayed
    for h in range(max(corner, 0), P):
        if h == P - 1:
            B[h, h] = q + s
        elif h == corner:
            B[h, h] = s
        else:
            B[h, h] = q + 2 * s
        if h > max(corner, 0):
            B[h, h - 1] = -s
            B[h - 1, h] = -s
    return B


def exact_reference(setpoint: np.ndarray, y_now: float, q: float, s: float,
                    delay: int = 1) -> ReferenceTrajectory:
    """Equivalent reference solved from the discrete identity, one output.

    Solves Q' w' = Q w + T2^T S T3 y on the sub-block where Q' is
    invertible (rows before the boundary sample carry no weight at all and
    are filled with the raw setpoint).
    """
    w = np.asarray(setpoint, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError("setpoint must be a 1-D horizon vector")
    P = w.size
    if q <= 0:
        raise SingularityError("exact reference needs q > 0 on weighted samples")
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return ReferenceTrajectory(w.copy(), "exact", 0.0)
    if delay < 1 or delay > P:
        raise ValueError("delay must be in 1..P")
    qprime = qprime_block(q, s, P, delay)
    rhs = q * w
    rhs[:delay - 1] = 0.0  # samples the output weight does not touch
    if delay == 1:
        rhs[0] = q * w[0] + s * float(y_now)
    first = max(delay - 2, 0)  # boundary sample row; coupled via the s corner
    values = w.copy()
    values[first:] = np.linalg.solve(qprime[first:, first:], rhs[first:])
    return ReferenceTrajectory(values, "exact", math.sqrt(s / q))


def closed_form_reference(setpoint_kind: str, y_now: float, q: float, s: float,
                          P: int, level: float | None = None,
                          start: float | None = None,
                          slope: float | None = None) -> ReferenceTrajectory:
    """First-order reference in closed form, one output.

    constant: w'(k+h) = w + (y(k) - w) exp(-h/lambda), a first-order path
    from the current output to the setpoint ``level``.
    ramp: w'(k+h) = w(k+h) + (y(k) - w(k)) exp(-h/lambda) for the ramp
    ``start + slope*h``.
    """
    if q <= 0 or s <= 0:
        raise ValueError("closed-form reference needs q > 0 and s > 0")
    lam = math.sqrt(s / q)
    h = np.arange(1, P + 1, dtype=float)
    decay = np.exp(-h / lam)
    if setpoint_kind == "constant":
        if level is None:
            raise ValueError("constant setpoint needs level")
        values = level + (float(y_now) - level) * decay
        kind = "first_order"
    elif setpoint_kind == "ramp":
        if start is None or slope is None:
            raise ValueError("ramp setpoint needs start and slope")
        values = (start + slope * h) + (float(y_now) - start) * decay
        kind = "ramp_shifted"
    else:
        raise ValueError(f"unknown setpoint kind {setpoint_kind!r}")
    return ReferenceTrajectory(values, kind, lam)


def alpha_coefficient(q: float, s: float) -> float:
    """Inside-unit-circle root of a^2 - (q/s + 2) a + 1 = 0.

    Uses the factored discriminant (q/s)(q/s + 4) so tiny q/s ratios do not
    lose precision to cancellation.
    """
    if s <= 0:
        raise ValueError("alpha is undefined for s <= 0 (two-term limit)")
    if q < 0:
        raise ValueError("q must be >= 0")
    ratio = q / s
    return ((ratio + 2.0) - math.sqrt(ratio * (ratio + 4.0))) / 2.0


def predict_closed_loop(reference: ReferenceTrajectory, delay: int,
                        q: float, s: float) -> ResponsePrediction:
    """Idealized (R = 0) closed-loop output series for one output.

    For an undelayed output the loop reproduces the reference exactly; a
    delay of d gives d - 1 zero samples and then the reference minus a
    geometric tail anchored at the boundary sample.
    """
    if delay < 1:
        raise ValueError("delay must be >= 1 sample")
    wp = np.asarray(reference.values, dtype=float)
    if delay == 1:
        return ResponsePrediction(wp.copy(), 1.0 if s <= 0 else alpha_coefficient(q, s),
                                  1)
    alpha = alpha_coefficient(q, s)
    if delay > wp.size:
        raise ShapeError("delay exceeds the reference horizon")
    values = np.zeros(wp.size)
    h = np.arange(delay, wp.size + 1)
    values[delay - 1:] = wp[delay - 1:] - wp[delay - 2] * alpha ** (h - delay + 1)
    return ResponsePrediction(values, alpha, delay)
