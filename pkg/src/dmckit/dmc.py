"""Dynamic-matrix prediction and the two- and three-term control laws.

The controller minimizes, over the stacked move vector dU (m inputs times M
moves), a quadratic loss with an output-error term weighted by Q, a move
term weighted by R and, in the three-term law, a predicted-output-increment
term weighted by S.  Stacking is output-major: the prediction vector holds P
samples of output 1, then P samples of output 2, and so on; the move vector
holds M moves of input 1 first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import ShapeError, SingularityError

__all__ = [
    "ControllerSpec",
    "WeightingSet",
    "DynamicMatrix",
    "DmcPredictor",
    "build_weighting",
    "build_dynamic_matrix",
    "difference_matrix",
    "current_output_selector",
    "solve_two_term",
    "solve_three_term",
    "first_move",
    "move_selector",
]

log = logging.getLogger("dmckit")

# Ridge added once when the normal matrix fails to factor, relative to its
# mean diagonal; mirrors the small r used in practice against ill conditioning.
RIDGE_FRACTION = 1e-10


def _vec(x, n, name) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (n,):
        raise ShapeError(f"{name} must have length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ControllerSpec:
    """Horizons, weights, delays and bounds for one DMC controller.

    ``increment_weights`` of all zeros gives the plain two-term law.
    ``reference_time_constants`` optionally shapes the setpoint vector into
    first-order reference trajectories (the classic industrial alternative
    to the implicit shaping the increment term provides).
    Bounds are per input / per output; ``None`` means unconstrained.
    ``y_ranges`` / ``u_ranges`` are (min, max) pairs used for normalization
    and for the comparison metrics.
    """

    model_horizon: int
    prediction_horizon: int
    control_horizon: int
    output_weights: np.ndarray
    move_weights: np.ndarray
    increment_weights: np.ndarray
    output_delays: np.ndarray
    reference_time_constants: np.ndarray | None = None
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    du_max: np.ndarray | None = None
    y_min: np.ndarray | None = None
    y_max: np.ndarray | None = None
    y_ranges: np.ndarray | None = None
    u_ranges: np.ndarray | None = None
    sample_time: float = 1.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.output_weights, dtype=float)).size
        m = np.atleast_1d(np.asarray(self.move_weights, dtype=float)).size
        object.__setattr__(self, "output_weights", _vec(self.output_weights, p, "output_weights"))
        object.__setattr__(self, "move_weights", _vec(self.move_weights, m, "move_weights"))
        object.__setattr__(self, "increment_weights", _vec(self.increment_weights, p, "increment_weights"))
        delays = np.atleast_1d(np.asarray(self.output_delays, dtype=int))
        if delays.shape != (p,):
            raise ShapeError(f"output_delays must have length {p}")
        object.__setattr__(self, "output_delays", delays)
        N, P, M = self.model_horizon, self.prediction_horizon, self.control_horizon
        if not (1 <= M <= P <= N):
            raise ValueError(f"horizons must satisfy 1 <= M <= P <= N, got N={N} P={P} M={M}")
        if np.any(self.output_weights < 0) or np.any(self.move_weights < 0) \
                or np.any(self.increment_weights < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(delays < 1):
            raise ValueError("output delays must be >= 1 sample")
        if np.any(delays > P):
            raise ValueError("output delays must not exceed the prediction horizon")
        zero_q = (self.output_weights == 0) & (self.increment_weights > 0)
        if np.any(zero_q):
            log.warning("output(s) %s have q=0 with s>0: the implicit reference "
                        "time constant sqrt(s/q) is undefined there",
                        np.flatnonzero(zero_q).tolist())
        for name in ("reference_time_constants", "u_min", "u_max", "du_max",
                     "y_min", "y_max"):
            val = getattr(self, name)
            if val is not None:
                n = m if name in ("u_min", "u_max", "du_max") else p
                object.__setattr__(self, name, _vec(val, n, name))
        for name, n in (("y_ranges", p), ("u_ranges", m)):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if arr.shape != (n, 2):
                    raise ShapeError(f"{name} must be ({n}, 2) (min, max) pairs")
                if np.any(arr[:, 1] <= arr[:, 0]):
                    raise ValueError(f"{name} rows must satisfy max > min")
                object.__setattr__(self, name, arr)

    @property
    def n_outputs(self) -> int:
        return self.output_weights.size

    @property
    def n_inputs(self) -> int:
        return self.move_weights.size

    @property
    def is_three_term(self) -> bool:
        return bool(np.any(self.increment_weights > 0))

    @property
    def has_bounds(self) -> bool:
        return any(getattr(self, f) is not None
                   for f in ("u_min", "u_max", "du_max", "y_min", "y_max"))

    def with_(self, **kw) -> "ControllerSpec":
        return replace(self, **kw)


def difference_matrix(p: int, P: int) -> np.ndarray:
    """Block-diagonal first-difference operator (1 on the diagonal, -1 below)."""
    t2 = np.eye(P) - np.diag(np.ones(P - 1), -1)
    return scipy.linalg.block_diag(*([t2] * p))


def current_output_selector(p: int, P: int) -> np.ndarray:
    """(pP, p) selector placing each current output into its block's first row."""
    t3 = np.zeros((P, 1))
    t3[0, 0] = 1.0
    return scipy.linalg.block_diag(*([t3] * p))


@dataclass(frozen=True)
class WeightingSet:
    """Diagonals of Q, R, S plus the difference operators for one controller."""

    q_diag: np.ndarray  # length pP, with d_i - 1 leading zeros per output block
    r_diag: np.ndarray  # length mM
    s_diag: np.ndarray  # length pP, same delay-zero rule as q_diag
    n_outputs: int
    n_inputs: int
    prediction_horizon: int
    control_horizon: int

    def Q(self) -> np.ndarray:
        return np.diag(self.q_diag)

    def R(self) -> np.ndarray:
        return np.diag(self.r_diag)

    def S(self) -> np.ndarray:
        return np.diag(self.s_diag)

    def T2(self) -> np.ndarray:
        return difference_matrix(self.n_outputs, self.prediction_horizon)

    def T3(self) -> np.ndarray:
        return current_output_selector(self.n_outputs, self.prediction_horizon)


def build_weighting(spec: ControllerSpec) -> WeightingSet:
    """Expand per-signal weights into stacked diagonals with delay zeros."""
    p, m = spec.n_outputs, spec.n_inputs
    P, M = spec.prediction_horizon, spec.control_horizon
    q_diag = np.zeros(p * P)
    s_diag = np.zeros(p * P)
    for i in range(p):
        start = i * P + (spec.output_delays[i] - 1)
        q_diag[start:(i + 1) * P] = spec.output_weights[i]
        s_diag[start:(i + 1) * P] = spec.increment_weights[i]
    r_diag = np.repeat(spec.move_weights, M)
    return WeightingSet(q_diag, r_diag, s_diag, p, m, P, M)


@dataclass(frozen=True)
class DynamicMatrix:
    """Step-response coefficients and the stacked banded-Toeplitz predictor."""

    coefficients: np.ndarray  # (p, m, N), a_ij(1..N)
    matrix: np.ndarray        # (pP, mM)
    prediction_horizon: int
    control_horizon: int

    @property
    def n_outputs(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.coefficients.shape[1]


def build_dynamic_matrix(coefficients: np.ndarray, spec: ControllerSpec) -> DynamicMatrix:
    """Assemble the pP x mM prediction matrix from step coefficients.

    Block (i, j) has entry a_ij(h - c + 1) at row h, column c (1-based) for
    h >= c and zero above the diagonal.
    """
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.ndim != 3:
        raise ShapeError("coefficients must be (p, m, N)")
    p, m, n_avail = coeffs.shape
    if p != spec.n_outputs or m != spec.n_inputs:
        raise ShapeError(f"coefficient grid is {p}x{m}, spec wants "
                         f"{spec.n_outputs}x{spec.n_inputs}")
    P, M = spec.prediction_horizon, spec.control_horizon
    if n_avail < P:
        raise ShapeError(f"need step coefficients up to the prediction horizon "
                         f"({P}), got {n_avail}")
    A = np.zeros((p * P, m * M))
    rows = np.arange(P)[:, None]
    cols = np.arange(M)[None, :]
    lag = rows - cols  # a index minus one where lag >= 0
    mask = lag >= 0
    for i in range(p):
        for j in range(m):
            block = np.zeros((P, M))
            block[mask] = coeffs[i, j, lag[mask]]
            A[i * P:(i + 1) * P, j * M:(j + 1) * M] = block
    return DynamicMatrix(coeffs, A, P, M)


class DmcPredictor:
    """Moving-horizon output prediction with constant-bias feedback correction.

    The state covers the next ``model_horizon`` samples of every output.  Each
    control step runs: ``correct`` with the new measurement (which pins the
    first predicted sample to it), ``free_response`` for the optimizer, then
    ``advance`` with the applied first move.
    """

    def __init__(self, step_coefficients: np.ndarray):
        coeffs = np.asarray(step_coefficients, dtype=float)
        if coeffs.ndim != 3:
            raise ShapeError("step coefficients must be (p, m, N)")
        self.coeffs = coeffs
        self.p, self.m, self.N = coeffs.shape
        self.y_model = np.zeros((self.p, self.N))
        self.last_u = np.zeros(self.m)
        self._started = False

    def start(self, y_measured: np.ndarray) -> None:
        y0 = _vec(y_measured, self.p, "y_measured")
        self.y_model[:] = y0[:, None]
        self.last_u[:] = 0.0
        self._started = True

    def correct(self, y_measured: np.ndarray) -> np.ndarray:
        """Apply the measured-minus-predicted bias to the whole horizon."""
        if not self._started:
            self.start(y_measured)
            return np.zeros(self.p)
        y_meas = _vec(y_measured, self.p, "y_measured")
        bias = y_meas - self.y_model[:, 0]
        self.y_model += bias[:, None]
        return bias

    def _shifted(self) -> np.ndarray:
        # one-step shift holding the settled tail value
        return np.concatenate([self.y_model[:, 1:], self.y_model[:, -1:]], axis=1)

    def free_response(self, prediction_horizon: int) -> np.ndarray:
        """Stacked pP free response (input frozen at its last value)."""
        if prediction_horizon > self.N:
            raise ShapeError("prediction horizon exceeds the model horizon")
        return self._shifted()[:, :prediction_horizon].reshape(-1)

    def advance(self, du: np.ndarray) -> None:
        du = _vec(du, self.m, "du")
        self.y_model = self._shifted() + np.tensordot(self.coeffs, du, axes=([1], [0]))
        self.last_u = self.last_u + du


def _factor_normal_matrix(H: np.ndarray):
    """Cholesky factor of the normal matrix, with a single logged ridge retry."""
    try:
        return scipy.linalg.cho_factor(H)
    except scipy.linalg.LinAlgError:
        n = H.shape[0]
        ridge = RIDGE_FRACTION * np.trace(H) / n
        log.warning("normal matrix not positive definite; adding ridge %.3e", ridge)
        try:
            return scipy.linalg.cho_factor(H + ridge * np.eye(n))
        except scipy.linalg.LinAlgError as exc:
            cond = np.linalg.cond(H)
            raise SingularityError(
                f"normal matrix is singular even after ridge regularization "
                f"(condition number {cond:.3e})") from exc


def solve_two_term(y_free: np.ndarray, w: np.ndarray, weights: WeightingSet,
                   dyn: DynamicMatrix) -> np.ndarray:
    """Unconstrained move vector for the output-error + move-suppression loss."""
    A = dyn.matrix
    AtQ = A.T * weights.q_diag
    H = AtQ @ A + np.diag(weights.r_diag)
    rhs = AtQ @ (w - y_free)
    return scipy.linalg.cho_solve(_factor_normal_matrix(H), rhs)


def solve_three_term(y_free: np.ndarray, w: np.ndarray, y_now: np.ndarray,
                     weights: WeightingSet, dyn: DynamicMatrix) -> np.ndarray:
    """Unconstrained move vector when predicted output increments are weighted.

    Degenerates to :func:`solve_two_term` when the increment weights are zero.
    """
    A = dyn.matrix
    T2 = weights.T2()
    T3 = weights.T3()
    AtQ = A.T * weights.q_diag
    T2A = T2 @ A
    T2AtS = T2A.T * weights.s_diag
    H = AtQ @ A + np.diag(weights.r_diag) + T2AtS @ T2A
    rhs = AtQ @ (w - y_free) - T2AtS @ (T2 @ y_free - T3 @ np.asarray(y_now, dtype=float))
    return scipy.linalg.cho_solve(_factor_normal_matrix(H), rhs)


def first_move(du_vec: np.ndarray, n_inputs: int | None = None,
               control_horizon: int | None = None) -> np.ndarray:
    """Extract the immediate move of each input from the stacked vector."""
    du_vec = np.asarray(du_vec, dtype=float)
    if n_inputs is None and control_horizon is None:
        raise ValueError("give n_inputs or control_horizon")
    if n_inputs is None:
        n_inputs = du_vec.size // control_horizon
    if control_horizon is None:
        control_horizon = du_vec.size // n_inputs
    if du_vec.size != n_inputs * control_horizon:
        raise ShapeError("move vector length must be n_inputs * control_horizon")
    return du_vec.reshape(n_inputs, control_horizon)[:, 0].copy()


def move_selector(n_inputs: int, control_horizon: int) -> np.ndarray:
    """(m, mM) selector matrix picking each input's first move."""
    L = np.zeros((n_inputs, n_inputs * control_horizon))
    for j in range(n_inputs):
        L[j, j * control_horizon] = 1.0
    return L
