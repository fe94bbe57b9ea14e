"""Discrete-time LTI plant models, open-loop simulation and disturbances.

Polynomials are 1-D float arrays of coefficients in ascending powers of the
unit-delay operator q^-1 (index 0 is the q^0 term).  Denominators are monic.
All signals are sampled; the sample time is carried as metadata and defaults
to one, so every time constant in the toolkit is expressed in samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import ShapeError

__all__ = [
    "SisoChannel",
    "MimoPlant",
    "ArmaDisturbance",
    "simulate_plant",
    "step_response",
    "generate_disturbance",
    "make_rng",
]


def _as_poly(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError("polynomial must be a non-empty 1-D coefficient list")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the single RNG used everywhere for reproducibility."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SisoChannel:
    """One rational input/output channel with an optional extra transport delay.

    ``numerator`` may itself carry leading zeros; the total delay of the
    channel is the index of the first nonzero numerator coefficient plus
    ``extra_delay``.  An all-zero numerator denotes an unconnected channel.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    extra_delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "numerator", _as_poly(self.numerator))
        object.__setattr__(self, "denominator", _as_poly(self.denominator))
        if self.denominator[0] != 1.0:
            raise ValueError("denominator must be monic (leading coefficient 1)")
        if self.extra_delay < 0:
            raise ValueError("extra_delay must be >= 0")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.numerator)

    @property
    def total_delay(self) -> int:
        """Input-to-output delay in samples; meaningless for a zero channel."""
        if self.is_zero:
            return self.extra_delay
        first = int(np.flatnonzero(self.numerator)[0])
        return first + self.extra_delay

    def static_gain(self) -> float:
        num = float(np.sum(self.numerator))
        den = float(np.sum(self.denominator))
        return num / den

    def pole_moduli(self) -> np.ndarray:
        """Moduli of the denominator roots in the z-plane (>=1 means unstable)."""
        if self.denominator.size == 1:
            return np.empty(0)
        # den in q^-1 ascending equals z-polynomial with the same coefficients
        # in descending powers of z.
        return np.abs(np.roots(self.denominator))

    def is_stable(self, margin: float = 0.0) -> bool:
        mods = self.pole_moduli()
        return bool(mods.size == 0 or np.max(mods) < 1.0 - margin)

    def filter_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        """(b, a) for ``scipy.signal.lfilter`` with the extra delay folded into b."""
        b = np.concatenate([np.zeros(self.extra_delay), self.numerator])
        return b, self.denominator

    def response(self, u: np.ndarray) -> np.ndarray:
        """Zero-initial-condition response to the input series ``u``."""
        if self.is_zero:
            return np.zeros(len(u))
        b, a = self.filter_coeffs()
        return lfilter(b, a, np.asarray(u, dtype=float))

    def scaled(self, gain_scale: float) -> "SisoChannel":
        return SisoChannel(self.numerator * gain_scale, self.denominator.copy(),
                           self.extra_delay)


@dataclass(frozen=True)
class MimoPlant:
    """p-output, m-input grid of SISO channels; the simulation ground truth."""

    channels: tuple  # p rows, each a tuple of m SisoChannel
    sample_time: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.channels)
        if not rows or not rows[0]:
            raise ShapeError("plant needs at least one output and one input")
        m = len(rows[0])
        if any(len(row) != m for row in rows):
            raise ShapeError("all output rows must have the same number of channels")
        for row in rows:
            for ch in row:
                if not ch.is_zero and ch.total_delay < 1:
                    raise ValueError("plant channels need at least one sample delay")
        object.__setattr__(self, "channels", rows)

    @property
    def n_outputs(self) -> int:
        return len(self.channels)

    @property
    def n_inputs(self) -> int:
        return len(self.channels[0])

    def output_delays(self) -> np.ndarray:
        """Per-output delay d_i: the smallest delay among the connected channels."""
        d = np.ones(self.n_outputs, dtype=int)
        for i, row in enumerate(self.channels):
            delays = [ch.total_delay for ch in row if not ch.is_zero]
            d[i] = min(delays) if delays else 1
        return d

    def static_gains(self) -> np.ndarray:
        g = np.zeros((self.n_outputs, self.n_inputs))
        for i, row in enumerate(self.channels):
            for j, ch in enumerate(row):
                g[i, j] = 0.0 if ch.is_zero else ch.static_gain()
        return g

    def scaled_gains(self, gain_scale: float) -> "MimoPlant":
        """Same dynamics with every channel gain multiplied by ``gain_scale``."""
        rows = tuple(tuple(ch.scaled(gain_scale) for ch in row)
                     for row in self.channels)
        return MimoPlant(rows, self.sample_time)

    def settling_samples(self, tol: float = 0.01, cap: int = 5000) -> int:
        """Open-loop settling time estimate: last sample where any channel's
        step response is still more than ``tol`` of its gain away from it."""
        horizon = 64
        while horizon < cap:
            coeffs = step_response(self, horizon)
            gains = self.static_gains()
            settle = 1
            ok = True
            for i in range(self.n_outputs):
                for j in range(self.n_inputs):
                    if self.channels[i][j].is_zero:
                        continue
                    scale = max(abs(gains[i, j]), 1e-12)
                    err = np.abs(coeffs[i, j] - gains[i, j]) / scale
                    if err[-1] > tol:
                        ok = False
                        break
                    late = np.flatnonzero(err > tol)
                    if late.size:
                        settle = max(settle, int(late[-1]) + 2)
                if not ok:
                    break
            if ok:
                return settle
            horizon *= 2
        return cap


@dataclass(frozen=True)
class ArmaDisturbance:
    """Filtered-white-noise disturbance for one output channel.

    Unlike plant channels the filter may have zero delay (a direct term).
    The same seed always reproduces the same series bit for bit.
    """

    filter: SisoChannel
    noise_variance: float
    seed: int = 0

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")


def simulate_plant(plant: MimoPlant, inputs: np.ndarray,
                   disturbances: np.ndarray | None = None) -> np.ndarray:
    """Open-loop response, shape (T, p), from zero initial conditions.

    ``inputs`` is (T, m); ``disturbances`` is an optional (T, p) series added
    at the outputs.
    """
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != plant.n_inputs:
        raise ShapeError(
            f"inputs must be (T, {plant.n_inputs}), got {u.shape}")
    T = u.shape[0]
    y = np.zeros((T, plant.n_outputs))
    for i, row in enumerate(plant.channels):
        for j, ch in enumerate(row):
            if not ch.is_zero:
                y[:, i] += ch.response(u[:, j])
    if disturbances is not None:
        v = np.asarray(disturbances, dtype=float)
        if v.shape != (T, plant.n_outputs):
            raise ShapeError(
                f"disturbances must be (T, {plant.n_outputs}), got {v.shape}")
        y = y + v
    return y


def step_response(plant: MimoPlant, horizon: int) -> np.ndarray:
    """Step-response coefficients a_ij(1..N), shape (p, m, N)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    coeffs = np.zeros((plant.n_outputs, plant.n_inputs, horizon))
    u = np.ones(horizon + 1)
    for i, row in enumerate(plant.channels):
        for j, ch in enumerate(row):
            if not ch.is_zero:
                coeffs[i, j] = ch.response(u)[1:]
    return coeffs


def generate_disturbance(dist: ArmaDisturbance, length: int) -> np.ndarray:
    """Length-``length`` disturbance realization, deterministic under the seed."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if length == 0:
        return np.zeros(0)
    rng = make_rng(dist.seed)
    e = rng.standard_normal(length) * math.sqrt(dist.noise_variance)
    if dist.filter.is_zero:
        return np.zeros(length)
    b, a = dist.filter.filter_coeffs()
    return lfilter(b, a, e)


def disturbance_matrix(filter: SisoChannel, noise_variance: float, seed: int,
                       length: int, n_outputs: int) -> np.ndarray:
    """(T, p) matrix of mutually independent realizations through one filter.

    Output streams come from ``SeedSequence(seed).spawn`` so they are
    independent yet jointly reproducible from the single seed.
    """
    children = np.random.SeedSequence(seed).spawn(n_outputs)
    v = np.zeros((length, n_outputs))
    if noise_variance == 0 or filter.is_zero or length == 0:
        return v
    b, a = filter.filter_coeffs()
    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        e = rng.standard_normal(length) * math.sqrt(noise_variance)
        v[:, i] = lfilter(b, a, e)
    return v
