"""Photon-pair source state and polarization rotations in the Fock basis.

The source emits photon pairs into two spatial paths, each carrying a
horizontal and a vertical polarization mode.  Mode order throughout the
package is (a_h, a_v, b_h, b_v), where path a is the sensing path and
path b the reference path.  Within the 2n-photon sector the normalized
amplitude of the basis ket |n-m, m, m, n-m> is

    (-1)^m tanh(tau)^n / cosh(tau)^2

which makes the pair-number distribution q_n = (n+1) x^n (1-x)^2 with
x = tanh(tau)^2.  A half-wave rotation by angle ``ang`` acts on a single
path as the 2x2 map

    h ->  cos(ang/2) h + sin(ang/2) v
    v ->  sin(ang/2) h - cos(ang/2) v

and two-mode Fock amplitudes of that map are evaluated by expanding the
corresponding homogeneous polynomial in the transformed creation
operators, exactly and term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GainRangeError",
    "SourceParams",
    "RotationSpec",
    "pdc_term_amplitude",
    "pair_number_weights",
    "truncation_tail",
    "rotation_amplitude",
    "rotation_amplitude_derivative",
    "sensing_transition_matrix",
    "reference_transition_matrix",
    "ideal_pattern_probability",
]


class GainRangeError(ValueError):
    """Raised for source gains outside the supported range 0 <= tau < 1."""


@dataclass(frozen=True)
class SourceParams:
    """Pair source settings.

    tau: collective gain of the source. Dimensionless, 0 <= tau < 1.
    trunc_epsilon: probability mass allowed beyond the pair-number cutoff.
    """

    tau: float
    trunc_epsilon: float = 1e-12

    def __post_init__(self):
        if not (0.0 <= self.tau):
            raise GainRangeError(f"tau must be non-negative, got {self.tau}")
        if self.tau >= 1.0:
            # high-gain regime: truncated expansion no longer certified
            raise GainRangeError(f"tau >= 1 is not supported, got {self.tau}")
        if not (0.0 < self.trunc_epsilon < 1.0):
            raise ValueError("trunc_epsilon must lie in (0, 1)")

    @property
    def x(self) -> float:
        """Shorthand for tanh(tau)^2, the pair-number decay ratio."""
        return math.tanh(self.tau) ** 2


@dataclass(frozen=True)
class RotationSpec:
    """Waveplate settings: phi on the sensing path, theta on the reference path.

    Both angles are phase angles in radians (a physical waveplate set at
    angle w applies a phase rotation of 4*w).
    """

    phi: float
    theta: float = 0.0

    def reduced(self) -> "RotationSpec":
        """Angles folded into [0, 2 pi) for reporting; values stored as given."""
        two_pi = 2.0 * math.pi
        return RotationSpec(phi=self.phi % two_pi, theta=self.theta % two_pi)


def pdc_term_amplitude(n: int, m: int, src: SourceParams) -> float:
    """Normalized amplitude of the ket |n-m, m, m, n-m> of the source state."""
    if n < 0 or m < 0 or m > n:
        raise ValueError(f"invalid term indices n={n}, m={m}")
    sign = -1.0 if m % 2 else 1.0
    return sign * math.tanh(src.tau) ** n / math.cosh(src.tau) ** 2


def pair_number_weights(src: SourceParams, n_max: int) -> np.ndarray:
    """Probabilities q_n of emitting exactly n pairs, for n = 0..n_max."""
    x = src.x
    n = np.arange(n_max + 1)
    return (n + 1) * x**n * (1.0 - x) ** 2


def truncation_tail(src: SourceParams, n_max: int) -> float:
    """Probability mass in pair sectors above n_max.

    Closed form of sum_{n>N} (n+1) x^n (1-x)^2, used to certify cutoffs.
    """
    x = src.x
    return x ** (n_max + 1) * ((n_max + 2) - (n_max + 1) * x)


def _rotation_terms(out_pair, in_pair):
    """Expansion terms (coef, c_exponent, s_exponent) of a rotation amplitude.

    The amplitude <p', q'|U|p, q> is sum_j coef_j * c^aj * s^bj with
    c = cos(ang/2), s = sin(ang/2).  Exponents are non-negative ints.
    """
    pp, qq = out_pair
    p, q = in_pair
    norm = math.sqrt(
        math.factorial(pp) * math.factorial(qq)
        / (math.factorial(p) * math.factorial(q))
    )
    terms = []
    for j in range(max(0, pp - q), min(p, pp) + 1):
        coef = math.comb(p, j) * math.comb(q, pp - j)
        if (q - pp + j) % 2:
            coef = -coef
        a = q - pp + 2 * j  # power of cos(ang/2)
        b = p + pp - 2 * j  # power of sin(ang/2)
        terms.append((coef * norm, a, b))
    return terms


def rotation_amplitude(out_pair, in_pair, ang: float) -> float:
    """Two-mode Fock amplitude <p', q'| U(ang) |p, q> of the half-wave map.

    Args:
        out_pair: (p', q') occupation of the output (h, v) modes.
        in_pair: (p, q) occupation of the input (h, v) modes.
        ang: phase rotation angle in radians.

    Returns:
        Real amplitude; zero when photon number is not conserved.
    """
    pp, qq = out_pair
    p, q = in_pair
    if min(pp, qq, p, q) < 0:
        raise ValueError("occupations must be non-negative")
    if pp + qq != p + q:
        return 0.0
    c = math.cos(ang / 2.0)
    s = math.sin(ang / 2.0)
    total = 0.0
    for coef, a, b in _rotation_terms(out_pair, in_pair):
        total += coef * c**a * s**b
    return total


def rotation_amplitude_derivative(out_pair, in_pair, ang: float) -> float:
    """d/d(ang) of :func:`rotation_amplitude`, exact termwise derivative."""
    pp, qq = out_pair
    p, q = in_pair
    if pp + qq != p + q:
        return 0.0
    c = math.cos(ang / 2.0)
    s = math.sin(ang / 2.0)
    total = 0.0
    for coef, a, b in _rotation_terms(out_pair, in_pair):
        # d/dang [c^a s^b] = (b/2) c^(a+1) s^(b-1) - (a/2) c^(a-1) s^(b+1)
        # guard zero exponents so 0^(-1) never gets evaluated
        if b > 0:
            total += coef * 0.5 * b * c ** (a + 1) * s ** (b - 1)
        if a > 0:
            total -= coef * 0.5 * a * c ** (a - 1) * s ** (b + 1)
    return total


def sensing_transition_matrix(n: int, phi: float, derivative: bool = False) -> np.ndarray:
    """Matrix M[k, m] = <k, n-k| U(phi) |n-m, m> on the sensing path.

    Column m corresponds to the sensing-path part |n-m, m> of the m-th
    source term in the 2n-photon sector; row k to the occupation
    (k, n-k) after the rotation.
    """
    amp = rotation_amplitude_derivative if derivative else rotation_amplitude
    M = np.empty((n + 1, n + 1))
    for k in range(n + 1):
        for m in range(n + 1):
            M[k, m] = amp((k, n - k), (n - m, m), phi)
    return M


def reference_transition_matrix(n: int, theta: float, derivative: bool = False) -> np.ndarray:
    """Matrix M[l, m] = <l, n-l| U(theta) |m, n-m> on the reference path.

    The reference-path part of the m-th source term is |m, n-m>, with the
    occupation mirrored relative to the sensing path.
    """
    amp = rotation_amplitude_derivative if derivative else rotation_amplitude
    M = np.empty((n + 1, n + 1))
    for l in range(n + 1):
        for m in range(n + 1):
            M[l, m] = amp((l, n - l), (m, n - m), theta)
    return M


def ideal_pattern_probability(occupation, rot: RotationSpec, src: SourceParams) -> float:
    """Probability of a joint mode occupation with ideal (lossless) counters.

    Args:
        occupation: (c_ah, c_av, c_bh, c_bv) photon numbers per mode.
        rot: waveplate settings.
        src: source settings.

    Returns:
        Probability of observing exactly this occupation.  Occupations
        with unequal path totals have probability zero because every
        emitted pair places one photon in each path.
    """
    c_ah, c_av, c_bh, c_bv = occupation
    if min(occupation) < 0:
        raise ValueError("occupations must be non-negative")
    n = c_ah + c_av
    if n != c_bh + c_bv:
        return 0.0
    pref = math.tanh(src.tau) ** n / math.cosh(src.tau) ** 2
    total = 0.0
    for m in range(n + 1):
        sign = -1.0 if m % 2 else 1.0
        total += (
            sign
            * rotation_amplitude((c_ah, c_av), (n - m, m), rot.phi)
            * rotation_amplitude((c_bh, c_bv), (m, n - m), rot.theta)
        )
    amp = pref * total
    return amp * amp
