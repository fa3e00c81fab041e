"""Amplitude-level tests: source terms, mode rotations, ideal patterns."""

import math

import numpy as np
import pytest

from oracles import (
    occupation_probabilities,
    rotation_amplitude_by_expm,
    wigner_d_squared,
)
from spdcmet.fock import (
    RotationSpec,
    SourceParams,
    ideal_pattern_probability,
    pair_number_weights,
    pdc_term_amplitude,
    rotation_amplitude,
    rotation_amplitude_derivative,
    truncation_tail,
)
from spdcmet.engine import choose_truncation


# ---------------------------------------------------------------------------
# source amplitudes


def test_vacuum_amplitude_at_zero_gain():
    assert pdc_term_amplitude(0, 0, SourceParams(0.0)) == 1.0


def test_sign_rule_on_second_partition():
    tau = 0.37
    expect = -math.tanh(tau) / math.cosh(tau) ** 2
    assert pdc_term_amplitude(1, 1, SourceParams(tau)) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("n,m", [(2, 3), (-1, 0)])
def test_term_amplitude_domain_errors(n, m):
    with pytest.raises(ValueError):
        pdc_term_amplitude(n, m, SourceParams(0.1))


def test_pair_weight_partial_sums_against_direct_summation():
    # closed-form tail vs brute summation of (n+1) x^n (1-x)^2
    src = SourceParams(0.1)
    x = src.x
    for n_max in range(8):
        direct = sum((n + 1) * x**n for n in range(n_max + 1)) * (1 - x) ** 2
        assert pair_number_weights(src, n_max).sum() == pytest.approx(direct, abs=1e-15)
        assert truncation_tail(src, n_max) == pytest.approx(1.0 - direct, abs=1e-13)


def test_chosen_truncation_meets_mass_budget():
    src = SourceParams(0.1)
    n_max = choose_truncation(src)
    assert pair_number_weights(src, n_max).sum() == pytest.approx(1.0, abs=src.trunc_epsilon)
    assert truncation_tail(src, n_max) < src.trunc_epsilon


# ---------------------------------------------------------------------------
# rotations


def test_zero_angle_rotation_is_signed_identity():
    for p in range(4):
        for q in range(4 - p):
            amp = rotation_amplitude((p, q), (p, q), 0.0)
            assert abs(amp) == pytest.approx(1.0, abs=1e-14)
    assert rotation_amplitude((2, 0), (1, 1), 0.0) == pytest.approx(0.0, abs=1e-14)


def test_single_photon_diagonal_is_half_angle_cosine():
    for phi in (0.0, 0.3, 1.2, 3.0):
        assert rotation_amplitude((1, 0), (1, 0), phi) == pytest.approx(
            math.cos(phi / 2), abs=1e-14
        )


def test_rotation_columns_are_normalized():
    rng = np.random.default_rng(11)
    for _ in range(25):
        total = int(rng.integers(0, 8))
        p = int(rng.integers(0, total + 1))
        ang = float(rng.uniform(0, 2 * np.pi))
        mass = sum(
            rotation_amplitude((pp, total - pp), (p, total - p), ang) ** 2
            for pp in range(total + 1)
        )
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_photon_number_conservation():
    assert rotation_amplitude((2, 1), (1, 0), 0.7) == 0.0
    assert rotation_amplitude((0, 0), (1, 1), 0.7) == 0.0


def test_squared_amplitudes_match_wigner_d_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(40):
        total = int(rng.integers(0, 7))
        p = int(rng.integers(0, total + 1))
        pp = int(rng.integers(0, total + 1))
        ang = float(rng.uniform(0, 2 * np.pi))
        lib = rotation_amplitude((pp, total - pp), (p, total - p), ang) ** 2
        oracle = wigner_d_squared(total, 2 * pp - total, 2 * p - total, ang)
        assert lib == pytest.approx(oracle, abs=1e-12)


def test_signed_amplitudes_match_matrix_exponential():
    # includes the sign structure, not just magnitudes
    rng = np.random.default_rng(5)
    for _ in range(20):
        total = int(rng.integers(0, 6))
        p = int(rng.integers(0, total + 1))
        pp = int(rng.integers(0, total + 1))
        ang = float(rng.uniform(0, 2 * np.pi))
        lib = rotation_amplitude((pp, total - pp), (p, total - p), ang)
        oracle = rotation_amplitude_by_expm((pp, total - pp), (p, total - p), ang)
        assert lib == pytest.approx(oracle, abs=1e-12)


def test_rotation_derivative_matches_finite_difference():
    h = 1e-6
    rng = np.random.default_rng(9)
    for _ in range(20):
        total = int(rng.integers(1, 6))
        p = int(rng.integers(0, total + 1))
        pp = int(rng.integers(0, total + 1))
        ang = float(rng.uniform(0.1, 2 * np.pi))
        out_pair, in_pair = (pp, total - pp), (p, total - p)
        fd = (
            rotation_amplitude(out_pair, in_pair, ang + h)
            - rotation_amplitude(out_pair, in_pair, ang - h)
        ) / (2 * h)
        assert rotation_amplitude_derivative(out_pair, in_pair, ang) == pytest.approx(
            fd, abs=1e-7
        )


# ---------------------------------------------------------------------------
# ideal pattern probabilities


def test_vacuum_pattern_certain_at_zero_gain():
    for phi in (0.0, 1.0):
        p = ideal_pattern_probability((0, 0, 0, 0), RotationSpec(phi), SourceParams(0.0))
        assert p == 1.0


def test_path_imbalanced_patterns_are_impossible():
    src = SourceParams(0.1)
    rot = RotationSpec(0.8, 0.2)
    assert ideal_pattern_probability((1, 0, 0, 0), rot, src) == 0.0
    assert ideal_pattern_probability((2, 1, 1, 0), rot, src) == 0.0


def test_single_pair_transmission_value():
    src = SourceParams(0.1)
    expect = math.tanh(0.1) ** 2 / math.cosh(0.1) ** 4
    got = ideal_pattern_probability((1, 0, 0, 1), RotationSpec(0.0), src)
    assert got == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("tau", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("phi,theta", [(0.0, 0.0), (1.3, 0.0), (0.7, 2.1)])
def test_pattern_mass_sums_to_one(tau, phi, theta):
    src = SourceParams(tau)
    n_max = choose_truncation(src)
    rot = RotationSpec(phi, theta)
    total = 0.0
    for ca in range(n_max + 1):
        for k in range(ca + 1):
            for l in range(ca + 1):
                total += ideal_pattern_probability((k, ca - k, l, ca - l), rot, src)
    assert total == pytest.approx(1.0, abs=src.trunc_epsilon * 10)


def test_equal_rotations_cancel():
    # applying the same rotation to both paths leaves the state invariant
    src = SourceParams(0.12)
    for ang in (0.4, 1.1, 2.9):
        rot = RotationSpec(ang, ang)
        base = RotationSpec(0.0, 0.0)
        for occ in [(1, 0, 0, 1), (1, 1, 1, 1), (2, 0, 1, 1), (0, 2, 2, 0)]:
            assert ideal_pattern_probability(occ, rot, src) == pytest.approx(
                ideal_pattern_probability(occ, base, src), abs=1e-12
            )


def test_patterns_match_polynomial_propagation_oracle():
    # brute-force expansion of the rotated creation-operator polynomial
    src = SourceParams(0.1)
    n_max = 6
    rng = np.random.default_rng(17)
    for _ in range(4):
        phi = float(rng.uniform(0, 2 * np.pi))
        theta = float(rng.uniform(0, 2 * np.pi))
        oracle = occupation_probabilities(src, phi, theta, n_max)
        rot = RotationSpec(phi, theta)
        for ca in range(n_max + 1):
            for k in range(ca + 1):
                for l in range(ca + 1):
                    occ = (k, ca - k, l, ca - l)
                    assert ideal_pattern_probability(occ, rot, src) == pytest.approx(
                        oracle[occ], abs=1e-10
                    )


def test_rotation_spec_reduction():
    rot = RotationSpec(2 * math.pi + 0.5, -2 * math.pi + 0.25)
    red = rot.reduced()
    assert red.phi == pytest.approx(0.5)
    assert red.theta == pytest.approx(0.25)
    # stored values stay as given
    assert rot.phi == pytest.approx(2 * math.pi + 0.5)


def test_gain_range_rejected():
    with pytest.raises(ValueError):
        SourceParams(-0.1)
    with pytest.raises(ValueError):
        SourceParams(0.1, trunc_epsilon=0.0)
