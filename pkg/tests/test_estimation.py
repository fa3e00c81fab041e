"""Fisher information, fringe fitting, ML estimation, and baselines."""

import math

import numpy as np
import pytest

from spdcmet.engine import detector_for_source, fourfold_family, ideal_fisher_information
from spdcmet.estimation import (
    FringeFit,
    FringeSet,
    bootstrap_fisher_band,
    derivative,
    fisher_curve,
    fisher_information,
    fisher_point,
    fit_fringes,
    heisenberg_limit,
    mean_sensing_photons,
    ml_estimate,
    monte_carlo_ml_fisher,
    performance_curve,
    snl_fisher,
)
from spdcmet.fock import SourceParams, pair_number_weights
from spdcmet.engine import choose_truncation


def cos2_family(phi):
    """Two-outcome reference family with unit information everywhere."""
    phi = float(phi)
    return np.array([math.cos(phi / 2) ** 2, math.sin(phi / 2) ** 2])


def experiment_family():
    src = SourceParams(0.061)
    det = detector_for_source(src, 4, 0.23, 0.12)
    return fourfold_family(src, det)


# ---------------------------------------------------------------------------
# Fisher information


def test_constant_family_carries_no_information():
    fam = lambda phi: np.array([0.3, 0.7])
    assert fisher_information(fam, 1.2) == 0.0


@pytest.mark.parametrize("phi", [0.4, 1.0, 2.2, 4.5])
def test_two_outcome_cosine_family_has_unit_information(phi):
    assert fisher_information(cos2_family, phi) == pytest.approx(1.0, rel=1e-6)


def test_vanishing_probability_with_live_derivative_is_flagged():
    fam = lambda phi: np.array([phi / math.pi, 1.0 - phi / math.pi])
    pt = fisher_point(fam, 0.0)
    assert pt.clipped
    assert math.isfinite(pt.value)


def test_ideal_family_information_is_flat():
    src = SourceParams(0.05)
    grid = np.linspace(0.0, 2 * np.pi, 33)
    vals = np.array([ideal_fisher_information(src, p) for p in grid])
    assert vals.max() / vals.min() < 1.01


def test_lossy_family_shows_information_troughs():
    fam = experiment_family()
    grid = np.linspace(0.0, 2 * np.pi, 97)
    vals, _ = fisher_curve(fam, grid)
    interior = [
        i for i in range(1, len(grid) - 1)
        if vals[i] < vals[i - 1] and vals[i] < vals[i + 1]
    ]
    assert len(interior) >= 2


# ---------------------------------------------------------------------------
# derivatives


def test_fringe_derivative_closed_form():
    c = 0.42
    fit = FringeFit(c0=0.0, c1=c, c2=0.0, phi0=0.0)
    assert fit.derivative(math.pi / 2) == pytest.approx(-c, abs=1e-14)


def test_analytic_and_finite_difference_derivatives_agree():
    fits = FringeSet(fits=(
        FringeFit(c0=0.4, c1=0.1, c2=-0.05, phi0=0.2),
        FringeFit(c0=0.6, c1=-0.1, c2=0.05, phi0=0.2),
    ))
    h = 1e-4
    for phi in np.linspace(0, 2 * np.pi, 9):
        _, analytic = fits.probabilities_and_derivatives(phi)
        fd = (fits.probabilities(phi + h) - fits.probabilities(phi - h)) / (2 * h)
        assert np.abs(analytic - fd).max() < 1e-6


def test_renormalized_derivatives_sum_to_zero():
    fam = experiment_family()
    for phi in (0.3, 1.7):
        assert derivative(fam, phi).sum() == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------------------
# fringe fitting


TRUTH = FringeSet(fits=(
    FringeFit(c0=0.30, c1=0.12, c2=-0.04, phi0=0.35),
    FringeFit(c0=0.45, c1=-0.20, c2=0.06, phi0=0.35),
    FringeFit(c0=0.25, c1=0.08, c2=-0.02, phi0=0.35),
), renormalize=False)


def _truth_samples(n_phi=13, scale=1.0):
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    fracs = np.array([TRUTH.probabilities(p) for p in phi])
    return phi, fracs * scale


def test_noiseless_fit_recovers_the_model():
    phi, counts = _truth_samples()
    fit = fit_fringes(phi, counts, renormalize=False)
    grid = np.linspace(0, 2 * np.pi, 101)
    for got, want in zip(fit, TRUTH):
        assert np.abs(got.value(grid) - want.value(grid)).max() < 1e-8
    offsets = [f.phi0 for f in fit]
    assert max(offsets) - min(offsets) < 1e-6  # shared offset recovered


def test_fit_requires_five_distinct_phases():
    phi, counts = _truth_samples()
    with pytest.raises(ValueError):
        fit_fringes(phi[:4], counts[:4])


def test_fitted_curves_stay_non_negative_and_normalized():
    phi, counts = _truth_samples()
    fit = fit_fringes(phi, counts)
    grid = np.linspace(0, 2 * np.pi, 181)
    probs = np.array([fit.probabilities(p) for p in grid])
    assert probs.min() > -1e-9
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_poisson_noised_fit_tracks_truth_within_three_sigma():
    rng = np.random.default_rng(42)
    n_per_phi = 10_000
    phi, fracs = _truth_samples()
    counts = rng.poisson(fracs * n_per_phi)
    fit = fit_fringes(phi, counts, renormalize=False)
    for j, want in enumerate(TRUTH):
        truth = want.value(phi)
        sigma = np.sqrt(truth / n_per_phi)
        got = fit.fits[j].value(phi)
        assert np.all(np.abs(got - truth) < 3.0 * sigma)


def test_shared_offset_on_shifted_theory_curves():
    # a reference-path rotation shifts every pattern by the same offset
    src = SourceParams(0.061)
    det = detector_for_source(src, 4, 0.23, 0.12)
    theta = math.radians(80.0)
    fam = fourfold_family(src, det, theta=theta)
    phi = np.linspace(0.0, 2 * np.pi, 25, endpoint=False)
    counts = np.array([fam.probabilities(p) for p in phi])
    fit = fit_fringes(phi, counts)
    strong = [f for f in fit if abs(f.c1) > 0.01]
    assert len(strong) >= 4
    for f in strong:
        assert f.phi0 == pytest.approx(-theta, abs=5e-3)


# ---------------------------------------------------------------------------
# maximum likelihood


def test_ml_recovers_exact_proportions():
    fam = experiment_family()
    phi_star = 1.0
    counts = fam.probabilities(phi_star) * 1e6
    est = ml_estimate(counts, fam, (0.2, 1.8))
    assert est.phi_hat == pytest.approx(phi_star, abs=1e-6)
    assert not est.ambiguous


def test_ml_flags_mirror_ambiguity():
    phi_star = 1.0
    counts = cos2_family(phi_star) * 1e5
    est = ml_estimate(counts, cos2_family, (0.0, 2 * math.pi))
    assert est.ambiguous
    cands = sorted(c[0] for c in est.candidates)
    assert cands[0] == pytest.approx(phi_star, abs=1e-5)
    assert cands[-1] == pytest.approx(2 * math.pi - phi_star, abs=1e-5)


def test_ml_estimate_is_deterministic():
    fam = experiment_family()
    counts = fam.probabilities(0.8) * 1000
    a = ml_estimate(counts, fam, (0.2, 1.5))
    b = ml_estimate(counts, fam, (0.2, 1.5))
    assert a.phi_hat == b.phi_hat


def test_monte_carlo_information_on_unit_family():
    res = monte_carlo_ml_fisher(cos2_family, 1.0, repetitions=1000,
                                sample_size=1000, seed=1)
    assert abs(res.i_ml - 1.0) < 0.05
    assert res.stderr > 0


def test_monte_carlo_is_seed_deterministic():
    a = monte_carlo_ml_fisher(cos2_family, 1.0, repetitions=50, sample_size=200, seed=9)
    b = monte_carlo_ml_fisher(cos2_family, 1.0, repetitions=50, sample_size=200, seed=9)
    assert a.i_ml == b.i_ml


def test_estimator_bias_shrinks_with_sample_size():
    # 5-sigma bound on the mean estimate tightens tenfold from N=100 to 1e4
    phi_star = 1.0
    for n, reps in ((100, 400), (1000, 400), (10_000, 400)):
        res = monte_carlo_ml_fisher(cos2_family, phi_star, repetitions=reps,
                                    sample_size=n, seed=13)
        bound = 5.0 / math.sqrt(reps * n)  # I = 1 for this family
        assert abs(res.mean_estimate - phi_star) < bound


# ---------------------------------------------------------------------------
# bootstrap band


def test_noise_free_bootstrap_collapses_to_central_curve():
    phi, counts = _truth_samples(scale=1e4)
    band = bootstrap_fisher_band(phi, counts, replicates=16, seed=3, noise="none")
    np.testing.assert_allclose(band.low, band.central, atol=1e-12)
    np.testing.assert_allclose(band.high, band.central, atol=1e-12)


def test_bootstrap_band_covers_the_truth():
    rng = np.random.default_rng(5)
    phi, fracs = _truth_samples(n_phi=17)
    counts = rng.poisson(fracs * 2e4)
    eval_grid = np.linspace(0.3, 2 * np.pi - 0.3, 21)
    band = bootstrap_fisher_band(phi, counts, replicates=1000, seed=6,
                                 eval_grid=eval_grid)
    truth, _ = fisher_curve(TRUTH, eval_grid)
    covered = np.mean((band.low <= truth) & (truth <= band.high))
    assert covered >= 0.9
    assert np.all(band.low <= band.central + 1e-12)
    assert np.all(band.central <= band.high + 1e-12)


def test_band_width_shrinks_with_count_volume():
    rng = np.random.default_rng(8)
    phi, fracs = _truth_samples(n_phi=17)
    eval_grid = np.linspace(0.3, 2 * np.pi - 0.3, 11)
    widths = []
    for scale in (1e3, 1e5):
        counts = rng.poisson(fracs * scale)
        band = bootstrap_fisher_band(phi, counts, replicates=200, seed=11,
                                     eval_grid=eval_grid)
        widths.append(np.mean(band.high - band.low))
    ratio = widths[0] / widths[1]
    assert 5.0 < ratio < 20.0  # ~sqrt(100) from the count scale


# ---------------------------------------------------------------------------
# baselines


def test_snl_approaches_two_pairs_at_small_gain():
    # only the two-pair sector feeds 2+2 coincidences as the gain vanishes
    src = SourceParams(1e-3)
    det = detector_for_source(src, 4, 0.23, 0.12)
    assert snl_fisher(src, det) == pytest.approx(2.0, abs=1e-5)


def test_snl_anchor_at_experiment_gain():
    src = SourceParams(0.061)
    det = detector_for_source(src, 4, 0.23, 0.12)
    assert abs(snl_fisher(src, det) - 2.01) <= 0.01


def test_snl_is_monotone_in_gain():
    vals = []
    for tau in (0.02, 0.04, 0.06, 0.08, 0.1):
        src = SourceParams(tau)
        det = detector_for_source(src, 4, 0.23, 0.12)
        vals.append(snl_fisher(src, det))
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_heisenberg_limit_diverges_at_zero_gain():
    assert heisenberg_limit(SourceParams(0.0)) == math.inf


def test_heisenberg_limit_against_direct_second_moment():
    for tau in (0.061, 0.2, 0.4):
        src = SourceParams(tau)
        n_max = choose_truncation(src)
        q = pair_number_weights(src, n_max)
        direct = sum(n * n * q[n] for n in range(n_max + 1))
        closed = 2 * math.sinh(tau) ** 2 * (1 + 3 * math.sinh(tau) ** 2)
        assert direct == pytest.approx(closed, rel=1e-9)
        assert heisenberg_limit(src) == pytest.approx(1 / math.sqrt(closed), rel=1e-9)


def test_heisenberg_limit_decreases_with_gain():
    vals = [heisenberg_limit(SourceParams(t)) for t in (0.02, 0.05, 0.1, 0.3)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_mean_sensing_photons_closed_form():
    tau = 0.3
    assert mean_sensing_photons(SourceParams(tau)) == pytest.approx(
        2 * math.sinh(tau) ** 2, abs=1e-10
    )


# ---------------------------------------------------------------------------
# performance curve


def test_performance_curve_shape():
    src = SourceParams(0.05)
    etas = np.linspace(0.05, 1.0, 8)
    points = performance_curve(src, etas, d=4, coarse=48)
    norm = np.array([p.normalized_uncertainty for p in points])
    hl = np.array([p.heisenberg_normalized for p in points])
    # unit transmission beats the shot-noise line but not the ultimate bound
    assert norm[-1] < 1.0
    assert np.all(norm >= hl - 1e-9)
    crossings = np.sum(np.diff(np.sign(norm - 1.0)) != 0)
    assert crossings == 1
