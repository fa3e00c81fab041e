"""Detection-pattern probabilities for the full source through lossy counters.

Everything observable in the experiment is a joint click pattern
r = (r_ah, r_av, r_bh, r_bv).  Its probability composes three layers:

    P_r(phi, theta) = sum_c prod_mode W_mode[r_mode, c_mode] p_c(phi, theta)

where p_c is the ideal occupation probability of the rotated source state
and W are the per-mode counter tables from :mod:`spdcmet.detectors`.
Because each emitted pair puts one photon in each path, only occupations
with equal path totals contribute, and the sum organizes naturally per
pair sector n.  Within a sector the joint amplitude over sensing
occupation (k, n-k) and reference occupation (l, n-l) is

    A_n[k, l] = tanh(tau)^n / cosh(tau)^2 *
                sum_m (-1)^m Phi_n[k, m] Theta_n[l, m]

with the transition matrices of :mod:`spdcmet.fock`.  Derivatives with
respect to phi are carried through the same contractions exactly, so
Fisher-information consumers never rely on finite differences of P_r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detectors import DetectorModel, PovmTable, binomial_thinning_matrix
from .fock import (
    RotationSpec,
    SourceParams,
    pair_number_weights,
    reference_transition_matrix,
    sensing_transition_matrix,
    truncation_tail,
)

__all__ = [
    "choose_truncation",
    "detector_for_source",
    "sector_probabilities",
    "click_probability_tensor",
    "detection_probability",
    "PatternDistribution",
    "full_pattern_distribution",
    "fourfold_patterns",
    "PatternFamily",
    "fourfold_family",
    "fourfold_distribution",
    "MeanPhotons",
    "mean_photon_numbers",
    "fourfold_conditional_means",
    "ideal_fisher_information",
]


def choose_truncation(src: SourceParams) -> int:
    """Smallest pair-number cutoff whose discarded mass is below trunc_epsilon."""
    n = 0
    while truncation_tail(src, n) >= src.trunc_epsilon:
        n += 1
        if n > 10_000:  # x < 1 guarantees termination long before this
            raise RuntimeError("truncation search did not converge")
    return n


def detector_for_source(
    src: SourceParams,
    d: int | None,
    eta_a: float,
    eta_b: float,
) -> DetectorModel:
    """Detector tables sized for the source truncation.

    Tables are allocated with photon capacity 4x the pair cutoff, which is
    more than any single mode can receive, so capacity never limits the
    certified probability mass.  ``d=None`` selects number resolution.
    """
    c_max = max(4 * choose_truncation(src), 1)
    if d is None:
        return DetectorModel.perfect_counting(eta_a, eta_b, c_max)
    return DetectorModel.multiplexed(d, eta_a, eta_b, c_max)


def _sector_amplitudes(n, src, rot, derivative=False):
    """Joint amplitude matrix A_n[k, l] and optionally dA_n/dphi."""
    pref = math.tanh(src.tau) ** n / math.cosh(src.tau) ** 2
    signs = np.array([(-1.0) ** m for m in range(n + 1)])
    theta_t = reference_transition_matrix(n, rot.theta).T
    phi_m = sensing_transition_matrix(n, rot.phi)
    A = pref * ((phi_m * signs) @ theta_t)
    if not derivative:
        return A, None
    dphi_m = sensing_transition_matrix(n, rot.phi, derivative=True)
    dA = pref * ((dphi_m * signs) @ theta_t)
    return A, dA


def sector_probabilities(n, src, rot, derivative=False):
    """Occupation probabilities p[k, l] in pair sector n, optionally with dp/dphi.

    Index k is the sensing-path h occupation (v holds n-k), l the same on
    the reference path.
    """
    A, dA = _sector_amplitudes(n, src, rot, derivative)
    p = A * A
    if not derivative:
        return p, None
    return p, 2.0 * A * dA


def _check_capacity(det: DetectorModel, n_max: int):
    if det.c_max < n_max:
        raise ValueError(
            f"detector tables support at most {det.c_max} photons per mode, "
            f"need {n_max} for the requested truncation"
        )


def click_probability_tensor(src, rot, det, n_max=None, derivative=False):
    """Joint click-pattern probabilities as a dense 4-index array.

    Returns (P, dP) with P[r_ah, r_av, r_bh, r_bv]; dP is None unless
    ``derivative``.  Axes run to each table's maximum click number.
    """
    if n_max is None:
        n_max = choose_truncation(src)
    _check_capacity(det, n_max)
    Wa, Wb = det.table_a.weights, det.table_b.weights
    ra, rb = det.table_a.max_clicks, det.table_b.max_clicks
    P = np.zeros((ra + 1, ra + 1, rb + 1, rb + 1))
    dP = np.zeros_like(P) if derivative else None
    for n in range(n_max + 1):
        p, dp = sector_probabilities(n, src, rot, derivative)
        wa = Wa[:, : n + 1]
        wav = wa[:, ::-1]  # v mode holds n-k photons
        wb = Wb[:, : n + 1]
        wbv = wb[:, ::-1]
        P += np.einsum("ak,vk,hl,wl,kl->avhw", wa, wav, wb, wbv, p, optimize=True)
        if derivative:
            dP += np.einsum("ak,vk,hl,wl,kl->avhw", wa, wav, wb, wbv, dp, optimize=True)
    return P, dP


def detection_probability(pattern, rot, src, det, n_max=None) -> float:
    """Probability of one click pattern (r_ah, r_av, r_bh, r_bv)."""
    r_ah, r_av, r_bh, r_bv = pattern
    if min(pattern) < 0:
        raise ValueError("click counts must be non-negative")
    if max(r_ah, r_av) > det.table_a.max_clicks or max(r_bh, r_bv) > det.table_b.max_clicks:
        raise ValueError(f"pattern {pattern} exceeds the detector click range")
    if n_max is None:
        n_max = choose_truncation(src)
    _check_capacity(det, n_max)
    Wa, Wb = det.table_a.weights, det.table_b.weights
    total = 0.0
    for n in range(n_max + 1):
        p, _ = sector_probabilities(n, src, rot)
        va = Wa[r_ah, : n + 1] * Wa[r_av, : n + 1][::-1]
        vb = Wb[r_bh, : n + 1] * Wb[r_bv, : n + 1][::-1]
        total += va @ p @ vb
    return float(total)


@dataclass(frozen=True)
class PatternDistribution:
    """Probabilities over an ordered set of click patterns."""

    patterns: tuple
    probs: np.ndarray

    def as_dict(self) -> dict:
        return {pat: float(p) for pat, p in zip(self.patterns, self.probs)}

    def __getitem__(self, pattern) -> float:
        return self.as_dict()[tuple(pattern)]

    @property
    def total(self) -> float:
        return float(self.probs.sum())


def full_pattern_distribution(rot, src, det, n_max=None) -> PatternDistribution:
    """Distribution over every representable click pattern."""
    P, _ = click_probability_tensor(src, rot, det, n_max)
    ra = det.table_a.max_clicks
    rb = det.table_b.max_clicks
    patterns = tuple(
        (i, j, k, l)
        for i in range(ra + 1)
        for j in range(ra + 1)
        for k in range(rb + 1)
        for l in range(rb + 1)
    )
    return PatternDistribution(patterns=patterns, probs=P.reshape(-1))


def fourfold_patterns(clicks_a: int = 2, clicks_b: int = 2) -> tuple:
    """Click patterns with fixed per-path click totals.

    For the default 2+2 class the order is (2002, 2011, 2020, 1102, 1111,
    1120, 0202, 0211, 0220), reading each code as r_ah r_av r_bh r_bv.
    """
    return tuple(
        (r_ah, clicks_a - r_ah, r_bh, clicks_b - r_bh)
        for r_ah in range(clicks_a, -1, -1)
        for r_bh in range(clicks_b + 1)
    )


class PatternFamily:
    """phi-parametrized distribution over a fixed pattern subset.

    Probabilities are renormalized within the subset pattern class per phi
    (the way coincidence counts are normalized per setting), unless
    ``renormalize=False``.  Derivatives are exact, propagated from the
    amplitude level.
    """

    def __init__(self, src, det, patterns, theta=0.0, renormalize=True, n_max=None):
        self.src = src
        self.det = det
        self.patterns = tuple(tuple(p) for p in patterns)
        self.theta = theta
        self.renormalize = renormalize
        self.n_max = choose_truncation(src) if n_max is None else n_max
        _check_capacity(det, self.n_max)
        # per-path weight selectors, fixed across phi
        self._rows_a = [(p[0], p[1]) for p in self.patterns]
        self._rows_b = [(p[2], p[3]) for p in self.patterns]

    def _raw(self, phi):
        Wa, Wb = self.det.table_a.weights, self.det.table_b.weights
        rot = RotationSpec(phi=phi, theta=self.theta)
        f = np.zeros(len(self.patterns))
        df = np.zeros_like(f)
        for n in range(self.n_max + 1):
            p, dp = sector_probabilities(n, self.src, rot, derivative=True)
            Ta = np.array([Wa[ra, : n + 1] * Wa[rv, : n + 1][::-1] for ra, rv in self._rows_a])
            Tb = np.array([Wb[rb, : n + 1] * Wb[rw, : n + 1][::-1] for rb, rw in self._rows_b])
            f += np.einsum("ik,kl,il->i", Ta, p, Tb, optimize=True)
            df += np.einsum("ik,kl,il->i", Ta, dp, Tb, optimize=True)
        return f, df

    def probabilities(self, phi) -> np.ndarray:
        f, _ = self._raw(phi)
        if self.renormalize:
            return f / f.sum()
        return f

    def derivatives(self, phi) -> np.ndarray:
        """Exact d/dphi of :meth:`probabilities`."""
        f, df = self._raw(phi)
        if self.renormalize:
            s, ds = f.sum(), df.sum()
            return (df * s - f * ds) / (s * s)
        return df

    def probabilities_and_derivatives(self, phi):
        f, df = self._raw(phi)
        if self.renormalize:
            s, ds = f.sum(), df.sum()
            return f / s, (df * s - f * ds) / (s * s)
        return f, df

    def subset_probability(self, phi) -> float:
        """Total unrenormalized probability of the pattern subset."""
        f, _ = self._raw(phi)
        return float(f.sum())

    def __call__(self, phi) -> np.ndarray:
        return self.probabilities(phi)


def fourfold_family(src, det, theta=0.0, clicks_a=2, clicks_b=2, renormalize=True,
                    n_max=None) -> PatternFamily:
    """Family over the coincidence class with fixed clicks per path."""
    return PatternFamily(
        src, det, fourfold_patterns(clicks_a, clicks_b),
        theta=theta, renormalize=renormalize, n_max=n_max,
    )


def fourfold_distribution(rot, src, det, clicks_a=2, clicks_b=2,
                          n_max=None) -> PatternDistribution:
    """The coincidence-class distribution at one rotation, renormalized.

    Defaults to the nine patterns with two clicks on each path; their
    probabilities are divided by the class total at this phase.
    """
    family = fourfold_family(src, det, theta=rot.theta, clicks_a=clicks_a,
                             clicks_b=clicks_b, renormalize=True, n_max=n_max)
    return PatternDistribution(
        patterns=family.patterns, probs=family.probabilities(rot.phi)
    )


def _path_click_stats(table: PovmTable, occ_h: int, occ_v: int, clicks: int):
    """P(path total = clicks | occupation) and mean survivors on that event.

    Splits the lossy table back into thinning and lossless counting so the
    number of photons actually reaching the counters can be tracked.
    """
    W0 = table.base_weights
    eta = table.eta
    p_event = 0.0
    surv_sum = 0.0
    bh = binomial_thinning_matrix(occ_h, eta)[occ_h]
    bv = binomial_thinning_matrix(occ_v, eta)[occ_v]
    for jh in range(occ_h + 1):
        for jv in range(occ_v + 1):
            w = sum(
                W0[rh, jh] * W0[clicks - rh, jv]
                for rh in range(clicks + 1)
                if rh <= table.max_clicks and clicks - rh <= table.max_clicks
            )
            pj = bh[jh] * bv[jv] * w
            p_event += pj
            surv_sum += pj * (jh + jv)
    return p_event, surv_sum


def fourfold_conditional_means(src, det, theta=0.0, clicks_a=2, clicks_b=2,
                               n_phi=64, n_max=None):
    """Mean sensing-path photons per accepted coincidence event.

    Returns (emitted, surviving): the first counts all photons the source
    put into the sensing path on accepted events, the second only those
    that survive transmission and reach the counters.  Both are averaged
    over a uniform phase grid, weighted by the event rate.
    """
    if n_max is None:
        n_max = choose_truncation(src)
    _check_capacity(det, n_max)
    den = 0.0
    num_emitted = 0.0
    num_surviving = 0.0
    per_sector_a = [
        np.array([_path_click_stats(det.table_a, k, n - k, clicks_a) for k in range(n + 1)])
        for n in range(n_max + 1)
    ]
    per_sector_b = [
        np.array([_path_click_stats(det.table_b, l, n - l, clicks_b)[0] for l in range(n + 1)])
        for n in range(n_max + 1)
    ]
    for phi in np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False):
        rot = RotationSpec(phi=phi, theta=theta)
        for n in range(n_max + 1):
            p, _ = sector_probabilities(n, src, rot)
            a_stats = per_sector_a[n]
            b_prob = per_sector_b[n]
            joint = a_stats[:, 0] @ p @ b_prob
            den += joint
            num_emitted += n * joint
            num_surviving += a_stats[:, 1] @ p @ b_prob
    if den <= 0.0:
        raise ValueError("conditioning class has zero probability at this gain")
    return num_emitted / den, num_surviving / den


@dataclass(frozen=True)
class MeanPhotons:
    """Photon-number summary of the source through a detector model."""

    per_path: float
    total: float
    fourfold_emitted: float | None = None
    fourfold_surviving: float | None = None


def mean_photon_numbers(src: SourceParams, det: DetectorModel | None = None,
                        theta: float = 0.0, n_phi: int = 64) -> MeanPhotons:
    """Unconditional per-path means plus coincidence-conditioned sensing means.

    The per-path mean is sum_n n q_n = 2 sinh(tau)^2; each path carries
    the same mean because pairs are emitted symmetrically.
    """
    n_max = choose_truncation(src)
    q = pair_number_weights(src, n_max)
    per_path = float(np.arange(n_max + 1) @ q)
    if det is None:
        return MeanPhotons(per_path=per_path, total=2.0 * per_path)
    emitted, surviving = fourfold_conditional_means(src, det, theta=theta, n_phi=n_phi)
    return MeanPhotons(
        per_path=per_path,
        total=2.0 * per_path,
        fourfold_emitted=float(emitted),
        fourfold_surviving=float(surviving),
    )


def ideal_fisher_information(src: SourceParams, phi: float, theta: float = 0.0,
                             n_max: int | None = None) -> float:
    """Fisher information of the full pattern family at unit efficiency
    with number-resolving counters.

    In this limit every pattern probability is the square of a single real
    amplitude, so the information reduces to 4 sum (dA/dphi)^2 including
    the correct finite limits where amplitudes cross zero.  This form is
    free of the 0/0 ambiguity a floored probability quotient would hit at
    isolated phases.
    """
    if n_max is None:
        n_max = choose_truncation(src)
    rot = RotationSpec(phi=phi, theta=theta)
    total = 0.0
    for n in range(n_max + 1):
        _, dA = _sector_amplitudes(n, src, rot, derivative=True)
        total += 4.0 * float((dA * dA).sum())
    return total
