"""Heralded Fisher information per photon in the sensing path.

Conditioning on the reference path: an event is accepted when the total
click count across the two reference modes reaches the herald threshold.
Detectors are perfect counters (the large-d limit of multiplexing) with
one uniform transmission over all four modes.  The figure of merit is the
Fisher information of the accepted joint outcome distribution, per photon
sent down the sensing path among accepted events, at the best phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .detectors import DetectorModel
from .fock import RotationSpec, SourceParams, pair_number_weights

__all__ = [
    "HeraldError",
    "HeraldSpec",
    "HeraldPoint",
    "HeraldTable",
    "conditional_fisher_per_photon",
    "herald_point",
    "herald_table",
]

_TERM_FLOOR = 1e-14
_TRUNC_MARGIN = 4  # conditioning divides by small acceptance probabilities


class HeraldError(ValueError):
    """Raised for herald thresholds outside the truncated support."""


@dataclass(frozen=True)
class HeraldSpec:
    """Herald condition: at least ``k`` clicks on the reference path.

    ``eta`` is the one transmission shared by all four modes; ``tau`` the
    source gain.  The same-count-or-more convention is what makes the
    zero and one thresholds agree at unit transmission, where every pair
    always produces exactly one reference photon per pair.
    """

    k: int
    eta: float
    tau: float

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise HeraldError(f"herald count must be a nonnegative integer, got {self.k}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmission must lie in [0, 1], got {self.eta}")
        SourceParams(self.tau)  # reuse gain validation


@dataclass(frozen=True)
class HeraldPoint:
    value: float  # Fisher information per sensing-path photon
    phi: float
    event_probability: float
    mean_heralded_photons: float


def _truncation(src: SourceParams, k: int) -> int:
    n_max = engine.choose_truncation(src) + _TRUNC_MARGIN
    if k > n_max:
        raise HeraldError(
            f"herald count {k} exceeds the truncated photon-number support {n_max}"
        )
    return n_max


def _mean_heralded_photons(src: SourceParams, eta: float, k: int, n_max: int) -> float:
    """Mean pair number among accepted events (photons addressing the phase)."""
    q = pair_number_weights(src, n_max)
    accept = np.array([
        sum(math.comb(n, j) * eta**j * (1.0 - eta) ** (n - j) for j in range(k, n + 1))
        for n in range(n_max + 1)
    ])
    weights = q * accept
    total = weights.sum()
    if total <= 0.0:
        raise HeraldError(f"herald condition k={k} has zero acceptance probability")
    return float((np.arange(n_max + 1) * weights).sum() / total)


def _joint_fisher(src, det, mask, phi, n_max):
    P, dP = engine.click_probability_tensor(
        src, RotationSpec(phi=phi), det, n_max, derivative=True
    )
    Pm = P[:, :, mask]
    dPm = dP[:, :, mask]
    p_event = Pm.sum()
    ok = Pm > _TERM_FLOOR
    info = float((dPm[ok] ** 2 / Pm[ok]).sum() / p_event)
    return info, float(p_event)


def herald_point(spec: HeraldSpec, phi=None, n_phi=41) -> HeraldPoint:
    """Heralded Fisher information per photon, with diagnostics.

    With ``phi=None`` the phase is scanned on a grid and refined to the
    information optimum; the acceptance probability itself carries no
    phase dependence (each emission sector puts a fixed photon number
    into the reference path), so the optimum is a plain 1-D search.
    """
    src = SourceParams(spec.tau)
    n_max = _truncation(src, spec.k)
    det = DetectorModel.perfect_counting(
        eta_a=spec.eta, eta_b=spec.eta, c_max=n_max
    )
    c_b = det.table_b.max_clicks
    rb_total = np.add.outer(np.arange(c_b + 1), np.arange(c_b + 1))
    mask = rb_total >= spec.k
    mean_n = _mean_heralded_photons(src, spec.eta, spec.k, n_max)

    if phi is not None:
        info, p_event = _joint_fisher(src, det, mask, phi, n_max)
        return HeraldPoint(value=info / mean_n, phi=float(phi),
                           event_probability=p_event,
                           mean_heralded_photons=mean_n)

    grid = np.linspace(0.05, np.pi - 0.05, n_phi)
    vals = np.array([_joint_fisher(src, det, mask, g, n_max)[0] for g in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_phi - 1)]
    from .estimation import _golden_min

    phi_opt = _golden_min(
        lambda p: -_joint_fisher(src, det, mask, p, n_max)[0], lo, hi, tol=1e-8
    )
    info, p_event = _joint_fisher(src, det, mask, phi_opt, n_max)
    return HeraldPoint(value=info / mean_n, phi=float(phi_opt),
                       event_probability=p_event, mean_heralded_photons=mean_n)


def conditional_fisher_per_photon(spec: HeraldSpec, phi=None) -> float:
    """Fisher information per photon given the herald; optimum phase if unset."""
    return herald_point(spec, phi=phi).value


@dataclass(frozen=True)
class HeraldTable:
    k_values: tuple
    eta_values: tuple
    values: np.ndarray  # shape (len(k_values), len(eta_values))
    tau: float

    def cell(self, k: int, eta: float) -> float:
        i = self.k_values.index(k)
        j = self.eta_values.index(eta)
        return float(self.values[i, j])

    def rows(self):
        for i, k in enumerate(self.k_values):
            yield k, self.values[i]


def herald_table(tau, eta_list, k_list) -> HeraldTable:
    """Grid of heralded Fisher information per photon over (k, eta)."""
    k_values = tuple(int(k) for k in k_list)
    eta_values = tuple(float(e) for e in eta_list)
    values = np.empty((len(k_values), len(eta_values)))
    for i, k in enumerate(k_values):
        for j, eta in enumerate(eta_values):
            values[i, j] = conditional_fisher_per_photon(HeraldSpec(k=k, eta=eta, tau=tau))
    return HeraldTable(k_values=k_values, eta_values=eta_values, values=values, tau=tau)
