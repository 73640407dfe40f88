""" Splitting F = log Z^{+,eta} - log Z^{+,-eta} into a corner part and the rest

Each slot of the two expansion reports is attributed by where it lives on the boundary.
Slots that live in the corner collar (boundary bonds within 2 l_inf of a corner) go to
F_hat, everything else to F_tilde:

  field term        split bond by bond
  step-zero clusters  the clusters made of balanced contours with boundary inside the
                      collar, resummed as the polymer model of those contours alone
  log Zhat          by aggregate domain; a domain straddling the cut goes to F_hat, flagged
  psi_n             to F_hat only when every level-n domain lies in the collar
  corner stage      always F_hat

Both parts are differences of report slots, so F_tilde + F_hat = F holds exactly.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from src.models.functional.enumerate import unpack_bits
from src.models.lattice import BoundarySet, Volume, corner_region
from src.models.multiscale.expansion import ExpansionReport
from src.models.multiscale.schedule import ScaleSchedule
from src.models.multiscale.validators import Margin
from src.utils.errors import DomainError
from src.utils.experiment import get_logger

log = get_logger(__name__)

TILDE, HAT = "tilde", "hat"


@dataclass
class UTerm:
    slot: str
    part: str
    value: float
    domain: List[int] = field(default_factory=list)
    flagged: bool = False

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class CornerSplit:
    F: float
    F_tilde: float
    F_hat: float
    collar: List[int]
    terms: dict  # sign -> list of UTerm

    @property
    def flagged(self):
        return sum(t.flagged for ts in self.terms.values() for t in ts)

    @property
    def residual(self):
        return self.F_tilde + self.F_hat - self.F

    def bound(self, C: float, l_inf: float) -> Margin:
        """ |F_hat| <= C l_inf^2 """
        return Margin("corner_contribution", "F_hat", abs(self.F_hat), C * l_inf**2)

    def to_json(self):
        return {
            "F": self.F,
            "F_tilde": self.F_tilde,
            "F_hat": self.F_hat,
            "residual": self.residual,
            "flagged": self.flagged,
            "collar": self.collar,
            "terms": {k: [t.to_json() for t in ts] for k, ts in self.terms.items()},
        }


def _place(domain, collar: set):
    """ (part, flagged) for a domain given as boundary bond ids """
    inside = set(domain) & collar
    if not inside:
        return TILDE, False
    return HAT, len(inside) != len(set(domain))


def corner_phi0(report: ExpansionReport, volume: Volume, census, collar: BoundarySet) -> float:
    """ sum of phi_0 over step-zero clusters of balanced contours with boundary inside the collar """
    eta = report.eta
    l0 = report.decomposition.schedule.l0
    balanced = census.minus_sums(eta) >= -(1.0 - 1.0 / l0) * census.lengths
    bnd = unpack_bits(census.boundary, volume.n_boundary).astype(bool)
    outside = np.ones(volume.n_boundary, dtype=bool)
    outside[list(collar.bonds)] = False
    allowed = balanced & bnd.any(axis=1) & ~(bnd & outside).any(axis=1)
    return census.sub_model_log_partition(eta, report.beta, report.lam, allowed)


def split_report(report: ExpansionReport, volume: Volume, collar: BoundarySet, census) -> List[UTerm]:
    coll = set(collar.bonds)
    field_term = report.lam * report.beta * np.asarray(report.eta, dtype=np.float64)
    hat_field = float(field_term[sorted(coll)].sum()) if coll else 0.0
    assert np.isclose(float(field_term.sum()), report.vacuum)
    phi_hat = corner_phi0(report, volume, census, collar)
    terms = [
        UTerm("vacuum", HAT, hat_field, sorted(coll)),
        UTerm("vacuum", TILDE, report.vacuum - hat_field),
        UTerm("clusters_step_zero", HAT, phi_hat, sorted(coll)),
        UTerm("clusters_step_zero", TILDE, report.phi0_total - phi_hat),
    ]
    for stage in report.stages:
        if stage.order == "corner":
            terms.append(UTerm("psi_corner", HAT, stage.psi))
            terms += [UTerm(f"log_Zhat:{a.label}", HAT, a.log_Zhat, a.domain, a.flagged) for a in stage.aggregates]
            continue
        places = [_place(a.domain, coll) for a in stage.aggregates]
        all_hat = all(part == HAT and not flagged for part, flagged in places)
        terms.append(UTerm(f"psi_level{stage.order}", HAT if all_hat else TILDE, stage.psi))
        terms += [UTerm(f"log_Zhat:{a.label}", part, a.log_Zhat, a.domain, flagged) for a, (part, flagged) in zip(stage.aggregates, places)]
    return terms


def corner_split(report_pos: ExpansionReport, report_neg: ExpansionReport, volume: Volume, schedule: ScaleSchedule, census) -> CornerSplit:
    """F_tilde and F_hat from the expansions of Z^{+,eta} (report_pos) and Z^{+,-eta} (report_neg)."""
    if report_pos.N != volume.N or report_neg.N != volume.N:
        raise DomainError("reports belong to a different volume")
    if not np.array_equal(np.asarray(report_pos.eta), -np.asarray(report_neg.eta)):
        raise DomainError("the two reports must expand eta and -eta")
    collar = corner_region(volume, 2.0 * schedule.l_inf)
    pos = split_report(report_pos, volume, collar, census)
    neg = split_report(report_neg, volume, collar, census)

    def part(name):
        return sum(t.value for t in pos if t.part == name) - sum(t.value for t in neg if t.part == name)

    F = report_pos.log_Z - report_neg.log_Z
    out = CornerSplit(F=F, F_tilde=part(TILDE), F_hat=part(HAT), collar=list(collar.bonds), terms={"+": pos, "-": neg})
    if out.flagged:
        log.warning(f"{out.flagged} expansion terms straddle the corner collar and were attributed to F_hat")
    return out
