""" Empirical characteristic functions of free-energy samples

psi(t) = E[exp(i t F)] over the boundary-condition ensemble. With the corner collar frozen
across replicas the same estimator gives the conditional characteristic function of the
part of F that does not live at the corners.
"""
from typing import Callable, List, Sequence

import numpy as np

from src.models.lattice import Volume, corner_region
from src.models.multiscale.validators import Margin
from src.utils.errors import DomainError
from src.utils.experiment import get_logger, run_replicas

log = get_logger(__name__)


def characteristic_function(samples, t) -> np.ndarray:
    """ mean of exp(i t F) over the samples, for every t of the grid """
    F = np.asarray(samples, dtype=np.float64).ravel()
    t = np.asarray(t, dtype=np.float64)
    if not len(F):
        raise DomainError("need at least one sample")
    if not np.isfinite(F).all():
        raise DomainError("free-energy samples must be finite")
    return np.exp(1j * np.multiply.outer(t, F)).mean(axis=-1)


def baseline(t, beta) -> np.ndarray:
    """ E[exp(2 i t beta eta_0)] = cos 2 t beta """
    return np.cos(2.0 * np.asarray(t, dtype=np.float64) * beta)


def product_baseline(t, beta, sites) -> np.ndarray:
    """ (cos 2 t beta)^sites: F = 2 beta sum of independent boundary spins """
    return baseline(t, beta) ** sites


def field_free_energy(eta, beta) -> float:
    """ F at zero coupling between sites: only the field term 2 beta sum eta survives """
    return 2.0 * beta * float(np.sum(eta))


def sample_free_energies(fn: Callable, ensemble, N, replicas, threads=1) -> np.ndarray:
    """ fn(eta values) over replicas 0..replicas-1 of the ensemble at volume N """
    return np.array(run_replicas(lambda r: fn(ensemble.sample(N, r).values), range(replicas), threads))


def free_sites(volume: Volume, l_inf: float) -> int:
    """ |boundary outside the corner collar of radius 2 l_inf| """
    return volume.n_boundary - len(corner_region(volume, 2.0 * l_inf))


def gaussian_bound_margins(psi, t, beta, n_free: int, t0: float, tolerance=0.0) -> List[Margin]:
    """|psi(t)| <= exp(-beta^2 t^2 n_free / 2) + tolerance for every grid point with |t| <= t0."""
    psi, t = np.asarray(psi), np.asarray(t, dtype=np.float64)
    sel = np.abs(t) <= t0
    bound = np.exp(-0.5 * beta**2 * t[sel] ** 2 * n_free) + tolerance
    return [Margin("gaussian_bound", f"t={tt:.6g}", float(abs(p)), float(b)) for tt, p, b in zip(t[sel], psi[sel], bound)]


def symmetry_margin(psi, tolerance) -> Margin:
    """ Im psi -> 0 when F is symmetric in law """
    return Margin("imaginary_part", "sup_t", float(np.abs(np.imag(psi)).max()), float(tolerance))


def grid(tau: float, points: int) -> np.ndarray:
    if points < 2 or tau <= 0:
        raise DomainError("a t grid needs tau > 0 and at least two points")
    return np.linspace(-tau, tau, points)


def within(psi, reference, tolerance) -> bool:
    return bool(np.abs(np.asarray(psi) - np.asarray(reference)).max() <= tolerance)


def characteristic_table(t: Sequence[float], psi, reference=None):
    rows = [{"t": float(tt), "re": float(p.real), "im": float(p.imag), "abs": float(abs(p))} for tt, p in zip(t, psi)]
    if reference is not None:
        for row, ref in zip(rows, reference):
            row["reference"] = float(ref)
    return rows
