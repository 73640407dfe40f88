""" Row-to-row transfer for the square volume with arbitrary boundary fields.

The row state is kept as a tensor psi of shape (2,)*L (axis j = spin of column j, index 0 = +1).
Moving to the next row replaces one column at a time with a 2x2 vertical-bond kernel,
so memory stays at 2^L instead of 4^L.
"""
import string

import numpy as np
from opt_einsum import contract

from src.utils.errors import CapExceededError

SPIN = np.array([1.0, -1.0])


def _bond_kernel(beta):
    """ exp(beta (s s' - 1)) : (2, 2) """
    return np.exp(beta * (np.outer(SPIN, SPIN) - 1.0))


def _site_factor(beta, lam, h):
    """ exp(lam beta h s - |lam beta h|) : (2,), max entry 1; the shift is returned separately """
    a = lam * beta * h
    return np.exp(a * SPIN - abs(a)), abs(a)


def _along(vec, axis, L):
    shape = [1] * L
    shape[axis] = 2
    return vec.reshape(shape)


def _pair(mat, axis, L):
    shape = [1] * L
    shape[axis], shape[axis + 1] = 2, 2
    return mat.reshape(shape)


def _rescale(psi):
    c = psi.max()
    return psi / c, np.log(c)


def _row_diagonal(psi, field_row, beta, lam):
    """Multiply in the site fields and the horizontal bonds of one row; returns (psi, log scale)."""
    L = psi.ndim
    hk = _bond_kernel(beta)
    log_scale = 0.0
    for j in range(L):
        factor, shift = _site_factor(beta, lam, field_row[j])
        psi, c = _rescale(psi * _along(factor, j, L))
        log_scale += shift + c
    for j in range(L - 1):
        psi, c = _rescale(psi * _pair(hk, j, L))
        log_scale += c
    return psi, log_scale


def transfer_log_partition(field, beta, lam=1.0, max_width=13):
    """ log Z for an L x L block of spins with per-site boundary field `field` : (L, L), rows bottom to top

    Every factor has entries in (0, 1] and psi is rescaled to max 1 after each one, so nothing
    overflows at large beta.
    """
    field = np.asarray(field, dtype=np.float64)
    L = field.shape[1]
    if L > max_width:
        raise CapExceededError(f"transfer width {L} exceeds the cap of {max_width}")
    letters = string.ascii_letters
    idx = letters[:L]
    new = letters[L]
    vk = _bond_kernel(beta)

    psi, log_scale = _row_diagonal(np.ones((2,) * L), field[0], beta, lam)
    for row in field[1:]:
        for j in range(L):
            out = idx[:j] + new + idx[j + 1:]
            psi, c = _rescale(contract(f"{idx},{idx[j]}{new}->{out}", psi, vk))
            log_scale += c
        psi, c = _row_diagonal(psi, row, beta, lam)
        log_scale += c
    return float(log_scale + np.log(psi.sum()))
