""" Exhaustive enumeration of spin configurations in bit-unpacked chunks.

codes : (B,) integers whose bit i is 1 iff site i carries spin -1
spins : (B, n) int8 in {-1, +1}
"""
import numpy as np
from einops import rearrange

from src.utils.errors import CapExceededError

DEFAULT_CHUNK = 1 << 16


def unpack_spins(codes, n):
    """ codes : (B,) -> spins : (B, n) """
    bits = (np.asarray(codes, dtype=np.int64)[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def pack_bits(mask):
    """ (B, k) bool with k <= 64 -> (B,) uint64 """
    mask = np.atleast_2d(mask)
    assert mask.shape[1] <= 64
    return (mask.astype(np.uint64) << np.arange(mask.shape[1], dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


def unpack_bits(words, k):
    """ (B,) uint64 -> (B, k) bool """
    words = np.asarray(words, dtype=np.uint64)
    return ((words[:, None] >> np.arange(k, dtype=np.uint64)) & np.uint64(1)).astype(bool)


def popcount(words):
    words = np.asarray(words, dtype=np.uint64)
    return unpack_bits(words.ravel(), 64).sum(axis=1).reshape(words.shape)


def config_chunks(n, chunk=DEFAULT_CHUNK, half=False, max_sites=None):
    """Yields (codes, spins) over all 2^n configurations, or over the 2^(n-1) with site 0 = +1 when half=True."""
    if max_sites is not None and n > max_sites:
        raise CapExceededError(f"enumeration over {n} sites exceeds the cap of {max_sites}")
    total = 1 << (n - 1 if half else n)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        codes = idx << 1 if half else idx
        yield codes, unpack_spins(codes, n)


def n_chunks(n, chunk=DEFAULT_CHUNK, half=False):
    total = 1 << (n - 1 if half else n)
    return (total + chunk - 1) // chunk


def broken_mask(spins, volume):
    """ spins : (B, n) -> (B, n_bonds) bool """
    spins = np.atleast_2d(spins)
    a, b = volume.bond_sites.T
    return spins[:, a] != spins[:, b]


def boundary_field(eta, volume):
    """Per-site sum of the boundary spins coupled to it: (n_sites,)"""
    eta = np.asarray(eta, dtype=np.float64)
    return np.bincount(volume.boundary_inner, weights=eta, minlength=volume.n_sites)


def energies(spins, eta, volume, beta, lam=1.0):
    """ H = 2 beta #broken - lam beta sum_x sigma_x h_x  for a batch (B, n) -> (B,) """
    spins = np.atleast_2d(spins)
    m = broken_mask(spins, volume).sum(axis=1)
    h = boundary_field(eta, volume)
    return 2.0 * beta * m - lam * beta * (spins @ h)


def as_grid(spins, volume):
    """ (B, n) -> (B, L, L) with rows bottom to top """
    return rearrange(np.atleast_2d(spins), "b (h w) -> b h w", w=volume.L)
