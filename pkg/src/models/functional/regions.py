""" Batched geometry of broken-bond sets: realization as spin configurations, open-curve tracing and exterior signs.

Every function here takes a leading batch axis so that the exhaustive census and the
per-sample Monte Carlo classification share one code path.

bonds  : (B, n_bonds) bool
spins  : (B, n_sites) int8
"""
import numpy as np
from einops import rearrange

from src.models.lattice import EAST, NORTH, OPPOSITE, SOUTH, WEST
from src.models.functional.enumerate import broken_mask

# Rounding at a degree-4 dual vertex: strands (N, E) and (S, W) are kept together
PARTNER = np.array([EAST, NORTH, WEST, SOUTH])
_OPPOSITE = np.array(OPPOSITE)


def realize(bonds, volume):
    """The configuration with site 0 = +1 whose broken bonds are `bonds`, if any.

    Spins are propagated along the bottom row and then up every column.
    Returns spins (B, n) and a (B,) flag telling whether the bond set is realizable.
    """
    bonds = np.atleast_2d(bonds)
    L, nh = volume.L, volume.n_horizontal
    hb = rearrange(bonds[:, :nh], "b (h w) -> b h w", w=L - 1).astype(np.int64)  # (B, L, L-1)
    vb = rearrange(bonds[:, nh:], "b (h w) -> b h w", w=L).astype(np.int64)  # (B, L-1, L)
    B = len(bonds)
    row = np.concatenate([np.zeros((B, 1), dtype=np.int64), np.cumsum(hb[:, 0, :], axis=1)], axis=1)  # (B, L)
    col = np.concatenate([np.zeros((B, 1, L), dtype=np.int64), np.cumsum(vb, axis=1)], axis=1)  # (B, L, L)
    parity = (row[:, None, :] + col) & 1
    spins = rearrange(1 - 2 * parity, "b h w -> b (h w)").astype(np.int8)
    ok = (broken_mask(spins, volume) == bonds).all(axis=1)
    return spins, ok


def curve_sides(bonds, volume):
    """Int/Ext of single curves given by their bond masks.

    The exterior is the heavier side under the volume's site weight (corners dominate,
    then size, then the site (-N,-N)).

    Returns
        interior  : (B, n) bool
        site0_in  : (B,) bool, whether site 0 lies in the interior
        corners   : (B,) number of corner sites in the interior
        boundary  : (B, M) bool, boundary bonds whose inner site is interior
    """
    spins, ok = realize(bonds, volume)
    assert ok.all(), "curve bond set is not realizable"
    side0 = spins > 0  # site 0 is on the + side
    w0 = side0.astype(np.int64) @ volume.site_weight
    site0_in = 2 * w0 < volume.total_weight
    interior = np.where(site0_in[:, None], side0, ~side0)
    corners = interior[:, volume.corner_sites].sum(axis=1)
    boundary = interior[:, volume.boundary_inner]
    return interior, site0_in, corners, boundary


def _arms(bonds, volume, cfg, vertex):
    """ Broken arms (K, 4) bool of `vertex` in configuration `cfg` and the arm bond ids (K, 4) """
    arm = volume.arm_bond[vertex]
    safe = np.where(arm >= 0, arm, 0)
    return bonds[cfg[:, None], safe] & (arm >= 0), arm


def trace_open_curves(bonds, volume):
    """All open pre-contours of a batch of broken-bond sets.

    Every open curve runs between two non-corner ring vertices; it is traced from the
    endpoint that comes first in counterclockwise ring order.

    Returns
        cfg   : (K,) configuration index of each curve
        masks : (K, n_bonds) bool bond masks
        ends  : (K, 2) ring positions of the two endpoints
    """
    bonds = np.atleast_2d(bonds)
    v = volume
    ring = v.ring_vertices[~v.is_corner[v.ring_vertices]]
    first_dir = (v.arm_bond[ring] >= 0).argmax(axis=1)
    first_bond = v.arm_bond[ring, first_dir]

    cfg, j = np.nonzero(bonds[:, first_bond])
    K = len(cfg)
    start = ring[j]
    masks = np.zeros((K, v.n_bonds), dtype=bool)
    masks[np.arange(K), first_bond[j]] = True
    cur = v.arm_vertex[start, first_dir[j]]
    came = _OPPOSITE[first_dir[j]]
    walker = np.arange(K)
    end = np.full(K, -1, dtype=np.int64)

    for _ in range(v.n_bonds + 1):
        if not len(walker):
            break
        done = v.is_ring[cur]
        end[walker[done]] = cur[done]
        walker, cur, came = walker[~done], cur[~done], came[~done]
        if not len(walker):
            break
        broken, arm = _arms(bonds, v, cfg[walker], cur)
        broken[np.arange(len(walker)), came] = False
        deg = broken.sum(axis=1)
        assert np.all((deg == 1) | (deg == 3)), "odd dual-vertex degree inside the volume"
        nxt = np.where(deg == 1, broken.argmax(axis=1), PARTNER[came])
        bond = arm[np.arange(len(walker)), nxt]
        masks[walker, bond] = True
        cur = v.arm_vertex[cur, nxt]
        came = _OPPOSITE[nxt]
    assert not len(walker), "open curve did not terminate"

    pos = np.vectorize(v.ring_position.get, otypes=[np.int64])
    ends = np.stack([pos(start), pos(end)], axis=-1) if K else np.zeros((0, 2), dtype=np.int64)
    keep = ends[:, 0] < ends[:, 1]
    return cfg[keep], masks[keep], ends[keep]


def exterior_sign(spins, volume):
    """ The spin value on Ext(D(sigma)) for a batch (B, n) -> (B,) in {-1, +1}

    Closed curves never contain site 0 (a corner site) in their interior, so the sign is
    sigma_0 flipped once per open curve whose interior holds site 0.
    """
    spins = np.atleast_2d(spins)
    bonds = broken_mask(spins, volume)
    cfg, masks, _ = trace_open_curves(bonds, volume)
    flips = np.zeros(len(spins), dtype=np.int64)
    if len(cfg):
        _, site0_in, _, _ = curve_sides(masks, volume)
        flips = np.bincount(cfg, weights=site0_in, minlength=len(spins)).astype(np.int64)
    return (spins[:, 0] * (1 - 2 * (flips & 1))).astype(np.int8)
