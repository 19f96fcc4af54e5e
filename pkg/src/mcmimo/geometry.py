"""Hexagonal 19-cell wrap-around network: layout, user drops, large-scale fading.

The network is one central hexagonal cell surrounded by two full interference
tiers (6 + 12 cells).  The finite layout is mapped onto a torus by the six
translation vectors of the 19-cell cluster lattice, so every cell sees a
statistically identical interference geometry and no cell is at an "edge".
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

# Cluster translation generators in axial lattice coordinates.  Rotating
# (3, 2) by 60 degrees cycles through the six wrap directions; together with
# the identity they form the 7 torus offsets.
_CLUSTER_GENERATORS = [(3, 2), (-2, 5), (-5, 3)]

CELL_COUNT = 19


def _axial_cells() -> np.ndarray:
    """Axial (q, r) coordinates of the 19 cells, center first, by ring."""
    cells = [
        (q, r)
        for q in range(-2, 3)
        for r in range(-2, 3)
        if max(abs(q), abs(r), abs(q + r)) <= 2
    ]
    cells.sort(key=lambda c: (max(abs(c[0]), abs(c[1]), abs(c[0] + c[1])), c))
    return np.array(cells, dtype=np.int64)


@dataclass(frozen=True)
class CellLayout:
    """Positions and torus structure of the 19-cell hexagonal network.

    Attributes:
        radius_m: hexagon corner radius of each cell in meters.
        bs_positions: (19, 2) base-station coordinates; adjacent stations are
            sqrt(3) * radius_m apart.
        wrap_offsets: (7, 2) translation vectors (zero offset included) whose
            minimum realizes torus distances.
        axial_coords: (19, 2) integer lattice coordinates of the cells, used
            for reuse-pattern coloring.
    """

    radius_m: float
    bs_positions: np.ndarray
    wrap_offsets: np.ndarray
    axial_coords: np.ndarray = field(repr=False)

    @property
    def cell_count(self) -> int:
        return self.bs_positions.shape[0]


def build_layout(radius_m: float, seed: int = 0) -> CellLayout:
    """Build the 19-cell wrap-around layout with cell radius ``radius_m``.

    The layout is deterministic; ``seed`` is accepted for interface symmetry
    with the stochastic builders but has no effect.
    """
    if radius_m <= 0:
        raise GeometryError(f"cell radius must be positive, got {radius_m}")
    del seed
    spacing = np.sqrt(3.0) * radius_m
    a1 = spacing * np.array([1.0, 0.0])
    a2 = spacing * np.array([0.5, np.sqrt(3.0) / 2.0])
    axial = _axial_cells()
    positions = axial[:, :1] * a1 + axial[:, 1:] * a2
    offsets = [(0, 0)] + _CLUSTER_GENERATORS + [(-q, -r) for q, r in _CLUSTER_GENERATORS]
    wrap = np.array([q * a1 + r * a2 for q, r in offsets])
    return CellLayout(
        radius_m=float(radius_m),
        bs_positions=positions,
        wrap_offsets=wrap,
        axial_coords=axial,
    )


def wrap_distance(layout: CellLayout, z, j: int) -> float:
    """Torus distance from point ``z`` to base station ``j``.

    Returns min over all wrap offsets o of ||(z + o) - b_j||.
    """
    if not 0 <= j < layout.cell_count:
        raise IndexError(f"cell index {j} out of range")
    z = np.asarray(z, dtype=float)
    shifted = z[None, :] + layout.wrap_offsets - layout.bs_positions[j][None, :]
    return float(np.min(np.linalg.norm(shifted, axis=-1)))


def _wrap_distances_batch(layout: CellLayout, points: np.ndarray) -> np.ndarray:
    """Torus distances from each point (..., 2) to every BS: (n_bs, ...)."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    diff = (
        flat[None, None, :, :]
        + layout.wrap_offsets[:, None, None, :]
        - layout.bs_positions[None, :, None, :]
    )  # (n_offsets, n_bs, n_points, 2)
    dists = np.linalg.norm(diff, axis=-1).min(axis=0)
    return dists.reshape((layout.cell_count,) + pts.shape[:-1])


def large_scale_fading(
    layout: CellLayout,
    z,
    j: int,
    kappa: float,
    sigma_sf_sq: float,
    rng: np.random.Generator,
) -> float:
    """Pathloss-plus-shadowing attenuation from point ``z`` to BS ``j``.

    The attenuation is C / dist^kappa where dist is the torus distance and C
    is log-normal shadowing: 10*log10(C) ~ Normal(0, sigma_sf_sq).  With
    sigma_sf_sq = 0 the value is purely deterministic pathloss.
    """
    if kappa <= 0:
        raise ValueError(f"pathloss exponent must be positive, got {kappa}")
    if sigma_sf_sq < 0:
        raise ValueError(f"shadowing variance must be nonnegative, got {sigma_sf_sq}")
    dist = wrap_distance(layout, z, j)
    if dist == 0.0:
        raise GeometryError(f"point coincides with BS {j}; attenuation undefined")
    shadow_db = rng.normal(0.0, np.sqrt(sigma_sf_sq)) if sigma_sf_sq > 0 else 0.0
    return float(10.0 ** (shadow_db / 10.0) / dist**kappa)


@dataclass(frozen=True)
class UserDrop:
    """One random placement of K users per cell with its fading map.

    Attributes:
        positions: (n_cells, K, 2) user coordinates; user (l, k) is served by
            the BS of cell l.
        fading: (n_cells, n_cells, K) attenuation map; fading[j, l, k] is the
            large-scale gain from user (l, k) to BS j.
        shadow_seed: seed of the shadowing stream used to fill the map.
    """

    positions: np.ndarray
    fading: np.ndarray
    shadow_seed: int

    @property
    def cell_count(self) -> int:
        return self.positions.shape[0]

    @property
    def users_per_cell(self) -> int:
        return self.positions.shape[1]

    def serving_fading(self) -> np.ndarray:
        """(n_cells, K) attenuation of each user to its own serving BS."""
        idx = np.arange(self.cell_count)
        return self.fading[idx, idx, :]


def _sample_hexagon(radius: float, n: int, rng: np.random.Generator,
                    min_radius: float = 0.0) -> np.ndarray:
    """Uniform points in a corner-up hexagon of corner radius ``radius``,
    rejecting any point closer than ``min_radius`` to the center."""
    out = np.empty((n, 2))
    remaining = np.arange(n)
    half_w = np.sqrt(3.0) * radius / 2.0
    while remaining.size:
        x = rng.uniform(-half_w, half_w, size=remaining.size)
        y = rng.uniform(-radius, radius, size=remaining.size)
        inside = np.abs(y) <= radius - np.abs(x) / np.sqrt(3.0)
        if min_radius > 0.0:
            inside &= np.hypot(x, y) >= min_radius
        out[remaining[inside], 0] = x[inside]
        out[remaining[inside], 1] = y[inside]
        remaining = remaining[~inside]
    return out


def drop_users(
    layout: CellLayout,
    K: int,
    rng: np.random.Generator,
    kappa: float = 3.7,
    sigma_sf_sq: float = 5.0,
    min_dist_frac: float = 0.14,
) -> UserDrop:
    """Drop K users uniformly in every cell and fill the fading map.

    Users are resampled until their distance to the serving BS is at least
    ``min_dist_frac * radius_m``.  Shadowing is drawn independently for every
    (user, BS) pair from a dedicated stream seeded off ``rng``, and recorded
    in ``shadow_seed``.
    """
    if K < 1:
        raise ValueError(f"need at least one user per cell, got K={K}")
    n = layout.cell_count
    local = _sample_hexagon(
        layout.radius_m, n * K, rng, min_radius=min_dist_frac * layout.radius_m
    )
    positions = layout.bs_positions[:, None, :] + local.reshape(n, K, 2)

    shadow_seed = int(rng.integers(0, 2**63 - 1))
    shadow_rng = np.random.default_rng(shadow_seed)
    dists = _wrap_distances_batch(layout, positions)  # (n_bs, n_cells, K)
    if np.any(dists == 0.0):
        raise GeometryError("a user coincides with a BS; attenuation undefined")
    if sigma_sf_sq > 0:
        shadow_db = shadow_rng.normal(0.0, np.sqrt(sigma_sf_sq), size=dists.shape)
    else:
        shadow_db = np.zeros(dists.shape)
    fading = 10.0 ** (shadow_db / 10.0) / dists**kappa
    return UserDrop(positions=positions, fading=fading, shadow_seed=shadow_seed)
