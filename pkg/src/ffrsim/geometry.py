"""Poisson point sampling, nearest-BS association and per-BS load counting.

Point sets are plain ``(n, 2)`` float arrays of coordinates in meters. Ties
in distance are always broken toward the lower point index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateScenarioError, ParameterError


@dataclass(frozen=True)
class Window:
    """Square observation window ``[-half_width, half_width]^2`` centred on the origin."""

    half_width: float = 100.0

    def __post_init__(self) -> None:
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ParameterError(f"half_width must be positive and finite, got {self.half_width!r}")

    @property
    def area(self) -> float:
        return (2.0 * self.half_width) ** 2

    @property
    def center(self) -> np.ndarray:
        return np.zeros(2)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.all(np.abs(points) <= self.half_width, axis=1)


@dataclass(frozen=True)
class Association:
    """Serving (nearest) BS of every user and per-BS loads.

    ``second``/``r2`` hold the second-nearest BS when requested from
    :func:`associate` (-1 and ``inf`` if only one BS exists).
    """

    serving: np.ndarray
    r1: np.ndarray
    second: np.ndarray
    r2: np.ndarray
    load: np.ndarray


def sample_ppp(density: float, window: Window, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on ``window``: Poisson count, then i.i.d. uniform positions."""
    if not density >= 0:
        raise ParameterError(f"density must be non-negative, got {density!r}")
    n = rng.poisson(density * window.area)
    return rng.uniform(-window.half_width, window.half_width, size=(n, 2))


def nearest_two(origin, bss: np.ndarray) -> tuple[int, float, int, float]:
    """Indices and distances of the two BSs closest to ``origin``."""
    bss = np.asarray(bss, dtype=float).reshape(-1, 2)
    if len(bss) < 2:
        raise DegenerateScenarioError(f"need at least 2 base stations, got {len(bss)}")
    ox, oy = float(origin[0]), float(origin[1])
    dx = bss[:, 0] - ox
    dy = bss[:, 1] - oy
    d2 = dx * dx + dy * dy
    first, second = np.lexsort((np.arange(len(bss)), d2))[:2]
    return int(first), math.sqrt(d2[first]), int(second), math.sqrt(d2[second])


def _grid_params(users: np.ndarray, bss: np.ndarray) -> tuple[float, float, float, int]:
    lo = np.minimum(users.min(axis=0), bss.min(axis=0))
    hi = np.maximum(users.max(axis=0), bss.max(axis=0))
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    # about two BSs per cell keeps the ring search short
    n_cells = max(1, min(int(math.sqrt(len(bss) / 2)), 256))
    return float(lo[0]), float(lo[1]), extent / n_cells * (1.0 + 1e-12), n_cells


def nearest_two_many(points: np.ndarray, bss: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`nearest_two` for many query points.

    With a single BS the second index is -1 and the second distance ``inf``.
    """
    points = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    bss = np.ascontiguousarray(np.asarray(bss, dtype=float).reshape(-1, 2))
    if len(bss) == 0:
        raise DegenerateScenarioError("empty BS set")
    if len(points) == 0:
        e = np.empty(0, dtype=np.int64)
        return e, np.empty(0), e.copy(), np.empty(0)
    return _nearest_grid(points, bss, *_grid_params(points, bss), 2)


def associate(users: np.ndarray, bss: np.ndarray, with_second: bool = False) -> Association:
    """Attach every user to its nearest BS and count users per BS.

    The second-nearest BS of each user is only searched for when
    ``with_second`` is set; otherwise ``second`` is -1 and ``r2`` NaN.
    """
    users = np.ascontiguousarray(np.asarray(users, dtype=float).reshape(-1, 2))
    bss = np.ascontiguousarray(np.asarray(bss, dtype=float).reshape(-1, 2))
    if len(bss) == 0:
        raise DegenerateScenarioError("cannot associate users with an empty BS set")
    if len(users) == 0:
        e = np.empty(0, dtype=np.int64)
        return Association(e, np.empty(0), e.copy(), np.empty(0), np.zeros(len(bss), dtype=np.int64))
    serving, r1, second, r2 = _nearest_grid(users, bss, *_grid_params(users, bss), 2 if with_second else 1)
    if not with_second:
        second = np.full(len(users), -1, dtype=np.int64)
        r2 = np.full(len(users), np.nan)
    load = np.bincount(serving, minlength=len(bss))
    return Association(serving, r1, second, r2, load)


@njit(cache=True)
def _nearest_grid(users, bss, x0, y0, cell, ng, k):
    nb = bss.shape[0]
    key = np.empty(nb, np.int64)
    for b in range(nb):
        cx = min(int((bss[b, 0] - x0) / cell), ng - 1)
        cy = min(int((bss[b, 1] - y0) / cell), ng - 1)
        key[b] = cx * ng + cy
    order = np.argsort(key, kind="mergesort")
    starts = np.zeros(ng * ng + 1, np.int64)
    for b in range(nb):
        starts[key[b] + 1] += 1
    for c in range(ng * ng):
        starts[c + 1] += starts[c]

    nu = users.shape[0]
    i1 = np.empty(nu, np.int64)
    i2 = np.empty(nu, np.int64)
    d1 = np.empty(nu)
    d2 = np.empty(nu)
    for u in range(nu):
        ux = users[u, 0]
        uy = users[u, 1]
        gx = min(max(int((ux - x0) / cell), 0), ng - 1)
        gy = min(max(int((uy - y0) / cell), 0), ng - 1)
        b1 = -1
        b2 = -1
        e1 = np.inf
        e2 = np.inf
        ring = 0
        while True:
            for ix in range(gx - ring, gx + ring + 1):
                if ix < 0 or ix >= ng:
                    continue
                edge_x = ix == gx - ring or ix == gx + ring
                step = 1 if edge_x else 2 * ring
                iy = gy - ring
                while iy <= gy + ring:
                    if 0 <= iy < ng:
                        c = ix * ng + iy
                        for p in range(starts[c], starts[c + 1]):
                            b = order[p]
                            dx = bss[b, 0] - ux
                            dy = bss[b, 1] - uy
                            dd = dx * dx + dy * dy
                            if dd < e1 or (dd == e1 and b < b1):
                                e2 = e1
                                b2 = b1
                                e1 = dd
                                b1 = b
                            elif dd < e2 or (dd == e2 and b < b2):
                                e2 = dd
                                b2 = b
                    if step == 0:
                        break
                    iy += step
            if ring > ng:
                break
            # every unvisited cell lies outside the searched square
            m = min(
                ux - (x0 + (gx - ring) * cell),
                x0 + (gx + ring + 1) * cell - ux,
                uy - (y0 + (gy - ring) * cell),
                y0 + (gy + ring + 1) * cell - uy,
            )
            if m > 0 and ((k == 1 and b1 >= 0 and e1 < m * m) or (b2 >= 0 and e2 < m * m)):
                break
            ring += 1
        i1[u] = b1
        i2[u] = b2
        d1[u] = np.sqrt(e1)
        d2[u] = np.sqrt(e2)
    return i1, d1, i2, d2
