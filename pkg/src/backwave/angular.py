"""Real spherical-harmonic machinery on Gauss-Legendre collocation grids.

Conventions
-----------
Real orthonormal harmonics on the unit sphere,

    Y_{l,0}            = Ptilde_{l,0}(cos th)
    Y_{l,m}  (m > 0)   = sqrt(2) Ptilde_{l,m}(cos th) cos(m ph)
    Y_{l,-m} (m > 0)   = sqrt(2) Ptilde_{l,m}(cos th) sin(m ph)

with Ptilde the fully normalized associated Legendre functions, computed by
the standard stable recurrences, so that int_{S^2} Y_{lm} Y_{l'm'} dS =
delta.  In particular Y_{00} = 1/sqrt(4 pi).  Physical fields are real and
their coefficients in this basis are real, so the conjugate-symmetry
constraint of a real field holds by construction.

The collocation grid pairs n_theta Gauss-Legendre nodes in cos(theta) with
n_phi equispaced azimuth nodes.  Quadrature is exact for products of
harmonics up to band limit L when n_theta >= L+1 and n_phi >= 2L+1, which
makes analyze a two-sided inverse of synthesize on band-limited data.
Pointwise products are dealiased with the 3/2 rule (quadratic sources only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def mode_count(l_max: int) -> int:
    return (l_max + 1) ** 2


def mode_index(l: int, m: int) -> int:
    return l * l + l + m


def mode_list(l_max: int):
    return [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]


def normalized_legendre(l_max: int, x: np.ndarray) -> np.ndarray:
    """Ptilde_{l,m}(x) for 0 <= m <= l <= l_max, shape (l_max+1, l_max+1, len(x)).

    Recurrences (all coefficients positive, stable):
        Ptilde_{0,0} = 1/sqrt(4 pi)
        Ptilde_{m,m} = -sqrt((2m+1)/(2m)) s Ptilde_{m-1,m-1},  s = sqrt(1-x^2)
        Ptilde_{m+1,m} = sqrt(2m+3) x Ptilde_{m,m}
        Ptilde_{l,m} = a_lm (x Ptilde_{l-1,m} - b_lm Ptilde_{l-2,m})
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((l_max + 1, l_max + 1, x.size))
    out[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, l_max + 1):
        out[m, m] = -math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * out[m - 1, m - 1]
    for m in range(0, l_max):
        out[m + 1, m] = math.sqrt(2.0 * m + 3.0) * x * out[m, m]
    for m in range(0, l_max + 1):
        for l in range(m + 2, l_max + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[l, m] = a * (x * out[l - 1, m] - b * out[l - 2, m])
    return out


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Gauss-Legendre x uniform-azimuth collocation grid for band limit l_max."""

    l_max: int
    n_theta: int
    n_phi: int
    x: np.ndarray = field(repr=False)          # cos(theta) nodes
    w: np.ndarray = field(repr=False)          # GL weights (sum = 2)
    phi: np.ndarray = field(repr=False)
    ylm: np.ndarray = field(repr=False)        # (n_modes, n_theta, n_phi)

    @property
    def n_modes(self) -> int:
        return mode_count(self.l_max)

    @property
    def weights_2d(self) -> np.ndarray:
        # full quadrature weights, sum = 4 pi
        return self.w[:, None] * np.full((1, self.n_phi), 2.0 * math.pi / self.n_phi)

    def directions(self) -> np.ndarray:
        """Unit vectors of all grid points, shape (n_theta, n_phi, 3)."""
        st = np.sqrt(np.clip(1.0 - self.x * self.x, 0.0, None))
        dirs = np.empty((self.n_theta, self.n_phi, 3))
        dirs[:, :, 0] = st[:, None] * np.cos(self.phi)[None, :]
        dirs[:, :, 1] = st[:, None] * np.sin(self.phi)[None, :]
        dirs[:, :, 2] = self.x[:, None]
        return dirs


@lru_cache(maxsize=32)
def angular_grid(l_max: int, n_theta: int = None, n_phi: int = None) -> AngularGrid:
    """Build (and cache) a grid; defaults give exact quadrature at band l_max."""
    if n_theta is None:
        n_theta = l_max + 1
    if n_phi is None:
        n_phi = 2 * l_max + 1
    if n_theta < l_max + 1 or n_phi < 2 * l_max + 1:
        raise ValueError(
            f"grid ({n_theta}, {n_phi}) too coarse for band limit {l_max}: "
            f"need n_theta >= {l_max + 1}, n_phi >= {2 * l_max + 1}"
        )
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    leg = normalized_legendre(l_max, x)
    ylm = np.zeros((mode_count(l_max), n_theta, n_phi))
    sqrt2 = math.sqrt(2.0)
    for l in range(l_max + 1):
        ylm[mode_index(l, 0)] = leg[l, 0][:, None]
        for m in range(1, l + 1):
            ylm[mode_index(l, m)] = sqrt2 * leg[l, m][:, None] * np.cos(m * phi)[None, :]
            ylm[mode_index(l, -m)] = sqrt2 * leg[l, m][:, None] * np.sin(m * phi)[None, :]
    return AngularGrid(l_max=l_max, n_theta=n_theta, n_phi=n_phi,
                       x=x, w=w, phi=phi, ylm=ylm)


def ylm_at(l_max: int, dirs: np.ndarray) -> np.ndarray:
    """Y_{lm} at arbitrary unit vectors, shape (n_modes, n_dirs)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    ct = np.clip(dirs[:, 2], -1.0, 1.0)
    ph = np.arctan2(dirs[:, 1], dirs[:, 0])
    leg = normalized_legendre(l_max, ct)
    out = np.zeros((mode_count(l_max), dirs.shape[0]))
    sqrt2 = math.sqrt(2.0)
    for l in range(l_max + 1):
        out[mode_index(l, 0)] = leg[l, 0]
        for m in range(1, l + 1):
            out[mode_index(l, m)] = sqrt2 * leg[l, m] * np.cos(m * ph)
            out[mode_index(l, -m)] = sqrt2 * leg[l, m] * np.sin(m * ph)
    return out


class ModeVector:
    """Real harmonic coefficients up to a band limit, indexed by (l, m)."""

    def __init__(self, l_max: int, coeffs=None):
        self.l_max = int(l_max)
        if coeffs is None:
            self.coeffs = np.zeros(mode_count(self.l_max))
        else:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (mode_count(self.l_max),):
                raise ValueError("coefficient vector length does not match band limit")
            self.coeffs = coeffs.copy()

    def __getitem__(self, lm):
        l, m = lm
        return self.coeffs[mode_index(l, m)]

    def __setitem__(self, lm, value):
        l, m = lm
        if abs(m) > l or l > self.l_max:
            raise IndexError(f"mode {lm} outside band limit {self.l_max}")
        self.coeffs[mode_index(l, m)] = value

    def truncated(self, l_max: int) -> "ModeVector":
        out = ModeVector(l_max)
        n = min(out.coeffs.size, self.coeffs.size)
        out.coeffs[:n] = self.coeffs[:n]
        return out

    def norm2(self) -> float:
        return float(np.dot(self.coeffs, self.coeffs))

    def copy(self) -> "ModeVector":
        return ModeVector(self.l_max, self.coeffs)


def synthesize(mv: ModeVector, grid: AngularGrid) -> np.ndarray:
    """Pointwise values sum_lm c_lm Y_lm on the grid, shape (n_theta, n_phi)."""
    if mv.l_max > grid.l_max:
        raise ValueError(f"mode band limit {mv.l_max} exceeds grid band limit {grid.l_max}")
    n = mv.coeffs.size
    return np.tensordot(mv.coeffs, grid.ylm[:n], axes=(0, 0))


def analyze(values: np.ndarray, grid: AngularGrid) -> ModeVector:
    """Coefficients of grid samples; exact inverse of synthesize when band-limited."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_theta, grid.n_phi):
        raise ValueError("sample array does not match grid shape")
    weighted = values * grid.weights_2d
    coeffs = np.tensordot(grid.ylm, weighted, axes=([1, 2], [0, 1]))
    return ModeVector(grid.l_max, coeffs)


def laplace_beltrami(mv: ModeVector) -> ModeVector:
    """Multiply each (l, m) coefficient by the eigenvalue -l(l+1)."""
    out = mv.copy()
    for l in range(mv.l_max + 1):
        sl = slice(mode_index(l, -l), mode_index(l, l) + 1)
        out.coeffs[sl] *= -l * (l + 1.0)
    return out


def eigenvalue_array(l_max: int) -> np.ndarray:
    """l(l+1) per mode slot, shape (n_modes,)."""
    out = np.empty(mode_count(l_max))
    for l in range(l_max + 1):
        out[mode_index(l, -l): mode_index(l, l) + 1] = l * (l + 1.0)
    return out


def dealias_band(l_max: int) -> int:
    return math.ceil(3 * l_max / 2)


def pointwise_product(a: ModeVector, b: ModeVector, l_out: int = None) -> ModeVector:
    """Harmonic coefficients of the pointwise product, dealiased by the 3/2 rule.

    The product is synthesized on a grid of band limit ceil(3 L/2),
    multiplied pointwise, analyzed back and truncated to ``l_out``
    (default: max of the input band limits).  Retained modes are exact.
    """
    if l_out is None:
        l_out = max(a.l_max, b.l_max)
    # node counts give exact quadrature for Y_a Y_b Y_out, i.e. the retained
    # modes are exact; this is at least as fine as the 3/2 rule
    deg = a.l_max + b.l_max + l_out
    l_tab = max(a.l_max, b.l_max, l_out, dealias_band(max(a.l_max, b.l_max)))
    grid = angular_grid(l_tab, n_theta=max(deg // 2 + 1, l_tab + 1),
                        n_phi=max(deg + 1, 2 * l_tab + 1))
    va = synthesize(a, grid)
    vb = synthesize(b, grid)
    return analyze(va * vb, grid).truncated(l_out)


def product_closures(l_in: int, l_out: int):
    """Batched pointwise product helper for radial stacks of coefficients.

    Returns a closure pair (to_values, to_modes): to_values maps coefficient
    stacks of shape (n_modes_in, n_radial) to pointwise samples of shape
    (n_pts, n_radial) on an exactness grid for quadratic products truncated
    at l_out; to_modes analyzes such samples back to (n_modes_out, n_radial).
    """
    deg = 2 * l_in + l_out
    l_tab = max(l_in, l_out)
    grid = angular_grid(l_tab, n_theta=max(deg // 2 + 1, l_tab + 1),
                        n_phi=max(deg + 1, 2 * l_tab + 1))
    ymat = grid.ylm.reshape(grid.n_modes, -1)      # (modes, pts)
    wflat = grid.weights_2d.reshape(-1)
    n_in = mode_count(l_in)
    n_out = mode_count(l_out)

    def to_values(block):
        return ymat[:n_in].T @ block               # (pts, n_radial)

    def to_modes(values):
        return ymat[:n_out] @ (values * wflat[:, None])

    return to_values, to_modes
