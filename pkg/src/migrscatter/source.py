"""Sampling of microlocally isotropic Gaussian random sources.

The source is ``f = Ef + sqrt(mu) * G`` where ``G`` colors grid white noise
(variance 1/h^3 per node) by the Fourier multiplier ``|xi|^{-m/2}``.  The
covariance operator of ``f - Ef`` is then ``phi -> sqrt(mu) L (sqrt(mu) phi)``
with ``L`` the multiplier ``|xi|^{-m}``: its principal symbol is
``mu(x) |xi|^{-m}``, and for constant ``mu`` the covariance kernel is the
Riesz kernel ``mu * kappa(m) |x - y|^{m-3}``.

The multiplier is realized on the frequency lattice in one of two ways:

* ``"cell-mean"`` (default): the squared multiplier on each lattice cell
  within ``CELL_MEAN_RADIUS`` cells of the origin (the zero cell included)
  is the cell average of ``|xi|^{-m}``, so the lattice sum is a faithful
  quadrature of the continuum covariance integral.  Away from the origin
  the cell average coincides with ``|xi|^{-m}`` to O((dxi/|xi|)^2), so only
  lower-order parts of the symbol are touched.
* ``"zero-dc"``: plain ``|xi|^{-m/2}`` with the zero mode set to 0.  Kept
  for comparison; at desk scales it underestimates covariances by the
  missing zero-cell mass (a lag-independent offset of order dxi^{(3-m)/...}),
  which is large enough to spoil quantitative covariance checks.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma, roots_legendre

from .errors import DiagonalSingularityError
from .grid import Grid3, ScalarField

SCHEMES = ("cell-mean", "zero-dc")
CELL_MEAN_RADIUS = 4
BOUNDARY_MARGIN_CELLS = 2


def riesz_constant(m):
    """kappa(m) with (2 pi)^{-3} int e^{i z.xi} |xi|^{-m} dxi = kappa |z|^{m-3}."""
    if not 1.0 < m < 3.0:
        raise ValueError("riesz_constant requires 1 < m < 3")
    return float((2 * np.pi) ** -3 * 2 ** (3 - m) * np.pi ** 1.5
                 * gamma((3 - m) / 2) / gamma(m / 2))


# ---------------------------------------------------------------------------
# spectral symbol of the coloring operator
# ---------------------------------------------------------------------------

_symbol_cache = {}
_symbol_lock = threading.Lock()


def _zero_cell_mean(dxi, m, n_theta=96, n_phi=192):
    """Mean of |xi|^{-m} over the zero-frequency cell [-dxi/2, dxi/2]^3.

    Radial reduction: int_cell |xi|^{-m} = int_{S^2} R(w)^{3-m}/(3-m) dS with
    R(w) the distance from the origin to the cell boundary along w.
    """
    ct, wt = roots_legendre(n_theta)
    ph = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    st = np.sqrt(1 - ct ** 2)
    wx = st[:, None] * np.cos(ph)[None, :]
    wy = st[:, None] * np.sin(ph)[None, :]
    wz = ct[:, None] * np.ones(n_phi)[None, :]
    with np.errstate(divide="ignore"):
        R = np.minimum(np.minimum((dxi[0] / 2) / np.abs(wx),
                                  (dxi[1] / 2) / np.abs(wy)),
                       (dxi[2] / 2) / np.abs(wz))
    integral = np.sum(wt[:, None] * R ** (3 - m) / (3 - m)) * (2 * np.pi / n_phi)
    return integral / (dxi[0] * dxi[1] * dxi[2])


def coloring_symbol(shape, spacing, m, scheme="cell-mean",
                    cell_radius=CELL_MEAN_RADIUS, n_gl=8):
    """Squared multiplier (the |xi|^{-m} symbol) on the fftfreq lattice."""
    key = (tuple(shape), tuple(spacing), float(m), scheme, cell_radius, n_gl)
    with _symbol_lock:
        cached = _symbol_cache.get(key)
    if cached is not None:
        return cached
    if scheme not in SCHEMES:
        raise ValueError(f"unknown sampler scheme {scheme!r}")
    fx = [2 * np.pi * np.fft.fftfreq(nn, d=h) for nn, h in zip(shape, spacing)]
    q2 = (fx[0][:, None, None] ** 2 + fx[1][None, :, None] ** 2
          + fx[2][None, None, :] ** 2)
    with np.errstate(divide="ignore"):
        sym = q2 ** (-m / 2)
    sym[0, 0, 0] = 0.0
    if scheme == "cell-mean":
        dxi = [2 * np.pi / (nn * h) for nn, h in zip(shape, spacing)]
        xg, wg = roots_legendre(n_gl)
        w3 = (wg[:, None, None] * wg[None, :, None] * wg[None, None, :]) / 8.0
        r = cell_radius
        for i in range(-r, r + 1):
            for j in range(-r, r + 1):
                for l in range(-r, r + 1):
                    if i == j == l == 0:
                        continue
                    X = (i + 0.5 * xg) * dxi[0]
                    Y = (j + 0.5 * xg) * dxi[1]
                    Z = (l + 0.5 * xg) * dxi[2]
                    Q2 = (X[:, None, None] ** 2 + Y[None, :, None] ** 2
                          + Z[None, None, :] ** 2)
                    sym[i % shape[0], j % shape[1], l % shape[2]] = \
                        np.sum(w3 * Q2 ** (-m / 2))
        sym[0, 0, 0] = _zero_cell_mean(dxi, m)
    out = np.ascontiguousarray(sym)
    out.flags.writeable = False
    with _symbol_lock:
        _symbol_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# model and sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSeed:
    """Identifies one realization; (seed, realization_index) -> field is pure."""

    seed: int
    realization_index: int

    def generator(self):
        key = np.array([self.seed, self.realization_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SourceModel:
    """Rough strength mu >= 0, rough order m in (2, 3), and mean Ef.

    ``sampler_pad`` enlarges the coloring grid (finer frequency lattice);
    ``scheme`` selects the multiplier realization.  Both are part of the
    model identity for reproducibility purposes.
    """

    mu: ScalarField
    m: float
    mean: ScalarField = None
    support_radius: float = None
    sampler_pad: float = 2.0
    scheme: str = "cell-mean"

    def __post_init__(self):
        if not 2.0 < self.m < 3.0:
            raise ValueError(f"rough order m={self.m} outside (2, 3)")
        if np.any(self.mu.values < 0):
            raise ValueError("mu must be nonnegative everywhere")
        if self.mean is None:
            object.__setattr__(self, "mean", ScalarField.zeros(self.mu.grid))
        if self.mean.grid != self.mu.grid:
            raise ValueError("mu and mean must share one grid")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown sampler scheme {self.scheme!r}")
        for name, fld in (("mu", self.mu), ("mean", self.mean)):
            _check_margin(name, fld)
        if self.support_radius is None:
            object.__setattr__(self, "support_radius",
                               _support_radius(self.mu, self.mean))

    @property
    def grid(self):
        return self.mu.grid

    def digest_bytes(self):
        g = self.grid
        parts = [np.asarray(g.origin), np.asarray(g.spacing),
                 np.asarray(g.counts, dtype=float),
                 np.array([self.m, self.sampler_pad]),
                 self.mu.values.ravel(), self.mean.values.ravel()]
        return b"".join(p.astype("<f8").tobytes() for p in parts) \
            + self.scheme.encode()


def _check_margin(name, fld, margin=BOUNDARY_MARGIN_CELLS):
    v = fld.values
    m = margin
    shell = np.ones(v.shape, dtype=bool)
    shell[m:-m, m:-m, m:-m] = False
    if np.any(v[shell] != 0.0):
        raise ValueError(
            f"{name} must vanish on a boundary margin of {margin} cells "
            "(compact support inside the grid)")


def _support_radius(mu, mean):
    supp = (mu.values != 0) | (mean.values != 0)
    if not supp.any():
        return 0.0
    X, Y, Z = mu.grid.meshes()
    return float(np.sqrt((X ** 2 + Y ** 2 + Z ** 2)[supp].max()))


def sample_source(model, noise):
    """Draw one realization f = Ef + sqrt(mu) * G; bit-reproducible.

    The coloring runs through a real-to-complex transform, so the output is
    exactly real (the complex intermediate's imaginary part is identically
    discarded by construction).
    """
    grid = model.grid
    pad_shape = grid.padded_shape(model.sampler_pad)
    sym = coloring_symbol(pad_shape, grid.spacing, model.m, model.scheme)
    mult = np.sqrt(sym[:, :, :pad_shape[2] // 2 + 1])
    rng = noise.generator()
    w = rng.standard_normal(pad_shape) / np.sqrt(grid.cell_volume)
    colored = sfft.irfftn(mult * sfft.rfftn(w), s=pad_shape)
    nx, ny, nz = grid.shape
    g = colored[:nx, :ny, :nz]
    values = model.mean.values + np.sqrt(model.mu.values) * g
    return ScalarField(grid, values)


def covariance_oracle(model, x, y):
    """Leading covariance kernel mu * kappa(m) |x-y|^{m-3} near (x, y).

    Valid where mu is locally constant around both points; uses
    sqrt(mu(x) mu(y)) so it vanishes where mu does.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise DiagonalSingularityError(
            "covariance kernel diverges on the diagonal for m < 3")
    mu_x = _value_at(model.mu, x)
    mu_y = _value_at(model.mu, y)
    return float(np.sqrt(mu_x * mu_y) * riesz_constant(model.m)
                 * r ** (model.m - 3))


def _value_at(fld, point):
    g = fld.grid
    idx = []
    for a in range(3):
        i = int(round((point[a] - g.origin[a]) / g.spacing[a]))
        if not 0 <= i < g.counts[a]:
            raise ValueError(f"point {point} outside the grid")
        idx.append(i)
    return fld.values[tuple(idx)]


@dataclass(frozen=True)
class PairCovariance:
    x: tuple
    y: tuple
    mean: float
    stderr: float
    diagonal: bool
    n_realizations: int


def empirical_covariance(model, n_realizations, pairs, seed=0):
    """Monte-Carlo covariance of (f - Ef) at point pairs, with stderrs.

    Points snap to the nearest grid node.  Pairs with x == y are flagged
    ``diagonal`` (finite grid-regularized variance, no oracle comparison).
    Also verifies that the mean of (f - Ef) is used, i.e. the estimator is
    centered by construction.
    """
    if n_realizations < 2:
        raise ValueError("empirical_covariance needs n_realizations >= 2")
    if len(pairs) == 0:
        raise ValueError("empirical_covariance needs at least one pair")
    g = model.grid
    idx_pairs = []
    for x, y in pairs:
        ix = _node_index(g, x)
        iy = _node_index(g, y)
        idx_pairs.append((ix, iy))
    prods = np.empty((n_realizations, len(pairs)))
    for r in range(n_realizations):
        f = sample_source(model, NoiseSeed(seed, r))
        d = f.values - model.mean.values
        for p, (ix, iy) in enumerate(idx_pairs):
            prods[r, p] = d[ix] * d[iy]
    out = []
    for p, ((x, y), (ix, iy)) in enumerate(zip(pairs, idx_pairs)):
        col = prods[:, p]
        out.append(PairCovariance(
            x=tuple(np.asarray(x, dtype=float)),
            y=tuple(np.asarray(y, dtype=float)),
            mean=float(col.mean()),
            stderr=float(col.std(ddof=1) / np.sqrt(n_realizations)),
            diagonal=(ix == iy),
            n_realizations=n_realizations))
    return out


def pooled_covariance(model, n_realizations, pairs, seed=0):
    """Covariance estimate pooled over pairs with an honest stderr.

    The per-realization statistic is the pair-averaged product, so the
    reported stderr accounts for correlation between nearby pairs.
    """
    if n_realizations < 2:
        raise ValueError("pooled_covariance needs n_realizations >= 2")
    g = model.grid
    idx_pairs = [(_node_index(g, x), _node_index(g, y)) for x, y in pairs]
    per_real = np.empty(n_realizations)
    for r in range(n_realizations):
        f = sample_source(model, NoiseSeed(seed, r))
        d = f.values - model.mean.values
        per_real[r] = np.mean([d[ix] * d[iy] for ix, iy in idx_pairs])
    return (float(per_real.mean()),
            float(per_real.std(ddof=1) / np.sqrt(n_realizations)))


def _node_index(grid, point):
    point = np.asarray(point, dtype=float)
    idx = []
    for a in range(3):
        i = int(round((point[a] - grid.origin[a]) / grid.spacing[a]))
        if not 0 <= i < grid.counts[a]:
            raise ValueError(f"point {tuple(point)} outside the grid")
        idx.append(i)
    return tuple(idx)


def lattice_covariance(model, lag_cells):
    """Exact covariance of the coloring field G at integer-cell lags.

    This is the sampler's own lattice truth (one FFT of the symbol), useful
    to separate Monte-Carlo error from model bias; it is not the continuum
    oracle.
    """
    grid = model.grid
    pad_shape = grid.padded_shape(model.sampler_pad)
    sym = coloring_symbol(pad_shape, grid.spacing, model.m, model.scheme)
    cov = sfft.ifftn(sym).real / grid.cell_volume
    return {tuple(lc): float(cov[lc[0] % pad_shape[0],
                                 lc[1] % pad_shape[1],
                                 lc[2] % pad_shape[2]])
            for lc in lag_cells}


# ---------------------------------------------------------------------------
# compactly supported strength / mean shapes
# ---------------------------------------------------------------------------


def bump_profile(t2, sharpness):
    """C_c^inf profile exp(-a t^2/(1-t^2)) on t^2 < 1, exactly 0 outside."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        inside = t2 < 1.0
        out = np.where(inside,
                       np.exp(-sharpness * t2 / np.maximum(1.0 - t2, 1e-300)),
                       0.0)
    return out


def gaussian_bump(grid, center=(0.0, 0.0, 0.0), radius=None, amplitude=1.0,
                  sharpness=3.0):
    """Smooth compactly supported bump (Gaussian-like core, hard radius).

    ``radius`` defaults to the largest radius keeping the required boundary
    margin of the grid free.
    """
    if radius is None:
        radius = max_support_radius(grid, center)
    X, Y, Z = grid.meshes()
    t2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2
          + (Z - center[2]) ** 2) / radius ** 2
    return ScalarField(grid, amplitude * bump_profile(t2, sharpness))


def double_bump(grid, centers, radius, amplitude=(1.0, 1.0), sharpness=3.0):
    vals = np.zeros(grid.shape)
    for c, a in zip(centers, np.broadcast_to(amplitude, (len(centers),))):
        X, Y, Z = grid.meshes()
        t2 = ((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) / radius ** 2
        vals += a * bump_profile(t2, sharpness)
    return ScalarField(grid, vals)


def plateau(grid, radius=None, taper_cells=4, amplitude=1.0):
    """Constant-value core with a smooth compact taper shell.

    Useful for constant-mu covariance experiments: the bulk value is exactly
    ``amplitude`` within ``radius - taper``.
    """
    if radius is None:
        radius = max_support_radius(grid, (0, 0, 0))
    h = max(grid.spacing)
    taper = taper_cells * h
    r = np.sqrt(grid.radii_squared())
    t = np.clip((r - (radius - taper)) / taper, 0.0, 1.0)
    vals = amplitude * bump_profile(t ** 2, 1.0)
    vals[r <= radius - taper] = amplitude
    vals[r >= radius] = 0.0
    return ScalarField(grid, vals)


def max_support_radius(grid, center, margin_cells=BOUNDARY_MARGIN_CELLS + 1):
    """Largest radius around ``center`` clearing the boundary margin."""
    lo = [grid.origin[a] + margin_cells * grid.spacing[a] for a in range(3)]
    hi = [grid.origin[a] + (grid.counts[a] - 1 - margin_cells) * grid.spacing[a]
          for a in range(3)]
    dists = [min(center[a] - lo[a], hi[a] - center[a]) for a in range(3)]
    r = min(dists)
    if r <= 0:
        raise ValueError("center too close to the grid boundary")
    return float(r)


def normalized_integral(field, target=1.0):
    """Rescale a ScalarField so its discrete integral equals ``target``."""
    total = field.values.sum() * field.grid.cell_volume
    if total == 0:
        raise ValueError("cannot normalize a zero field")
    return ScalarField(field.grid, field.values * (target / total))
