"""Uniform 3-D grids, sampled fields, and FFT-based spectral machinery.

Conventions used throughout the package:

* Node ordering is row-major (C order) with the z index fastest, i.e. a
  field array has shape ``(nx, ny, nz)`` and ``values[i, j, l]`` sits at
  ``origin + (i*hx, j*hy, l*hz)``.
* The continuum Fourier transform is the symmetric one,
  ``F phi(xi) = (2 pi)^{-3/2} int e^{-i x.xi} phi(x) dx``,
  and its inverse carries ``e^{+i x.xi}``.  Discrete approximations apply
  the quadrature weight ``h^3 (2 pi)^{-3/2}`` (forward) and
  ``dxi^3 (2 pi)^{-3/2}`` (inverse) on the fftfreq lattice
  ``xi_j = 2 pi j / (n h)``.
* Kernel convolutions use the plain (non-unitary) transform pair: if
  ``sigma(xi) = int e^{-i z.xi} k(z) dz`` is the plain transform of a
  kernel, then ``ifftn(sigma * fftn(pad(phi)))`` approximates
  ``int k(x - y) phi(y) dy`` on the padded grid with no further factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import ShapeMismatchError


def _as_triple(x, name):
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size == 1:
        arr = np.repeat(arr, 3)
    if arr.size != 3:
        raise ValueError(f"{name} must be a scalar or length-3 sequence")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class Grid3:
    """Axis-aligned uniform box in R^3.

    ``origin`` is the coordinate of node (0, 0, 0); ``spacing`` the node
    distance per axis; ``counts`` the number of nodes per axis.
    """

    origin: tuple
    spacing: tuple
    counts: tuple

    def __init__(self, origin, spacing, counts):
        object.__setattr__(self, "origin", _as_triple(origin, "origin"))
        object.__setattr__(self, "spacing", _as_triple(spacing, "spacing"))
        cnt = np.asarray(counts, dtype=int).reshape(-1)
        if cnt.size == 1:
            cnt = np.repeat(cnt, 3)
        if cnt.size != 3:
            raise ValueError("counts must be a scalar or length-3 sequence")
        object.__setattr__(self, "counts", tuple(int(v) for v in cnt))
        if any(h <= 0 for h in self.spacing):
            raise ValueError("spacing must be positive on every axis")
        if any(n < 2 for n in self.counts):
            raise ValueError("counts must be >= 2 on every axis")

    @classmethod
    def centered(cls, n, side):
        """Cube of ``n`` nodes per axis spanning ``side`` centered at 0.

        Nodes sit at cell centers: x_i = -side/2 + (i + 1/2) h.
        """
        n3 = np.asarray(n, dtype=int).reshape(-1)
        if n3.size == 1:
            n3 = np.repeat(n3, 3)
        s3 = np.asarray(side, dtype=float).reshape(-1)
        if s3.size == 1:
            s3 = np.repeat(s3, 3)
        h = s3 / n3
        origin = -s3 / 2 + h / 2
        return cls(tuple(origin), tuple(h), tuple(int(v) for v in n3))

    @property
    def shape(self):
        return self.counts

    @property
    def n_nodes(self):
        nx, ny, nz = self.counts
        return nx * ny * nz

    @property
    def cell_volume(self):
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def extent(self):
        """Physical box length per axis, n*h (cell-centered convention)."""
        return tuple(n * h for n, h in zip(self.counts, self.spacing))

    def node(self, i, j, l):
        ox, oy, oz = self.origin
        hx, hy, hz = self.spacing
        return np.array([ox + i * hx, oy + j * hy, oz + l * hz])

    def axes(self):
        return [o + h * np.arange(n) for o, h, n in
                zip(self.origin, self.spacing, self.counts)]

    def meshes(self):
        ax = self.axes()
        return np.meshgrid(ax[0], ax[1], ax[2], indexing="ij")

    def nodes_flat(self):
        """(3, n_nodes) array of node coordinates, row-major order."""
        X, Y, Z = self.meshes()
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()])

    def radii_squared(self):
        X, Y, Z = self.meshes()
        return X * X + Y * Y + Z * Z

    def padded_shape(self, pad_factor):
        """FFT-friendly shape at least pad_factor times the node counts."""
        if pad_factor < 1.0:
            raise ValueError("pad_factor must be >= 1")
        return tuple(sfft.next_fast_len(int(np.ceil(n * pad_factor)))
                     for n in self.counts)

    def freq_axes(self, shape=None):
        """Physical frequencies 2*pi*fftfreq per axis for an FFT of ``shape``."""
        shape = self.counts if shape is None else shape
        return [2 * np.pi * np.fft.fftfreq(nn, d=h)
                for nn, h in zip(shape, self.spacing)]

    def freq_radii(self, shape=None):
        fx, fy, fz = self.freq_axes(shape)
        return np.sqrt(fx[:, None, None] ** 2 + fy[None, :, None] ** 2
                       + fz[None, None, :] ** 2)

    def dual_spacing(self, shape=None):
        shape = self.counts if shape is None else shape
        return tuple(2 * np.pi / (nn * h) for nn, h in zip(shape, self.spacing))


def _validate_values(grid, values, dtype):
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != grid.shape:
        raise ShapeMismatchError(
            f"values shape {arr.shape} does not match grid shape {grid.shape}")
    if not np.all(np.isfinite(arr.view(float) if dtype is complex else arr)):
        raise ValueError("field values must all be finite")
    arr = arr.copy()
    arr.flags.writeable = False  # fields are immutable after construction
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-valued samples on a Grid3, one value per node."""

    grid: Grid3
    values: np.ndarray

    def __init__(self, grid, values):
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", _validate_values(grid, values, float))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid, fn):
        X, Y, Z = grid.meshes()
        return cls(grid, fn(X, Y, Z))

    def norm2(self):
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_volume))

    def to_complex(self):
        return ComplexField(self.grid, self.values.astype(complex))


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex-valued samples on a Grid3, one value per node."""

    grid: Grid3
    values: np.ndarray

    def __init__(self, grid, values):
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", _validate_values(grid, values, complex))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def norm2(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)
                             * self.grid.cell_volume))


def as_complex_values(field):
    """Values of a ScalarField or ComplexField as a complex array."""
    if isinstance(field, ScalarField):
        return field.values.astype(complex)
    return field.values


def weighted_norm(field, delta):
    """Discrete weighted L^2 norm with weight <x>^delta, <x> = (1+|x|^2)^(1/2).

    Returns ``(sum <x>^{2 delta} |phi(x)|^2 h^3)^{1/2}`` over the nodes.
    """
    vals = field.values
    if not np.all(np.isfinite(vals.view(float) if vals.dtype.kind == "c" else vals)):
        raise ValueError("weighted_norm requires finite field values")
    w = (1.0 + field.grid.radii_squared()) ** delta
    return float(np.sqrt(np.sum(w * np.abs(vals) ** 2) * field.grid.cell_volume))


def fft_convolve(field, symbol):
    """Circular convolution on the padded grid, cropped back to the field grid.

    ``symbol`` is sampled on the dual lattice of the padded grid; its shape
    fixes the padded shape.  With plain-FFT normalization a symbol of ones is
    the identity.  Linear in the field.
    """
    vals = as_complex_values(field)
    symbol = np.asarray(symbol)
    if symbol.ndim != 3:
        raise ShapeMismatchError("symbol must be a 3-axis array on the dual grid")
    if any(s < n for s, n in zip(symbol.shape, field.grid.shape)):
        raise ShapeMismatchError(
            f"symbol shape {symbol.shape} smaller than field grid {field.grid.shape}")
    big = np.zeros(symbol.shape, dtype=complex)
    nx, ny, nz = field.grid.shape
    big[:nx, :ny, :nz] = vals
    out = sfft.ifftn(symbol * sfft.fftn(big))[:nx, :ny, :nz]
    return ComplexField(field.grid, out)


def _origin_phases(grid, shape, sign):
    """Per-axis phase vectors e^{sign * i * origin_a * xi} on the dual lattice."""
    fx = grid.freq_axes(shape)
    return [np.exp(sign * 1j * o * f) for o, f in zip(grid.origin, fx)]


def forward_spectrum(field, shape=None):
    """Continuum-normalized transform of a field on the (padded) dual lattice.

    Returns ``F(xi_j) = (2 pi)^{-3/2} h^3 sum_x phi(x) e^{-i x.xi_j}`` as an
    array in fftfreq ordering.
    """
    grid = field.grid
    shape = grid.shape if shape is None else tuple(shape)
    vals = as_complex_values(field)
    big = np.zeros(shape, dtype=complex)
    nx, ny, nz = grid.shape
    big[:nx, :ny, :nz] = vals
    spec = sfft.fftn(big)
    px, py, pz = _origin_phases(grid, shape, -1.0)
    spec *= px[:, None, None] * py[None, :, None] * pz[None, None, :]
    return spec * (grid.cell_volume * (2 * np.pi) ** -1.5)


def spectrum_to_field(spec, grid):
    """Inverse of the continuum-normalized transform, cropped to the grid.

    ``phi(x_a) = (2 pi)^{-3/2} dxi^3 sum_j S(xi_j) e^{+i x_a.xi_j}`` where the
    spectrum lives on the dual lattice of its own shape.
    """
    spec = np.asarray(spec, dtype=complex)
    shape = spec.shape
    if any(s < n for s, n in zip(shape, grid.shape)):
        raise ShapeMismatchError("spectrum shape smaller than target grid")
    px, py, pz = _origin_phases(grid, shape, +1.0)
    arr = sfft.ifftn(spec * (px[:, None, None] * py[None, :, None]
                             * pz[None, None, :]))
    dxi = grid.dual_spacing(shape)
    scale = np.prod(shape) * dxi[0] * dxi[1] * dxi[2] * (2 * np.pi) ** -1.5
    nx, ny, nz = grid.shape
    return ComplexField(grid, arr[:nx, :ny, :nz] * scale)


def line_sums(values, grid, directions, t_start, dt, nt):
    """Nonuniform Fourier sums along radial frequency lines.

    Returns ``out[d, j] = sum_x v(x) e^{-i (t_start + j dt) (e_d . x)}`` for
    unit vectors ``e_d``; the uniform progression in t costs one elementwise
    multiply per step instead of a fresh complex exponential.
    """
    vr = np.asarray(values).ravel().astype(complex)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    nodes = grid.nodes_flat()
    out = np.empty((dirs.shape[0], nt), dtype=complex)
    for d in range(dirs.shape[0]):
        s = dirs[d] @ nodes
        acc = vr * np.exp(-1j * t_start * s)
        if nt > 1:
            q = np.exp(-1j * dt * s)
        for j in range(nt):
            out[d, j] = acc.sum()
            if j + 1 < nt:
                acc *= q
    return out


def point_sums(values, grid, points):
    """``sum_x v(x) e^{-i x.p}`` for an arbitrary (P, 3) set of frequencies."""
    vr = np.asarray(values).ravel().astype(complex)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nodes = grid.nodes_flat()
    out = np.empty(pts.shape[0], dtype=complex)
    chunk = max(1, int(2e7) // max(1, vr.size))
    for i0 in range(0, pts.shape[0], chunk):
        blk = pts[i0:i0 + chunk]
        out[i0:i0 + chunk] = np.exp(-1j * (blk @ nodes)) @ vr
    return out
