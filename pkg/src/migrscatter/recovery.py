"""Band-correlation estimators of the rough strength and Fourier inversion.

The scaled band statistic

    est(K, tau, xhat) = 4 sqrt(2 pi) (1/K) int_K^{2K} k^m
                        conj(a(k, xhat)) a(k + tau, xhat) dk

converges to ``mu_hat(tau xhat)`` along admissible band sequences, where
``a`` is the raw far field (single-realization kind), the mean-subtracted
far field (mean_subtracted kind), or the mean-subtracted far field averaged
over realizations after correlation (ensemble kind).  The prefactor comes
from 16 pi^2 / (2 pi)^{3/2} = 4 sqrt(2 pi).

Inversion regrids the polar samples ``mu_hat(tau_i xhat_d)`` (Hermitian
completed) onto the target grid's frequency lattice by cell-level linear
deposition with weight normalization, then applies the inverse transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, ShapeMismatchError
from .grid import Grid3, ScalarField, spectrum_to_field

ESTIMATOR_KINDS = ("ensemble", "mean_subtracted", "single_realization")
SCALE = 4.0 * np.sqrt(2.0 * np.pi)


def m_star(m):
    """Minimal admissible band-sequence exponent max{2/3, (3-m)^{-1}/2}."""
    if not 2.0 < m < 3.0:
        raise ValueError("m must lie in (2, 3)")
    return max(2.0 / 3.0, 0.5 / (3.0 - m))


@dataclass(frozen=True)
class KSequence:
    """Band starts K_j = C j^t, j = 1..J, admissible when t >= m* + gamma.

    ``explicit`` overrides the power law with a given increasing list (used
    for hand-picked band sweeps).
    """

    t: float
    C: float
    J: int
    explicit: tuple = None

    def __post_init__(self):
        if self.C <= 0 or self.J < 1:
            raise ValueError("KSequence needs C > 0 and J >= 1")
        if self.t <= 0:
            raise ValueError("KSequence exponent must be positive")
        if self.explicit is not None:
            vals = tuple(float(v) for v in self.explicit)
            if len(vals) != self.J or vals[0] <= 0 or \
                    any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("explicit band starts must be positive, "
                                 "increasing, and of length J")
            object.__setattr__(self, "explicit", vals)

    @property
    def values(self):
        if self.explicit is not None:
            return np.asarray(self.explicit, dtype=float)
        return self.C * (np.arange(1, self.J + 1, dtype=float) ** self.t)


def k_sequence(m, gamma, C, J):
    """Admissible band sequence with exponent m*(m) + gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return KSequence(t=m_star(m) + gamma, C=C, J=J)


@dataclass(frozen=True, eq=False)
class BandCorrelation:
    """Estimated mu_hat on the polar grid (direction, tau) at band start K."""

    K: float
    tau_grid: np.ndarray
    directions: object
    values: np.ndarray
    estimator_kind: str
    m_used: float
    trajectory: dict = None   # optional K_j -> values table (diagnostics)

    def __post_init__(self):
        taus = np.asarray(self.tau_grid, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.directions), taus.size):
            raise ShapeMismatchError(
                f"values shape {vals.shape} vs (n_dir, n_tau) "
                f"({len(self.directions)}, {taus.size})")
        if not np.all(np.isfinite(vals.view(float))):
            raise ValueError("band correlation values must be finite")
        if self.estimator_kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.estimator_kind!r}")
        object.__setattr__(self, "tau_grid", taus)
        object.__setattr__(self, "values", vals)


def _band_slice(freqs, K, tau):
    i0 = freqs.index_of(K)
    i1 = freqs.index_of(2 * K)
    shift = freqs.steps_of(tau)
    if i1 + shift >= len(freqs):
        raise CoverageError(
            f"band [{K}, {2 * K}] shifted by tau={tau} leaves the dataset "
            f"frequency grid (max k {freqs.k_max})")
    return i0, i1, shift


def _amplitudes(dataset, kind, mean_table):
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown estimator kind {kind!r}")
    a = dataset.samples
    if kind == "single_realization":
        return a
    if mean_table is None:
        raise CoverageError(
            f"estimator kind {kind!r} requires the mean far-field table")
    mt = np.asarray(mean_table, dtype=complex)
    if mt.shape != a.shape[1:]:
        raise ShapeMismatchError(
            f"mean table shape {mt.shape} vs (n_dir, n_freq) {a.shape[1:]}")
    return a - mt[None, :, :]


def band_correlate(dataset, K, tau, x_hat_index, m, kind="single_realization",
                   mean_table=None):
    """Scaled band statistic for one direction; complex scalar.

    Trapezoid quadrature on the dataset's k grid.  ``tau`` must be a
    nonnegative multiple of dk and the band [K, 2K + tau] must be covered.
    """
    if tau < 0:
        raise CoverageError("tau must be nonnegative")
    freqs = dataset.freqs
    i0, i1, shift = _band_slice(freqs, K, tau)
    a = _amplitudes(dataset, kind, mean_table)[:, x_hat_index, :]
    kk = freqs.values[i0:i1 + 1]
    integrand = kk ** m * np.conj(a[:, i0:i1 + 1]) * a[:, i0 + shift:i1 + 1 + shift]
    per_real = SCALE * np.trapezoid(integrand, dx=freqs.dk, axis=1) / K
    if kind == "ensemble":
        return complex(per_real.mean())
    if per_real.shape[0] != 1:
        raise CoverageError(
            f"{kind} estimator expects a single realization, dataset has "
            f"{per_real.shape[0]} (use kind='ensemble' to average)")
    return complex(per_real[0])


def _correlate_table(dataset, K, tau_grid, m, kind, mean_table):
    """values[(direction, tau)] at one band start."""
    freqs = dataset.freqs
    a = _amplitudes(dataset, kind, mean_table)
    out = np.empty((a.shape[1], len(tau_grid)), dtype=complex)
    i0 = freqs.index_of(K)
    i1 = freqs.index_of(2 * K)
    kk = freqs.values[i0:i1 + 1]
    base = np.conj(a[:, :, i0:i1 + 1]) * kk ** m
    for it, tau in enumerate(tau_grid):
        _, _, shift = _band_slice(freqs, K, tau)
        prod = base * a[:, :, i0 + shift:i1 + 1 + shift]
        per_real = SCALE * np.trapezoid(prod, dx=freqs.dk, axis=2) / K
        out[:, it] = per_real.mean(axis=0) if kind == "ensemble" else per_real[0]
    return out


def recover_mu_hat(dataset, seq, tau_grid, dirs, m, kind="single_realization",
                   mean_table=None):
    """Estimate mu_hat(tau xhat) at the last band start of ``seq``.

    The whole K_j trajectory is recorded for convergence diagnostics.  For
    non-ensemble kinds the dataset must hold exactly one realization.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(tau_grid < 0):
        raise CoverageError("tau grid must be nonnegative")
    if dirs is not dataset.directions and len(dirs) != len(dataset.directions):
        raise ShapeMismatchError("direction set does not match the dataset")
    if kind != "ensemble" and dataset.n_realizations != 1:
        raise CoverageError(
            f"{kind} estimator expects a single-realization dataset")
    K_values = seq.values
    _band_slice(dataset.freqs, K_values[-1], tau_grid.max())   # coverage
    trajectory = {}
    for K in K_values:
        trajectory[float(K)] = _correlate_table(dataset, K, tau_grid, m, kind,
                                                mean_table)
    return BandCorrelation(K=float(K_values[-1]), tau_grid=tau_grid,
                           directions=dirs,
                           values=trajectory[float(K_values[-1])],
                           estimator_kind=kind, m_used=m,
                           trajectory=trajectory)


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    mu_hat: np.ndarray          # polar samples (direction, tau)
    mu_field: ScalarField
    residual_diagnostics: dict


def invert_to_mu(corr, target_grid, min_directions=8, weight_floor=1e-12):
    """Reconstruct mu from polar mu_hat samples on ``target_grid``.

    Hermitian-extends mu_hat(-xi) = conj(mu_hat(xi)), deposits each polar
    sample onto the 8 corners of its frequency cell with linear weights,
    normalizes by accumulated weight (cells with no support stay zero),
    projects onto Hermitian symmetry, inverse transforms, and clamps tiny
    negatives.  Samples beyond the lattice Nyquist are dropped.
    """
    if len(corr.directions) < min_directions:
        raise CoverageError(
            f"insufficient angular coverage: {len(corr.directions)} "
            f"directions < required {min_directions}")
    if isinstance(corr.directions, np.ndarray):
        dir_vectors = corr.directions
    else:
        dir_vectors = corr.directions.vectors
    taus = corr.tau_grid
    pts = (dir_vectors[:, None, :] * taus[None, :, None]).reshape(-1, 3)
    vals = corr.values.reshape(-1)
    pts = np.concatenate([pts, -pts], axis=0)
    vals = np.concatenate([vals, np.conj(vals)])

    shape = target_grid.shape
    dxi = np.asarray(target_grid.dual_spacing())
    nyq = np.array([np.pi / h for h in target_grid.spacing])
    keep = np.all(np.abs(pts) <= nyq[None, :] * (1 - 1e-12), axis=1)
    pts, vals = pts[keep], vals[keep]

    acc = np.zeros(shape, dtype=complex)
    wacc = np.zeros(shape)
    fi = pts / dxi[None, :]
    base = np.floor(fi).astype(int)
    frac = fi - base
    for cx in (0, 1):
        for cy in (0, 1):
            for cz in (0, 1):
                w = (np.where(cx, frac[:, 0], 1 - frac[:, 0])
                     * np.where(cy, frac[:, 1], 1 - frac[:, 1])
                     * np.where(cz, frac[:, 2], 1 - frac[:, 2]))
                ix = (base[:, 0] + cx) % shape[0]
                iy = (base[:, 1] + cy) % shape[1]
                iz = (base[:, 2] + cz) % shape[2]
                np.add.at(acc, (ix, iy, iz), w * vals)
                np.add.at(wacc, (ix, iy, iz), w)
    filled = wacc > weight_floor
    spec = np.zeros(shape, dtype=complex)
    spec[filled] = acc[filled] / wacc[filled]

    # even-size lattices carry an unpaired -Nyquist plane whose phase cannot
    # stay Hermitian against the origin shift; those modes are dropped
    for axis, n in enumerate(shape):
        if n % 2 == 0:
            idx = [slice(None)] * 3
            idx[axis] = n // 2
            spec[tuple(idx)] = 0.0

    rev = [(-np.arange(n)) % n for n in shape]
    spec_mirror = np.conj(spec[rev[0]][:, rev[1]][:, :, rev[2]])
    spec = 0.5 * (spec + spec_mirror)

    rec = spectrum_to_field(spec, target_grid)
    re = rec.values.real
    im_ratio = float(np.abs(rec.values.imag).max()
                     / max(np.abs(re).max(), np.finfo(float).tiny))
    min_neg = float(min(re.min(), 0.0))
    mu_field = ScalarField(target_grid, np.maximum(re, 0.0))
    diags = {"max_imag_over_real": im_ratio,
             "min_value_before_clamp": min_neg,
             "filled_cell_fraction": float(filled.mean()),
             "n_polar_samples": int(len(vals))}
    if corr.trajectory is not None:
        diags["trajectory_K"] = sorted(corr.trajectory)
    return RecoveryResult(mu_hat=corr.values, mu_field=mu_field,
                          residual_diagnostics=diags)
