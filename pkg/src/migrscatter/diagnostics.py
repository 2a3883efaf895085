"""Empirical verification of the asymptotic decay/convergence rates.

The centered far field splits as ``-4 pi (uinf - E uinf) = F0 + F1`` with
``F0`` the direct transform of the centered source (potential-free) and
``F1`` the multiple-scattering remainder.  The module measures the decay of
means and band averages of the F-component cross moments and fits log-log
slopes.

Upper-bound rates are tested one-sided (decaying faster than the bound
passes); the exact leading term is tested two-sided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, VacuousCheckError
from .farfield import mean_far_field
from .grid import line_sums, point_sums
from .source import NoiseSeed, sample_source


@dataclass(frozen=True)
class RateFit:
    """A measured log-log decay slope against a target exponent."""

    abscissae: tuple
    magnitudes: tuple
    slope: float
    slope_stderr: float
    target: float
    tolerance: float
    one_sided: bool
    label: str = ""

    def __post_init__(self):
        if len(self.abscissae) < 3:
            raise ValueError("rate fits need at least 3 abscissae")
        lo, hi = min(self.abscissae), max(self.abscissae)
        if hi / lo < 4.0:
            raise ValueError("rate-fit abscissae must span a factor >= 4")

    @property
    def passed(self):
        if self.one_sided:
            return self.slope <= self.target + self.tolerance
        return abs(self.slope - self.target) <= self.tolerance


def fit_loglog(abscissae, magnitudes):
    """Least-squares slope of log |magnitude| vs log abscissa, with stderr."""
    x = np.log(np.asarray(abscissae, dtype=float))
    y = np.log(np.maximum(np.abs(np.asarray(magnitudes, dtype=float)),
                          np.finfo(float).tiny))
    n = x.size
    A = np.stack([x, np.ones(n)], axis=1)
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    if n > 2 and res.size:
        sigma2 = float(res[0]) / (n - 2)
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = float(np.sqrt(sigma2 / sxx))
    else:
        stderr = 0.0
    return slope, stderr


def make_rate_fit(abscissae, magnitudes, target, tolerance, one_sided,
                  label=""):
    slope, stderr = fit_loglog(abscissae, magnitudes)
    return RateFit(abscissae=tuple(float(a) for a in abscissae),
                   magnitudes=tuple(float(abs(v)) for v in magnitudes),
                   slope=slope, slope_stderr=stderr, target=target,
                   tolerance=tolerance, one_sided=one_sided, label=label)


def f_components(model, V, k, x_hat, noise, cfg):
    """(F0, F1) at one (k, xhat, realization).

    F0 is the direct Fourier sum of f - Ef; F1 is the exact algebraic
    complement -4 pi (uinf - E uinf) - F0 computed through the solver.
    """
    f = sample_source(model, noise)
    grid = model.grid
    x_hat = np.asarray(x_hat, dtype=float)
    centered = f.values - model.mean.values
    F0 = complex(grid.cell_volume
                 * line_sums(centered, grid, x_hat[None, :], k, 0.0, 1)[0, 0])
    from .farfield import far_field
    from .solver import solve_density
    w, _, _, _ = solve_density(f.to_complex(), V, cfg.with_k(k))
    w_mean, _, _, _ = solve_density(model.mean.to_complex(), V, cfg.with_k(k))
    uinf = far_field(w, k, x_hat)
    uinf_mean = far_field(w_mean, k, x_hat)
    F1 = -4 * np.pi * (uinf - uinf_mean) - F0
    return F0, F1


def _f0_sweep(model, noise, dirs, k_values):
    """F0(k, xhat) for a list of k at all directions, one realization."""
    f = sample_source(model, noise)
    centered = f.values - model.mean.values
    grid = model.grid
    out = np.empty((len(dirs), len(k_values)), dtype=complex)
    for j, k in enumerate(k_values):
        out[:, j] = grid.cell_volume * line_sums(centered, grid, dirs.vectors,
                                                 k, 0.0, 1)[:, 0]
    return out


def _mu_hat_oracle(model, points):
    """Discrete transform of the known mu at arbitrary frequency points."""
    grid = model.grid
    return (point_sums(model.mu.values, grid, points)
            * grid.cell_volume * (2 * np.pi) ** -1.5)


def check_leading_term(model, dirs, tau, k_list, n_realizations, seed=0):
    """Monte-Carlo check of E(k^m conj(F0(k)) F0(k+tau)) -> (2pi)^{3/2} mu_hat.

    Returns a dict with per-k direction-averaged estimates, standard errors,
    the oracle target, per-direction z-scores at the largest k, and the
    remainder RateFit against the k^{-1} correction.
    """
    if n_realizations < 20:
        raise ValueError("check_leading_term needs >= 20 realizations")
    k_list = sorted(k_list)
    m = model.m
    ks_needed = list(k_list) + [k + tau for k in k_list]
    prods = np.empty((n_realizations, len(dirs), len(k_list)), dtype=complex)
    for r in range(n_realizations):
        F0 = _f0_sweep(model, NoiseSeed(seed, r), dirs, ks_needed)
        for i, k in enumerate(k_list):
            prods[r, :, i] = (k ** m * np.conj(F0[:, i])
                              * F0[:, i + len(k_list)])
    pts = tau * dirs.vectors
    target = (2 * np.pi) ** 1.5 * _mu_hat_oracle(model, pts)   # per direction
    mean_rd = prods.mean(axis=0)                                # (ndir, nk)
    se_rd = prods.std(axis=0, ddof=1) / np.sqrt(n_realizations)
    z = np.abs(mean_rd[:, -1] - target) / np.maximum(np.abs(se_rd[:, -1]),
                                                     np.finfo(float).tiny)
    remainder = np.abs(mean_rd.mean(axis=0) - target.mean())
    fit = make_rate_fit(k_list, remainder, target=-1.0, tolerance=0.4,
                        one_sided=False, label=f"leading-term remainder tau={tau}")
    return {"k_list": list(k_list),
            "estimate": mean_rd, "stderr": se_rd,
            "target": target, "z_scores": z,
            "limit_estimate": mean_rd.mean(axis=0)[-1],
            "limit_target": complex(target.mean()),
            "remainder_fit": fit}


def check_cross_decay(model, V, tau, k_list, n_realizations, cfg, seed=0,
                      dirs=None):
    """Decay of |E(conj(F1) F0)| and |E(conj(F1) F1)| over k.

    One-sided passes: the measured slope may be steeper than the bound
    exponents -(m+1) and -3.
    """
    if n_realizations < 20:
        raise ValueError("check_cross_decay needs >= 20 realizations")
    if V.is_zero:
        raise VacuousCheckError("cross moments vanish identically for V == 0")
    from .farfield import DirectionSet, FrequencyGrid
    if dirs is None:
        dirs = DirectionSet.fibonacci(4)
    k_list = sorted(k_list)
    m = model.m
    grid = model.grid
    cross_01 = np.zeros((len(k_list), len(dirs)), dtype=complex)
    cross_11 = np.zeros((len(k_list), len(dirs)), dtype=complex)
    auto_00 = np.zeros((len(k_list), len(dirs)), dtype=complex)
    mean_tables = {}
    for i, k in enumerate(k_list):
        freqs = FrequencyGrid(k, k + tau, tau) if tau > 0 else \
            FrequencyGrid(k, k, 1.0)
        mean_tables[k] = mean_far_field(model, V, dirs, freqs, cfg)
    for r in range(n_realizations):
        f = sample_source(model, NoiseSeed(seed, r))
        centered = f.values - model.mean.values
        from .solver import solve_density
        for i, k in enumerate(k_list):
            k2 = k + tau
            F0_k = grid.cell_volume * line_sums(centered, grid, dirs.vectors,
                                                k, 0.0, 1)[:, 0]
            F0_k2 = (F0_k if tau == 0 else
                     grid.cell_volume * line_sums(centered, grid, dirs.vectors,
                                                  k2, 0.0, 1)[:, 0])
            scale = -grid.cell_volume / (4 * np.pi)
            w1, _, _, _ = solve_density(f.to_complex(), V, cfg.with_k(k))
            uinf_k = scale * line_sums(w1.values, grid, dirs.vectors,
                                       k, 0.0, 1)[:, 0]
            if tau == 0:
                uinf_k2 = uinf_k
            else:
                w2, _, _, _ = solve_density(f.to_complex(), V, cfg.with_k(k2))
                uinf_k2 = scale * line_sums(w2.values, grid, dirs.vectors,
                                            k2, 0.0, 1)[:, 0]
            mt = mean_tables[k]
            F1_k = -4 * np.pi * (uinf_k - mt[:, 0]) - F0_k
            F1_k2 = -4 * np.pi * (uinf_k2 - mt[:, -1]) - F0_k2
            cross_01[i] += np.conj(F1_k) * F0_k2
            cross_11[i] += np.conj(F1_k) * F1_k2
            auto_00[i] += np.conj(F0_k) * F0_k2
    cross_01 /= n_realizations
    cross_11 /= n_realizations
    auto_00 /= n_realizations
    mag_01 = np.abs(cross_01).mean(axis=1)
    mag_11 = np.abs(cross_11).mean(axis=1)
    fits = {
        "F1F0": make_rate_fit(k_list, mag_01, target=-(m + 1.0), tolerance=0.5,
                              one_sided=True, label="|E(conj(F1) F0)| vs k"),
        "F1F1": make_rate_fit(k_list, mag_11, target=-3.0, tolerance=0.5,
                              one_sided=True, label="|E(conj(F1) F1)| vs k"),
    }
    return {"k_list": list(k_list), "E_F1F0": cross_01, "E_F1F1": cross_11,
            "E_F0F0": auto_00, "fits": fits}


def _band_average(samples, freqs, K, tau, m):
    """X = (1/K) int_K^{2K} k^m conj(a(k)) a(k+tau) dk per (realization, dir)."""
    i0 = freqs.index_of(K)
    i1 = freqs.index_of(2 * K)
    shift = freqs.steps_of(tau)
    if i1 + shift >= len(freqs):
        raise CoverageError(f"band [{K},{2 * K}]+{tau} not covered")
    kk = freqs.values[i0:i1 + 1]
    integ = kk ** m * np.conj(samples[:, :, i0:i1 + 1]) \
        * samples[:, :, i0 + shift:i1 + 1 + shift]
    return np.trapezoid(integ, dx=freqs.dk, axis=2) / K


def check_ergodic_rates(dataset, tau, mean_table, m, K_values,
                        mu_hat_targets=None):
    """Band-averaged moments of the F-component crossovers over K.

    Requires a dataset synthesized with ``record_f0=True`` (it carries the
    potential-free centered far field).  Fits, one-sided, |E X_pq| and
    E|X_pq|^2 for (p, q) in {(0,1), (1,0), (1,1)} against the proved
    exponents, and, when ``mu_hat_targets`` (per direction) is supplied,
    the two-sided K^{-1} law for E|X00 - (2pi)^{3/2} mu_hat|^2.
    """
    if dataset.f0_samples is None:
        raise CoverageError(
            "check_ergodic_rates needs a dataset with recorded F0 samples")
    if len(K_values) < 3:
        raise CoverageError("need at least 3 band starts")
    freqs = dataset.freqs
    F0 = -4 * np.pi * dataset.f0_samples
    centered = -4 * np.pi * (dataset.samples
                             - np.asarray(mean_table)[None, :, :])
    F1 = centered - F0
    comps = {0: F0, 1: F1}
    moments = {}
    for (p, q) in ((0, 0), (0, 1), (1, 0), (1, 1)):
        first, second = [], []
        for K in K_values:
            # X_pq = (1/K) int k^m conj(F_q(k)) F_p(k+tau) dk
            i0 = freqs.index_of(K)
            i1 = freqs.index_of(2 * K)
            shift = freqs.steps_of(tau)
            kk = freqs.values[i0:i1 + 1]
            integ = kk ** m * np.conj(comps[q][:, :, i0:i1 + 1]) \
                * comps[p][:, :, i0 + shift:i1 + 1 + shift]
            X = np.trapezoid(integ, dx=freqs.dk, axis=2) / K
            first.append(X.mean(axis=0))            # E X_pq per direction
            second.append((np.abs(X) ** 2).mean(axis=0))
        moments[(p, q)] = (np.array(first), np.array(second))
    fits = {}
    for (p, q), (tgt1, tgt2) in (((0, 1), (-1.0, -1.5)),
                                 ((1, 0), (-1.0, -1.5)),
                                 ((1, 1), (m - 3.0, 2 * (m - 3.0)))):
        first, second = moments[(p, q)]
        fits[f"X{p}{q}_mean"] = make_rate_fit(
            K_values, np.abs(first).mean(axis=1), target=tgt1, tolerance=0.5,
            one_sided=True, label=f"|E X_{p}{q}| vs K")
        fits[f"X{p}{q}_second"] = make_rate_fit(
            K_values, second.mean(axis=1), target=tgt2, tolerance=0.5,
            one_sided=True, label=f"E |X_{p}{q}|^2 vs K")
    if mu_hat_targets is not None:
        first, _ = moments[(0, 0)]
        target = (2 * np.pi) ** 1.5 * np.asarray(mu_hat_targets)
        dev = []
        for iK, K in enumerate(K_values):
            i0 = freqs.index_of(K)
            i1 = freqs.index_of(2 * K)
            shift = freqs.steps_of(tau)
            kk = freqs.values[i0:i1 + 1]
            integ = kk ** m * np.conj(F0[:, :, i0:i1 + 1]) \
                * F0[:, :, i0 + shift:i1 + 1 + shift]
            X = np.trapezoid(integ, dx=freqs.dk, axis=2) / K
            dev.append((np.abs(X - target[None, :]) ** 2).mean())
        fits["X00_variance"] = make_rate_fit(
            K_values, dev, target=-1.0, tolerance=0.35, one_sided=False,
            label="E|X00 - (2pi)^{3/2} mu_hat|^2 vs K")
    return {"moments": moments, "fits": fits, "K_values": list(K_values)}


def mean_decay(model, V, dirs, k_list, cfg):
    """Slope of max-direction |E uinf| over k; bound exponent -2, one-sided."""
    if not np.any(model.mean.values):
        raise VacuousCheckError("Ef == 0: mean far field vanishes identically")
    from .farfield import FrequencyGrid
    k_list = sorted(k_list)
    mags = []
    for k in k_list:
        table = mean_far_field(model, V, dirs, FrequencyGrid(k, k, 1.0), cfg)
        mags.append(float(np.abs(table[:, 0]).max()))
    return make_rate_fit(k_list, mags, target=-2.0, tolerance=0.4,
                         one_sided=True, label="max_dir |E uinf| vs k")
