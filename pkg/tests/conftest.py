"""Shared fixtures and independent oracle implementations.

Oracles here deliberately avoid the package's own code paths: the Riesz
constant comes from a segment-summed oscillatory quadrature, covariance
targets from closed-form kernels, and reference transforms from direct
summation.
"""

import numpy as np
import pytest
from scipy.integrate import quad

import migrscatter as mg


def riesz_constant_quad(m, n_segments=3000):
    """kappa(m) by brute-force radial quadrature of the Riesz integral.

    (2 pi)^{-3} int e^{i z.xi} |xi|^{-m} dxi = kappa |z|^{m-3} reduces to
    kappa = 4 pi (2 pi)^{-3} int_0^inf s^{1-m} sin s ds; the oscillatory
    integral is summed over half-period segments (absolutely convergent
    for m > 2).
    """
    total, _ = quad(lambda s: s ** (1 - m) * np.sin(s), 0.0, np.pi, limit=200)
    for j in range(1, n_segments):
        part, _ = quad(lambda s: s ** (1 - m) * np.sin(s),
                       j * np.pi, (j + 1) * np.pi, limit=50)
        total += part
    return 4 * np.pi * (2 * np.pi) ** -3 * total


def sample_skew_kurtosis(samples):
    """Plain sample skewness and excess kurtosis."""
    x = np.asarray(samples, dtype=float)
    x = x - x.mean()
    s2 = np.mean(x ** 2)
    skew = np.mean(x ** 3) / s2 ** 1.5
    kurt = np.mean(x ** 4) / s2 ** 2 - 3.0
    return skew, kurt


def small_model(n=16, side=2.0, m=2.5, with_mean=False, seed_pad=2.0):
    grid = mg.Grid3.centered(n, side)
    mu = mg.gaussian_bump(grid, radius=0.3 * side)
    mean = (mg.gaussian_bump(grid, radius=0.25 * side, amplitude=0.5)
            if with_mean else None)
    return mg.SourceModel(mu=mu, m=m, mean=mean, sampler_pad=seed_pad)


@pytest.fixture
def grid16():
    return mg.Grid3.centered(16, 2.0)


@pytest.fixture
def model16():
    return small_model()


def pass_line(idx, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {idx}: {status} - {detail}")
