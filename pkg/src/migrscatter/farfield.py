"""Far-field pattern synthesis over directions, frequency bands, realizations.

The far field of the scattered wave is the windowed Fourier sum

    uinf(xhat, k) = (-1/4 pi) h^3 sum_y e^{-i k xhat.y} w(y),
    w = (I - V R_k)^{-1} f,

so one density solve per (k, realization) serves every direction.  With a
zero potential ``w = f`` and a whole frequency sweep collapses to radial
Fourier sums of the source realization.

Frequencies above the grid Nyquist pi/h alias the lattice spectrum and make
the k^m-weighted estimators meaningless; synthesis refuses them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (CoverageError, FieldFormatError, IterationLimitError,
                     NotContractingError, ShapeMismatchError)
from .grid import ComplexField, as_complex_values, line_sums
from .solver import resolvent_symbol, solve_density
from .source import NoiseSeed, sample_source


@dataclass(frozen=True)
class DirectionSet:
    """Unit observation directions on S^2 plus the rule that generated them."""

    vectors: np.ndarray
    rule: str = "explicit"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("directions must be an (N, 3) array")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors to 1e-12")
        if len(np.unique(np.round(v, 12), axis=0)) != v.shape[0]:
            raise ValueError("directions must be pairwise distinct")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    def __len__(self):
        return self.vectors.shape[0]

    @classmethod
    def fibonacci(cls, n):
        """Near-uniform Fibonacci-sphere points."""
        i = np.arange(n) + 0.5
        polar = np.arccos(1.0 - 2.0 * i / n)
        azim = np.pi * (1.0 + np.sqrt(5.0)) * i
        v = np.stack([np.sin(polar) * np.cos(azim),
                      np.sin(polar) * np.sin(azim),
                      np.cos(polar)], axis=1)
        return cls(v, rule=f"fibonacci-{n}")

    def with_antipodes(self):
        v = np.concatenate([self.vectors, -self.vectors], axis=0)
        return DirectionSet(v, rule=self.rule + "+antipodes")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform wavenumber grid k_j = k_min + j dk covering [k_min, k_max]."""

    k_min: float
    k_max: float
    dk: float

    def __post_init__(self):
        object.__setattr__(self, "k_min", float(self.k_min))
        object.__setattr__(self, "k_max", float(self.k_max))
        object.__setattr__(self, "dk", float(self.dk))
        if self.k_min <= 0:
            raise ValueError("k_min must be positive")
        if self.dk <= 0:
            raise ValueError("dk must be positive")
        if self.k_max < self.k_min:
            raise ValueError("k_max must be >= k_min")
        steps = (self.k_max - self.k_min) / self.dk
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("k_max - k_min must be an integer multiple of dk")

    def __len__(self):
        return int(round((self.k_max - self.k_min) / self.dk)) + 1

    @property
    def values(self):
        return self.k_min + self.dk * np.arange(len(self))

    def index_of(self, k):
        """Index of a wavenumber that must lie on the grid."""
        pos = (k - self.k_min) / self.dk
        idx = int(round(pos))
        if abs(pos - idx) > 1e-6 or not 0 <= idx < len(self):
            raise CoverageError(f"k={k} is not a node of the frequency grid")
        return idx

    def steps_of(self, tau):
        """Number of dk steps in a shift tau (must be a multiple of dk)."""
        steps = tau / self.dk
        idx = int(round(steps))
        if abs(steps - idx) > 1e-6:
            raise CoverageError(f"shift tau={tau} is not a multiple of dk")
        return idx


@dataclass(frozen=True, eq=False)
class FarFieldDataset:
    """uinf samples indexed (realization, direction, frequency).

    ``f0_samples``, when present, holds the potential-free far field of the
    centered source (the same realizations pushed through V == 0 with the
    mean removed); it exists for diagnostics only and plays no role in
    recovery.
    """

    directions: DirectionSet
    freqs: FrequencyGrid
    realizations: tuple
    samples: np.ndarray
    provenance: dict
    f0_samples: np.ndarray = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        expected = (len(self.realizations), len(self.directions), len(self.freqs))
        if s.shape != expected:
            raise ShapeMismatchError(
                f"samples shape {s.shape}, expected {expected}")
        if not np.all(np.isfinite(s.view(float))):
            raise ValueError("dataset samples must be finite")
        object.__setattr__(self, "samples", s)
        for key in ("source", "potential", "solver"):
            if key not in self.provenance:
                raise ValueError(f"provenance digest {key!r} missing")

    @property
    def n_realizations(self):
        return len(self.realizations)


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def provenance_of(model, V, cfg):
    solver_txt = f"tol={cfg.tol};max_iter={cfg.max_iter};pad={cfg.pad_factor}"
    return {"source": digest(model.digest_bytes()),
            "potential": digest(V.digest_bytes()),
            "solver": digest(solver_txt.encode())}


def far_field(w, k, x_hat):
    """(-1/4 pi) h^3 sum_y e^{-i k xhat.y} w(y) for one direction."""
    x_hat = np.asarray(x_hat, dtype=float)
    if abs(np.linalg.norm(x_hat) - 1.0) > 1e-12:
        raise ValueError("x_hat must be a unit vector")
    vals = as_complex_values(w)
    s = line_sums(vals, w.grid, x_hat[None, :], k, 0.0, 1)[0, 0]
    return complex(-w.grid.cell_volume / (4 * np.pi) * s)


def _check_nyquist(grid, k_max):
    nyq = min(np.pi / h for h in grid.spacing)
    if k_max > nyq:
        raise CoverageError(
            f"frequency grid reaches k={k_max:.3g} beyond the lattice Nyquist "
            f"{nyq:.3g}; the sampled spectrum aliases there")


def _farfield_sweep(values, grid, dirs, freqs):
    """uinf over all (direction, frequency) for a V-free density w = values."""
    out = line_sums(values, grid, dirs.vectors, freqs.k_min, freqs.dk,
                    len(freqs))
    return out * (-grid.cell_volume / (4 * np.pi))


def _run_pool(work, items, threads):
    """Run ``work`` over items; results land in caller arrays by disjoint
    index, so the outcome is identical for any pool size."""
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, items))
    else:
        for item in items:
            work(item)


def synthesize(model, V, dirs, freqs, seeds, cfg, record_f0=False, threads=1):
    """Far-field dataset over realizations x directions x frequencies.

    One source draw per realization; for a nontrivial potential the density
    solves sweep k with warm starts (per-realization) and share the resolvent
    symbol across realizations at each k.
    """
    grid = model.grid
    if V.grid != grid:
        raise ShapeMismatchError("potential grid differs from source grid")
    _check_nyquist(grid, freqs.k_max)
    seeds = tuple(seeds)
    n_real, n_dir, n_freq = len(seeds), len(dirs), len(freqs)
    samples = np.empty((n_real, n_dir, n_freq), dtype=complex)
    f0 = np.empty((n_real, n_dir, n_freq), dtype=complex) if record_f0 else None

    fields = [sample_source(model, s) for s in seeds]
    scale = -grid.cell_volume / (4 * np.pi)

    if record_f0:
        def work_f0(r):
            f0[r] = _farfield_sweep(fields[r].values - model.mean.values,
                                    grid, dirs, freqs)
        _run_pool(work_f0, range(n_real), threads)

    if V.is_zero:
        def work_sweep(r):
            samples[r] = _farfield_sweep(fields[r].values, grid, dirs, freqs)
        _run_pool(work_sweep, range(n_real), threads)
    else:
        nodes = grid.nodes_flat()
        S = dirs.vectors @ nodes                       # (n_dir, n_nodes)
        states = [None] * n_real
        for j, k in enumerate(freqs.values):
            sym, _ = resolvent_symbol(grid, k, cfg.pad_factor)
            phases = np.exp(-1j * k * S)

            def work_solve(r, j=j, k=k, sym=sym, phases=phases):
                try:
                    w, _, _, _ = solve_density(
                        fields[r].to_complex(), V, cfg.with_k(k),
                        warm_start=states[r], _symbol=sym)
                except (NotContractingError, IterationLimitError) as err:
                    err.k = k
                    err.realization = seeds[r]
                    raise
                states[r] = w
                samples[r, :, j] = scale * (phases @ w.values.ravel())
            _run_pool(work_solve, range(n_real), threads)
    return FarFieldDataset(directions=dirs, freqs=freqs, realizations=seeds,
                           samples=samples,
                           provenance=provenance_of(model, V, cfg),
                           f0_samples=f0)


def mean_far_field(model, V, dirs, freqs, cfg):
    """Deterministic pipeline applied to Ef alone: E uinf(xhat, k)."""
    grid = model.grid
    _check_nyquist(grid, freqs.k_max)
    if not np.any(model.mean.values):
        return np.zeros((len(dirs), len(freqs)), dtype=complex)
    if V.is_zero:
        return _farfield_sweep(model.mean.values, grid, dirs, freqs)
    out = np.empty((len(dirs), len(freqs)), dtype=complex)
    nodes = grid.nodes_flat()
    S = dirs.vectors @ nodes
    scale = -grid.cell_volume / (4 * np.pi)
    state = None
    for j, k in enumerate(freqs.values):
        sym, _ = resolvent_symbol(grid, k, cfg.pad_factor)
        w, _, _, _ = solve_density(model.mean.to_complex(), V, cfg.with_k(k),
                                   warm_start=state, _symbol=sym)
        state = w
        out[:, j] = scale * (np.exp(-1j * k * S) @ w.values.ravel())
    return out


# ---------------------------------------------------------------------------
# dataset persistence: text header + f64 tables + complex128 payload
# ---------------------------------------------------------------------------

_FFD_MAGIC = "MIGRFFD1"


def write_dataset(ds, path):
    path = Path(path)
    head = [_FFD_MAGIC,
            f"n_realizations: {ds.n_realizations}",
            f"n_directions: {len(ds.directions)}",
            f"n_frequencies: {len(ds.freqs)}",
            f"k_min: {ds.freqs.k_min!r}",
            f"k_max: {ds.freqs.k_max!r}",
            f"dk: {ds.freqs.dk!r}",
            f"direction_rule: {ds.directions.rule}",
            f"seeds: {';'.join(f'{s.seed},{s.realization_index}' for s in ds.realizations)}",
            f"digest_source: {ds.provenance['source']}",
            f"digest_potential: {ds.provenance['potential']}",
            f"digest_solver: {ds.provenance['solver']}",
            f"has_f0: {int(ds.f0_samples is not None)}"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(ds.directions.vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.freqs.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.samples, dtype="<c16").tobytes())
        if ds.f0_samples is not None:
            fh.write(np.ascontiguousarray(ds.f0_samples, dtype="<c16").tobytes())
    return path


def read_dataset(path):
    path = Path(path)
    raw = path.read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0 or not raw.startswith(_FFD_MAGIC.encode()):
        raise FieldFormatError(f"{path}: not a far-field dataset file")
    meta = {}
    for line in raw[:sep].decode("utf-8").splitlines()[1:]:
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    n_real = int(meta["n_realizations"])
    n_dir = int(meta["n_directions"])
    n_freq = int(meta["n_frequencies"])
    seeds = tuple(NoiseSeed(int(a), int(b))
                  for a, b in (tok.split(",") for tok in meta["seeds"].split(";")))
    body = raw[sep + 2:]
    off = 0

    def take(count, dtype):
        nonlocal off
        nbytes = count * np.dtype(dtype).itemsize
        if off + nbytes > len(body):
            raise FieldFormatError(f"{path}: truncated payload")
        arr = np.frombuffer(body[off:off + nbytes], dtype=dtype)
        off += nbytes
        return arr

    vectors = take(n_dir * 3, "<f8").reshape(n_dir, 3)
    freq_vals = take(n_freq, "<f8")
    samples = take(n_real * n_dir * n_freq, "<c16").reshape(n_real, n_dir, n_freq)
    f0 = None
    if int(meta.get("has_f0", "0")):
        f0 = take(n_real * n_dir * n_freq, "<c16").reshape(n_real, n_dir, n_freq)
    freqs = FrequencyGrid(k_min=float(meta["k_min"]), k_max=float(meta["k_max"]),
                          dk=float(meta["dk"]))
    if not np.allclose(freqs.values, freq_vals, rtol=0, atol=1e-12):
        raise FieldFormatError(f"{path}: frequency table mismatch")
    return FarFieldDataset(
        directions=DirectionSet(vectors, rule=meta.get("direction_rule", "file")),
        freqs=freqs, realizations=seeds, samples=samples,
        provenance={"source": meta["digest_source"],
                    "potential": meta["digest_potential"],
                    "solver": meta["digest_solver"]},
        f0_samples=f0)
