"""Measurement-side statistics on bitstring snapshots.

Wire format (UTF-8): a header line ``N=<int> t=<float cycles> shots=<int>``
followed by one bitstring per line (site 0 leftmost), optionally followed by
a rearrangement flag 0/1; blocks are separated by blank lines.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import InvalidArgumentError
from .evolve import CorrelatorSeries, average_by_distance, interior_window
from .hilbert import Boundary, bit_matrix, cycle_to_time, is_blockaded
from .spectral import SpectralGrid

_HEADER = re.compile(r"^N=(\d+)\s+t=([-+0-9.eE]+)\s+shots=(\d+)\s*$")


@dataclass
class MeasurementDataset:
    """Per-time arrays of configurations (ints, site 0 at bit 0)."""

    n_sites: int
    times: np.ndarray  # cycles
    shots: list
    post_selected: bool = False
    provenance: dict = field(default_factory=lambda: {"kind": "ingested"})
    raw_counts: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def counts(self):
        return [len(s) for s in self.shots]

    def retention(self):
        return [c / r if r else float("nan") for c, r in zip(self.counts, self.raw_counts or self.counts)]

    def bits(self, i) -> np.ndarray:
        return bit_matrix(np.asarray(self.shots[i]), self.n_sites)

    def write(self, path):
        lines = []
        for t, s in zip(self.times, self.shots):
            lines.append(f"N={self.n_sites} t={float(t)!r} shots={len(s)}")
            lines += ["".join(str(b) for b in row) for row in bit_matrix(np.asarray(s), self.n_sites)]
            lines.append("")
        Path(path).write_text("\n".join(lines))


def _parse_bits(text, n, lineno):
    if len(text) != n:
        raise InvalidArgumentError(f"line {lineno}: bitstring length {len(text)} != N={n}")
    if set(text) - {"0", "1"}:
        raise InvalidArgumentError(f"line {lineno}: malformed bitstring {text!r}")
    return int(text[::-1], 2)


def ingest(path, boundary=Boundary.OBC, post_select=True) -> MeasurementDataset:
    """Read a dataset, dropping flagged shots and (optionally) blockade violations."""
    boundary = Boundary.parse(boundary)
    n = None
    times, shots, raw, flags = [], [], [], []
    cur = None
    expected = None

    def close(lineno):
        if cur is None:
            return
        if len(cur) != expected:
            raise InvalidArgumentError(f"line {lineno}: block at t={times[-1]} has {len(cur)} shots, header says {expected}")

    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            close(lineno)
            nn = int(m.group(1))
            if n is not None and nn != n:
                raise InvalidArgumentError(f"line {lineno}: N changes from {n} to {nn}")
            n = nn
            times.append(float(m.group(2)))
            expected = int(m.group(3))
            cur = []
            shots.append(cur)
            continue
        if cur is None:
            raise InvalidArgumentError(f"line {lineno}: bitstring before any header")
        parts = line.split()
        if len(parts) not in (1, 2) or (len(parts) == 2 and parts[1] not in ("0", "1")):
            raise InvalidArgumentError(f"line {lineno}: malformed line {line!r}")
        c = _parse_bits(parts[0], n, lineno)
        cur.append((c, parts[1] == "1" if len(parts) == 2 else True))
    close("EOF")
    if n is None:
        raise InvalidArgumentError("no data blocks found")
    out = []
    for t, blk in zip(times, shots):
        ok = np.array([c for c, f in blk if f], dtype=np.int64)
        raw.append(len(ok))
        if post_select and len(ok):
            ok = ok[is_blockaded(ok, n, boundary)]
        if len(ok) == 0:
            flags.append(f"t={t}: no usable shots")
        out.append(ok)
    return MeasurementDataset(n, np.array(times), out, post_select, {"kind": "ingested", "path": str(path)}, raw, flags)


def sample_synthetic(traj, shots: int, seed: int = 0, time_unit_cycles=True) -> MeasurementDataset:
    """Born-rule snapshots of every state in a trajectory.

    One generator per time point, seeded by (seed, index), so each block is
    reproducible on its own.
    """
    if shots <= 0:
        raise InvalidArgumentError("shots must be positive")
    probs = np.abs(traj.states) ** 2
    states = np.asarray(traj.basis.states, dtype=np.int64)
    out = []
    for i, p in enumerate(probs):
        rng = np.random.default_rng([seed, i])
        out.append(states[rng.choice(len(p), size=shots, p=p / p.sum())])
    times = np.asarray(traj.times, dtype=float)
    if time_unit_cycles:
        times = times / math.pi
    prov = {"kind": "synthetic", "seed": seed, "model": traj.meta.get("model")}
    return MeasurementDataset(traj.basis.n_sites, times, out, True, prov, [shots] * len(out))


# ---------------------------------------------------------------------------
# correlators from snapshots


def correlator_from_shots(z, boundary, field_mapping=True, distances=None, margin=None):
    """Connected <Z_j Z_j+d> averaged over positions, from a (shots, N) +-1 array."""
    z = np.asarray(z, dtype=float)
    mean = z.mean(axis=0)
    C = (z.T @ z) / len(z) - np.outer(mean, mean)
    d, vals = average_by_distance(C[None], boundary, distances, margin)
    vals = vals[0]
    if field_mapping:
        vals = vals * (-1.0) ** d
    return d, vals


def dataset_correlators(ds: MeasurementDataset, boundary=Boundary.OBC, field_mapping=True,
                        distances=None, margin=None) -> CorrelatorSeries:
    boundary = Boundary.parse(boundary)
    rows = []
    d = None
    for i in range(len(ds.times)):
        z = 1.0 - 2.0 * ds.bits(i)
        d, v = correlator_from_shots(z, boundary, field_mapping, distances, margin)
        rows.append(v)
    sites = list(range(ds.n_sites)) if boundary is Boundary.PBC else list(interior_window(ds.n_sites, margin))
    return CorrelatorSeries(np.asarray(ds.times), np.asarray(d), np.array(rows), True, field_mapping, sites)


def bootstrap(stat, samples, n_resamples=200, seed=0):
    """Standard error of ``stat`` by resampling rows of ``samples``."""
    rng = np.random.default_rng(seed)
    samples = np.asarray(samples)
    vals = [stat(samples[rng.integers(0, len(samples), len(samples))]) for _ in range(n_resamples)]
    return np.std(np.asarray(vals), axis=0, ddof=1)


# ---------------------------------------------------------------------------
# correlation front


@dataclass
class DistanceAmplitudeSeries:
    times: np.ndarray
    mean_distance: np.ndarray
    rms_distance: np.ndarray
    amplitude: np.ndarray
    background: np.ndarray
    window: int
    flagged: list
    velocity: float = float("nan")
    decay: float = float("nan")  # fitted 2 gamma in amplitude ~ exp(-decay t)
    velocity_err: float = float("nan")
    decay_err: float = float("nan")
    fit_range: tuple = (None, None)

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def _front_stats(C, d, window):
    bg = C[-window:].mean(axis=0)
    dC = C - bg
    use = d >= 1
    sq = dC[:, use] ** 2
    amp = sq.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = sq / amp[:, None]
    dd = d[use]
    return bg, amp, (p * dd).sum(axis=1), np.sqrt((p * dd**2).sum(axis=1))


def _linfit(x, y):
    ok = np.isfinite(y)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(x[ok], y[ok], 1)
    return float(slope), float(icpt)


def correlation_front(series: CorrelatorSeries, window: int = 5, fit_range=(None, None),
                      amp_fit_range=None, times_in_cycles=True, dataset=None, boundary=Boundary.OBC,
                      n_resamples=200, seed=0, margin=None) -> DistanceAmplitudeSeries:
    """Mean distance and amplitude of the correlation change against the late-time background.

    Velocities and decay rates are reported per unit of natural time when
    ``times_in_cycles`` (the series then carries cycles).  With ``dataset``
    the errors come from bootstrapping shots at each time.
    """
    T = np.asarray(series.times, dtype=float)
    if len(T) < window + 3:
        raise InvalidArgumentError(f"need at least {window + 3} time points, got {len(T)}")
    t_nat = cycle_to_time(T) if times_in_cycles else T
    d = np.asarray(series.distances)
    C = np.asarray(series.values, dtype=float)
    bg, amp, dbar, drms = _front_stats(C, d, window)
    flagged = [float(T[i]) for i in np.flatnonzero(amp <= 1e-300)]
    dbar[amp <= 1e-300] = np.nan
    drms[amp <= 1e-300] = np.nan

    def fits(dbar_, amp_):
        lo, hi = fit_range
        sel = np.ones(len(T), bool)
        if lo is not None:
            sel &= t_nat >= lo
        if hi is not None:
            sel &= t_nat <= hi
        v, _ = _linfit(t_nat[sel], dbar_[sel])
        lo2, hi2 = amp_fit_range or fit_range
        sel2 = np.ones(len(T), bool)
        if lo2 is not None:
            sel2 &= t_nat >= lo2
        if hi2 is not None:
            sel2 &= t_nat <= hi2
        sel2 &= amp_ > 0
        g, _ = _linfit(t_nat[sel2], np.log(np.where(amp_ > 0, amp_, np.nan))[sel2])
        return v, -g

    v, decay = fits(dbar, amp)
    out = DistanceAmplitudeSeries(T, dbar, drms, amp, bg, window, flagged, v, decay, fit_range=tuple(fit_range))
    if dataset is not None:
        rng = np.random.default_rng(seed)
        boundary = Boundary.parse(boundary)
        zs = [1.0 - 2.0 * dataset.bits(i) for i in range(len(dataset.times))]
        vs, ds_ = [], []
        for _ in range(n_resamples):
            rows = []
            for z in zs:
                zz = z[rng.integers(0, len(z), len(z))]
                rows.append(correlator_from_shots(zz, boundary, series.mapped, d, margin)[1])
            _, a2, db2, _ = _front_stats(np.array(rows), d, window)
            db2[a2 <= 1e-300] = np.nan
            vv, gg = fits(db2, a2)
            vs.append(vv)
            ds_.append(gg)
        out.velocity_err = float(np.nanstd(vs, ddof=1))
        out.decay_err = float(np.nanstd(ds_, ddof=1))
    return out


# ---------------------------------------------------------------------------
# band reconstruction


def field_mode_values(bits, q):
    """E(q) per shot: N^{-1/2} sum_j e^{iqj} (-1)^j Z_j."""
    n = bits.shape[1]
    z = 1.0 - 2.0 * bits
    return z @ (np.exp(1j * q * np.arange(n)) * (-1.0) ** np.arange(n)) / math.sqrt(n)


def variance_series(ds: MeasurementDataset, qs):
    """var[E(q)](t) = <E(q)E(-q)> - |<E(q)>|^2 from snapshots, shape (n_q, n_t)."""
    out = np.zeros((len(qs), len(ds.times)))
    for i in range(len(ds.times)):
        b = ds.bits(i)
        if len(b) == 0:
            raise InvalidArgumentError(f"no shots at t={ds.times[i]}")
        for a, q in enumerate(qs):
            e = field_mode_values(b, q)
            out[a, i] = np.mean(np.abs(e) ** 2) - abs(np.mean(e)) ** 2
    return out


def band_reconstruction(times, series, qs, pad: int = 8, detrend=True) -> SpectralGrid:
    """Column-normalised |FFT| of per-q time series (natural time units).

    Rows of ``series`` are the q values.  Times must be uniform.  A series
    with no time dependence puts all of its weight at omega = 0.
    """
    t = np.asarray(times, dtype=float)
    dt = np.diff(t)
    if len(t) < 4 or np.abs(dt - dt[0]).max() > 1e-9 * max(1.0, abs(dt[0])):
        raise InvalidArgumentError("band reconstruction needs a uniform time grid; resample first")
    series = np.atleast_2d(np.asarray(series, dtype=float))
    nfft = pad * len(t)
    omega = 2 * math.pi * np.fft.rfftfreq(nfft, dt[0])
    vals = np.zeros((len(series), len(omega)))
    dw = omega[1] - omega[0]
    for a, y in enumerate(series):
        y = y - y.mean() if detrend else y
        if np.abs(y).max() <= 1e-14 * max(1.0, np.abs(series[a]).max()):
            vals[a, 0] = 1.0 / dw
            continue
        spec = np.abs(np.fft.rfft(y, nfft))
        vals[a] = spec / (spec.sum() * dw)
    return SpectralGrid(np.asarray(qs, dtype=float), omega, vals, "band", None, None,
                        {"normalization": "column sums to 1", "pad": pad})


def dominant_frequency(grid: SpectralGrid) -> np.ndarray:
    return grid.omega[np.argmax(grid.values, axis=1)]


# ---------------------------------------------------------------------------
# Ursell functions


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def ursell(moment, m: int) -> float:
    """Connected m-point function from a moment oracle.

    ``moment(subset)`` returns <prod_{i in subset} o_i>.  The cumulant is
    sum over set partitions of (-1)^(|pi|-1) (|pi|-1)! prod_blocks moment.
    """
    if not 1 <= m <= 6:
        raise InvalidArgumentError("Ursell functions are implemented for 1 <= m <= 6")
    cache = {}

    def mom(block):
        key = tuple(sorted(block))
        if key not in cache:
            cache[key] = moment(key)
        return cache[key]

    total = 0.0
    for part in set_partitions(range(m)):
        r = len(part)
        total += (-1) ** (r - 1) * math.factorial(r - 1) * np.prod([mom(b) for b in part])
    return float(total)


def ursell_samples(X) -> float:
    """Ursell function of the columns of a (samples, m) array of observable values."""
    X = np.asarray(X, dtype=float)
    return ursell(lambda s: X[:, list(s)].prod(axis=1).mean() if s else 1.0, X.shape[1])


def ursell_distribution(probs, values) -> float:
    """Exact Ursell function for a weighted set of outcomes: values (outcomes, m)."""
    p = np.asarray(probs, dtype=float)
    V = np.asarray(values, dtype=float)
    return ursell(lambda s: float(p @ V[:, list(s)].prod(axis=1)), V.shape[1])


def ursell3_explicit(X) -> float:
    """<abc> - <ab><c> - <ac><b> - <bc><a> + 2<a><b><c>."""
    a, b, c = np.asarray(X, dtype=float).T
    m = np.mean
    return float(m(a * b * c) - m(a * b) * m(c) - m(a * c) * m(b) - m(b * c) * m(a) + 2 * m(a) * m(b) * m(c))


def link_densities(bits, periodic=True):
    """n_{j,j+1} = P_j P_{j+1} per configuration (1 when both sites are empty)."""
    P = 1 - np.asarray(bits)
    nxt = np.roll(P, -1, axis=1)
    n = P * nxt
    return n if periodic else n[:, :-1]


def cluster_ursell(probs, bits, m: int, periodic=True) -> float:
    """Connected m-point function of consecutive link densities, averaged over j."""
    L = link_densities(bits, periodic)
    n_links = L.shape[1]
    starts = range(n_links) if periodic else range(n_links - m + 1)
    vals = [ursell_distribution(probs, L[:, [(j + i) % n_links for i in range(m)]]) for j in starts]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# cluster statistics


def cluster_probability(probs, bits, m: int, periodic=True) -> float:
    """<n_{j,j+1} ... n_{j+m-1,j+m}> averaged over j: m+1 consecutive empty sites."""
    P = 1 - np.asarray(bits)
    n = P.shape[1]
    idx = np.arange(n) if periodic else np.arange(n - m)
    run = np.ones((P.shape[0], len(idx)))
    for i in range(m + 1):
        run = run * P[:, (idx + i) % n]
    return float(np.asarray(probs) @ run.mean(axis=1))


def cluster_reference(m: int, n_sites=None, boundary=Boundary.PBC) -> float:
    """Infinite-temperature value of m consecutive link charges from exact counting."""
    from .trace import string_trace

    return float(string_trace("P" * (m + 1), n_sites, boundary))


@dataclass
class ClusterStats:
    m: np.ndarray
    probability: np.ndarray
    reference: np.ndarray
    excess: np.ndarray
    error: np.ndarray


def cluster_stats(source, m_max: int, n_sites=None, periodic=True, n_resamples=200, seed=0,
                  reference_sites="auto") -> ClusterStats:
    """Cluster probabilities minus their infinite-temperature values.

    ``source`` is a MeasurementDataset (pooled over times, bootstrap errors)
    or a tuple (probs, bits) for an exact distribution (errors zero).
    The reference is the exact uniform average over blockaded configurations
    of the same chain (``reference_sites='auto'``) or the thermodynamic
    limit (``None``).
    """
    boundary = Boundary.PBC if periodic else Boundary.OBC
    if isinstance(source, MeasurementDataset):
        bits = np.vstack([source.bits(i) for i in range(len(source.times))])
        probs = np.full(len(bits), 1.0 / len(bits))
        n = source.n_sites
    else:
        probs, bits = source
        n = np.asarray(bits).shape[1]
    ms = np.arange(1, m_max + 1)
    nref = n if reference_sites == "auto" else reference_sites
    prob = np.array([cluster_probability(probs, bits, m, periodic) for m in ms])
    ref = np.array([cluster_reference(m, nref, boundary) for m in ms])
    err = np.zeros(len(ms))
    if isinstance(source, MeasurementDataset):
        err = bootstrap(lambda b: np.array([cluster_probability(np.full(len(b), 1 / len(b)), b, m, periodic)
                                            for m in ms]), bits, n_resamples, seed)
    return ClusterStats(ms, prob, ref, prob - ref, err)


# ---------------------------------------------------------------------------
# fully packed strings


def fully_packed_root(tol=1e-12):
    """Root of (1/2 - 3x/2)^3 = (1/2 - x) x^2 in (0, 1/3) and the peak momentum x pi."""
    f = lambda x: (0.5 - 1.5 * x) ** 3 - (0.5 - x) * x**2
    x = optimize.brentq(f, 1e-9, 1 / 3 - 1e-9, xtol=tol)
    return {"x": x, "q_peak": x * math.pi, "renyi_parking": math.exp(-2)}


# ---------------------------------------------------------------------------
# Lorentzian fits


def lorentzian(w, w0, gamma, amp):
    return amp * gamma / math.pi / ((w - w0) ** 2 + gamma**2)


def lorentzian_fit(omega, S, positive=True):
    """Fit the dominant peak of S(omega); returns (omega0, gamma, amplitude)."""
    omega = np.asarray(omega)
    S = np.real(np.asarray(S))
    sel = omega > 0 if positive else np.ones(len(omega), bool)
    w, y = omega[sel], S[sel]
    i = int(np.argmax(y))
    half = y[i] / 2
    above = np.flatnonzero(y >= half)
    g0 = max((w[above[-1]] - w[above[0]]) / 2, w[1] - w[0])
    p0 = (w[i], g0, y[i] * math.pi * g0)
    try:
        p, _ = optimize.curve_fit(lorentzian, w, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        from .errors import NumericalError
        raise NumericalError(f"Lorentzian fit failed: {exc}") from None
    return float(p[0]), float(abs(p[1])), float(p[2])


def mean_decay_rate(grid: SpectralGrid, k_range=(0.0, math.pi), exclude_zero=True) -> float:
    """gamma-bar: mean fitted half-width over momenta in ``k_range``.

    k = 0 is skipped by default: a conserved probe gives a delta there, not
    a Lorentzian.
    """
    ks = np.asarray(grid.k_values)
    sel = (ks >= k_range[0] - 1e-12) & (ks <= k_range[1] + 1e-12)
    if exclude_zero:
        sel &= np.abs(ks) > 1e-9
    return float(np.mean([lorentzian_fit(grid.omega, grid.values[i])[1] for i in np.flatnonzero(sel)]))


def write_sidecar(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
