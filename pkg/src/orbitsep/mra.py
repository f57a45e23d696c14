"""Multi-reference alignment with degree <= 3 Fourier invariants.

Observations are ``y_i = shift(x, t_i) + sigma * eps_i`` with uniform shifts
and standard normal noise.  With the unnormalized DFT each noise bin has
``E|eps_hat[k]|^2 = n`` and ``E[eps_hat[k] eps_hat[-k]] = n``, which gives the
debiasing used by :func:`estimate_invariants`:

    power[k]    -= n sigma^2
    bispec[k,l] -= n sigma^2 * mean * ([k == 0] + [l == 0] + [k + l == 0 mod n])

(``scripts/debias_oracle.py`` re-derives these constants by regression.)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .groups import DimensionMismatch, InvalidDimension, Signal
from .invariants import FourierInvariants, bispectrum_index, fourier_invariants
from .rng import make_rng

CHUNK = 1 << 14
SHIFT_GRID_FACTOR = 64
_SIGNAL_KEY = 0x5157
_TRIAL_KEY = 0x7121


class GenericityError(ValueError):
    def __init__(self, k: int, value: float, floor: float):
        self.bin = k
        super().__init__(f"power spectrum bin {k} is {value:.3g}, not above the floor {floor:.3g}")


# --------------------------------------------------------------------------- #
# observations and moment estimation


def _real_signal(x) -> np.ndarray:
    x = x.entries if isinstance(x, Signal) else np.asarray(x)
    if np.iscomplexobj(x):
        if np.any(x.imag != 0):
            raise ValueError("observations are generated from real signals")
        x = x.real
    return np.asarray(x, dtype=float)


def _observation_chunk(x: np.ndarray, sigma: float, size: int, seed: int, c: int) -> np.ndarray:
    # separate streams for shifts and noise keep a short chunk a prefix of a full one
    n = x.size
    shifts = make_rng(seed, c, 0).integers(n, size=size)
    idx = (np.arange(n)[None, :] - shifts[:, None]) % n
    return x[idx] + sigma * make_rng(seed, c, 1).standard_normal((size, n))


def _chunk_sizes(N: int):
    full, rest = divmod(N, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def generate_observations(x, sigma: float, N: int, seed: int = 0) -> np.ndarray:
    """``(N, n)`` array of shifted noisy copies; row ``i`` depends only on ``(seed, i)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if N < 1:
        raise ValueError("N must be >= 1")
    x = _real_signal(x)
    return np.concatenate([_observation_chunk(x, sigma, s, seed, c) for c, s in enumerate(_chunk_sizes(N))])


def observation_shifts(x, N: int, seed: int = 0) -> np.ndarray:
    """The shifts used by :func:`generate_observations` with the same seed."""
    n = _real_signal(x).size
    return np.concatenate([make_rng(seed, c, 0).integers(n, size=s) for c, s in enumerate(_chunk_sizes(N))])


class MomentAccumulator:
    """Running sums of the first three Fourier moments of a stream of samples."""

    def __init__(self, n: int):
        self.n = n
        self.count = 0
        self.mean_sum = 0j
        self.power_sum = np.zeros(n)
        self.bispec_sum = np.zeros((n, n), dtype=complex)
        self._idx = bispectrum_index(n)

    def add(self, samples: np.ndarray) -> None:
        samples = np.atleast_2d(samples)
        if samples.shape[1] != self.n:
            raise DimensionMismatch(f"samples of length {samples.shape[1]}, expected {self.n}")
        yh = np.fft.fft(samples, axis=1)
        self.count += samples.shape[0]
        self.mean_sum += yh[:, 0].sum()
        self.power_sum += (yh.real**2 + yh.imag**2).sum(axis=0)
        self.bispec_sum += _bispec_sum(yh, self._idx)

    def raw(self) -> FourierInvariants:
        if self.count == 0:
            raise ValueError("no samples")
        c = self.count
        return FourierInvariants(self.mean_sum / c, self.power_sum / c, self.bispec_sum / c)


def _bispec_sum(yh: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n = yh.shape[1]
    out = np.empty((n, n), dtype=complex)
    conj = np.conj(yh)
    for k in range(n):
        out[k] = (yh[:, k : k + 1] * yh * conj[:, idx[k]]).sum(axis=0)
    return out


def debias(raw: FourierInvariants, sigma: float) -> FourierInvariants:
    n = raw.n
    s2 = n * sigma**2
    k = np.arange(n)
    hits = (k[:, None] == 0).astype(float) + (k[None, :] == 0) + (bispectrum_index(n) == 0)
    return FourierInvariants(raw.mean, raw.power - s2, raw.bispectrum - s2 * raw.mean * hits)


def estimate_invariants(samples, sigma: float) -> FourierInvariants:
    """Sample averages of mean, power spectrum and bispectrum, debiased for noise level ``sigma``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample list")
    samples = np.atleast_2d(samples)
    acc = MomentAccumulator(samples.shape[1])
    for lo in range(0, samples.shape[0], CHUNK):
        acc.add(samples[lo : lo + CHUNK])
    return debias(acc.raw(), sigma)


def estimate_from_stream(x, sigma: float, N: int, seed: int = 0) -> FourierInvariants:
    """Same as ``estimate_invariants(generate_observations(x, sigma, N, seed), sigma)`` without storing samples."""
    x = _real_signal(x)
    acc = MomentAccumulator(x.size)
    for c, s in enumerate(_chunk_sizes(N)):
        acc.add(_observation_chunk(x, sigma, s, seed, c))
    return debias(acc.raw(), sigma)


# --------------------------------------------------------------------------- #
# inversion and orbit-level error


def invert_bispectrum(inv: FourierInvariants, magnitude_floor: float | None = None,
                      gauge: str = "integer") -> Signal:
    """Signal whose invariants match ``inv``.

    Magnitudes are ``sqrt(power)``; phases follow
    ``phase[k+1] = phase[k] + phase[1] - arg b[k, 1]``; bin 0 is the mean.
    ``phase[1]`` is free up to a shift.  ``gauge="zero"`` pins it to 0,
    which yields a fractional-shift (complex) representative.  The default
    ``"integer"`` instead solves the closure ``phase[n-1] = -phase[1]`` of a
    real signal, ``n phase[1] = sum_{m=1}^{n-2} arg b[m, 1]``, so exact
    invariants of a real signal come back as a real integer shift of it,
    with every bispectrum entry reproduced.  The two differ by a
    continuous shift only.

    Bins other than 0 must carry power above ``magnitude_floor``
    (default ``1e-6 * max(power)``).
    """
    if gauge not in ("integer", "zero"):
        raise ValueError(f"unknown gauge {gauge!r}")
    n = inv.n
    power = np.asarray(inv.power, dtype=float)
    if magnitude_floor is None:
        magnitude_floor = 1e-6 * max(power.max(initial=0.0), 0.0)
    if not np.any(power[1:] > magnitude_floor):
        # only the mean is active: a constant signal
        return Signal(np.full(n, inv.mean.real / n, dtype=complex))
    for k in range(1, n):
        if not power[k] > magnitude_floor:
            raise GenericityError(k, float(power[k]), float(magnitude_floor))
    mags = np.sqrt(np.maximum(power, 0.0))
    steps = np.angle(inv.bispectrum[1 : n - 1, 1])
    phi1 = steps.sum() / n if gauge == "integer" else 0.0
    phase = np.zeros(n)
    if n > 1:
        phase[1] = phi1
    for k in range(1, n - 1):
        phase[k + 1] = phase[k] + phi1 - steps[k - 1]
    xh = mags * np.exp(1j * phase)
    xh[0] = inv.mean.real
    return Signal(np.fft.ifft(xh))


def _modulated(xh: np.ndarray, t) -> np.ndarray:
    n = xh.size
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(n)
    return np.fft.ifft(xh[None, :] * np.exp(-2j * np.pi * np.outer(t, k) / n), axis=1)


def align_error(x_true, x_rec) -> float:
    """Relative L2 error after the best continuous cyclic shift of ``x_rec``.

    Shifts act by modulation of the DFT.  A grid of ``64 n`` shifts locates
    the basin; a bounded scalar search then refines within one grid step.
    """
    a = np.asarray(x_true.entries if isinstance(x_true, Signal) else x_true, dtype=complex)
    b = np.asarray(x_rec.entries if isinstance(x_rec, Signal) else x_rec, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatch(f"signals of length {a.size} and {b.size}")
    n = a.size
    norm = np.linalg.norm(a)
    if norm == 0:
        return float(np.linalg.norm(b))
    bh = np.fft.fft(b)
    G = SHIFT_GRID_FACTOR * n
    grid = np.arange(G) * (n / G)
    errs = np.linalg.norm(_modulated(bh, grid) - a[None, :], axis=1)
    i = int(np.argmin(errs))
    step = n / G

    def sq_err(u):
        # squared error is smooth at a perfect match, unlike the norm itself; the
        # search variable is the offset from the grid point because the bounded
        # method's tolerance grows with |argument|
        return float(np.sum(np.abs(_modulated(bh, grid[i] + u)[0] - a) ** 2))

    res = minimize_scalar(sq_err, bounds=(-step, step), method="bounded", options={"xatol": 1e-12})
    best = min(float(errs[i]), math.sqrt(max(res.fun, 0.0)))
    return best / norm


# --------------------------------------------------------------------------- #
# sample-complexity sweep


@dataclass
class MraConfig:
    n: int = 7
    sigma_grid: tuple = (1.0, 1.4, 2.0, 2.8, 4.0)
    target_error: float = 0.3
    max_samples: int = 1 << 24
    trials: int = 5
    seed: int = 0

    def __post_init__(self):
        self.sigma_grid = tuple(float(s) for s in self.sigma_grid)
        if self.n < 3:
            raise InvalidDimension(f"n must be >= 3, got {self.n}")
        if not self.sigma_grid or any(s <= 0 for s in self.sigma_grid):
            raise ValueError("every sigma must be > 0")
        if not 0 < self.target_error < 1:
            raise ValueError("target_error must lie in (0, 1)")
        if self.max_samples < 1 or self.trials < 1:
            raise ValueError("max_samples and trials must be >= 1")

    @classmethod
    def from_mapping(cls, kv: dict) -> "MraConfig":
        """Build from string key/value pairs (CLI flags or a flat key=value file)."""
        known = {"n": int, "target_error": float, "max_samples": int, "trials": int, "seed": int}
        args = {}
        for key, raw in kv.items():
            key = key.strip().replace("-", "_")
            if key in ("sigma_grid", "sigmas"):
                args["sigma_grid"] = tuple(float(s) for s in str(raw).split(",") if s.strip())
            elif key in known:
                args[key] = known[key](float(raw)) if known[key] is int else known[key](raw)
            else:
                raise ValueError(f"unknown MRA config key {key!r}")
        return cls(**args)


def read_kv_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class TrialRow:
    sigma: float
    trial: int
    N_required: int
    censored: bool
    mean_err: float
    power_err: float
    bispec_err: float
    align_err: float


@dataclass
class MraResult:
    config: MraConfig
    signal: np.ndarray
    N: dict = field(default_factory=dict)  # sigma -> required N (None if censored)
    rows: list = field(default_factory=list)
    slope: float = math.nan
    intercept: float = math.nan

    @property
    def censored(self) -> list:
        return [s for s, v in self.N.items() if v is None]

    def monotone(self, allowed_inversions: int = 1) -> bool:
        ns = [self.N[s] for s in sorted(self.N) if self.N[s] is not None]
        return sum(b < a for a, b in zip(ns, ns[1:])) <= allowed_inversions

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "signal": self.signal.tolist(),
            "N": {repr(s): v for s, v in self.N.items()},
            "slope": self.slope,
            "intercept": self.intercept,
            "rows": [asdict(r) for r in self.rows],
        }


def sweep_signal(n: int, seed: int, min_bin: float = 0.3, rms: float = 0.5) -> np.ndarray:
    """Seeded real signal of the given RMS whose nonzero-frequency DFT bins all exceed ``min_bin * rms * sqrt(n)``.

    The default amplitude keeps the whole default noise grid in the
    high-noise regime, where the sample complexity follows sigma^6.
    """
    rng = make_rng(seed, _SIGNAL_KEY)
    while True:
        x = rng.standard_normal(n)
        x *= rms / np.sqrt(np.mean(x**2))
        if np.abs(np.fft.fft(x))[1:].min() > min_bin * rms * np.sqrt(n):
            return x


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


class _TrialStream:
    """One trial's observation stream with cached per-chunk moment sums.

    Prefixes of the stream are consistent, so the moments of the first N
    samples are cached full chunks plus one freshly generated partial chunk.
    """

    def __init__(self, x: np.ndarray, sigma: float, seed: int):
        self.x, self.sigma, self.seed = x, sigma, seed
        self._cum = [MomentAccumulator(x.size)]

    def _extend(self, chunks: int):
        while len(self._cum) <= chunks:
            c = len(self._cum) - 1
            prev = self._cum[-1]
            acc = MomentAccumulator(self.x.size)
            acc.add(_observation_chunk(self.x, self.sigma, CHUNK, self.seed, c))
            acc.count += prev.count
            acc.mean_sum += prev.mean_sum
            acc.power_sum += prev.power_sum
            acc.bispec_sum += prev.bispec_sum
            self._cum.append(acc)

    def estimate(self, N: int) -> FourierInvariants:
        full, rest = divmod(N, CHUNK)
        self._extend(full)
        base = self._cum[full]
        acc = MomentAccumulator(self.x.size)
        if rest:
            acc.add(_observation_chunk(self.x, self.sigma, rest, self.seed, full))
        acc.count += base.count
        acc.mean_sum += base.mean_sum
        acc.power_sum = acc.power_sum + base.power_sum
        acc.bispec_sum = acc.bispec_sum + base.bispec_sum
        return debias(acc.raw(), self.sigma)


def _evaluate(stream: _TrialStream, truth: FourierInvariants, N: int) -> TrialRow:
    est = stream.estimate(N)
    try:
        err = align_error(stream.x, invert_bispectrum(est))
    except GenericityError:
        err = math.inf
    scale = np.sqrt(truth.power.sum())
    return TrialRow(stream.sigma, -1, N, False, abs(est.mean - truth.mean) / scale, _rel(est.power, truth.power),
                    _rel(est.bispectrum, truth.bispectrum), err)


def _median_success(streams, truth, N, target) -> tuple[bool, list]:
    rows = [_evaluate(s, truth, N) for s in streams]
    return float(np.median([r.align_err for r in rows])) <= target, rows


def required_samples(x, sigma: float, cfg: MraConfig, seeds, truth=None):
    """Smallest N (doubling, then bisection to 1%) whose median error over ``seeds`` meets the target.

    Every trial reuses one sample stream, so a larger N extends a smaller
    one.  Returns ``(N or None, rows at N)``; None means ``max_samples`` ran out.
    """
    x = _real_signal(x)
    truth = truth or fourier_invariants(x)
    streams = [_TrialStream(x, sigma, s) for s in seeds]
    N = 1
    ok, rows = _median_success(streams, truth, N, cfg.target_error)
    while not ok:
        if N >= cfg.max_samples:
            return None, rows
        N = min(2 * N, cfg.max_samples)
        ok, rows = _median_success(streams, truth, N, cfg.target_error)
    lo, hi, best = N // 2, N, rows
    while hi - lo > max(1, hi // 100):
        mid = (lo + hi) // 2
        ok, rows = _median_success(streams, truth, mid, cfg.target_error)
        if ok:
            hi, best = mid, rows
        else:
            lo = mid
    return hi, best


def fit_slope(sigmas, Ns) -> tuple[float, float]:
    pts = [(math.log(s), math.log(N)) for s, N in zip(sigmas, Ns) if N is not None]
    if len(pts) < 2:
        return math.nan, math.nan
    a = np.array(pts)
    slope, intercept = np.polyfit(a[:, 0], a[:, 1], 1)
    return float(slope), float(intercept)


def sample_complexity_sweep(cfg: MraConfig, signal=None) -> MraResult:
    x = sweep_signal(cfg.n, cfg.seed) if signal is None else _real_signal(signal)
    if x.size != cfg.n:
        raise DimensionMismatch(f"signal of length {x.size} for n={cfg.n}")
    truth = fourier_invariants(x)
    result = MraResult(cfg, x)
    for si, sigma in enumerate(cfg.sigma_grid):
        seeds = [int(make_rng(cfg.seed, _TRIAL_KEY, si, t).integers(1 << 62)) for t in range(cfg.trials)]
        N, rows = required_samples(x, sigma, cfg, seeds, truth)
        result.N[sigma] = N
        for t, r in enumerate(rows):
            r.trial = t
            r.censored = N is None
            r.N_required = N if N is not None else cfg.max_samples
            result.rows.append(r)
    result.slope, result.intercept = fit_slope(cfg.sigma_grid, [result.N[s] for s in cfg.sigma_grid])
    return result
