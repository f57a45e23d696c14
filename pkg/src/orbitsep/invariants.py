"""Concrete invariant feature maps.

Every family is exposed twice: as a plain function on a typed value
(``power_sums``, ``f_star``, ``fourier_invariants`` ...) and as a
:class:`FeatureMap`, whose evaluator works on raw arrays with arbitrary
leading batch axes and always returns real features (complex outputs are
split into real and imaginary parts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .groups import (
    DimensionMismatch,
    InvalidDimension,
    Signal,
    SymMatrix,
    pair_count,
    pair_table,
)
from .rng import derive_seed

DOMAIN_KINDS = ("vector", "symmatrix", "signal", "pointcloud", "matrix", "complexpair")


@dataclass(frozen=True)
class Domain:
    kind: str
    dims: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        k, dims = self.kind, self.dims
        if k in ("vector", "signal"):
            return (dims[0],)
        if k == "symmatrix":
            return (dims[0] * (dims[0] + 1) // 2,)
        if k in ("pointcloud", "matrix"):
            return (dims[0], dims[1])
        return (2,)

    @property
    def dtype(self):
        return complex if self.kind in ("signal", "complexpair") else float

    def coerce(self, x) -> np.ndarray:
        """Raw array for a typed value (or pass an array through after a shape check)."""
        if isinstance(x, SymMatrix):
            x = x.packed
        elif isinstance(x, Signal):
            x = x.entries
        elif hasattr(x, "coords"):
            x = x.coords
        a = np.asarray(x)
        if a.dtype.kind == "c" and self.dtype is float:
            raise TypeError(f"complex input for real domain {self}")
        a = a.astype(self.dtype, copy=False)
        k = len(self.shape)
        if a.shape[a.ndim - k:] != self.shape:
            raise DimensionMismatch(f"input of shape {a.shape} does not end in {self.shape} ({self})")
        return a

    def __str__(self) -> str:
        return f"{self.kind}({','.join(map(str, self.dims))})"


def vector(n):
    return Domain("vector", (n,))


def symmatrix(n):
    return Domain("symmatrix", (n,))


def signal(n):
    return Domain("signal", (n,))


def pointcloud(d, n):
    return Domain("pointcloud", (d, n))


def matrix(n, d):
    return Domain("matrix", (n, d))


def complexpair(n):
    return Domain("complexpair", (n,))


@dataclass(frozen=True, eq=False)
class FeatureMap:
    name: str
    domain: Domain
    output_len: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(self.evaluator(self.domain.coerce(x)), dtype=float)
        if out.shape[-1:] != (self.output_len,):
            raise RuntimeError(f"{self.name} returned shape {out.shape}, declared {self.output_len}")
        return out


def _split_complex(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=-1)


# --------------------------------------------------------------------------- #
# symmetric functions


def _power_sums(v: np.ndarray, K: int) -> np.ndarray:
    out = np.empty(v.shape[:-1] + (K,))
    term = np.ones_like(v)
    for k in range(K):
        term = term * v
        out[..., k] = term.sum(axis=-1)
    return out


def power_sums(v, K: int) -> np.ndarray:
    """``[sum(v), sum(v**2), ..., sum(v**K)]``."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return _power_sums(np.asarray(v, dtype=float), K)


def _check_n(n: int):
    if n < 2:
        raise InvalidDimension(f"need n >= 2, got {n}")


def _diag_offdiag(a: np.ndarray, n: int) -> np.ndarray:
    m = pair_count(n)
    return np.concatenate([_power_sums(a[..., :n], n), _power_sums(a[..., n:], m)], axis=-1)


def _f_star(a: np.ndarray, n: int) -> np.ndarray:
    pairs = pair_table(n)
    d = a[..., :n]
    incident = d[..., pairs[:, 0]] + d[..., pairs[:, 1]]
    return (incident * a[..., n:]).sum(axis=-1, keepdims=True)


def diag_offdiag_invariants(X: SymMatrix) -> np.ndarray:
    _check_n(X.n)
    return _diag_offdiag(X.packed, X.n)


def f_star(X: SymMatrix) -> float:
    """``sum_{i != j} X[i,i] * X[i,j]``: fixed by conjugation, broken by decoupled diagonal/off-diagonal moves."""
    _check_n(X.n)
    return float(_f_star(X.packed, X.n)[0])


def conjugation_invariants(X: SymMatrix) -> np.ndarray:
    _check_n(X.n)
    a = X.packed
    return np.concatenate([_diag_offdiag(a, X.n), _f_star(a, X.n)])


def diag_offdiag_map(n: int) -> FeatureMap:
    _check_n(n)
    return FeatureMap("diag_offdiag", symmatrix(n), n + pair_count(n), lambda a: _diag_offdiag(a, n))


def f_star_map(n: int) -> FeatureMap:
    _check_n(n)
    return FeatureMap("f_star", symmatrix(n), 1, lambda a: _f_star(a, n))


def conjugation_map(n: int) -> FeatureMap:
    _check_n(n)
    return FeatureMap(
        "conjugation",
        symmatrix(n),
        n + pair_count(n) + 1,
        lambda a: np.concatenate([_diag_offdiag(a, n), _f_star(a, n)], axis=-1),
    )


def constant_map(domain: Domain, value: float = 1.0) -> FeatureMap:
    return FeatureMap(
        "constant", domain, 1, lambda a: np.full(a.shape[: a.ndim - len(domain.shape)] + (1,), value)
    )


def raw_diag_map(n: int) -> FeatureMap:
    """The unsorted diagonal; not invariant, kept as a negative control."""
    return FeatureMap("raw_diag", symmatrix(n), n, lambda a: a[..., :n].copy())


# --------------------------------------------------------------------------- #
# scalar Z/nZ action on C^2


def _check_veronese(n: int, j: int | None = None):
    if n < 1:
        raise InvalidDimension(f"n must be >= 1, got {n}")
    if j is not None and not 1 <= j <= n - 1:
        raise ValueError(f"j must lie in [1, {n - 1}], got {j}")


def veronese_separators(pt, n: int, j: int = 1) -> tuple[complex, complex, complex]:
    """``(x**n, x**(n-j) * y**j, y**n)``; separating exactly when gcd(j, n) == 1."""
    _check_veronese(n, j)
    x, y = complex(pt[0]), complex(pt[1])
    return x**n, x ** (n - j) * y**j, y**n


def veronese_generators(pt, n: int) -> np.ndarray:
    _check_veronese(n)
    x, y = complex(pt[0]), complex(pt[1])
    return np.array([x ** (n - k) * y**k for k in range(n + 1)])


def veronese_map(n: int, j: int) -> FeatureMap:
    _check_veronese(n, j)

    def ev(a):
        x, y = a[..., 0], a[..., 1]
        return _split_complex(np.stack([x**n, x ** (n - j) * y**j, y**n], axis=-1))

    return FeatureMap(f"veronese(n={n},j={j})", complexpair(n), 6, ev, {"n": n, "j": j})


def veronese_generators_map(n: int) -> FeatureMap:
    _check_veronese(n)
    k = np.arange(n + 1)

    def ev(a):
        x, y = a[..., 0:1], a[..., 1:2]
        return _split_complex(x ** (n - k) * y**k)

    return FeatureMap(f"veronese_generators(n={n})", complexpair(n), 2 * (n + 1), ev, {"n": n})


# --------------------------------------------------------------------------- #
# cyclic group: Fourier invariants of degree <= 3


@dataclass(frozen=True, eq=False)
class FourierInvariants:
    mean: complex
    power: np.ndarray
    bispectrum: np.ndarray

    @property
    def n(self) -> int:
        return self.power.size

    def flat(self) -> np.ndarray:
        z = np.concatenate([[self.mean], self.bispectrum.reshape(-1)])
        return np.concatenate([[z[0].real, z[0].imag], self.power, z[1:].real, z[1:].imag])


def bispectrum_index(n: int) -> np.ndarray:
    k = np.arange(n)
    return (k[:, None] + k[None, :]) % n


def _bispectrum(xh: np.ndarray) -> np.ndarray:
    n = xh.shape[-1]
    return xh[..., :, None] * xh[..., None, :] * np.conj(xh[..., bispectrum_index(n)])


def fourier_invariants(x) -> FourierInvariants:
    """Mean, power spectrum and bispectrum under the unnormalized DFT ``sum_j x[j] exp(-2 pi i jk/n)``."""
    x = x if isinstance(x, Signal) else Signal(x)
    if x.n < 2:
        raise InvalidDimension(f"need n >= 2, got {x.n}")
    xh = np.fft.fft(x.entries)
    return FourierInvariants(complex(xh[0]), np.abs(xh) ** 2, _bispectrum(xh))


def fourier_map(n: int) -> FeatureMap:
    if n < 2:
        raise InvalidDimension(f"need n >= 2, got {n}")

    def ev(a):
        xh = np.fft.fft(a, axis=-1)
        b = _bispectrum(xh).reshape(a.shape[:-1] + (n * n,))
        return np.concatenate(
            [xh[..., :1].real, xh[..., :1].imag, np.abs(xh) ** 2, b.real, b.imag], axis=-1
        )

    return FeatureMap("fourier", signal(n), 2 + n + 2 * n * n, ev)


# --------------------------------------------------------------------------- #
# permutations of the rows of an n x d matrix


def _sorted_projections(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    # accumulate column by column so each row's projection never depends on
    # where the row sits; this is what makes the invariance bit-exact
    w = X[..., :, 0:1] * V[0]
    for c in range(1, V.shape[0]):
        w = w + X[..., :, c : c + 1] * V[c]
    return np.sort(w, axis=-2)


def _sort_features(X: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    s = _sorted_projections(X, V)
    out = s[..., 0, :] * U[0]
    for r in range(1, U.shape[0]):
        out = out + s[..., r, :] * U[r]
    return out


def sort_separator(X, u, v) -> float:
    """``<u, sort(X v)>`` with ascending sort."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape != (u.size, v.size):
        raise DimensionMismatch(f"X {X.shape} incompatible with u ({u.size}) and v ({v.size})")
    return float(_sort_features(X, u[:, None], v[:, None])[0])


def default_sort_count(n: int, d: int) -> int:
    return 2 * n * d + 1


def sample_sort_separators(n: int, d: int, count: int | None = None, seed: int = 0) -> FeatureMap:
    """``count`` random sort features; feature ``i`` draws (u, v) from its own seed ``mix(seed + i)``."""
    if count is None:
        count = default_sort_count(n, d)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    U = np.empty((n, count))
    V = np.empty((d, count))
    for i in range(count):
        rng = np.random.default_rng(derive_seed(seed, i))
        U[:, i] = rng.standard_normal(n)
        V[:, i] = rng.standard_normal(d)
    U.setflags(write=False)
    V.setflags(write=False)
    return FeatureMap(
        f"sort(n={n},d={d},count={count})",
        matrix(n, d),
        count,
        lambda a: _sort_features(a, U, V),
        {"seed": seed, "u": U, "v": V},
    )


def multiset_equal(a, b) -> bool:
    return sorted(np.asarray(a).tolist()) == sorted(np.asarray(b).tolist())


def feature_count_bound(D: int, generic: bool = False) -> int:
    """``2D+1`` separators always suffice; ``D+1`` suffice generically."""
    return D + 1 if generic else 2 * D + 1


def gcd_coprime(j: int, n: int) -> bool:
    return math.gcd(j, n) == 1
