"""Finite group elements, their actions on the data spaces, and enumeration.

Conventions: indices are 0-based; a permutation ``p`` moves slot ``i`` to
slot ``p(i)``, so acting on a vector gives ``y[p(i)] = v[i]``; composition
``(p * q)(i) = p(q(i))``.  Off-diagonal entries of an ``n x n`` symmetric
matrix are addressed by the lexicographic pair index

    idx(i, j) = i*n - i*(i+1)//2 + (j - i - 1),   i < j.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .rng import make_rng

DEFAULT_GROUP_CAP = 10**6


class InvalidDimension(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class GroupTooLarge(RuntimeError):
    def __init__(self, kind: str, n: int, size: int, cap: int):
        self.kind, self.n, self.size, self.cap = kind, n, size, cap
        super().__init__(
            f"{kind}({n}) has {size} elements, exceeding the enumeration cap {cap}; "
            f"a cap of at least {size} is required"
        )


def _frozen(a, dtype=None) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------- #
# permutations


@dataclass(frozen=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"not a bijection on 0..{len(img) - 1}: {img}")
        object.__setattr__(self, "image", img)

    @property
    def n(self) -> int:
        return len(self.image)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(rng.permutation(n).tolist()))

    @cached_property
    def array(self) -> np.ndarray:
        return _frozen(self.image, dtype=np.intp)

    @cached_property
    def source(self) -> np.ndarray:
        """``source[p(i)] = i``; gathering with it applies the permutation."""
        inv = np.empty(self.n, dtype=np.intp)
        inv[self.array] = np.arange(self.n)
        inv.setflags(write=False)
        return inv

    def __call__(self, i: int) -> int:
        return self.image[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        if other.n != self.n:
            raise DimensionMismatch(f"cannot compose S_{self.n} with S_{other.n}")
        return Permutation(tuple(self.array[other.array].tolist()))

    def inverse(self) -> "Permutation":
        return Permutation(tuple(self.source.tolist()))

    def is_identity(self) -> bool:
        return self.image == tuple(range(self.n))

    def act(self, v, axis: int = -1) -> np.ndarray:
        """Move entry ``i`` of ``v`` (along ``axis``) to position ``p(i)``."""
        v = np.asarray(v)
        if v.shape[axis] != self.n:
            raise DimensionMismatch(f"axis of length {v.shape[axis]} vs permutation of {self.n}")
        return np.take(v, self.source, axis=axis)


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"invalid pair ({i}, {j}) for n={n}")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pair_from_index(k: int, n: int) -> tuple[int, int]:
    if not 0 <= k < pair_count(n):
        raise ValueError(f"pair index {k} out of range for n={n}")
    i = 0
    while k >= n - 1 - i:
        k -= n - 1 - i
        i += 1
    return i, i + 1 + k


def pair_table(n: int) -> np.ndarray:
    """``(m, 2)`` array whose row ``k`` is the pair ``(i, j)`` with ``idx(i, j) = k``."""
    return np.array(list(itertools.combinations(range(n), 2)), dtype=np.intp).reshape(-1, 2)


def induced_pair_perm(p: Permutation) -> Permutation:
    n = p.n
    if n < 2:
        raise InvalidDimension(f"pair permutation needs n >= 2, got {n}")
    img = p.array
    image = []
    for i, j in itertools.combinations(range(n), 2):
        a, b = img[i], img[j]
        image.append(pair_index(min(a, b), max(a, b), n))
    return Permutation(tuple(image))


@dataclass(frozen=True)
class ProductGroupElement:
    """Element of S_n x S_m (m = n(n-1)/2) acting on diagonal and off-diagonal slots."""

    sigma: Permutation
    tau: Permutation

    def __post_init__(self):
        if self.tau.n != pair_count(self.sigma.n) or self.sigma.n < 2:
            raise InvalidDimension(
                f"sigma on {self.sigma.n} slots needs tau on {pair_count(self.sigma.n)}, got {self.tau.n}"
            )

    @property
    def n(self) -> int:
        return self.sigma.n

    @classmethod
    def identity(cls, n: int) -> "ProductGroupElement":
        return cls(Permutation.identity(n), Permutation.identity(pair_count(n)))

    @classmethod
    def embed(cls, p: Permutation) -> "ProductGroupElement":
        return cls(p, induced_pair_perm(p))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "ProductGroupElement":
        return cls(Permutation.random(n, rng), Permutation.random(pair_count(n), rng))

    def __mul__(self, other: "ProductGroupElement") -> "ProductGroupElement":
        return ProductGroupElement(self.sigma * other.sigma, self.tau * other.tau)

    def inverse(self) -> "ProductGroupElement":
        return ProductGroupElement(self.sigma.inverse(), self.tau.inverse())

    def is_identity(self) -> bool:
        return self.sigma.is_identity() and self.tau.is_identity()

    @cached_property
    def source(self) -> np.ndarray:
        """Gather indices on the packed ``[diag, offdiag]`` layout."""
        out = np.concatenate([self.sigma.source, self.n + self.tau.source])
        out.setflags(write=False)
        return out


# --------------------------------------------------------------------------- #
# data types


@dataclass(frozen=True, eq=False)
class SymMatrix:
    diag: np.ndarray
    offdiag: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        d = _frozen(self.diag, dtype=float).reshape(-1)
        o = _frozen(self.offdiag, dtype=float).reshape(-1)
        if d.size < 1:
            raise InvalidDimension("empty matrix")
        if o.size != pair_count(d.size):
            raise DimensionMismatch(f"n={d.size} needs {pair_count(d.size)} off-diagonal entries, got {o.size}")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", o)
        object.__setattr__(self, "n", d.size)

    @classmethod
    def from_dense(cls, a) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        # tolerance absorbs BLAS rounding in products such as P^T P
        if np.abs(a - a.T).max(initial=0.0) > 1e-12 * max(np.abs(a).max(initial=0.0), 1.0):
            raise ValueError("matrix is not symmetric")
        iu = np.triu_indices(a.shape[0], k=1)
        return cls(np.diag(a).copy(), a[iu])

    @classmethod
    def from_packed(cls, v, n: int | None = None) -> "SymMatrix":
        v = np.asarray(v, dtype=float).reshape(-1)
        if n is None:
            n = packed_dim(v.size)
        return cls(v[:n], v[n:])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SymMatrix":
        return cls(rng.standard_normal(n), rng.standard_normal(pair_count(n)))

    @property
    def packed(self) -> np.ndarray:
        return np.concatenate([self.diag, self.offdiag])

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        iu = np.triu_indices(self.n, k=1)
        a[iu] = self.offdiag
        a[(iu[1], iu[0])] = self.offdiag
        return a

    def __getitem__(self, ij) -> float:
        i, j = ij
        return float(self.diag[i]) if i == j else float(self.offdiag[pair_index(i, j, self.n)])

    def __repr__(self) -> str:
        return f"SymMatrix(n={self.n}, diag={self.diag.tolist()}, offdiag={self.offdiag.tolist()})"


def packed_dim(length: int) -> int:
    """Invert ``length = n + n(n-1)/2 = n(n+1)/2``."""
    n = int(round((math.isqrt(8 * length + 1) - 1) / 2))
    if n * (n + 1) // 2 != length:
        raise DimensionMismatch(f"{length} is not a packed symmetric-matrix length")
    return n


@dataclass(frozen=True, eq=False)
class Signal:
    entries: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        e = _frozen(self.entries, dtype=complex).reshape(-1)
        if e.size < 1:
            raise InvalidDimension("empty signal")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "n", e.size)

    @property
    def real(self) -> np.ndarray:
        return self.entries.real

    def __len__(self) -> int:
        return self.n


# --------------------------------------------------------------------------- #
# actions


def conjugate_sym(p: Permutation, X: SymMatrix) -> SymMatrix:
    """``Y[p(i), p(j)] = X[i, j]``, i.e. ``Y = P X P^T``."""
    if p.n != X.n:
        raise DimensionMismatch(f"permutation on {p.n} points vs {X.n}x{X.n} matrix")
    if X.n == 1:
        return X
    return SymMatrix(p.act(X.diag), induced_pair_perm(p).act(X.offdiag))


def apply_product(g: ProductGroupElement, X: SymMatrix) -> SymMatrix:
    if g.n != X.n:
        raise DimensionMismatch(f"group element for n={g.n} vs matrix with n={X.n}")
    return SymMatrix(g.sigma.act(X.diag), g.tau.act(X.offdiag))


def cyclic_shift(t: int, x) -> Signal:
    x = x if isinstance(x, Signal) else Signal(x)
    return Signal(np.roll(x.entries, int(t) % x.n))


def scalar_root_action(k: int, n: int, pt) -> tuple[complex, complex]:
    if n < 1:
        raise InvalidDimension(f"n must be >= 1, got {n}")
    z = np.exp(2j * np.pi * (int(k) % n) / n)
    x, y = pt
    return complex(z * x), complex(z * y)


# --------------------------------------------------------------------------- #
# enumeration


def group_order(kind: str, n: int) -> int:
    if kind == "symmetric":
        return math.factorial(n)
    if kind == "cyclic":
        return n
    if kind == "product":
        return math.factorial(n) * math.factorial(pair_count(n))
    raise ValueError(f"unknown group kind {kind!r}")


def enumerate_group(kind: str, n: int, cap: int = DEFAULT_GROUP_CAP) -> list:
    """All elements of symmetric(n), cyclic(n) or product(n), lexicographic by image arrays."""
    if n < 1 or (kind == "product" and n < 2):
        raise InvalidDimension(f"{kind}({n}) is not defined")
    size = group_order(kind, n)
    if size > cap:
        raise GroupTooLarge(kind, n, size, cap)
    if kind == "symmetric":
        return [Permutation(p) for p in itertools.permutations(range(n))]
    if kind == "cyclic":
        return [Permutation(tuple((i + t) % n for i in range(n))) for t in range(n)]
    sigmas = [Permutation(p) for p in itertools.permutations(range(n))]
    taus = [Permutation(p) for p in itertools.permutations(range(pair_count(n)))]
    return [ProductGroupElement(s, t) for s in sigmas for t in taus]


def embedded_symmetric(n: int) -> list[ProductGroupElement]:
    """The conjugation copy of S_n inside S_n x S_{n(n-1)/2}."""
    return [ProductGroupElement.embed(p) for p in enumerate_group("symmetric", n)]


def source_table(elements: Sequence) -> np.ndarray:
    """Stack the gather indices of ``elements`` into a ``(|G|, L)`` array.

    Plain permutations of ``n`` points are read as conjugations of packed
    symmetric matrices.
    """
    rows = []
    for g in elements:
        if isinstance(g, Permutation):
            g = ProductGroupElement.embed(g)
        rows.append(g.source)
    return np.stack(rows)


def random_orthogonal(d: int, seed=0) -> np.ndarray:
    """Haar-distributed element of O(d): QR of a Gaussian matrix, with diag(R) made positive."""
    if d < 1:
        raise InvalidDimension(f"d must be >= 1, got {d}")
    rng = make_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)



def image_table(elements: Sequence) -> np.ndarray:
    """Gather indices applying the *inverse* of each element, ``(g^-1 X)[k] = X[table[g, k]]``."""
    rows = []
    for g in elements:
        if isinstance(g, Permutation):
            g = ProductGroupElement.embed(g)
        rows.append(np.concatenate([g.sigma.array, g.n + g.tau.array]))
    return np.stack(rows)
