"""Point clouds modulo translations, O(d) and relabeling of the points.

Features: center, take the n x n Gram matrix of the centered points, then
apply the conjugation-invariant family to it.  Ground truth comes from
``orbit_align``, which enumerates point relabelings and solves orthogonal
Procrustes (reflections allowed) for each.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .groups import (
    DimensionMismatch,
    GroupTooLarge,
    InvalidDimension,
    Permutation,
    SymMatrix,
    enumerate_group,
    random_orthogonal,
)
from .invariants import FeatureMap, _diag_offdiag, _f_star, conjugation_invariants, pointcloud
from .separation import ORBIT_TOL, Action

ALIGN_RTOL = 1e-6
ALIGN_CAP = 8


@dataclass(frozen=True, eq=False)
class PointCloud:
    coords: np.ndarray
    d: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise InvalidDimension(f"coords must be a non-empty d x n matrix, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("point cloud has non-finite coordinates")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "d", c.shape[0])
        object.__setattr__(self, "n", c.shape[1])

    @classmethod
    def random(cls, d: int, n: int, rng: np.random.Generator) -> "PointCloud":
        return cls(rng.standard_normal((d, n)))

    def transform(self, R=None, p: Permutation | None = None, t=None) -> "PointCloud":
        """``R @ (p . P) + t 1^T``; ``p`` moves point ``i`` to column ``p(i)``."""
        c = self.coords
        if p is not None:
            c = c[:, p.source]
        if R is not None:
            c = np.asarray(R) @ c
        if t is not None:
            c = c + np.asarray(t, dtype=float).reshape(-1, 1)
        return PointCloud(c)


@dataclass
class AlignmentResult:
    rotation: np.ndarray
    permutation: Permutation
    translation: np.ndarray
    residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def _coords(P) -> np.ndarray:
    return P.coords if isinstance(P, PointCloud) else np.asarray(P, dtype=float)


def center(P) -> PointCloud:
    c = _coords(P)
    return PointCloud(c - c.mean(axis=1, keepdims=True))


def gram(P) -> SymMatrix:
    """``P^T P`` of the given coordinates (callers center first)."""
    c = _coords(P)
    return SymMatrix.from_dense(c.T @ c)


def _pack(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    iu = np.triu_indices(n, k=1)
    return np.concatenate([np.diagonal(a, axis1=-2, axis2=-1), a[..., iu[0], iu[1]]], axis=-1)


def _cloud_features(c: np.ndarray) -> np.ndarray:
    n = c.shape[-1]
    c = c - c.mean(axis=-1, keepdims=True)
    packed = _pack(np.swapaxes(c, -1, -2) @ c)
    return np.concatenate([_diag_offdiag(packed, n), _f_star(packed, n)], axis=-1)


def cloud_invariants(P) -> np.ndarray:
    c = _coords(P)
    if c.shape[1] < 2:
        raise InvalidDimension(f"need n >= 2 points, got {c.shape[1]}")
    return conjugation_invariants(gram(center(c)))


def cloud_map(d: int, n: int) -> FeatureMap:
    if n < 2:
        raise InvalidDimension(f"need n >= 2 points, got {n}")
    return FeatureMap("cloud", pointcloud(d, n), n * (n + 1) // 2 + 1, _cloud_features)


def numerical_rank(X: SymMatrix, cutoff: float = 1e-9) -> int:
    w = np.linalg.eigvalsh(X.dense())
    top = np.abs(w).max(initial=0.0)
    return int(np.sum(np.abs(w) > cutoff * max(top, 1.0)))


@lru_cache(maxsize=None)
def _relabelings(n: int):
    perms = enumerate_group("symmetric", n)
    src = np.stack([p.source for p in perms])
    src.setflags(write=False)
    return perms, src


def best_alignment(P1, P2, cap: int = ALIGN_CAP) -> AlignmentResult:
    """Minimal-residual ``(R, p, t)`` with ``R`` in O(d), over every relabeling ``p``."""
    A, B = _coords(P1), _coords(P2)
    if A.shape != B.shape:
        raise DimensionMismatch(f"clouds of shape {A.shape} and {B.shape}")
    d, n = A.shape
    if n > cap:
        raise GroupTooLarge("symmetric", n, math.factorial(n), math.factorial(cap))
    mu_a, mu_b = A.mean(axis=1), B.mean(axis=1)
    Ac, Bc = A - mu_a[:, None], B - mu_b[:, None]
    perms, src = _relabelings(n)
    Ap = Ac[:, src].transpose(1, 0, 2)  # (|S|, d, n)
    M = Bc[None] @ np.swapaxes(Ap, 1, 2)
    U, S, Vt = np.linalg.svd(M)
    sq = (Ac**2).sum() + (Bc**2).sum() - 2 * S.sum(axis=1)
    k = int(np.argmin(sq))
    R = U[k] @ Vt[k]
    t = mu_b - R @ mu_a
    moved = R @ A[:, src[k]] + t[:, None]
    residual = float(np.linalg.norm(moved - B))
    scale = float(max(np.linalg.norm(Ac), np.linalg.norm(Bc)))
    return AlignmentResult(R, perms[k], t, residual, scale)


def orbit_align(P1, P2, tol: float = ALIGN_RTOL, cap: int = ALIGN_CAP) -> AlignmentResult | None:
    """The best alignment when it puts the clouds in one orbit (residual <= tol * scale), else None."""
    res = best_alignment(P1, P2, cap=cap)
    return res if res.residual <= tol * max(res.scale, 1e-300) else None


class PointCloudAction(Action):
    """Translations, O(d) and point relabelings acting on d x n clouds."""

    def __init__(self, d: int, n: int, cap: int = ALIGN_CAP):
        self.d, self.n, self.cap = d, n, cap
        self.name = f"cloud(d={d},n={n})"
        self.domain = pointcloud(d, n)

    def sample(self, rng):
        return rng.standard_normal((self.d, self.n))

    def random_element(self, rng):
        R = random_orthogonal(self.d, rng)
        return R, Permutation.random(self.n, rng), rng.standard_normal(self.d)

    def act(self, g, x):
        R, p, t = g
        return R @ np.asarray(x)[:, p.source] + t[:, None]

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        # relative tolerance of the Procrustes oracle, not the slot-wise one
        return orbit_align(x1, x2, tol=max(tol, ALIGN_RTOL), cap=self.cap) is not None


def read_cloud_csv(path) -> PointCloud:
    """One point per row under a header ``x0,...,x{d-1}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        d = len(header)
        if [h.strip() for h in header] != [f"x{i}" for i in range(d)]:
            raise ValueError(f"{path}: header must be x0..x{d - 1}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise ValueError(f"{path}:{lineno}: expected {d} fields, got {len(row)}")
            rows.append([float(v) for v in row])
    if not rows:
        raise ValueError(f"{path}: no points")
    return PointCloud(np.array(rows).T)


def write_cloud_csv(P, path) -> None:
    c = _coords(P)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(c.shape[0])])
        for col in c.T:
            w.writerow([repr(float(v)) for v in col])
