"""Upgrading G-separating invariants to H-separating ones.

A family of H-invariant functions whose common stabilizer in G is exactly H
can be appended to any generically G-separating family; the result
separates H-orbits off the explicit bad set

    B = union over j, g not in Stab(f*_j) of { X : f*_j(g^-1 X) = f*_j(X) }.

Function equality ``g f == f`` is decided by randomized evaluation on
integer points (Schwartz-Zippel), which is exact in double precision for the
low-degree polynomials used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .groups import SymMatrix, image_table
from .invariants import FeatureMap
from .rng import make_rng

PIT_RANGE = 1000
FIXER_RTOL = 1e-9
BAD_SET_RTOL = 1e-9
_CHUNK_FLOATS = 1 << 22


@dataclass
class FixerReport:
    group_size: int
    fixers: list
    trials_per_element: int
    evaluation_scale: float
    mask: np.ndarray = field(repr=False, default=None)


@dataclass
class BadSetVerdict:
    member: bool
    witnesses: list  # (element, j, residual)
    zero_tol: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.member


@dataclass
class GaloisVerdict:
    distinguishing: bool
    common_fixers: list
    witness: tuple | None = None  # (h, j) with h in H not fixing f*_j

    def __bool__(self) -> bool:
        return self.distinguishing


def _chunks(total: int, per_item: int):
    step = max(1, _CHUNK_FLOATS // max(per_item, 1))
    for lo in range(0, total, step):
        yield slice(lo, min(total, lo + step))


def _moved_values(f: FeatureMap, data: np.ndarray, table: np.ndarray) -> np.ndarray:
    """``f(g^-1 x)`` for every row of ``data`` and every row of ``table``: shape (T, |G|, out)."""
    out = np.empty((data.shape[0], table.shape[0], f.output_len))
    for sl in _chunks(table.shape[0], data.shape[0] * table.shape[1]):
        out[:, sl] = f(data[:, table[sl]])
    return out


def fixer_subgroup(f: FeatureMap, group: Sequence, trials: int = 32, seed: int = 0) -> FixerReport:
    """Elements ``g`` with ``f(g^-1 X) == f(X)`` on ``trials`` random integer matrices."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if f.domain.kind != "symmatrix":
        raise ValueError(f"fixer enumeration needs a symmatrix feature, got {f.domain}")
    L = f.domain.shape[0]
    rng = make_rng(seed)
    data = rng.integers(-PIT_RANGE, PIT_RANGE + 1, size=(trials, L)).astype(float)
    table = image_table(group)
    if table.shape[1] != L:
        raise ValueError(f"group acts on {table.shape[1]} slots, feature expects {L}")
    base = f(data)
    # per-coordinate scale: power sums of different degrees differ by many orders
    scale = np.abs(base).max(axis=0)
    moved = _moved_values(f, data, table)
    ok = np.abs(moved - base[:, None, :]) <= FIXER_RTOL * scale
    mask = ok.all(axis=(0, 2))
    return FixerReport(
        group_size=len(group),
        fixers=[g for g, m in zip(group, mask) if m],
        trials_per_element=trials,
        evaluation_scale=float(scale.max(initial=0.0)),
        mask=mask,
    )


def is_galois_distinguishing(
    f_stars: Sequence[FeatureMap], G: Sequence, H: Sequence, trials: int = 32, seed: int = 0
) -> GaloisVerdict:
    G_set = set(G)
    H_set = set(H)
    if not H_set <= G_set:
        raise ValueError("H must be a subset of G")
    common = np.ones(len(G), dtype=bool)
    for j, f in enumerate(f_stars):
        rep = fixer_subgroup(f, G, trials=trials, seed=seed)
        fixed = {g for g, m in zip(G, rep.mask) if m}
        for h in H:
            if h not in fixed:
                return GaloisVerdict(False, [], (h, j))
        common &= rep.mask
    fixers = [g for g, m in zip(G, common) if m]
    return GaloisVerdict(set(fixers) == H_set, fixers)


def combine(g_invariants: FeatureMap, f_stars: Sequence[FeatureMap]) -> FeatureMap:
    """Concatenate a G-invariant family with Galois-distinguishing H-invariants."""
    parts = [g_invariants, *f_stars]
    for p in parts[1:]:
        if p.domain != g_invariants.domain:
            raise ValueError(f"domain mismatch: {p.name} on {p.domain} vs {g_invariants.domain}")

    def ev(a):
        return np.concatenate([p.evaluator(a) for p in parts], axis=-1)

    return FeatureMap(
        "combine(" + ",".join(p.name for p in parts) + ")",
        g_invariants.domain,
        sum(p.output_len for p in parts),
        ev,
    )


class BadSetScanner:
    """Vectorized membership test for the explicit bad set of a list of f*'s.

    Stabilizers are computed once at construction; ``scan`` evaluates every
    residual ``f*_j(g^-1 X) - f*_j(X)``, g outside Stab(f*_j), for a batch
    of matrices.
    """

    def __init__(self, f_stars: Sequence[FeatureMap], G: Sequence, fixers: Sequence[FixerReport] | None = None,
                 rtol: float = BAD_SET_RTOL, trials: int = 32, seed: int = 0):
        self.f_stars = list(f_stars)
        self.G = list(G)
        if fixers is None:
            fixers = [fixer_subgroup(f, self.G, trials=trials, seed=seed) for f in self.f_stars]
        self.rtol = rtol
        table = image_table(self.G)
        self._outside = []
        for rep in fixers:
            idx = np.flatnonzero(~rep.mask)
            self._outside.append((idx, table[idx]))
        self._full = table

    def scan(self, packed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Membership flags and the smallest residual/tolerance ratio per matrix."""
        packed = np.atleast_2d(np.asarray(packed, dtype=float))
        member = np.zeros(packed.shape[0], dtype=bool)
        margin = np.full(packed.shape[0], np.inf)
        for f, (idx, table) in zip(self.f_stars, self._outside):
            if idx.size == 0:
                continue
            base = f(packed)
            scale = np.abs(_moved_values(f, packed, self._full)).max(axis=(1, 2))
            tol = self.rtol * scale
            resid = np.abs(_moved_values(f, packed, table) - base[:, None, :]).max(axis=2)
            closest = resid.min(axis=1)
            member |= closest <= tol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(tol > 0, closest / np.where(tol > 0, tol, 1.0), np.where(closest > 0, np.inf, 0.0))
            margin = np.minimum(margin, ratio)
        return member, margin

    def __call__(self, X) -> BadSetVerdict:
        return self.verdict(X)

    def verdict(self, X, zero_tol: float | None = None) -> BadSetVerdict:
        a = X.packed if isinstance(X, SymMatrix) else np.asarray(X, dtype=float)
        witnesses, tols, member = [], [], False
        best = None
        for j, (f, (idx, table)) in enumerate(zip(self.f_stars, self._outside)):
            if idx.size == 0:
                tols.append(0.0)
                continue
            scale = float(np.abs(_moved_values(f, a[None], self._full)).max())
            tol = self.rtol * scale if zero_tol is None else zero_tol
            tols.append(tol)
            resid = np.abs(_moved_values(f, a[None], table)[0] - f(a)).max(axis=1)
            for k in np.flatnonzero(resid <= tol):
                witnesses.append((self.G[idx[k]], j, float(resid[k])))
                member = True
            k = int(resid.argmin())
            if best is None or resid[k] < best[2]:
                best = (self.G[idx[k]], j, float(resid[k]))
        if not member and best is not None:
            witnesses.append(best)
        return BadSetVerdict(member, witnesses, tols)


def bad_set_member(X, f_stars: Sequence[FeatureMap], G: Sequence, zero_tol: float | None = None,
                   fixers: Sequence[FixerReport] | None = None) -> BadSetVerdict:
    return BadSetScanner(f_stars, G, fixers=fixers).verdict(X, zero_tol=zero_tol)
