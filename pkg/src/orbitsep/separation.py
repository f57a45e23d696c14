"""Brute-force orbit oracles and invariance / separation trials.

An *action* bundles everything a trial needs about a finite group acting on
a data space: a sampler for generic points, random group elements, the
action itself, a brute-force same-orbit test, and optionally a *confuser*
that produces hard negatives (points agreeing with ``x`` on some weaker
invariant, e.g. lying in the same orbit of a larger group).  Independent
Gaussian pairs almost never collide, so separation trials draw half of
their distinct-orbit candidates from the confuser when one exists.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .groups import (
    GroupTooLarge,
    InvalidDimension,
    Permutation,
    ProductGroupElement,
    enumerate_group,
    source_table,
)
from .invariants import Domain, FeatureMap, complexpair, matrix, signal, symmatrix
from .rng import make_rng

ORBIT_TOL = 1e-9


def to_jsonable(x):
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Permutation):
        return list(x.image)
    if isinstance(x, ProductGroupElement):
        return {"sigma": list(x.sigma.image), "tau": list(x.tau.image)}
    return x


def features_equal(f1, f2, tol: float) -> bool:
    """Coordinatewise ``|f1 - f2| <= tol * (1 + max(|f1|, |f2|))``."""
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    if tol == 0:
        return bool(np.array_equal(f1, f2))
    return bool(np.all(np.abs(f1 - f2) <= tol * (1 + np.maximum(np.abs(f1), np.abs(f2)))))


def features_close(f_ref, f_other, tol: float) -> bool:
    """Invariance criterion ``||df||_inf <= tol * (1 + ||f_ref||_inf)``."""
    f_ref = np.asarray(f_ref)
    if tol == 0:
        return bool(np.array_equal(f_ref, f_other))
    return bool(np.max(np.abs(f_ref - f_other), initial=0.0) <= tol * (1 + np.max(np.abs(f_ref), initial=0.0)))


# --------------------------------------------------------------------------- #
# actions


class Action:
    name: str
    domain: Domain
    cap: int

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def random_element(self, rng: np.random.Generator):
        raise NotImplementedError

    def act(self, g, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def same_orbit(self, x1, x2, tol: float = ORBIT_TOL) -> bool:
        raise NotImplementedError

    def confuser(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray | None:
        return None

    def _check_cap(self, kind: str, n: int, size: int):
        if size > self.cap:
            raise GroupTooLarge(kind, n, size, self.cap)


def _min_max_gap(images: np.ndarray, target: np.ndarray) -> float:
    diff = np.abs(images - target).reshape(images.shape[0], -1)
    return float(diff.max(axis=1).min())


class ConjugationAction(Action):
    """S_n permuting rows and columns of a symmetric matrix (packed layout)."""

    def __init__(self, n: int, cap: int = 8):
        if n < 2:
            raise InvalidDimension(f"need n >= 2, got {n}")
        self.n, self.cap = n, cap
        self.name = f"conjugation(n={n})"
        self.domain = symmatrix(n)
        self._table = None

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            self._check_cap("symmetric", self.n, self.n)
            self._table = source_table(enumerate_group("symmetric", self.n))
        return self._table

    def sample(self, rng):
        return rng.standard_normal(self.domain.shape[0])

    def random_element(self, rng):
        return Permutation.random(self.n, rng)

    def act(self, g, x):
        if isinstance(g, Permutation):
            g = ProductGroupElement.embed(g)
        return np.asarray(x)[..., g.source]

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        return _min_max_gap(np.asarray(x1)[self.table], np.asarray(x2)) <= tol

    def confuser(self, rng, x):
        # same orbit under S_n x S_{n(n-1)/2}, almost surely a different S_n orbit
        g = ProductGroupElement.random(self.n, rng)
        return np.asarray(x)[g.source]


class ProductAction(Action):
    """S_n x S_{n(n-1)/2} permuting diagonal and off-diagonal slots independently.

    Orbits are exactly pairs of multisets, so the oracle compares sorted
    slots instead of enumerating (n(n-1)/2)! elements.
    """

    def __init__(self, n: int):
        if n < 2:
            raise InvalidDimension(f"need n >= 2, got {n}")
        self.n, self.cap = n, math.inf
        self.name = f"product(n={n})"
        self.domain = symmatrix(n)

    def sample(self, rng):
        return rng.standard_normal(self.domain.shape[0])

    def random_element(self, rng):
        return ProductGroupElement.random(self.n, rng)

    def act(self, g, x):
        return np.asarray(x)[..., g.source]

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        n = self.n
        x1, x2 = np.asarray(x1), np.asarray(x2)
        gap = max(
            np.abs(np.sort(x1[:n]) - np.sort(x2[:n])).max(),
            np.abs(np.sort(x1[n:]) - np.sort(x2[n:])).max(initial=0.0),
        )
        return gap <= tol


class CyclicAction(Action):
    """Z/nZ cyclically shifting real signals.

    ``support`` restricts the sampler to the given DFT bins (and their
    mirrors); the confuser then redraws the phases on those bins, keeping
    the power spectrum.  Without it the confuser reverses the signal.
    """

    def __init__(self, n: int, support=None, cap: int = 4096):
        if n < 2:
            raise InvalidDimension(f"need n >= 2, got {n}")
        self.n, self.cap = n, cap
        self.support = None if support is None else sorted({int(k) % n for k in support})
        self.name = f"cyclic(n={n})" if support is None else f"cyclic(n={n},support={self.support})"
        self.domain = signal(n)

    def _half_support(self):
        return [k for k in self.support if k <= (-k) % self.n]

    def _from_spectrum(self, ks, mags, phases):
        n = self.n
        xh = np.zeros(n, dtype=complex)
        for k, r, ph in zip(ks, mags, phases):
            mirror = (-k) % n
            if k == mirror:
                xh[k] = r if np.cos(ph) >= 0 else -r
            else:
                xh[k] = r * np.exp(1j * ph)
                xh[mirror] = np.conj(xh[k])
        return np.fft.ifft(xh).real.astype(complex)

    def sample(self, rng):
        if self.support is None:
            return rng.standard_normal(self.n).astype(complex)
        ks = self._half_support()
        return self._from_spectrum(ks, rng.uniform(0.5, 1.5, len(ks)) * self.n, rng.uniform(0, 2 * np.pi, len(ks)))

    def random_element(self, rng):
        return int(rng.integers(self.n))

    def act(self, g, x):
        return np.roll(np.asarray(x), int(g) % self.n, axis=-1)

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        self._check_cap("cyclic", self.n, self.n)
        x1 = np.asarray(x1)
        images = np.stack([np.roll(x1, t) for t in range(self.n)])
        return _min_max_gap(images, np.asarray(x2)) <= tol

    def confuser(self, rng, x):
        if self.support is None:
            return np.roll(np.asarray(x)[::-1], 1)
        ks = self._half_support()
        xh = np.fft.fft(np.asarray(x).real)
        phases = rng.uniform(0, 2 * np.pi, len(ks))
        # self-conjugate bins (mean, Nyquist) are real; keep their sign
        fixed = [i for i, k in enumerate(ks) if k == (-k) % self.n]
        phases[fixed] = np.angle(xh[[ks[i] for i in fixed]].real.astype(complex))
        return self._from_spectrum(ks, np.abs(xh[ks]), phases)


class ScalarRootAction(Action):
    """Z/nZ acting on C^2 by the scalar n-th roots of unity.

    Points are drawn with moduli in [0.5, 1.5] so degree-n monomials stay
    well away from the comparison tolerance.  The confuser rotates the two
    coordinates by independent roots, preserving ``x**n`` and ``y**n``.
    """

    def __init__(self, n: int, cap: int = 64):
        if n < 1:
            raise InvalidDimension(f"need n >= 1, got {n}")
        self.n, self.cap = n, cap
        self.name = f"scalar_roots(n={n})"
        self.domain = complexpair(n)
        self._roots = np.exp(2j * np.pi * np.arange(n) / n)

    def sample(self, rng):
        r = rng.uniform(0.5, 1.5, 2)
        return r * np.exp(1j * rng.uniform(0, 2 * np.pi, 2))

    def random_element(self, rng):
        return int(rng.integers(self.n))

    def act(self, g, x):
        return self._roots[int(g) % self.n] * np.asarray(x)

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        self._check_cap("cyclic", self.n, self.n)
        images = self._roots[:, None] * np.asarray(x1)[None, :]
        return _min_max_gap(images, np.asarray(x2)) <= tol

    def confuser(self, rng, x):
        a, b = rng.integers(self.n, size=2)
        return np.asarray(x) * self._roots[[a, b]]


class RowPermutationAction(Action):
    """S_n permuting the rows of an n x d matrix."""

    def __init__(self, n: int, d: int, cap: int = 8):
        self.n, self.d, self.cap = n, d, cap
        self.name = f"rows(n={n},d={d})"
        self.domain = matrix(n, d)
        self._perms = None

    def sample(self, rng):
        return rng.standard_normal((self.n, self.d))

    def random_element(self, rng):
        return Permutation.random(self.n, rng)

    def act(self, g, x):
        return g.act(x, axis=-2)

    def same_orbit(self, x1, x2, tol=ORBIT_TOL):
        if self._perms is None:
            self._check_cap("symmetric", self.n, self.n)
            self._perms = np.stack([p.source for p in enumerate_group("symmetric", self.n)])
        return _min_max_gap(np.asarray(x1)[self._perms], np.asarray(x2)) <= tol

    def confuser(self, rng, x):
        # permute each column on its own: every column multiset is kept
        x = np.asarray(x)
        return np.stack([x[rng.permutation(self.n), c] for c in range(self.d)], axis=1)


# --------------------------------------------------------------------------- #
# reports and trials


@dataclass
class SeparationReport:
    family: str
    action: str
    trials: int = 0
    same_orbit_pairs: int = 0
    distinct_orbit_pairs: int = 0
    false_merges: list = field(default_factory=list)
    false_splits: list = field(default_factory=list)
    tolerance: float = 0.0
    seed: int = 0

    @property
    def passed(self) -> bool:
        return not self.false_splits and all(w.get("in_bad_set") for w in self.false_merges)

    @property
    def uncertified_merges(self) -> list:
        return [w for w in self.false_merges if not w.get("in_bad_set")]

    def summary(self) -> dict:
        return {
            "family": self.family,
            "action": self.action,
            "trials": self.trials,
            "same_orbit_pairs": self.same_orbit_pairs,
            "distinct_orbit_pairs": self.distinct_orbit_pairs,
            "false_merges": len(self.false_merges),
            "uncertified_merges": len(self.uncertified_merges),
            "false_splits": len(self.false_splits),
            "tolerance": self.tolerance,
            "seed": self.seed,
        }


def _blocks(indices, size: int = 256):
    indices = list(indices)
    return [indices[lo : lo + size] for lo in range(0, len(indices), size)]


def _run_blocks(fn: Callable, indices, workers: int) -> list:
    blocks = _blocks(indices)
    if workers <= 1:
        parts = [fn(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, blocks))
    return [item for part in parts for item in part]


def _witness(t, kind, x1, x2, f1, f2, **extra) -> dict:
    w = {"trial": t, "kind": kind, "x1": to_jsonable(x1), "x2": to_jsonable(x2),
         "f1": to_jsonable(f1), "f2": to_jsonable(f2)}
    w.update({k: to_jsonable(v) for k, v in extra.items()})
    return w


def same_orbit_bruteforce(x1, x2, action: Action, tol: float = ORBIT_TOL) -> bool:
    return action.same_orbit(x1, x2, tol)


def invariance_test(f: FeatureMap, action: Action, trials: int = 1000, tol: float = 1e-9,
                    seed: int = 0, sampler: Callable | None = None, workers: int = 1,
                    only: int | None = None) -> SeparationReport:
    """Compare ``f(g x)`` with ``f(x)`` for random ``(g, x)``; violations land in ``false_splits``.

    ``only`` replays the single trial with that index.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    indices = range(trials) if only is None else [only]
    sampler = sampler or action.sample

    def block(ts):
        out = []
        for t in ts:
            rng = make_rng(seed, t)
            x = sampler(rng)
            g = action.random_element(rng)
            gx = action.act(g, x)
            fx, fgx = f(x), f(gx)
            if not features_close(fx, fgx, tol):
                out.append(_witness(t, "invariance", x, gx, fx, fgx, element=g))
        return out

    violations = _run_blocks(block, indices, workers)
    return SeparationReport(f.name, action.name, len(indices), len(indices), 0, [], violations, tol, seed)


def _draw_pair(action: Action, rng, t: int, sampler):
    x1 = sampler(rng)
    if t % 2 == 0:
        g = action.random_element(rng)
        return x1, action.act(g, x1), "same-orbit", g
    if (t // 2) % 2 == 1:
        x2 = action.confuser(rng, x1)
        if x2 is not None:
            return x1, x2, "confuser", None
    return x1, sampler(rng), "independent", None


def separation_test(f: FeatureMap, action: Action, trials: int = 10_000, tol: float = 1e-9,
                    badset_checker: Callable | None = None, seed: int = 0,
                    sampler: Callable | None = None, workers: int = 1,
                    only: int | None = None) -> SeparationReport:
    """Mixed same-orbit / distinct-orbit pairs, each classified by the brute-force oracle.

    Even trials are same-orbit pairs; odd ones alternate independent draws
    and confuser pairs.  ``badset_checker(x) -> bool | None`` is consulted
    for every false merge.  ``only`` replays the single trial with that index.
    """
    sampler = sampler or action.sample
    indices = range(trials) if only is None else [only]

    def block(ts):
        rows = []
        for t in ts:
            rng = make_rng(seed, t)
            x1, x2, kind, g = _draw_pair(action, rng, t, sampler)
            f1, f2 = f(x1), f(x2)
            truth = action.same_orbit(x1, x2)
            eq = features_equal(f1, f2, tol)
            w = None
            if truth and not eq:
                w = ("split", _witness(t, kind, x1, x2, f1, f2, element=g))
            elif eq and not truth:
                extra = {}
                if badset_checker is not None:
                    b1, b2 = badset_checker(x1), badset_checker(x2)
                    in_b = True if (b1 or b2) else (None if b1 is None or b2 is None else False)
                    extra = {"x1_in_bad_set": b1, "x2_in_bad_set": b2, "in_bad_set": in_b}
                w = ("merge", _witness(t, kind, x1, x2, f1, f2, **extra))
            rows.append((truth, w))
        return rows

    rows = _run_blocks(block, indices, workers)
    rep = SeparationReport(f.name, action.name, len(indices), tolerance=tol, seed=seed)
    for truth, w in rows:
        if truth:
            rep.same_orbit_pairs += 1
        else:
            rep.distinct_orbit_pairs += 1
        if w is not None:
            (rep.false_splits if w[0] == "split" else rep.false_merges).append(w[1])
    return rep


def collision_search(f: FeatureMap, action: Action, budget: int = 100_000, seed: int = 0,
                     tol: float = 1e-9, block: int = 1024) -> dict | None:
    """First candidate pair with equal features that the oracle puts in distinct orbits."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    for lo in range(0, budget, block):
        ts = range(lo, min(budget, lo + block))
        pairs = []
        for t in ts:
            rng = make_rng(seed, t)
            x1 = action.sample(rng)
            x2 = action.confuser(rng, x1)
            if x2 is None:
                x2 = action.sample(rng)
            pairs.append((x1, x2))
        a1 = np.stack([p[0] for p in pairs])
        a2 = np.stack([p[1] for p in pairs])
        F1, F2 = f(a1), f(a2)
        close = np.all(np.abs(F1 - F2) <= tol * (1 + np.maximum(np.abs(F1), np.abs(F2))), axis=-1)
        for k in np.flatnonzero(close):
            x1, x2 = pairs[k]
            if not action.same_orbit(x1, x2):
                return _witness(ts[k], "collision", x1, x2, F1[k], F2[k])
    return None

