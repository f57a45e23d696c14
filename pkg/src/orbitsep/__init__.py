"""Separating invariants for finite group actions, with brute-force orbit oracles."""

from .groups import (
    DimensionMismatch,
    GroupTooLarge,
    InvalidDimension,
    Permutation,
    ProductGroupElement,
    Signal,
    SymMatrix,
    enumerate_group,
    embedded_symmetric,
    induced_pair_perm,
)
from .invariants import (
    FeatureMap,
    conjugation_invariants,
    conjugation_map,
    diag_offdiag_invariants,
    f_star,
    fourier_invariants,
    sample_sort_separators,
    sort_separator,
    veronese_separators,
)
from .galois import bad_set_member, combine, fixer_subgroup, is_galois_distinguishing
from .separation import collision_search, invariance_test, separation_test

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatch",
    "FeatureMap",
    "GroupTooLarge",
    "InvalidDimension",
    "Permutation",
    "ProductGroupElement",
    "Signal",
    "SymMatrix",
    "bad_set_member",
    "collision_search",
    "combine",
    "conjugation_invariants",
    "conjugation_map",
    "diag_offdiag_invariants",
    "embedded_symmetric",
    "enumerate_group",
    "f_star",
    "fixer_subgroup",
    "fourier_invariants",
    "induced_pair_perm",
    "invariance_test",
    "is_galois_distinguishing",
    "sample_sort_separators",
    "separation_test",
    "sort_separator",
    "veronese_separators",
]
