"""Ground-truth Shapley values by full enumeration, for small d.

Used as the independent oracle against which the closed forms and the Monte
Carlo estimators are checked. Weights are computed in exact rational
arithmetic and only converted to floats at the end.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from math import comb

import numpy as np

from .core import CapabilityError, Coalition

ENUMERATION_MAX_D = 12


def shapley_weight_exact(d: int, s: int) -> Fraction:
    if not 0 <= s <= d - 1:
        raise ValueError(f"subset size {s} out of range for d={d}")
    return Fraction(1, d * comb(d - 1, s))


def shapley_weight(d: int, s: int) -> float:
    """w_S = 1 / (d * C(d-1, |S|)): the weight of one coalition of size s in
    the subset form of the Shapley average."""
    return float(shapley_weight_exact(d, s))


def weight_identity_total(d: int) -> float:
    """Enumerated sum of w_S over all S excluding one fixed feature; equals 1."""
    total = 0.0
    for bits in range(1 << (d - 1)):
        total += shapley_weight(d, bits.bit_count())
    return total


def weight_identity_half(d: int) -> float:
    """Enumerated sum of w_S over all S excluding two fixed features; equals 1/2."""
    if d < 2:
        raise ValueError("needs d >= 2")
    total = 0.0
    for bits in range(1 << (d - 2)):
        total += shapley_weight(d, bits.bit_count())
    return total


def _mask_of(bits: int, d: int) -> np.ndarray:
    return np.array([(bits >> i) & 1 for i in range(d)], dtype=np.int8)


def exact_shapley(value_fn, d: int, x) -> np.ndarray:
    """Exact Shapley values by weighted enumeration of all 2^d coalitions.

    ``value_fn(coalition, x)`` must be a deterministic closed-form value
    function (for example the exact linear or quadratic surrogate values).
    """
    if d > ENUMERATION_MAX_D:
        raise CapabilityError(f"enumeration capped at d={ENUMERATION_MAX_D}")
    values = np.empty(1 << d)
    for bits in range(1 << d):
        values[bits] = value_fn(Coalition(mask=_mask_of(bits, d)), x)
    weights = [shapley_weight(d, s) for s in range(d)]
    phi = np.zeros(d)
    for bits in range(1 << d):
        size = bits.bit_count()
        if size == d:
            continue
        w = weights[size]
        for j in range(d):
            if bits >> j & 1:
                continue
            phi[j] += w * (values[bits | (1 << j)] - values[bits])
    return phi


def exact_shapley_permutations(value_fn, d: int, x) -> np.ndarray:
    """Same average taken over all d! orderings; cross-checks the subset form
    (only sensible for d <= 6)."""
    if d > 6:
        raise CapabilityError("permutation enumeration capped at d=6")
    values: dict[int, float] = {}

    def value_of(bits: int) -> float:
        if bits not in values:
            values[bits] = value_fn(Coalition(mask=_mask_of(bits, d)), x)
        return values[bits]

    phi = np.zeros(d)
    count = 0
    for perm in permutations(range(d)):
        bits = 0
        for j in perm:
            with_j = bits | (1 << j)
            phi[j] += value_of(with_j) - value_of(bits)
            bits = with_j
        count += 1
    return phi / count
