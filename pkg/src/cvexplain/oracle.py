"""Brute-force references: exact Shapley values by subset enumeration,
exact partial contributions, and finite-difference Wirtinger gradients.

These are deliberately straight-line implementations kept independent of the
production paths so they can serve as oracles in tests.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .tensor import WirtingerPair, wirtinger_from_real_parts

MAX_ENUM_FEATURES = 12


def shapley_weight(subset_size: int, n_features: int) -> float:
    """|S|! (M - |S| - 1)! / M! as an exact integer ratio converted to float."""
    num = factorial(subset_size) * factorial(n_features - subset_size - 1)
    return num / factorial(n_features)


def _check_size(n: int) -> None:
    if n > MAX_ENUM_FEATURES:
        raise ValueError(f"{n} features exceeds enumeration limit {MAX_ENUM_FEATURES}")
    if n < 1:
        raise ValueError("need at least one feature")


def exact_shap(f, x, ref):
    """Exact Shapley values of a black-box f by full subset enumeration.

    Missing features take the reference value. Returns (phi, phi0) with
    phi0 = f(ref).
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    ref = np.asarray(ref, dtype=np.complex128).ravel()
    n = x.size
    _check_size(n)
    values = np.empty(1 << n, dtype=np.complex128)
    for mask in range(1 << n):
        mixed = ref.copy()
        for j in range(n):
            if mask >> j & 1:
                mixed[j] = x[j]
        values[mask] = f(mixed)
    phi = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        bit = 1 << j
        terms = []
        for mask in range(1 << n):
            if mask & bit:
                continue
            w = shapley_weight(bin(mask).count("1"), n)
            terms.append(w * (values[mask | bit] - values[mask]))
        phi[j] = np.sum(np.asarray(terms))
    return phi, values[0]


def exact_partial_shap(f, x, ref, j):
    """The (phi_R, phi_I) split of feature j's exact Shapley value.

    The intermediate presence state keeps only the real part of feature j
    (its imaginary part stays at the reference).
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    ref = np.asarray(ref, dtype=np.complex128).ravel()
    n = x.size
    _check_size(n)
    if not 0 <= j < n:
        raise IndexError(f"feature index {j} out of range for {n} features")
    mid_j = x[j].real + 1j * ref[j].imag
    bit = 1 << j
    phi_r_terms = []
    phi_i_terms = []
    for mask in range(1 << n):
        if mask & bit:
            continue
        mixed = ref.copy()
        for l in range(n):
            if mask >> l & 1:
                mixed[l] = x[l]
        v_absent = f(mixed.copy())
        mixed[j] = mid_j
        v_mid = f(mixed.copy())
        mixed[j] = x[j]
        v_full = f(mixed)
        w = shapley_weight(bin(mask).count("1"), n)
        phi_r_terms.append(w * (v_mid - v_absent))
        phi_i_terms.append(w * (v_full - v_mid))
    return complex(np.sum(np.asarray(phi_r_terms))), complex(np.sum(np.asarray(phi_i_terms)))


def finite_diff_wirtinger(f, x, h: float = 1e-5) -> WirtingerPair:
    """Central finite differences along both real axes, combined per Wirtinger."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=np.complex128)
    df_dre = np.zeros(x.shape, dtype=np.complex128)
    df_dim = np.zeros(x.shape, dtype=np.complex128)
    flat = x.ravel()
    dre = df_dre.ravel()
    dim = df_dim.ravel()
    for k in range(flat.size):
        for delta, out in ((h, dre), (1j * h, dim)):
            plus = flat.copy()
            minus = flat.copy()
            plus[k] += delta
            minus[k] -= delta
            out[k] = (f(plus.reshape(x.shape)) - f(minus.reshape(x.shape))) / (2 * h)
    return wirtinger_from_real_parts(df_dre, df_dim)
