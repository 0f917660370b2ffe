"""Exact Shapley contributions for magnitude max-pooling windows.

``maxpool_total`` computes exact totals with a counting fast path: for each
feature it tallies, per subset size, the weighted sum of the window maximum
with and without the feature present. The per-size Shapley weights are the
precomputed coefficient vector (they depend only on the window size). The
binding contract is agreement with full subset enumeration, which tests
check directly.

``maxpool_partials`` computes the real/imaginary split of each contribution
by enumerating the 2^(n-1) subsets; windows are small, so this stays cheap.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .oracle import shapley_weight

MAX_WINDOW = 16
DEFAULT_PARTIALS_CAP = 9


def precompute_M(n: int) -> np.ndarray:
    """Shapley weight per subset size for an n-element window."""
    if not 1 <= n <= MAX_WINDOW:
        raise ValueError(f"window size {n} outside supported range 1..{MAX_WINDOW}")
    return np.array([shapley_weight(j, n) for j in range(n)], dtype=np.float64)


def _beats(mag_w, idx_w, mag_u, idx_u) -> bool:
    """Strict order used by the pooling argmax: magnitude, then lowest index."""
    return mag_w > mag_u or (mag_w == mag_u and idx_w < idx_u)


def _mixed_max(x, y, mask):
    """Window maximum when the masked features take x and the rest take y."""
    best = None
    for i in range(x.size):
        v = x[i] if mask >> i & 1 else y[i]
        if best is None or _beats(abs(v), i, abs(best[0]), best[1]):
            best = (v, i)
    return best[0]


def _max_sums_per_size(x, y, k, v_k):
    """Per subset size j: sum over S (subsets of others, |S|=j) of the window max,
    with feature k pinned to v_k and feature i in/out of S taking x_i/y_i."""
    n = x.size
    others = [i for i in range(n) if i != k]
    sums = np.zeros(n, dtype=np.complex128)
    # Candidates: (index, value, membership requirement: None/free, True=in S, False=out)
    candidates = [(k, v_k, None)]
    for i in others:
        candidates.append((i, x[i], True))
        candidates.append((i, y[i], False))
    for idx, val, member in candidates:
        mag = abs(val)
        if idx != k and not _beats(mag, idx, abs(v_k), k):
            continue  # pinned feature k would win instead
        free = forced_in = 0
        possible = True
        for l in others:
            if l == idx:
                continue
            beat_x = _beats(mag, idx, abs(x[l]), l)
            beat_y = _beats(mag, idx, abs(y[l]), l)
            if beat_x and beat_y:
                free += 1
            elif beat_x:
                forced_in += 1
            elif not beat_y:
                possible = False
                break
        if not possible:
            continue
        base = forced_in + (1 if member is True else 0)
        for j in range(base, n):
            c = comb(free, j - base)
            if c:
                sums[j] += val * c
    return sums


def cmaxpool(values: np.ndarray) -> complex:
    values = np.asarray(values, dtype=np.complex128).ravel()
    return complex(values[int(np.argmax(np.abs(values)))])


def maxpool_total(x, y, weights: np.ndarray | None = None) -> np.ndarray:
    """Exact Shapley contribution of every window element for the pooling max.

    Missing elements take the reference window's value. Satisfies
    sum(phi) == cmaxpool(x) - cmaxpool(y) exactly.
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    y = np.asarray(y, dtype=np.complex128).ravel()
    if x.shape != y.shape:
        raise ValueError(f"window sizes differ: {x.size} vs {y.size}")
    n = x.size
    m = precompute_M(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if m.shape != (n,):
        raise ValueError(f"coefficient vector has length {m.size}, expected {n}")
    phi = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        present = _max_sums_per_size(x, y, k, x[k])
        absent = _max_sums_per_size(x, y, k, y[k])
        phi[k] = np.dot(m, present - absent)
    return phi


def maxpool_partials(x, y, cap: int = DEFAULT_PARTIALS_CAP):
    """Real/imaginary partial contributions per window element, by enumeration.

    The real-only presence of feature j is Re(x_j) + i*Im(y_j). Returns
    (phi_r, phi_i) with phi_r + phi_i == maxpool_total(x, y).
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    y = np.asarray(y, dtype=np.complex128).ravel()
    if x.shape != y.shape:
        raise ValueError(f"window sizes differ: {x.size} vs {y.size}")
    n = x.size
    if n > cap:
        raise ValueError(f"window size {n} exceeds enumeration cap {cap}")
    phi_r = np.zeros(n, dtype=np.complex128)
    phi_i = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        bit = 1 << j
        mid_j = x[j].real + 1j * y[j].imag
        r_terms = []
        i_terms = []
        for mask in range(1 << n):
            if mask & bit:
                continue
            w = shapley_weight(bin(mask).count("1"), n)
            v_absent = _mixed_max(x, y, mask)
            v_mid = _pinned_max(x, y, mask, j, mid_j)
            v_full = _mixed_max(x, y, mask | bit)
            r_terms.append(w * (v_mid - v_absent))
            i_terms.append(w * (v_full - v_mid))
        phi_r[j] = np.sum(np.asarray(r_terms))
        phi_i[j] = np.sum(np.asarray(i_terms))
    return phi_r, phi_i


def _pinned_max(x, y, mask, j, v_j):
    best = None
    for i in range(x.size):
        if i == j:
            v = v_j
        else:
            v = x[i] if mask >> i & 1 else y[i]
        if best is None or _beats(abs(v), i, abs(best[0]), best[1]):
            best = (v, i)
    return best[0]
