"""Hot numeric kernels, each in two variants.

Every kernel has a loop implementation (compiled with numba when enabled)
and a vectorized pure-numpy implementation. The public names bind to one
variant at import time according to ``RISPLAN_NUMBA``; both variants stay
importable so tests and ``benchmarks/bench_kernels.py`` can compare them.

The two variants of a kernel follow the same update rules and tie-breaks,
so they produce identical outputs, not merely close ones.
"""

from __future__ import annotations

import numpy as np

from ._accel import NUMBA_ENABLED, njit


# ---------------------------------------------------------------------------
# maximum pairwise contrast across unit-cell states
# ---------------------------------------------------------------------------

def _max_pair_contrast_loops(values):
    # naive modulus instead of abs(): hypot rounds differently between the
    # scalar libm and numpy's simd path, sqrt(re^2 + im^2) does not, and
    # S-parameter magnitudes sit far from overflow
    n_states, n_freq = values.shape
    out = np.zeros(n_freq)
    for i in range(n_states):
        for j in range(i + 1, n_states):
            for k in range(n_freq):
                dr = values[i, k].real - values[j, k].real
                di = values[i, k].imag - values[j, k].imag
                d = np.sqrt(dr * dr + di * di)
                if d > out[k]:
                    out[k] = d
    return out


def max_pair_contrast_numpy(values):
    """Per-frequency max over unordered state pairs of |S_i(f) - S_j(f)|."""
    values = np.asarray(values, dtype=np.complex128)
    out = np.zeros(values.shape[1])
    for i in range(values.shape[0] - 1):
        diff = values[i + 1:] - values[i]
        mag = np.sqrt(diff.real**2 + diff.imag**2)
        np.maximum(out, mag.max(axis=0), out=out)
    return out


# ---------------------------------------------------------------------------
# quantized coordinate ascent on the combined-channel power gain
#
# Objective over unit phasors z_m drawn from a lookup:
#   G(z) = c0 + 2 Re( sum_m conj(b_m) z_m ) + z^H V z
# with V Hermitian PSD. Changing one z_m moves G by 2 Re[ conj(dz) t_m ],
# t_m = b_m + (V z)_m - V_mm z_m, which the sweep exploits for O(M) updates.
# ---------------------------------------------------------------------------

def _ascent_quadratic_loops(b, V, c0, lookup, init_idx, max_rounds, rel_tol):
    m_count = b.shape[0]
    n_lookup = lookup.shape[0]
    idx = init_idx.copy()
    z = np.empty(m_count, np.complex128)
    for m in range(m_count):
        z[m] = lookup[idx[m]]
    s = V @ z
    gain = c0
    for m in range(m_count):
        gain += 2.0 * (np.conj(b[m]) * z[m]).real + (np.conj(z[m]) * s[m]).real
    for _ in range(max_rounds):
        gain_before = gain
        for m in range(m_count):
            t = b[m] + s[m] - V[m, m] * z[m]
            cur = (np.conj(z[m]) * t).real
            best_val = cur
            best_c = -1
            for c in range(n_lookup):
                val = (np.conj(lookup[c]) * t).real
                if val > best_val:
                    best_val = val
                    best_c = c
            if best_c >= 0:
                dz = lookup[best_c] - z[m]
                for l in range(m_count):
                    s[l] += V[l, m] * dz
                z[m] = lookup[best_c]
                idx[m] = best_c
                gain += 2.0 * (best_val - cur)
        scale = abs(gain_before)
        if scale < 1.0:
            scale = 1.0
        if gain - gain_before < rel_tol * scale:
            break
    # recompute once to shed incremental float drift
    s = V @ z
    gain = c0
    for m in range(m_count):
        gain += 2.0 * (np.conj(b[m]) * z[m]).real + (np.conj(z[m]) * s[m]).real
    return idx, gain


def _sequential_gain(b, V, c0, z, s):
    # mirrors the loop variant's accumulation order term by term, so both
    # variants run the termination test on bit-identical gain values
    terms = 2.0 * (np.conj(b) * z).real + (np.conj(z) * s).real
    gain = c0
    for t in terms:
        gain += t
    return gain


def ascent_quadratic_numpy(b, V, c0, lookup, init_idx, max_rounds, rel_tol):
    """Best-response sweeps over the lookup; switches only on strict improvement."""
    b = np.asarray(b, dtype=np.complex128)
    V = np.asarray(V, dtype=np.complex128)
    lookup = np.asarray(lookup, dtype=np.complex128)
    idx = np.asarray(init_idx, dtype=np.int64).copy()
    z = lookup[idx]
    s = V @ z
    gain = _sequential_gain(b, V, c0, z, s)
    m_count = b.shape[0]
    for _ in range(max_rounds):
        gain_before = gain
        for m in range(m_count):
            t = b[m] + s[m] - V[m, m] * z[m]
            cur = (np.conj(z[m]) * t).real
            vals = (np.conj(lookup) * t).real
            best_c = int(np.argmax(vals))
            if vals[best_c] > cur:
                dz = lookup[best_c] - z[m]
                s += V[:, m] * dz
                z[m] = lookup[best_c]
                idx[m] = best_c
                gain += 2.0 * (vals[best_c] - cur)
        if gain - gain_before < rel_tol * max(abs(gain_before), 1.0):
            break
    return idx, _sequential_gain(b, V, c0, z, V @ z)


def eval_quadratic_gain(b, V, c0, z):
    """G(z) for explicit phasors z (not restricted to a lookup)."""
    z = np.asarray(z, dtype=np.complex128)
    return float(c0 + 2.0 * np.sum(np.conj(b) * z).real + np.vdot(z, V @ z).real)


# ---------------------------------------------------------------------------
# coexistence switching chain: forward-fill the per-slot config index
# ---------------------------------------------------------------------------

def _forward_fill_loops(switch, draws):
    n = switch.shape[0]
    out = np.empty(n, np.int64)
    cur = 0
    for t in range(n):
        if switch[t]:
            cur = draws[t]
        out[t] = cur
    return out


def forward_fill_numpy(switch, draws):
    """Config index per slot: last drawn value, initial index 0."""
    n = switch.shape[0]
    marks = np.where(switch, np.arange(n), -1)
    last = np.maximum.accumulate(marks)
    return np.where(last >= 0, np.asarray(draws, dtype=np.int64)[np.maximum(last, 0)], 0)


# ---------------------------------------------------------------------------
# public bindings
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    max_pair_contrast = njit(cache=True)(_max_pair_contrast_loops)
    ascent_quadratic = njit(cache=True)(_ascent_quadratic_loops)
    forward_fill = njit(cache=True)(_forward_fill_loops)
else:
    max_pair_contrast = max_pair_contrast_numpy
    ascent_quadratic = ascent_quadratic_numpy
    forward_fill = forward_fill_numpy
