"""Base-2 log-domain helpers."""
import math

import numpy as np
from scipy.special import rel_entr, xlogy

LN2 = math.log(2.0)


def log2sumexp2(x, axis=None, keepdims=False):
    """log2 of sum of 2**x, stable under -inf entries and large magnitudes."""
    x = np.asarray(x, dtype=float)
    m = np.max(x, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log2(np.sum(np.exp2(x - m_safe), axis=axis, keepdims=True)) + m_safe
    s = np.where(np.isneginf(m), -np.inf, s)
    if not keepdims:
        s = np.squeeze(s, axis=axis) if axis is not None else s.reshape(())
    return s if np.ndim(s) else float(s)


def normalize_log2(x, axis=-1):
    """Normalize 2**x along ``axis``; returns (probabilities, log2 normalizer)."""
    z = log2sumexp2(x, axis=axis, keepdims=True)
    with np.errstate(invalid="ignore"):
        p = np.exp2(x - z)
    p = np.where(np.isneginf(x), 0.0, p)
    return p, np.squeeze(z, axis=axis)


def plogp(p):
    """Elementwise p*log2(p) with 0 log 0 = 0."""
    return xlogy(p, p) / LN2


def kl_bits(p, q, axis=None):
    """KL(p || q) in bits; +inf if p puts mass where q has none."""
    return np.sum(rel_entr(p, q), axis=axis) / LN2


def expect(p, values, axis=None):
    """Sum of p*values with the convention 0 * (+-inf) = 0."""
    p = np.asarray(p, dtype=float)
    values = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        prod = np.where(p > 0, p * values, 0.0)
    return np.sum(prod, axis=axis)


def tv_distance(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
