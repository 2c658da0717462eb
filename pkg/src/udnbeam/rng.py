"""Counter-based Philox4x32-10 generator.

Every random number is a pure function of ``(seed, trial, stream, draw)``,
so a trial's realization does not depend on how trials are split across
workers or in which order they run.  The 128-bit counter holds
``(draw, stream, trial_lo, trial_hi)`` and the 64-bit seed is the key.

Each block yields two uniforms on the open interval ``(0, 1)`` with 53
random bits each.
"""

import numpy as np

from . import _accel
from ._accel import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4x32-bit counter; arguments and results are uint64 < 2**32."""
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SH32
        lo0 = p0 & _MASK
        hi1 = p1 >> _SH32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
        if r < 9:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit
def uniform_pair(seed, trial, stream, draw):
    """Two uniforms in (0, 1) for one counter; all arguments are integers."""
    s = np.uint64(seed)
    t = np.uint64(trial)
    x0, x1, x2, x3 = philox4x32(np.uint64(draw) & _MASK, np.uint64(stream) & _MASK,
                                t & _MASK, t >> _SH32, s & _MASK, s >> _SH32)
    a = ((x0 >> np.uint64(5)) << np.uint64(26)) | (x1 >> np.uint64(6))
    b = ((x2 >> np.uint64(5)) << np.uint64(26)) | (x3 >> np.uint64(6))
    return (float(a) + 0.5) * _TWO_M53, (float(b) + 0.5) * _TWO_M53


def philox4x32_numpy(c0, c1, c2, c3, k0, k1):
    """Vectorized Philox4x32-10 over uint64 arrays holding 32-bit words."""
    c0, c1, c2, c3, k0, k1 = (np.asarray(v, dtype=np.uint64) for v in (c0, c1, c2, c3, k0, k1))
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = ((p1 >> _SH32) ^ c1 ^ k0) & _MASK, p1 & _MASK, ((p0 >> _SH32) ^ c3 ^ k1) & _MASK, p0 & _MASK
        if r < 9:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def uniform_pairs_numpy(seed, trial, stream, draw):
    """Array version of :func:`uniform_pair`; arguments broadcast."""
    trial, stream, draw = np.broadcast_arrays(np.asarray(trial, dtype=np.uint64),
                                              np.asarray(stream, dtype=np.uint64),
                                              np.asarray(draw, dtype=np.uint64))
    s = np.uint64(seed)
    x0, x1, x2, x3 = philox4x32_numpy(draw & _MASK, stream & _MASK, trial & _MASK, trial >> _SH32,
                                      np.full(trial.shape, s & _MASK), np.full(trial.shape, s >> _SH32))
    a = ((x0 >> np.uint64(5)) << np.uint64(26)) | (x1 >> np.uint64(6))
    b = ((x2 >> np.uint64(5)) << np.uint64(26)) | (x3 >> np.uint64(6))
    return (a.astype(float) + 0.5) * _TWO_M53, (b.astype(float) + 0.5) * _TWO_M53


def uniforms(seed, trial, stream, draws):
    """``(len(draws), 2)`` uniforms for one ``(trial, stream)``, using the active backend."""
    draws = np.asarray(draws, dtype=np.int64)
    if _accel.backend() == "numba":
        out = np.empty((draws.size, 2))
        for i, d in enumerate(draws):
            out[i] = uniform_pair(seed, trial, stream, d)
        return out
    u, v = uniform_pairs_numpy(seed, trial, stream, draws)
    return np.stack([u, v], axis=1)
