"""Counter-based random numbers: every draw is a pure function of
(seed, stream, counter), so results never depend on thread scheduling."""

import math

import numpy as np
from numba import njit

DEFAULT_SEED = 20240917

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM = np.uint64(0xD1B54A32D192ED03)


@njit(cache=True)
def mix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_key(seed, stream):
    return mix64(mix64(np.uint64(seed)) ^ (np.uint64(stream) * _STREAM))


@njit(cache=True)
def uniform(key, ctr):
    h = mix64(key + np.uint64(ctr) * _GOLDEN)
    return ((h >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def normal(key, ctr):
    """Standard normal number ``ctr`` of stream ``key`` (Box-Muller)."""
    u1 = uniform(key, 2 * ctr)
    u2 = uniform(key, 2 * ctr + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def normals(seed, stream, n):
    key = stream_key(seed, stream)
    out = np.empty(n)
    for i in range(n):
        out[i] = normal(key, i)
    return out


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def set_threads(n):
    """Cap numba worker threads; None uses $ANNULUS_SLE_THREADS or all cores."""
    import os

    import numba

    if n is None:
        env = os.environ.get("ANNULUS_SLE_THREADS")
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
