"""Seedable random streams and Gamma sampling."""
import zlib

import numpy as np


class RngState:
    """A seeded generator that can derive independent named child streams.

    ``stream(name)`` depends only on the root seed and the name, never on how
    much of the parent has been consumed.
    """

    def __init__(self, seed=0, *, _seq=None):
        self.seq = _seq if _seq is not None else np.random.SeedSequence(seed)
        self.gen = np.random.Generator(np.random.PCG64(self.seq))

    def stream(self, name):
        key = tuple(self.seq.spawn_key) + (zlib.crc32(name.encode()),)
        seq = np.random.SeedSequence(self.seq.entropy, spawn_key=key)
        return RngState(_seq=seq)

    def spawn(self, n):
        """Fresh children; advances this state so repeated calls differ."""
        return [RngState(_seq=s) for s in self.seq.spawn(n)]

    def __repr__(self):
        return f"RngState(entropy={self.seq.entropy}, spawn_key={self.seq.spawn_key})"


def _log_gamma_variates(shape, gen):
    # Marsaglia-Tsang for shape >= 1; shape < 1 boosted via z * U^(1/shape)
    shape = np.asarray(shape, dtype=np.float64)
    flat = shape.ravel()
    boosted = flat < 1.0
    a = np.where(boosted, flat + 1.0, flat)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        x = gen.standard_normal(pending.size)
        u = gen.random(pending.size)
        v = 1.0 + c[pending] * x
        ok = v > 0
        v3 = np.where(ok, v * v * v, 1.0)
        dp = d[pending]
        with np.errstate(divide="ignore"):
            accept = ok & (np.log(u) < 0.5 * x * x + dp - dp * v3 + dp * np.log(v3))
        idx = pending[accept]
        out[idx] = np.log(dp[accept]) + np.log(v3[accept])
        pending = pending[~accept]
    if boosted.any():
        u = gen.random(int(boosted.sum()))
        out[boosted] += np.log(u) / flat[boosted]
    return out.reshape(shape.shape)


def sample_log_gamma(shape, rng, size=None):
    """log of Gamma(shape, 1) draws; stays finite where the draw underflows."""
    shape = np.asarray(shape, dtype=np.float64)
    if np.any(~np.isfinite(shape)) or np.any(shape <= 0):
        from .special import DomainError

        raise DomainError(f"gamma shape must be positive, got {shape!r}")
    if size is not None:
        shape = np.broadcast_to(shape, size)
    return _log_gamma_variates(shape, rng.gen)


def sample_gamma(shape, rng, size=None):
    """Draw from Gamma(shape, 1); a float for scalar shape and no size."""
    out = np.exp(sample_log_gamma(shape, rng, size))
    if size is None and np.ndim(shape) == 0:
        return float(out)
    return out
