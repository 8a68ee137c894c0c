"""Log-gamma, digamma, trigamma and the regularized incomplete gamma CDF.

All functions accept scalars or arrays and return the same kind. Inputs
outside the domain raise :class:`DomainError`.
"""
import numpy as np

from ._backend import call


class DomainError(ValueError):
    pass


def _positive(name, x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} requires finite positive input, got {x!r}")
    return arr


def _out(inputs, result):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(result)
    return result


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    arr = _positive("log_gamma", x)
    return _out((x,), call("lgamma", arr))


def digamma(x):
    arr = _positive("digamma", x)
    return _out((x,), call("digamma", arr))


def trigamma(x):
    arr = _positive("trigamma", x)
    return _out((x,), call("trigamma", arr))


def gamma_cdf(z, shape):
    """Regularized lower incomplete gamma P(shape, z), the Gamma(shape, 1) CDF."""
    a = _positive("gamma_cdf shape", shape)
    zz = np.asarray(z, dtype=np.float64)
    if np.any(zz < 0) or np.any(np.isnan(zz)):
        raise DomainError(f"gamma_cdf requires z >= 0, got {z!r}")
    return _out((zz, a), call("gamma_cdf", a, zz))


def log_gamma_cdf(z, shape):
    """(log P, log Q) of the Gamma(shape, 1) distribution at z."""
    a = _positive("log_gamma_cdf shape", shape)
    zz = np.asarray(z, dtype=np.float64)
    if np.any(zz < 0) or np.any(np.isnan(zz)):
        raise DomainError(f"log_gamma_cdf requires z >= 0, got {z!r}")
    logp, logq = call("log_gamma_cdf", a, zz)
    if zz.ndim == 0 and a.ndim == 0:
        return float(logp), float(logq)
    return logp, logq


def gamma_cdf_shape_derivative(z, shape):
    """dP(shape, z)/dshape by central differences on the shape.

    Step is 1e-4 * max(1, shape), capped at 1e-2 * shape so that
    shape - step stays positive for very small shapes.
    """
    a = _positive("gamma_cdf_shape_derivative shape", shape)
    zz = np.asarray(z, dtype=np.float64)
    if np.any(zz < 0) or np.any(np.isnan(zz)):
        raise DomainError(f"gamma_cdf_shape_derivative requires z >= 0, got {z!r}")
    return _out((zz, a), call("gamma_cdf_shape_derivative", zz, a))


def gamma_log_sample_grad(shape, log_z):
    """d log z / d shape for a Gamma(shape, 1) draw z, by implicit differentiation.

    Uses dz/dshape = -(dF/dshape) / p(z) with F the CDF, rearranged in log
    space. No inverse CDF is evaluated.
    """
    a = _positive("gamma_log_sample_grad shape", shape)
    lz = np.asarray(log_z, dtype=np.float64)
    return _out((lz, a), call("gamma_log_sample_grad", a, lz))
