# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar kernels; mirrors ``_pykernels`` function for function."""
import numpy as np

from libc.math cimport log, exp, fabs, log1p, expm1, fmin, fmax, INFINITY

cdef double LANCZOS_G = 7.0
cdef double[9] LANCZOS_COEF = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
]
cdef double HALF_LOG_2PI = 0.91893853320467274178
cdef double EULER = 0.5772156649015329
cdef double[30] ZETA = [
    1.6449340668482264, 1.2020569031595942, 1.0823232337111381, 1.03692775514337,
    1.0173430619844492, 1.008349277381923, 1.0040773561979444, 1.0020083928260821,
    1.000994575127818, 1.0004941886041194, 1.000246086553308, 1.0001227133475785,
    1.0000612481350588, 1.000030588236307, 1.0000152822594086, 1.0000076371976379,
    1.000003817293265, 1.0000019082127165, 1.0000009539620338, 1.0000004769329869,
    1.0000002384505027, 1.000000119219926, 1.000000059608189, 1.0000000298035034,
    1.0000000149015549, 1.0000000074507118, 1.000000003725334, 1.0000000018626598,
    1.0000000009313275, 1.0000000004656628,
]
cdef double SERIES_RADIUS = 0.2
cdef double CDF_EPS = 1e-16
cdef int CDF_MAXITER = 100000
cdef double TINY = 1e-300
cdef double SMALL_LOGZ = -600.0
cdef double LOG_HALF = -0.6931471805599453


cdef double _lgamma_near_one(double e) nogil:
    cdef double acc = 0.0, p = e
    cdef int k
    for k in range(2, 32):
        p *= e
        if k % 2 == 0:
            acc += ZETA[k - 2] / k * p
        else:
            acc -= ZETA[k - 2] / k * p
    return -EULER * e + acc


cdef double c_lgamma(double x) nogil:
    cdef double xm, acc, t
    cdef int i
    if x < 0.5:
        return c_lgamma(x + 1.0) - log(x)
    if fabs(x - 1.0) <= SERIES_RADIUS:
        return _lgamma_near_one(x - 1.0)
    if fabs(x - 2.0) <= SERIES_RADIUS:
        return _lgamma_near_one(x - 2.0) + log1p(x - 2.0)
    xm = x - 1.0
    acc = LANCZOS_COEF[0]
    for i in range(1, 9):
        acc += LANCZOS_COEF[i] / (xm + i)
    t = xm + LANCZOS_G + 0.5
    return HALF_LOG_2PI + (xm + 0.5) * log(t) - t + log(acc)


cdef double c_digamma(double x) nogil:
    cdef double shift = 0.0, z, poly
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    z = 1.0 / (x * x)
    poly = z * (1.0 / 12 - z * (1.0 / 120 - z * (1.0 / 252 - z * (1.0 / 240 - z * (1.0 / 132)))))
    return shift + log(x) - 0.5 / x - poly


cdef double c_trigamma(double x) nogil:
    cdef double shift = 0.0, z, tail
    while x < 10.0:
        shift += 1.0 / (x * x)
        x += 1.0
    z = 1.0 / (x * x)
    tail = 1.0 / 6 - z * (1.0 / 30 - z * (1.0 / 42 - z * (1.0 / 30 - z * (5.0 / 66))))
    return shift + 1.0 / x + 0.5 * z + tail * z / x


cdef double _log1mexp(double v) nogil:
    if v > LOG_HALF:
        return log(-expm1(v))
    return log1p(-exp(v))


cdef void c_log_gamma_cdf(double a, double x, double* logp, double* logq) nogil:
    cdef double prefactor, ap, term, total, b, c, d, h, an, delta
    cdef int i
    if x <= 0.0:
        logp[0] = -INFINITY
        logq[0] = 0.0
        return
    if x == INFINITY:
        logp[0] = 0.0
        logq[0] = -INFINITY
        return
    prefactor = a * log(x) - x - c_lgamma(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(CDF_MAXITER):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * CDF_EPS:
                break
        logp[0] = fmin(prefactor + log(total), 0.0)
        logq[0] = _log1mexp(logp[0])
    else:
        b = x + 1.0 - a
        c = 1.0 / TINY
        d = 1.0 / b
        h = d
        for i in range(1, CDF_MAXITER):
            an = -i * (i - a)
            b += 2.0
            d = an * d + b
            if fabs(d) < TINY:
                d = TINY
            c = b + an / c
            if fabs(c) < TINY:
                c = TINY
            d = 1.0 / d
            delta = d * c
            h *= delta
            if fabs(delta - 1.0) < CDF_EPS:
                break
        logq[0] = fmin(prefactor + log(h), 0.0)
        logp[0] = _log1mexp(logq[0])


cdef inline double c_fd_step(double a) nogil:
    return fmin(1e-4 * fmax(1.0, a), 1e-2 * a)


cdef double c_gamma_cdf(double a, double x) nogil:
    cdef double lp, lq
    c_log_gamma_cdf(a, x, &lp, &lq)
    return exp(lp)


cdef double c_gamma_log_sample_grad(double a, double logz) nogil:
    cdef double z, h, lp, lq, pp, pq, mp, mq, log_pz
    if logz < SMALL_LOGZ:
        return -(logz - c_digamma(a + 1.0)) / a
    z = exp(logz)
    h = c_fd_step(a)
    c_log_gamma_cdf(a, z, &lp, &lq)
    log_pz = a * logz - z - c_lgamma(a)
    c_log_gamma_cdf(a + h, z, &pp, &pq)
    c_log_gamma_cdf(a - h, z, &mp, &mq)
    if lp < LOG_HALF:
        return -exp(lp - log_pz) * (pp - mp) / (2.0 * h)
    return exp(lq - log_pz) * (pq - mq) / (2.0 * h)


def lgamma(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_lgamma(x[i])
    return out


def digamma(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_digamma(x[i])
    return out


def trigamma(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_trigamma(x[i])
    return out


def log_gamma_cdf(const double[::1] a, const double[::1] x):
    cdef Py_ssize_t i, n = a.shape[0]
    logp = np.empty(n)
    logq = np.empty(n)
    cdef double[::1] lp = logp
    cdef double[::1] lq = logq
    with nogil:
        for i in range(n):
            c_log_gamma_cdf(a[i], x[i], &lp[i], &lq[i])
    return logp, logq


def gamma_cdf(const double[::1] a, const double[::1] x):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_gamma_cdf(a[i], x[i])
    return out


def fd_step(const double[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = c_fd_step(a[i])
    return out


def gamma_cdf_shape_derivative(const double[::1] z, const double[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double h
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            h = c_fd_step(a[i])
            o[i] = (c_gamma_cdf(a[i] + h, z[i]) - c_gamma_cdf(a[i] - h, z[i])) / (2.0 * h)
    return out


def gamma_log_sample_grad(const double[::1] a, const double[::1] logz):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = c_gamma_log_sample_grad(a[i], logz[i])
    return out
