"""Modified Bessel function of the second kind for the Matern orders.

Only orders in ``SUPPORTED_ORDERS`` are handled. Half-integer orders use
the elementary closed forms. Integer orders start from ``K_0`` and ``K_1``
and recur upward; ``K_0, K_1`` come from their power series for ``x <= 2``
and from Steed's continued fraction for the large-argument tail
``sqrt(pi/2x) e^{-x} (1 + ...)`` above that.
"""

import math

SUPPORTED_ORDERS = (0.5, 1.0, 1.5, 2.0, 2.5)
CROSSOVER = 2.0
EULER_GAMMA = 0.57721566490153286061

_EPS = 1e-16
_MAXIT = 10000


def _k01_series(x):
    # K_n(x) = ... + (-1)^{n+1} ln(x/2) I_n(x) + (-1)^n/2 (x/2)^n sum (psi(k+1)+psi(n+k+1)) (x^2/4)^k / (k!(n+k)!)
    y = 0.25 * x * x
    lx = math.log(0.5 * x)
    psi_k = -EULER_GAMMA  # psi(k+1)
    psi_k1 = 1.0 - EULER_GAMMA  # psi(k+2)
    t0 = 1.0  # y^k / (k!)^2
    t1 = 1.0  # y^k / (k!(k+1)!)
    i0 = s0 = i1 = s1 = 0.0
    k = 0
    while True:
        i0 += t0
        i1 += t1
        s0 += psi_k * t0
        s1 += (psi_k + psi_k1) * t1
        k += 1
        t0 *= y / (k * k)
        t1 *= y / (k * (k + 1))
        psi_k += 1.0 / k
        psi_k1 += 1.0 / (k + 1)
        if t0 < _EPS * abs(i0) and t1 < _EPS * abs(i1):
            break
    half = 0.5 * x
    k0 = -lx * i0 + s0
    k1 = 1.0 / x + lx * half * i1 - 0.5 * half * s1
    return k0, k1


def _k01_continued_fraction(x):
    # Steed's algorithm for CF2 at order mu = 0 (Thompson & Barnett form)
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError(f"continued fraction did not converge at x={x}")
    k0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    k1 = k0 * (x + 0.5 - a1 * h) / x
    return k0, k1


def bessel_k01(x):
    """Return ``(K_0(x), K_1(x))`` for ``x > 0``."""
    if not x > 0 or not math.isfinite(x):
        raise ValueError(f"bessel_k needs a finite positive argument, got {x}")
    if x <= CROSSOVER:
        return _k01_series(x)
    return _k01_continued_fraction(x)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind ``K_nu(x)``.

    Parameters
    ----------
    nu : float
        Order, one of ``SUPPORTED_ORDERS``.
    x : float
        Positive argument.
    """
    nu = float(nu)
    if nu not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported Bessel order {nu}; expected one of {SUPPORTED_ORDERS}")
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ValueError(f"bessel_k needs a finite positive argument, got {x}")
    if nu == 0.5 or nu == 1.5 or nu == 2.5:
        base = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x)
        if nu == 0.5:
            return base
        if nu == 1.5:
            return base * (1.0 + 1.0 / x)
        return base * (1.0 + 3.0 / x + 3.0 / (x * x))
    k0, k1 = bessel_k01(x)
    if nu == 1.0:
        return k1
    # K_{n+1} = K_{n-1} + (2n/x) K_n
    return k0 + 2.0 / x * k1
