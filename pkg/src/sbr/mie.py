"""Exact monostatic RCS of a perfectly conducting sphere (Mie series).

Used as the analytical oracle for the ray pipeline. All arithmetic is double
precision regardless of the geometry precision setting.

Convention: time dependence exp(+j w t), so the outgoing radial function is
the spherical Hankel function of the second kind h2_n = j_n - j*y_n, and the
series coefficients are a_n = j_n(x)/h2_n(x),
b_n = [x j_n(x)]' / [x h2_n(x)]'. The backscatter cross-section
sigma = (lambda^2 / 4 pi) |sum (-1)^n (2n+1) (b_n - a_n)|^2 is insensitive
to the convention (the alternative conjugates the sum).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, ValidationError


def truncation_order(x: float) -> int:
    """Wiscombe-style series cutoff: ceil(x + 4 x^(1/3) + 2)."""
    return int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 2.0))


def spherical_jn_all(n_max: int, x: float) -> np.ndarray:
    """j_0..j_n_max via downward recurrence (stable at large order).

    Started well above n_max from an arbitrary seed and normalized against
    the closed forms of j_0 / j_1, whichever is better conditioned.
    """
    if x <= 0:
        raise ValidationError("x must be positive")
    start = n_max + 16 + int(math.ceil(2.0 * math.sqrt(max(n_max, 1))))
    raw = np.zeros(start + 2)
    raw[start + 1] = 0.0
    raw[start] = 1e-30
    for n in range(start, 0, -1):
        raw[n - 1] = (2 * n + 1) / x * raw[n] - raw[n + 1]
        if abs(raw[n - 1]) > 1e250:
            raw[n - 1:] *= 1e-250
    j0 = math.sin(x) / x
    j1 = math.sin(x) / (x * x) - math.cos(x) / x
    if abs(j0) >= abs(j1):
        scale = j0 / raw[0]
    else:
        if raw[1] == 0.0:
            raise NumericalError(f"spherical Bessel normalization failed at x={x}")
        scale = j1 / raw[1]
    return raw[:n_max + 1] * scale


def spherical_yn_all(n_max: int, x: float) -> np.ndarray:
    """y_0..y_n_max via upward recurrence (stable for y_n)."""
    if x <= 0:
        raise ValidationError("x must be positive")
    y = np.zeros(n_max + 1)
    y[0] = -math.cos(x) / x
    if n_max >= 1:
        y[1] = -math.cos(x) / (x * x) - math.sin(x) / x
    for n in range(1, n_max):
        y[n + 1] = (2 * n + 1) / x * y[n] - y[n - 1]
    return y


def _series_sum(x: float, order: int) -> tuple[complex, float]:
    """Partial sum of the backscatter series and its residual-term size."""
    jn = spherical_jn_all(order, x)
    yn = spherical_yn_all(order, x)
    h2 = jn - 1j * yn
    n = np.arange(1, order + 1)
    # [x f_n(x)]' = x f_{n-1}(x) - n f_n(x)
    xjn_p = x * jn[n - 1] - n * jn[n]
    xh2_p = x * h2[n - 1] - n * h2[n]
    a_n = jn[n] / h2[n]
    b_n = xjn_p / xh2_p
    terms = (-1.0) ** n * (2 * n + 1) * (b_n - a_n)
    total = complex(np.sum(terms))
    tail = float(np.max(np.abs(terms[-3:]))) if order >= 3 \
        else float(np.abs(terms[-1]))
    return total, tail


def mie_backscatter_pec(x: float, radius: float,
                        n_max: int | None = None) -> float:
    """Monostatic RCS (m^2) of a PEC sphere of electrical size x = k r.

    The default cutoff starts at the Wiscombe-style order and extends until
    the residual term falls below 1e-12 of the partial sum (terms decay
    super-exponentially past n ~ x, so a few dozen extra orders suffice).
    An explicit ``n_max`` is used as given; in both cases a residual above
    the bound raises NumericalError.
    """
    if not 0.0 < x <= 1e5:
        raise ValidationError(f"electrical size x must be in (0, 1e5], got {x}")
    if radius <= 0:
        raise ValidationError("radius must be positive")

    if n_max is not None:
        if int(n_max) < 1:
            raise ValidationError("n_max must be >= 1")
        orders = [int(n_max)]
    else:
        base = truncation_order(x)
        orders = [base + 64, base + 256]

    total = 0j
    tail = math.inf
    for order in orders:
        total, tail = _series_sum(x, order)
        if not (math.isfinite(total.real) and math.isfinite(total.imag)):
            raise NumericalError(f"Mie series diverged at x={x}")
        if tail <= 1e-12 * abs(total):
            break
    else:
        raise NumericalError(
            f"Mie series not converged at x={x}: residual {tail:.3g} vs "
            f"partial sum {abs(total):.3g}; raise n_max")

    wavelength = 2.0 * math.pi * radius / x
    return float(wavelength ** 2 / (4.0 * math.pi) * abs(total) ** 2)
