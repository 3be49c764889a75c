"""Physical-optics backscatter accumulation over hit records.

Each valid, front-facing record contributes
``(j k dA / 4pi) * 2 (n0 . -k_inc) * gamma**N * exp(-2j k R)`` to the
complex amplitude A; the monostatic RCS is ``4 pi |A|**2``. The sum is
always carried in double precision and combined through a fixed pairwise
tree so results are bit-stable across runs and worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .transport import HitRecords

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class ScatterParams:
    """Wave and medium constants for the backscatter sum.

    ``gamma`` is the scalar reflection coefficient applied per bounce;
    -1 is the PEC field reflection sign. ``cell_area`` is the ray-tube
    weight of the launch grid (spacing**2).
    """

    wavelength: float
    k: float
    gamma: float
    cell_area: float

    def __post_init__(self):
        if self.wavelength <= 0 or self.cell_area <= 0:
            raise ValidationError("wavelength and cell_area must be positive")
        if abs(self.k * self.wavelength - 2.0 * math.pi) > 1e-12 * 2.0 * math.pi:
            raise ValidationError("k and wavelength disagree (k * lambda != 2 pi)")
        if abs(self.gamma) > 1.0:
            raise ValidationError("|gamma| must be <= 1")

    @classmethod
    def from_wavelength(cls, wavelength: float, cell_area: float,
                        gamma: float = -1.0) -> "ScatterParams":
        return cls(wavelength=wavelength, k=2.0 * math.pi / wavelength,
                   gamma=gamma, cell_area=cell_area)

    @classmethod
    def from_frequency(cls, frequency: float, cell_area: float,
                       gamma: float = -1.0) -> "ScatterParams":
        if frequency <= 0:
            raise ValidationError("frequency must be positive")
        return cls.from_wavelength(SPEED_OF_LIGHT / frequency, cell_area, gamma)


def pairwise_sum(values: np.ndarray) -> complex:
    """Sum through a fixed binary tree: deterministic for a given length.

    Adjacent pairs are combined repeatedly; an odd tail element is carried
    to the next level unchanged. Order depends only on the array order, not
    on threading or chunking.
    """
    work = np.asarray(values, dtype=np.complex128).copy()
    n = work.shape[0]
    if n == 0:
        return 0j
    while n > 1:
        half = n // 2
        head = work[0:2 * half:2] + work[1:2 * half:2]
        if n % 2:
            work[:half] = head
            work[half] = work[n - 1]
            n = half + 1
        else:
            work[:half] = head
            n = half
    return complex(work[0])


def accumulate(records: HitRecords, k_inc, params: ScatterParams,
               count_trapped: bool = False) -> complex:
    """Coherent amplitude of one grid's hit records.

    Records are skipped when invalid, when the first-hit cosine
    ``n0 . -k_inc`` is non-positive (grazing or back-face), or when the ray
    exhausted its bounce budget without escaping (unless ``count_trapped``).
    Summation order is record-index ascending through the pairwise tree.
    """
    k_inc = np.asarray(k_inc, dtype=np.float64)
    sel = records.valid.copy()
    if not count_trapped:
        sel &= records.escaped
    cos = -(records.normal0 @ k_inc)
    sel &= cos > 0.0
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        return 0j

    cos_sel = cos[idx]
    path_sel = records.path[idx].astype(np.float64)
    bounce_sel = records.bounces[idx].astype(np.float64)
    coef = 1j * params.k * params.cell_area / (4.0 * math.pi)
    with np.errstate(invalid="ignore", over="ignore"):
        terms = (coef * 2.0 * cos_sel * params.gamma ** bounce_sel
                 * np.exp(-2j * params.k * path_sel))
    bad = ~np.isfinite(terms)
    if np.any(bad):
        raise NumericalError(
            f"non-finite contribution at record index {int(idx[np.argmax(bad)])}")
    return pairwise_sum(terms)


@dataclass(frozen=True)
class RcsValue:
    """RCS in m^2 and dBsm; dBsm is -inf when sigma is zero."""

    sigma_m2: float
    sigma_dbsm: float


def rcs(amplitude: complex) -> RcsValue:
    """sigma = 4 pi |A|^2."""
    a = complex(amplitude)
    if not (math.isfinite(a.real) and math.isfinite(a.imag)):
        raise NumericalError("non-finite amplitude")
    sigma = 4.0 * math.pi * (a.real * a.real + a.imag * a.imag)
    dbsm = 10.0 * math.log10(sigma) if sigma > 0.0 else -math.inf
    return RcsValue(sigma_m2=sigma, sigma_dbsm=dbsm)


def plate_reference(side: float, wavelength: float) -> float:
    """Normal-incidence PO RCS of a square PEC plate: 4 pi a^4 / lambda^2."""
    if side <= 0 or wavelength <= 0:
        raise ValidationError("side and wavelength must be positive")
    return 4.0 * math.pi * side ** 4 / wavelength ** 2
