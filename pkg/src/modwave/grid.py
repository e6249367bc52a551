"""Spectral discretization of 2pi-periodic functions on the torus.

Fields are sampled at equispaced nodes; the trigonometric interpolant through
the samples is the canonical continuous representative.  All derivative and
quadrature operations act on that interpolant, so they are exact on resolved
Fourier modes.  Matrices are plain ``numpy`` arrays throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAU = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Equispaced collocation grid on [0, 2pi), node j at 2*pi*j/n_theta."""

    n_theta: int

    def __post_init__(self):
        if self.n_theta < 8 or self.n_theta % 2 != 0:
            raise ValueError("n_theta must be even and >= 8, got %r" % (self.n_theta,))

    @property
    def nodes(self) -> np.ndarray:
        return TAU * np.arange(self.n_theta) / self.n_theta

    @property
    def spacing(self) -> float:
        return TAU / self.n_theta

    def modes(self) -> np.ndarray:
        """Integer wavenumbers in FFT ordering."""
        return np.fft.fftfreq(self.n_theta, d=1.0 / self.n_theta)


def spectral_derivative(values: np.ndarray, order: int, axis: int = -1) -> np.ndarray:
    """Differentiate the trigonometric interpolant along ``axis``.

    Odd derivatives zero the (unpaired) Nyquist mode.  Real input gives real
    output.
    """
    n = values.shape[axis]
    m = np.fft.fftfreq(n, d=1.0 / n)
    mult = (1j * m) ** order
    if order % 2 == 1:
        mult[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    spec = np.fft.fft(values, axis=axis) * mult.reshape(shape)
    out = np.fft.ifft(spec, axis=axis)
    if np.isrealobj(values):
        out = out.real
    return out


def trig_refine(values: np.ndarray, factor: int, axis: int = -1) -> np.ndarray:
    """Resample onto a grid refined by an integer factor via zero padding."""
    if factor == 1:
        return values.copy()
    n = values.shape[axis]
    spec = np.fft.fft(values, axis=axis)
    spec = np.moveaxis(spec, axis, -1)
    nf = n * factor
    fine = np.zeros(spec.shape[:-1] + (nf,), dtype=complex)
    half = n // 2
    fine[..., :half] = spec[..., :half]
    fine[..., nf - half:] = spec[..., half:]
    # split the Nyquist mode symmetrically so the interpolant stays real
    fine[..., half] = 0.5 * spec[..., half]
    fine[..., nf - half] += 0.5 * spec[..., half]
    fine *= factor
    out = np.fft.ifft(fine, axis=-1)
    out = np.moveaxis(out, -1, axis)
    if np.isrealobj(values):
        out = out.real
    return out


def trig_eval(values: np.ndarray, theta: np.ndarray, axis: int = -1) -> np.ndarray:
    """Evaluate the trigonometric interpolant at arbitrary angles.

    Returns an array with the sample axis replaced by ``theta.shape``.
    """
    vals = np.moveaxis(np.asarray(values), axis, -1)
    n = vals.shape[-1]
    spec = np.fft.fft(vals, axis=-1) / n
    theta = np.asarray(theta, dtype=float)
    m = np.fft.fftfreq(n, d=1.0 / n)
    half = n // 2
    # cosine convention for the Nyquist mode keeps real fields real
    phases = np.exp(1j * np.multiply.outer(theta, m))  # (*theta, n)
    phases[..., half] = np.cos(half * theta)
    out = np.tensordot(spec, phases, axes=([-1], [-1]))
    if np.isrealobj(values):
        out = out.real
    return out


def dealiased_product(a: np.ndarray, b: np.ndarray, axis: int = -1,
                      pad: float = 1.5) -> np.ndarray:
    """Pointwise product with 3/2-rule zero padding along ``axis``."""
    n = a.shape[axis]
    factor = max(2, int(np.ceil(pad)))
    # use the smallest integer refinement >= pad; 2 fully covers quadratic terms
    fa = trig_refine(a, factor, axis=axis)
    fb = trig_refine(b, factor, axis=axis)
    prod = fa * fb
    spec = np.fft.fft(np.moveaxis(prod, axis, -1), axis=-1)
    half = n // 2
    nf = spec.shape[-1]
    kept = np.concatenate([spec[..., :half], spec[..., nf - half:]], axis=-1) / factor
    out = np.fft.ifft(kept, axis=-1)
    out = np.moveaxis(out, -1, axis)
    if np.isrealobj(a) and np.isrealobj(b):
        out = out.real
    return out


@dataclass
class PeriodicField:
    """Vector-valued samples on a TorusGrid; shape (n_components, n_theta)."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values))
        if self.values.shape[-1] != self.grid.n_theta:
            raise ValueError("value count %d does not match n_theta %d"
                             % (self.values.shape[-1], self.grid.n_theta))

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def deriv(self, order: int) -> "PeriodicField":
        return PeriodicField(self.grid, spectral_derivative(self.values, order))

    def eval_at(self, theta) -> np.ndarray:
        return trig_eval(self.values, np.asarray(theta))

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def fourier_diff(field: PeriodicField, order: int) -> PeriodicField:
    """Spectral theta derivative of order 1 or 2."""
    if order not in (1, 2):
        raise ValueError("derivative order must be 1 or 2, got %r" % (order,))
    return field.deriv(order)


def periodic_quadrature(field: PeriodicField) -> np.ndarray:
    """Trapezoid rule (2pi/N) * sum, one value per component.

    Spectrally accurate for smooth periodic integrands.
    """
    return field.grid.spacing * field.values.sum(axis=-1)


def quad_inner(grid: TorusGrid, a: np.ndarray, b: np.ndarray) -> complex | float:
    """Unconjugated quadrature pairing sum_j (2pi/N) a_j . b_j."""
    return grid.spacing * np.sum(a * b)
