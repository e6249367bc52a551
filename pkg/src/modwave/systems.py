"""Catalog of reaction nonlinearities with exact derivative tensors.

Every system is a multivariate polynomial, stored as a monomial table, so
f', f'' and f''' come from exact index-lowering differentiation rather than a
symbolic engine.  The sign convention places f on the same side as the time
derivative in the governing equations, so catalog entries are negated
relative to their textbook form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import TAU, TorusGrid, PeriodicField


@dataclass(frozen=True)
class Monomial:
    component: int          # which component of f this term feeds
    coeff: float
    powers: tuple[int, ...]  # exponent multi-index over the state variables


@dataclass
class ReactionSystem:
    name: str
    n: int
    parameters: dict = field(default_factory=dict)
    monomials: list = field(default_factory=list)

    def __post_init__(self):
        for mono in self.monomials:
            if len(mono.powers) != self.n:
                raise ValueError("monomial power length must equal n")
            if not (0 <= mono.component < self.n):
                raise ValueError("monomial component out of range")

    @property
    def degree(self) -> int:
        return max((sum(m.powers) for m in self.monomials), default=0)

    def _powers(self, u: np.ndarray) -> dict:
        """Cache u_i^p for the powers actually used."""
        u = np.asarray(u, dtype=float)
        need = {}
        for mono in self.monomials:
            for i, p in enumerate(mono.powers):
                need.setdefault(i, set()).update(range(p + 1))
        table = {}
        for i, ps in need.items():
            col = u[..., i]
            table[i] = {p: col ** p for p in ps}
        return table

    def f(self, u: np.ndarray) -> np.ndarray:
        """Evaluate f(u); u has shape (..., n)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        tab = self._powers(u)
        for mono in self.monomials:
            term = np.full(u.shape[:-1], mono.coeff)
            for i, p in enumerate(mono.powers):
                if p:
                    term = term * tab[i][p]
            out[..., mono.component] += term
        return out

    def _deriv_terms(self, order: int):
        """Monomial table differentiated ``order`` times, with slot indices."""
        terms = [(m.component, (), m.coeff, m.powers) for m in self.monomials]
        for _ in range(order):
            new = []
            for comp, slots, coeff, powers in terms:
                for j, p in enumerate(powers):
                    if p:
                        dp = list(powers)
                        dp[j] -= 1
                        new.append((comp, slots + (j,), coeff * p, tuple(dp)))
            terms = new
        return terms

    def _tensor(self, u: np.ndarray, order: int) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        shape = u.shape[:-1] + (self.n,) * (order + 1)
        out = np.zeros(shape)
        for comp, slots, coeff, powers in self._deriv_terms(order):
            term = np.full(u.shape[:-1], coeff)
            for i, p in enumerate(powers):
                if p:
                    term = term * u[..., i] ** p
            idx = (Ellipsis, comp) + slots
            out[idx] += term
        return out

    def df(self, u: np.ndarray) -> np.ndarray:
        """Jacobian, shape (..., n, n)."""
        return self._tensor(u, 1)

    def d2f(self, u: np.ndarray) -> np.ndarray:
        """Second derivative tensor, symmetric in the two trailing slots."""
        return self._tensor(u, 2)

    def d3f(self, u: np.ndarray) -> np.ndarray:
        return self._tensor(u, 3)


@dataclass
class AnalyticWaveTrain:
    """Closed-form wave train: profile p(k, .), frequency, amplitude."""

    k: float
    omega: float
    r0: float
    system: ReactionSystem

    def profile(self, grid: TorusGrid) -> PeriodicField:
        th = grid.nodes
        return PeriodicField(grid, self.r0 * np.vstack([np.cos(th), np.sin(th)]))

    def profile_residual(self, grid: TorusGrid) -> float:
        """Max-norm defect in the profile equation on the grid nodes."""
        p = self.profile(grid)
        res = (self.omega * p.deriv(1).values + self.system.f(p.values.T).T
               - self.k ** 2 * p.deriv(2).values)
        return float(np.max(np.abs(res)))


def make_lambda_omega(omega0: float, omega1: float) -> ReactionSystem:
    """Two-component oscillatory reaction with rotational equivariance.

    f(u) = -[(1 - |u|^2) u + (omega0 + omega1 |u|^2) J u], J the quarter turn.
    """
    w0, w1 = float(omega0), float(omega1)
    monos = [
        # component 0: -u1 + u1^3 + u1 u2^2 + w0 u2 + w1 u1^2 u2 + w1 u2^3
        Monomial(0, -1.0, (1, 0)),
        Monomial(0, 1.0, (3, 0)),
        Monomial(0, 1.0, (1, 2)),
        Monomial(0, w0, (0, 1)),
        Monomial(0, w1, (2, 1)),
        Monomial(0, w1, (0, 3)),
        # component 1: -u2 + u2^3 + u1^2 u2 - w0 u1 - w1 u1^3 - w1 u1 u2^2
        Monomial(1, -1.0, (0, 1)),
        Monomial(1, 1.0, (0, 3)),
        Monomial(1, 1.0, (2, 1)),
        Monomial(1, -w0, (1, 0)),
        Monomial(1, -w1, (3, 0)),
        Monomial(1, -w1, (1, 2)),
    ]
    return ReactionSystem("lambda_omega", 2,
                          {"omega0": w0, "omega1": w1}, monos)


def make_brusselator(a: float, b: float) -> ReactionSystem:
    """Brusselator kinetics, negated: f = -(a - (b+1) u + u^2 v, b u - u^2 v)."""
    if a <= 0 or b <= 0:
        raise ValueError("Brusselator parameters must be positive")
    a, b = float(a), float(b)
    monos = [
        Monomial(0, -a, (0, 0)),
        Monomial(0, b + 1.0, (1, 0)),
        Monomial(0, -1.0, (2, 1)),
        Monomial(1, -b, (1, 0)),
        Monomial(1, 1.0, (2, 1)),
    ]
    return ReactionSystem("brusselator", 2, {"a": a, "b": b}, monos)


def make_polynomial(name: str, n: int, monomials, parameters=None) -> ReactionSystem:
    """User-defined polynomial system from (component, coeff, powers) triples."""
    monos = [Monomial(int(c), float(co), tuple(int(p) for p in pw))
             for c, co, pw in monomials]
    return ReactionSystem(name, n, dict(parameters or {}), monos)


def analytic_wavetrain(system: ReactionSystem, k: float) -> AnalyticWaveTrain:
    """Exact wave train of the oscillatory catalog system at wavenumber k.

    Amplitude r0 = sqrt(1 - k^2) and frequency omega0 + omega1 (1 - k^2);
    requires 0 < |k| < 1 so the amplitude is positive and the wavelength
    finite.
    """
    if system.name != "lambda_omega":
        raise ValueError("closed-form wave trains exist only for lambda_omega")
    if abs(k) >= 1.0:
        raise ValueError("need |k| < 1 for a positive amplitude")
    if abs(k) < 1e-8:
        raise ValueError("wavenumber must be bounded away from 0")
    w0 = system.parameters["omega0"]
    w1 = system.parameters["omega1"]
    r0 = float(np.sqrt(1.0 - k * k))
    return AnalyticWaveTrain(k=float(k), omega=w0 + w1 * (1.0 - k * k),
                             r0=r0, system=system)


def lambda_omega_dispersion(system: ReactionSystem):
    """(omega(k), omega'(k), Eckhaus coefficient b(k)) closed forms for tests."""
    w0 = system.parameters["omega0"]
    w1 = system.parameters["omega1"]

    def omega(k):
        return w0 + w1 * (1.0 - k ** 2)

    def domega(k):
        return -2.0 * w1 * k

    def eckhaus_b(k):
        return 1.0 - 2.0 * k ** 2 * (1.0 + w1 ** 2) / (1.0 - k ** 2)

    return omega, domega, eckhaus_b


def finite_difference_jacobian(system: ReactionSystem, u: np.ndarray,
                               h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian, the oracle for the exact tensors."""
    u = np.asarray(u, dtype=float)
    out = np.zeros((system.n, system.n))
    for j in range(system.n):
        e = np.zeros(system.n)
        e[j] = h
        out[:, j] = (system.f(u + e) - system.f(u - e)) / (2 * h)
    return out
