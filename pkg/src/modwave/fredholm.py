"""Linearized profile operator, its adjoint null vector, and partial inverse.

The operator here is  L = omega * d/dtheta + f'(p) - k^2 d^2/dtheta^2  on the
torus, the convention whose kernel machinery drives the expansion cascade.
Translation invariance puts p' in the kernel; simplicity of that eigenvalue
(transversality) makes the bordered system
    [L, p'; <h, .>, 0]
nonsingular, giving a partial inverse with R p' = 0 and L R f = f on the
range of L.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .grid import TorusGrid, PeriodicField, spectral_derivative, quad_inner
from .wavetrain import WaveTrain, _diff_matrix


class TransversalityError(RuntimeError):
    pass


@dataclass
class LinearizedOperator:
    grid: TorusGrid
    n: int
    k: float
    omega: float
    matrix: np.ndarray            # dense collocation matrix, (n*nt, n*nt)
    dtheta_p: np.ndarray          # kernel field samples, (n, nt)

    def kernel_vector(self) -> np.ndarray:
        return self.dtheta_p.reshape(-1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (self.matrix @ values.reshape(-1)).reshape(self.n, -1)


def assemble_L(wavetrain: WaveTrain) -> LinearizedOperator:
    """Dense Fourier-collocation matrix of the linearization about p."""
    grid = wavetrain.grid
    n, nt = wavetrain.system.n, grid.n_theta
    d1 = _diff_matrix(nt, 1)
    d2 = _diff_matrix(nt, 2)
    jf = wavetrain.system.df(wavetrain.profile.values.T)  # (nt, n, n)
    mat = np.zeros((n * nt, n * nt))
    for a in range(n):
        for b in range(n):
            blk = np.zeros((nt, nt))
            if a == b:
                blk += wavetrain.omega * d1 - wavetrain.k ** 2 * d2
            blk[np.arange(nt), np.arange(nt)] += jf[:, a, b]
            mat[a * nt:(a + 1) * nt, b * nt:(b + 1) * nt] = blk
    return LinearizedOperator(grid=grid, n=n, k=wavetrain.k,
                              omega=wavetrain.omega, matrix=mat,
                              dtheta_p=wavetrain.profile.deriv(1).values)


@dataclass
class AdjointNullData:
    h: PeriodicField
    normalization: float          # <h, p'> after rescaling, should be 1


def adjoint_null(L: LinearizedOperator, norm_tol: float = 1e-8) -> AdjointNullData:
    """Adjoint kernel vector h, rescaled so the pairing with p' equals 1."""
    evals, evecs = np.linalg.eig(L.matrix.conj().T)
    i = int(np.argmin(np.abs(evals)))
    h = evecs[:, i]
    # real operator and simple real eigenvalue: rotate the phase out
    j = int(np.argmax(np.abs(h)))
    h = h * np.exp(-1j * np.angle(h[j]))
    if np.max(np.abs(h.imag)) < 1e-8:
        h = h.real
    pairing = quad_inner(L.grid, h, L.kernel_vector())
    if abs(pairing) < norm_tol:
        raise TransversalityError(
            "adjoint pairing %.3e too small; zero eigenvalue not simple"
            % abs(pairing))
    h = h / pairing
    field = PeriodicField(L.grid, np.asarray(h).reshape(L.n, -1))
    return AdjointNullData(h=field,
                           normalization=float(
                               np.real(quad_inner(L.grid, h, L.kernel_vector()))))


@dataclass
class PartialInverse:
    L: LinearizedOperator
    h: PeriodicField
    _lu: tuple

    @classmethod
    def build(cls, L: LinearizedOperator,
              null: AdjointNullData | None = None) -> "PartialInverse":
        if null is None:
            null = adjoint_null(L)
        size = L.matrix.shape[0]
        bordered = np.zeros((size + 1, size + 1))
        bordered[:size, :size] = L.matrix
        bordered[:size, size] = L.kernel_vector()
        bordered[size, :size] = L.grid.spacing * null.h.values.reshape(-1)
        try:
            lu = sla.lu_factor(bordered)
        except np.linalg.LinAlgError as exc:
            raise TransversalityError("bordered matrix singular: %s" % exc)
        if not np.all(np.isfinite(lu[0])):
            raise TransversalityError("bordered factorization produced NaNs")
        return cls(L=L, h=null.h, _lu=lu)

    def project_out_kernel(self, values: np.ndarray) -> np.ndarray:
        """(I - Pi0) restricted to the adjoint-orthogonal complement."""
        coeff = quad_inner(self.L.grid, self.h.values, values)
        return values - coeff * self.L.dtheta_p

    def spectral_projection(self, values: np.ndarray) -> np.ndarray:
        """Pi0 f = <h, f> p'."""
        coeff = quad_inner(self.L.grid, self.h.values, values)
        return coeff * self.L.dtheta_p

    def apply(self, rhs: np.ndarray | PeriodicField) -> np.ndarray:
        """Solve L w = (I - Pi0) rhs with <h, w> = 0; returns w samples."""
        values = rhs.values if isinstance(rhs, PeriodicField) else np.asarray(rhs)
        g = self.project_out_kernel(values)
        vec = np.concatenate([g.reshape(-1), [0.0]])
        sol = sla.lu_solve(self._lu, vec)
        return sol[:-1].reshape(self.L.n, -1)

    def apply_many(self, rhs_stack: np.ndarray) -> np.ndarray:
        """Batched apply; rhs_stack has shape (..., n, nt)."""
        shape = rhs_stack.shape
        flatten = rhs_stack.reshape(-1, shape[-2], shape[-1])
        h = self.h.values
        w = self.L.grid.spacing
        coeffs = w * np.einsum("ct,bct->b", h, flatten)
        g = flatten - coeffs[:, None, None] * self.L.dtheta_p
        stacked = np.concatenate(
            [g.reshape(g.shape[0], -1), np.zeros((g.shape[0], 1))], axis=1)
        sol = sla.lu_solve(self._lu, stacked.T).T
        return sol[:, :-1].reshape(shape)


def partial_inverse_apply(rk: PartialInverse, rhs: PeriodicField) -> PeriodicField:
    return PeriodicField(rk.L.grid, rk.apply(rhs))


def verify_bounded_on_Cm(rk: PartialInverse, m: int, n_samples: int = 20,
                         seed: int = 0, max_mode: int = 8) -> dict:
    """Sampled operator-norm estimate of R on fields with m derivatives.

    Draws random band-limited fields, reports max ||R f||_Cm / ||f||_Cm.
    """
    if m > 4:
        raise ValueError("m <= 4")
    rng = np.random.default_rng(seed)
    grid = rk.L.grid
    th = grid.nodes
    worst = 0.0
    for _ in range(n_samples):
        f = np.zeros((rk.L.n, grid.n_theta))
        for j in range(1, max_mode + 1):
            amp = rng.standard_normal((rk.L.n, 2)) / j
            f += amp[:, :1] * np.cos(j * th) + amp[:, 1:] * np.sin(j * th)
        w = rk.apply(f)
        ratio = _cm_norm(w, m) / _cm_norm(f, m)
        worst = max(worst, float(ratio))
    return {"m": m, "ratio": worst, "n_samples": n_samples}


def _cm_norm(values: np.ndarray, m: int) -> float:
    total = np.max(np.abs(values))
    v = values
    for _ in range(m):
        v = spectral_derivative(v, 1)
        total = max(total, np.max(np.abs(v)))
    return total
