"""Dense kernels: periodic linear ODE integration, normalized matrix
logarithms, ordered spectral splittings, and Lyapunov-type symmetrizers.

The ODE integrator is a fixed-step classical 4th-order scheme; coefficients
sampled on a torus grid are resampled to the stage grid by trigonometric
interpolation, so smooth periodic coefficients lose no accuracy between
nodes.  Fixed steps keep runs bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import TAU, trig_refine


class SingularMatrixError(ValueError):
    pass


class BranchCutError(ValueError):
    pass


class GapViolationError(ValueError):
    pass


class SpectrumSignError(ValueError):
    pass


def _stage_samples(a_samples: np.ndarray, steps: int) -> np.ndarray:
    """Coefficient values at the 2*steps+1 stage points of [0, 2pi]."""
    a = np.asarray(a_samples)
    n_theta = a.shape[-3]
    if (2 * steps) % n_theta != 0:
        # resample onto a compatible fine grid first
        factor = int(np.ceil(2 * steps / n_theta))
        a = trig_refine(np.moveaxis(a, -3, -1), factor, axis=-1)
        a = np.moveaxis(a, -1, -3)
        n_theta = a.shape[-3]
    factor = (2 * steps) // n_theta
    if factor > 1:
        a = trig_refine(np.moveaxis(a, -3, -1), factor, axis=-1)
        a = np.moveaxis(a, -1, -3)
    idx = np.arange(2 * steps + 1) % (2 * steps)
    return a[..., idx, :, :]


def _rk4_sweep(stages: np.ndarray, h: float, x0: np.ndarray) -> np.ndarray:
    """March X' = A X across all steps; ``stages`` holds A at stage points."""
    x = x0
    nsteps = (stages.shape[-3] - 1) // 2
    for i in range(nsteps):
        a0 = stages[..., 2 * i, :, :]
        am = stages[..., 2 * i + 1, :, :]
        a1 = stages[..., 2 * i + 2, :, :]
        k1 = a0 @ x
        k2 = am @ (x + 0.5 * h * k1)
        k3 = am @ (x + 0.5 * h * k2)
        k4 = a1 @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def integrate_linear_ode(a_samples: np.ndarray, steps: int | None = None,
                         span: tuple[float, float] = (0.0, TAU)) -> np.ndarray:
    """Fundamental solution X(span end) of X' = A(theta) X, X(start) = Id.

    ``a_samples``: (..., n_theta, m, m) equispaced samples of A over [0, 2pi).
    Doubling ``steps`` reduces the error by ~16x (4th-order scheme).
    """
    a = np.asarray(a_samples)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite coefficient samples")
    n_theta = a.shape[-3]
    if steps is None:
        steps = 8 * n_theta
    if steps < 4 * n_theta:
        raise ValueError("steps must be >= 4 * n_theta")
    t0, t1 = span
    full_steps = int(round(steps * (t1 - t0) / TAU))
    stages = _stage_samples(a, steps)
    i0 = int(round(t0 / TAU * 2 * steps))
    stages = stages[..., i0:i0 + 2 * full_steps + 1, :, :]
    h = (t1 - t0) / full_steps
    m = a.shape[-1]
    eye = np.broadcast_to(np.eye(m, dtype=a.dtype), a.shape[:-3] + (m, m)).copy()
    return _rk4_sweep(stages, h, eye)


@dataclass
class PanelFactorization:
    """Monodromy as an ordered product of well-scaled panel maps.

    X(2pi) = factors[-1] @ ... @ factors[0] * exp(sum(logs)).  Panels keep the
    dynamic range per factor small so downstream eigen-structure extraction
    stays accurate even when the full period map is violently ill-scaled.
    """

    factors: np.ndarray      # (n_panels, m, m), possibly batched (..., P, m, m)
    logs: np.ndarray         # (..., n_panels) real rescaling logs

    @property
    def n_panels(self) -> int:
        return self.factors.shape[-3]

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """Product in mantissa/log form: (mantissa, log_scale)."""
        f = self.factors
        batch = f.shape[:-3]
        m = f.shape[-1]
        x = np.broadcast_to(np.eye(m, dtype=f.dtype), batch + (m, m)).copy()
        log = np.zeros(batch)
        for p in range(self.n_panels):
            x = f[..., p, :, :] @ x
            scale = np.abs(x).max(axis=(-2, -1))
            x = x / scale[..., None, None]
            log = log + np.log(scale)
        return x, log + self.logs.sum(axis=-1)

    def matrix(self) -> np.ndarray:
        mant, log = self.full()
        return mant * np.exp(log)[..., None, None]

    def log_det(self) -> complex:
        """Sum of panel log-determinants; stable for huge period maps."""
        m = self.factors.shape[-1]
        sign, ld = np.linalg.slogdet(self.factors)
        return (np.sum(ld + np.log(sign.astype(complex)), axis=-1)
                + m * self.logs.sum(axis=-1))

    def inverse_factors(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.inv(self.factors), -self.logs

    def inverse_matrix(self) -> np.ndarray:
        inv, logs = self.inverse_factors()
        batch = inv.shape[:-3]
        m = inv.shape[-1]
        x = np.broadcast_to(np.eye(m, dtype=inv.dtype), batch + (m, m)).copy()
        log = np.zeros(batch)
        for p in range(self.n_panels):
            x = x @ inv[..., p, :, :]
            scale = np.abs(x).max(axis=(-2, -1))
            x = x / scale[..., None, None]
            log = log + np.log(scale)
        return x * np.exp(log + logs.sum(axis=-1))[..., None, None]


def integrate_panels(a_samples: np.ndarray, steps: int | None = None,
                     n_panels: int = 16) -> PanelFactorization:
    """Integrate X' = A X over [0, 2pi] as a product of panel maps."""
    a = np.asarray(a_samples)
    n_theta = a.shape[-3]
    if steps is None:
        steps = 8 * n_theta
    steps = int(np.ceil(steps / n_panels)) * n_panels
    stages = _stage_samples(a, steps)  # (..., 2*steps+1, m, m)
    sub = steps // n_panels
    m = a.shape[-1]
    batch = a.shape[:-3]
    h = TAU / steps
    factors = np.empty(batch + (n_panels, m, m), dtype=complex)
    logs = np.zeros(batch + (n_panels,))
    for p in range(n_panels):
        seg = stages[..., 2 * sub * p: 2 * sub * (p + 1) + 1, :, :]
        eye = np.broadcast_to(np.eye(m, dtype=complex), batch + (m, m)).copy()
        x = _rk4_sweep(seg, h, eye)
        scale = np.abs(x).max(axis=(-2, -1))
        factors[..., p, :, :] = x / scale[..., None, None]
        logs[..., p] = np.log(scale)
    return PanelFactorization(factors, logs)


def matrix_log_normalized(x: np.ndarray, neutral_hint: bool = False) -> np.ndarray:
    """Logarithm M1 with exp(2pi*M1) = X and exponents in the principal strip.

    Eigenvalue branches are chosen with imaginary parts in (-1/2, 1/2]; a
    multiplier exactly on the negative real axis takes the +1/2 branch.  With
    ``neutral_hint`` the multiplier closest to 1 must be resolvable onto the
    branch containing 0, which fails on the cut.
    """
    x = np.asarray(x, dtype=complex)
    evals = np.linalg.eigvals(x)
    if np.min(np.abs(evals)) < 1e-14 * max(1.0, np.max(np.abs(evals))):
        raise SingularMatrixError("matrix has a numerically zero multiplier")
    if neutral_hint:
        neutral = evals[np.argmin(np.abs(evals - 1.0))]
        if neutral.real < 0 and abs(neutral.imag) < 1e-12 * abs(neutral):
            raise BranchCutError(
                "multiplier closest to 1 lies on the branch cut; "
                "cannot normalize the neutral exponent to 0")
    logx = sla.logm(x)
    return np.asarray(logx, dtype=complex) / TAU


@dataclass
class SchurSplit:
    """Three-way spectral splitting of a matrix at threshold c0.

    transform V satisfies M = V @ blockdiag(plus, neutral, minus) @ inv(V),
    with Re(spec) > c0 in ``plus``, |Re| <= c0 in ``neutral``, < -c0 in
    ``minus``.
    """

    plus: np.ndarray
    neutral: np.ndarray
    minus: np.ndarray
    transform: np.ndarray
    inverse: np.ndarray
    eigs: np.ndarray = field(default=None, repr=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.plus.shape[0], self.neutral.shape[0], self.minus.shape[0])

    def block_diagonal(self) -> np.ndarray:
        return sla.block_diag(self.plus, self.neutral, self.minus)

    def projector(self, which: str) -> np.ndarray:
        d1, d2, d3 = self.dims
        n = d1 + d2 + d3
        sel = np.zeros(n)
        start = {"plus": 0, "neutral": d1, "minus": d1 + d2}[which]
        size = {"plus": d1, "neutral": d2, "minus": d3}[which]
        sel[start:start + size] = 1.0
        return self.transform @ np.diag(sel) @ self.inverse


def _ordered_schur(m: np.ndarray, key) -> tuple[np.ndarray, np.ndarray, int]:
    t, z, sdim = sla.schur(m, output="complex", sort=key)
    return t, z, sdim


def ordered_schur_split(m: np.ndarray, c0: float,
                        gap_tol: float = 1e-8) -> SchurSplit:
    """Split spectrum into Re > c0, |Re| <= c0, Re < -c0 blocks.

    Raises GapViolationError when an eigenvalue sits within ``gap_tol`` of
    either threshold; similarity defect of the returned block diagonalization
    is at the 1e-10 level for well-conditioned splittings.
    """
    m = np.asarray(m, dtype=complex)
    evals = np.linalg.eigvals(m)
    if np.any(np.abs(np.abs(evals.real) - c0) < gap_tol):
        raise GapViolationError(
            "eigenvalue real part within %g of threshold %g" % (gap_tol, c0))
    # first reorder: unstable group leading
    t, z, d_plus = _ordered_schur(m, lambda lam: lam.real > c0)
    # second reorder inside the trailing block: neutral group next
    rest = t[d_plus:, d_plus:]
    if rest.size:
        t2, z2, d_neut = _ordered_schur(rest, lambda lam: abs(lam.real) <= c0)
        t = t.copy()
        t[d_plus:, d_plus:] = t2
        t[:d_plus, d_plus:] = t[:d_plus, d_plus:] @ z2
        z = z.copy()
        z[:, d_plus:] = z[:, d_plus:] @ z2
    else:
        d_neut = 0
    n = m.shape[0]
    d_minus = n - d_plus - d_neut
    # block-diagonalize the 2x2 block-triangular structure with Sylvester solves
    v = np.eye(n, dtype=complex)
    cuts = [0, d_plus, d_plus + d_neut, n]
    for i in range(2, 0, -1):
        # eliminate coupling of blocks [0:cuts[i]] x [cuts[i]:n]
        a = t[:cuts[i], :cuts[i]]
        b = t[cuts[i]:, cuts[i]:]
        c = t[:cuts[i], cuts[i]:]
        if a.size == 0 or b.size == 0:
            continue
        y = sla.solve_sylvester(a, -b, -c)
        w = np.eye(n, dtype=complex)
        w[:cuts[i], cuts[i]:] = y
        winv = np.eye(n, dtype=complex)
        winv[:cuts[i], cuts[i]:] = -y
        t = winv @ t @ w
        v = v @ w
    transform = z @ v
    inverse = np.linalg.inv(transform)
    s1, s2 = cuts[1], cuts[2]
    return SchurSplit(plus=t[:s1, :s1], neutral=t[s1:s2, s1:s2],
                      minus=t[s2:, s2:], transform=transform,
                      inverse=inverse, eigs=evals)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def lyapunov_symmetrizer(p: np.ndarray, sign: int) -> np.ndarray:
    """Positive-definite S with sym(S P) = sign * c * Id, c the spectral margin.

    Requires sign * Re(spec(P)) >= c > 0; then sign * sym(S P) >= (c/2) Id,
    which is re-verified by an eigenvalue check before returning.
    """
    p = np.asarray(p, dtype=complex)
    evals = np.linalg.eigvals(p)
    c = float(np.min(sign * evals.real))
    if c <= 0.0:
        raise SpectrumSignError("spectrum is not uniformly signed: margins %s"
                                % np.round(sign * evals.real, 6))
    q = sign * 2.0 * c * np.eye(p.shape[0], dtype=complex)
    s = sla.solve_sylvester(p.conj().T, p, q)
    s = hermitian_part(s)
    check = np.linalg.eigvalsh(sign * hermitian_part(s @ p))
    if np.min(check) < 0.5 * c - 1e-10 * max(1.0, abs(c)):
        raise SpectrumSignError("Lyapunov solve failed the margin check")
    return s


def _orthonormal_start(m: int, d: int) -> np.ndarray:
    rng = np.random.default_rng(20240517)
    q, _ = np.linalg.qr(rng.standard_normal((m, m)) / np.sqrt(m))
    return q[:, :d].astype(complex)


def _sweep_subspace(factors: np.ndarray, q: np.ndarray,
                    max_sweeps: int = 60, tol: float = 5e-14) -> np.ndarray:
    """Orthogonal iteration through the panel product until the subspace
    settles; convergence rate is the exponent gap across the split."""
    for _ in range(max_sweeps):
        prev = q
        for p in range(factors.shape[0]):
            q, _ = np.linalg.qr(factors[p] @ q)
        drift = np.linalg.norm(q @ (q.conj().T @ prev) - prev)
        if drift < tol:
            break
    return q


def _restricted_log(factors: np.ndarray, logs: np.ndarray,
                    q: np.ndarray) -> np.ndarray:
    """log(X restricted to the X-invariant subspace spanned by q) / 2pi."""
    z = q.copy()
    d = q.shape[1]
    racc = np.eye(d, dtype=complex)
    extra = 0.0
    for p in range(factors.shape[0]):
        z = factors[p] @ z
        extra += logs[p]
        z, r = np.linalg.qr(z)
        scale = np.abs(r).max()
        racc = (r / scale) @ racc
        extra += np.log(scale)
        rs = np.abs(racc).max()
        if rs > 1e100 or rs < 1e-100:
            racc /= rs
            extra += np.log(rs)
    mant = (q.conj().T @ z) @ racc
    # scalar peel keeps the principal branch per eigenvalue
    return (sla.logm(mant) + extra * np.eye(d)) / TAU


def block_split_log(panels: "PanelFactorization", multipliers: np.ndarray,
                    c0: float) -> tuple[np.ndarray, dict]:
    """Normalized logarithm of a stiff period map via invariant subspaces.

    Exponent groups are decided by ``multipliers`` (accurately known from
    characteristic-polynomial data): Re > c0 unstable, |Re| <= c0 neutral
    (at most one), Re < -c0 stable.  Subspaces come from forward/backward
    panel subspace iteration, so the construction tolerates period maps whose
    norm is far beyond 1/eps of the small multipliers.

    Returns (M1, info) with exp(2pi*M1) = X and exponents branch-normalized
    to the principal strip.
    """
    mults = np.asarray(multipliers).copy()
    tiny = np.abs(mults) < 1e-280
    mults[tiny] = 1e-280
    expo = np.log(mults) / TAU
    iu = np.where(expo.real > c0)[0]
    ic = np.where(np.abs(expo.real) <= c0)[0]
    ist = np.where(expo.real < -c0)[0]
    if len(ic) > 1:
        raise ValueError("block log supports at most one neutral multiplier, "
                         "got %d" % len(ic))
    m = panels.factors.shape[-1]
    fwd = panels.factors
    du, ds = len(iu), len(ist)
    blocks, bases = [], []
    if du:
        qu = _sweep_subspace(fwd, _orthonormal_start(m, du))
        blocks.append(_restricted_log(fwd, panels.logs, qu))
        bases.append(qu)
    if len(ic):
        qstar = mults[ic[0]]
        xinv = panels.inverse_matrix()
        _, _, vh = np.linalg.svd(np.eye(m) - qstar * xinv)
        vneu = vh.conj()[-1][:, None]
        blocks.append(np.array([[np.log(qstar) / TAU]], dtype=complex))
        bases.append(vneu)
    if ds:
        inv_f, inv_logs = panels.inverse_factors()
        bwd = inv_f[::-1]
        qs = _sweep_subspace(bwd, _orthonormal_start(m, ds))
        blocks.append(-_restricted_log(bwd, inv_logs[::-1], qs))
        bases.append(qs)
    v = np.hstack(bases)
    vinv = np.linalg.inv(v)
    m1 = v @ sla.block_diag(*blocks) @ vinv
    info = {"dims": (du, len(ic), ds), "transform": v, "inverse": vinv,
            "blocks": blocks}
    return m1, info
