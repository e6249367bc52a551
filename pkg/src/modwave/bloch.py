"""Bloch spectra, monodromy/Floquet analysis, and the periodic Evans function.

Conventions used throughout:

* Operator matrices are assembled in the solvability-friendly orientation
  omega*(d+ix i) + f'(p) - k^2 (d+i xi)^2 - eta^2, matching the linearization
  module at xi = eta = 0.  Reported spectra (``bloch_eigenvalues``, stability
  verdicts, neutral curves) are growth rates of the time dynamics, i.e. the
  negatives of the matrix eigenvalues of the xi-block, shifted by -eta^2.

* The first-order system in the fast phase reads
      V' = A(theta; lam) V,  A = [[0, I/k], [(lam I + G)/k, (omega/k^2) I]],
  whose quasi-periodic solutions at Floquet exponent i*s realize Bloch modes
  at growth rate lam.  Period maps are violently stiff (multiplier spreads
  beyond 1/eps), so all multiplier-level quantities go through
  characteristic-polynomial coefficients assembled from exterior-power
  integrations and inverse panel products, never through eig of the raw
  period map.

* Evans roots (growth rates) of D(., s) pair with matrix exponents i*s.  The
  neutral curve is reported over the spatial sideband wavenumber xi = -k*s
  together with the frame shift lam_hat = lam + i*omega*s, which is the
  orientation in which the linear coefficient equals the dispersion slope
  d omega/d k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import TAU, TorusGrid, trig_refine
from .linalg import (PanelFactorization, _rk4_sweep, block_split_log,
                     matrix_log_normalized)
from .wavetrain import WaveTrain, WaveFamily, _diff_matrix, omega_derivatives


class RootTrackingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Bloch operator matrices


def assemble_bloch(wavetrain: WaveTrain, xi: float, eta: float = 0.0) -> np.ndarray:
    """Dense Fourier matrix with (d/dtheta + i xi) shifts and -eta^2 Id."""
    grid = wavetrain.grid
    n, nt = wavetrain.system.n, grid.n_theta
    eye = np.eye(nt)
    d1_plain = _diff_matrix(nt, 1).astype(complex)
    d1 = d1_plain + 1j * xi * eye
    # expand (d/dtheta + i xi)^2 on the canonical spectral matrices so the
    # origin reproduces the linearization module exactly (Nyquist included)
    d2 = _diff_matrix(nt, 2).astype(complex) + 2j * xi * d1_plain \
        - xi ** 2 * eye
    jf = wavetrain.system.df(wavetrain.profile.values.T)
    mat = np.zeros((n * nt, n * nt), dtype=complex)
    for a in range(n):
        for b in range(n):
            blk = np.zeros((nt, nt), dtype=complex)
            if a == b:
                blk += wavetrain.omega * d1 - wavetrain.k ** 2 * d2
                blk -= eta ** 2 * eye
            blk[np.arange(nt), np.arange(nt)] += jf[:, a, b]
            mat[a * nt:(a + 1) * nt, b * nt:(b + 1) * nt] = blk
    return mat


def bloch_eigenvalues(wavetrain: WaveTrain, xi: float,
                      eta: float = 0.0) -> np.ndarray:
    """Growth rates of the linearized dynamics at Floquet number xi."""
    mat = assemble_bloch(wavetrain, xi, 0.0)
    return -np.linalg.eigvals(mat) - eta ** 2


# ---------------------------------------------------------------------------
# First-order symbol and Evans machinery


def first_order_symbol(wavetrain: WaveTrain, lam: complex,
                       n_theta: int | None = None) -> np.ndarray:
    """Samples of A(theta; lam) on an equispaced grid, shape (nt, 2n, 2n)."""
    a0, a1 = _symbol_parts(wavetrain, n_theta or wavetrain.grid.n_theta)
    return a0 + lam * a1


def _symbol_parts(wavetrain: WaveTrain, n_samples: int):
    """(A0 samples, dA/dlam); A is affine in the spectral parameter."""
    n = wavetrain.system.n
    k, omega = wavetrain.k, wavetrain.omega
    factor = max(1, int(np.ceil(n_samples / wavetrain.grid.n_theta)))
    pvals = trig_refine(wavetrain.profile.values, factor)
    if pvals.shape[-1] != n_samples:
        raise ValueError("stage count %d is not a multiple of n_theta" % n_samples)
    g = wavetrain.system.df(pvals.T)            # (nt, n, n)
    nt = g.shape[0]
    a0 = np.zeros((nt, 2 * n, 2 * n))
    a0[:, :n, n:] = np.eye(n) / k
    a0[:, n:, :n] = g / k
    a0[:, n:, n:] = (omega / k ** 2) * np.eye(n)
    a1 = np.zeros((2 * n, 2 * n))
    a1[n:, :n] = np.eye(n) / k
    return a0, a1


def _compound2_pairs(m: int):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


def _additive_compound2(a: np.ndarray) -> np.ndarray:
    """Second additive compound, batched over leading axes."""
    m = a.shape[-1]
    pairs = _compound2_pairs(m)
    np_pairs = len(pairs)
    out = np.zeros(a.shape[:-2] + (np_pairs, np_pairs), dtype=a.dtype)
    for r, (i, j) in enumerate(pairs):
        for c, (k, l) in enumerate(pairs):
            if i == k and j == l:
                out[..., r, c] = a[..., i, i] + a[..., j, j]
            elif i == k:
                out[..., r, c] = a[..., j, l]
            elif j == l:
                out[..., r, c] = a[..., i, k]
            elif j == k:
                out[..., r, c] = -a[..., i, l]
            elif i == l:
                out[..., r, c] = -a[..., j, k]
    return out


@dataclass
class EvansData:
    """Characteristic-polynomial data of period maps at a batch of rates.

    Elementary symmetric functions e_0..e_dim of the multipliers are stored
    as mantissa * exp(log); dim is the system size 2n.  Multipliers and Evans
    values derived from them keep full relative accuracy even when the period
    map itself overflows double precision conditioning.
    """

    lams: np.ndarray
    dim: int
    e_mant: np.ndarray          # (B, dim+1) complex
    e_log: np.ndarray           # (B, dim+1) real
    panels: PanelFactorization  # batched forward panels

    def evaluate_at_q(self, q) -> tuple[np.ndarray, np.ndarray]:
        """det(X - q Id) as (mantissa, log); q scalar or (B,)."""
        q = np.asarray(q, dtype=complex)
        b = self.e_mant.shape[0]
        qb = np.broadcast_to(q, (b,))
        j = np.arange(self.dim + 1)
        sign = (-1.0) ** j
        logq = np.where(np.abs(qb) > 0, np.log(np.abs(qb)), -np.inf)
        phase = np.angle(qb)
        term_log = self.e_log + (self.dim - j)[None, :] * logq[:, None]
        term_mant = (sign[None, :] * self.e_mant
                     * np.exp(1j * (self.dim - j)[None, :] * phase[:, None]))
        ref = term_log.max(axis=1)
        mant = np.sum(term_mant * np.exp(term_log - ref[:, None]), axis=1)
        return mant, ref

    def evans(self, xi: float) -> np.ndarray:
        """Plain complex Evans values det(X - e^{2 pi i xi} Id)."""
        mant, log = self.evaluate_at_q(np.exp(2j * np.pi * xi))
        return mant * np.exp(log)

    def multipliers(self) -> np.ndarray:
        """Floquet multipliers per batch entry, from balanced polynomials."""
        b = self.e_mant.shape[0]
        out = np.empty((b, self.dim), dtype=complex)
        j = np.arange(self.dim + 1)
        for i in range(b):
            # balance: substitute q = c*qhat with log c = mean exponent
            logc = self.e_log[i, -1] / self.dim
            clog = self.e_log[i] - j * logc
            coeffs = ((-1.0) ** j) * self.e_mant[i] * np.exp(clog - clog.max())
            roots = np.roots(coeffs)
            if len(roots) < self.dim:
                roots = np.concatenate([roots,
                                        np.zeros(self.dim - len(roots))])
            # multipliers beyond the floating range only matter for group
            # membership; floor them so logs stay finite
            tiny = np.abs(roots) < 1e-30
            roots[tiny] = 1e-30
            out[i] = roots * np.exp(logc)
        return out

    def exponents(self) -> np.ndarray:
        return np.log(self.multipliers()) / TAU


class EvansEngine:
    """Batched period-map integrator for one wave train.

    Precomputes stage samples of the affine symbol once; every call
    integrates the 2n system and (for 2n = 4) its second exterior power
    across a batch of spectral parameters with per-panel rescaling.  Before
    integrating, the mean exponent is gauged out and the companion blocks are
    diagonally balanced; both transforms are exactness-neutral (they shift
    the multiplier logs by a known constant and conjugate by a fixed
    diagonal) but cut the local truncation constant by more than an order of
    magnitude on stiff period maps.
    """

    def __init__(self, wavetrain: WaveTrain, steps: int | None = None,
                 n_panels: int = 16):
        self.wavetrain = wavetrain
        nt = wavetrain.grid.n_theta
        steps = steps or 8 * nt
        self.steps = int(np.ceil(steps / n_panels)) * n_panels
        self.n_panels = n_panels
        self.h = TAU / self.steps
        a0, a1 = _symbol_parts(wavetrain, 2 * self.steps)
        idx = np.arange(2 * self.steps + 1) % (2 * self.steps)
        self.a0_stages = a0[idx]
        self.a1 = a1
        self.dim = a1.shape[-1]
        n = self.dim // 2
        if self.dim == 4:
            self.c0_stages = _additive_compound2(self.a0_stages)
            self.c1 = _additive_compound2(a1)
        elif self.dim != 2:
            raise NotImplementedError(
                "characteristic-polynomial Evans data implemented for "
                "system sizes 2 and 4 only")
        # trace of A is lam-independent: exact Liouville determinant
        self.sigma = 0.5 * wavetrain.omega / wavetrain.k ** 2
        self.log_det = TAU * n * wavetrain.omega / wavetrain.k ** 2
        g = self.a0_stages[:, n:, :n] * wavetrain.k
        self.g_typ = float(np.mean(np.linalg.norm(g, axis=(-2, -1))) / np.sqrt(n))

    def _balance(self, lam_scale: float) -> np.ndarray:
        n = self.dim // 2
        delta = np.clip(np.sqrt(max(self.g_typ + lam_scale, 1e-2)), 0.3, 30.0)
        d = np.concatenate([np.ones(n), np.full(n, delta)])
        return d

    def _march(self, stages0, stage1, shift, dvec, lams, n_sub):
        b = len(lams)
        m = stages0.shape[-1]
        scale = dvec[None, :] / dvec[:, None]       # entry (i,j): d_j/d_i
        eye = np.eye(m)
        base = (stages0 - shift * eye[None]) * scale[None]
        pert = stage1 * scale
        lamc = np.asarray(lams, dtype=complex)[:, None, None]
        x = np.broadcast_to(np.eye(m, dtype=complex), (b, m, m)).copy()
        factors = np.empty((b, self.n_panels, m, m), dtype=complex)
        logs = np.zeros((b, self.n_panels))
        step_in_panel = 0
        panel = 0
        for i in range(self.steps):
            s0 = base[2 * i] + lamc * pert
            sm = base[2 * i + 1] + lamc * pert
            s1 = base[2 * i + 2] + lamc * pert
            k1 = s0 @ x
            k2 = sm @ (x + (0.5 * self.h) * k1)
            k3 = sm @ (x + (0.5 * self.h) * k2)
            k4 = s1 @ (x + self.h * k3)
            x = x + (self.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step_in_panel += 1
            if step_in_panel == n_sub:
                scl = np.abs(x).max(axis=(-2, -1))
                # undo balancing, push the gauge shift into the log
                factors[:, panel] = (x / scl[:, None, None]) / scale[None]
                logs[:, panel] = np.log(scl) + shift * n_sub * self.h
                x = np.broadcast_to(np.eye(m, dtype=complex), (b, m, m)).copy()
                panel += 1
                step_in_panel = 0
        return factors, logs

    def evans_data(self, lams) -> EvansData:
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        b = len(lams)
        n_sub = self.steps // self.n_panels
        lam_scale = float(np.median(np.abs(lams)))
        dvec = self._balance(lam_scale)
        factors, logs = self._march(self.a0_stages, self.a1, self.sigma,
                                    dvec, lams, n_sub)
        panels = PanelFactorization(factors, logs)
        xmant, xlog = panels.full()
        e = np.zeros((b, self.dim + 1), dtype=complex)
        elog = np.full((b, self.dim + 1), -np.inf)
        e[:, 0] = 1.0
        elog[:, 0] = 0.0
        tr = np.trace(xmant, axis1=-2, axis2=-1)
        e[:, 1] = tr
        elog[:, 1] = xlog
        e[:, self.dim] = 1.0
        elog[:, self.dim] = self.log_det
        if self.dim == 4:
            d2 = np.concatenate([[dvec[i] * dvec[j]]
                                 for (i, j) in _compound2_pairs(4)])
            f2, l2 = self._march(self.c0_stages, self.c1, 2.0 * self.sigma,
                                 d2, lams, n_sub)
            m2, lg2 = PanelFactorization(f2, l2).full()
            e[:, 2] = np.trace(m2, axis1=-2, axis2=-1)
            elog[:, 2] = lg2
            # dual route through tr(X^2); wins when the leading pair is
            # complex conjugate (no cancellation), as near the origin
            x2 = xmant @ xmant
            p2 = np.trace(x2, axis1=-2, axis2=-1)
            alt = 0.5 * (tr * tr - p2)
            cancel = np.abs(alt) / np.maximum(np.abs(tr) ** 2 + np.abs(p2), 1e-300)
            use_alt = cancel > 0.02
            e[use_alt, 2] = alt[use_alt]
            elog[use_alt, 2] = 2.0 * xlog[use_alt]
            xinv = panels.inverse_matrix()
            e[:, 3] = np.trace(xinv, axis1=-2, axis2=-1)
            elog[:, 3] = self.log_det
        # normalize mantissas to O(1)
        mag = np.abs(e)
        nz = mag > 0
        elog[nz] += np.log(mag[nz])
        e[nz] = e[nz] / mag[nz]
        return EvansData(lams=lams, dim=self.dim, e_mant=e, e_log=elog,
                         panels=panels)

    def neutral_exponents(self, lams, predicted=None) -> np.ndarray:
        """Floquet exponent continuing the translation branch, per lam."""
        data = self.evans_data(lams)
        mults = data.multipliers()
        if predicted is None:
            predicted = np.zeros(len(data.lams), dtype=complex)
        pred = np.asarray(predicted, dtype=complex)
        pred = np.clip(pred.real, -12.0, 12.0) + 1j * pred.imag
        target = np.exp(TAU * pred)
        pick = np.argmin(np.abs(mults - target[:, None]), axis=1)
        chosen = mults[np.arange(len(pick)), pick]
        return np.log(chosen) / TAU


@dataclass
class MonodromyRecord:
    k: float
    lam: complex
    X: np.ndarray
    M1: np.ndarray
    multipliers: np.ndarray
    branch: dict = field(default_factory=dict)


def monodromy(wavetrain: WaveTrain, lam: complex, steps: int | None = None,
              n_panels: int = 16) -> MonodromyRecord:
    """Period map and branch-normalized logarithm at one spectral parameter.

    Tame period maps take the direct matrix logarithm; stiff ones are split
    into invariant subspaces from the panel product first.
    """
    engine = EvansEngine(wavetrain, steps=steps, n_panels=n_panels)
    data = engine.evans_data([lam])
    mults = data.multipliers()[0]
    xmant, xlog = data.panels.full()
    x = xmant[0] * np.exp(min(xlog[0], 700.0))
    stiffness = np.log(np.abs(mults).max()) - np.log(np.abs(mults).min())
    if stiffness < 18.0:
        m1 = matrix_log_normalized(x, neutral_hint=abs(lam) < 1e-8)
        branch = {"method": "direct", "stiffness": float(stiffness)}
    else:
        expo = np.log(mults) / TAU
        re_sorted = np.sort(np.abs(expo.real))
        c0 = 0.5 * re_sorted[0] + 0.25 * re_sorted[1] if len(re_sorted) > 1 \
            else 0.5
        single = PanelFactorization(data.panels.factors[0],
                                    data.panels.logs[0])
        m1, info = block_split_log(single, mults, c0=max(c0, 1e-6))
        branch = {"method": "split", "stiffness": float(stiffness),
                  "dims": info["dims"]}
    return MonodromyRecord(k=wavetrain.k, lam=complex(lam), X=x, M1=m1,
                           multipliers=mults, branch=branch)


def evans(wavetrain: WaveTrain, lam: complex, xi: float,
          steps: int | None = None) -> complex:
    """det(X(2pi) - e^{2 pi i xi} Id) at growth rate lam."""
    engine = EvansEngine(wavetrain, steps=steps)
    return complex(engine.evans_data([lam]).evans(xi)[0])


# ---------------------------------------------------------------------------
# Root counting and location (argument principle on rectangles)


def _winding(engine: EvansEngine, xi: float, corners, n_side: int = 64,
             max_refine: int = 12, small_tol: float = 1e-3):
    """Winding number of D(., xi) along a rectangle, with adaptive refinement.

    Refines segments until adjacent phases differ by < pi/2; bails out when
    |D| dips below small_tol * scale, signalling a root too close to the
    contour (caller shrinks or shifts the rectangle).
    """
    (x0, x1), (y0, y1) = corners
    path = np.concatenate([
        x0 + np.linspace(0, 1, n_side, endpoint=False) * (x1 - x0) + 1j * y0,
        x1 + 1j * (y0 + np.linspace(0, 1, n_side, endpoint=False) * (y1 - y0)),
        x1 - np.linspace(0, 1, n_side, endpoint=False) * (x1 - x0) + 1j * y1,
        x0 + 1j * (y1 - np.linspace(0, 1, n_side, endpoint=False) * (y1 - y0)),
    ])
    vals = engine.evans_data(path).evans(xi)
    scale = np.median(np.abs(vals))
    for _ in range(max_refine):
        nxt = np.roll(path, -1)
        dphi = np.angle(np.roll(vals, -1) / vals)
        bad = np.abs(dphi) > 0.5 * np.pi
        if not bad.any():
            break
        mids = 0.5 * (path[bad] + nxt[bad])
        mvals = engine.evans_data(mids).evans(xi)
        order = np.argsort(np.concatenate([np.where(bad)[0] + 0.5,
                                           np.arange(len(path))]))
        path = np.concatenate([mids, path])[order]
        vals = np.concatenate([mvals, vals])[order]
    if np.min(np.abs(vals)) < small_tol * scale:
        raise RootTrackingError("contour passes too close to a root")
    total = np.sum(np.angle(np.roll(vals, -1) / vals))
    return int(np.rint(total / TAU))


def locate_evans_roots(wavetrain: WaveTrain, xi: float, radius: float = 0.5,
                       steps: int | None = None, tol: float = 1e-10,
                       seeds=None) -> list:
    """Roots of D(., xi) inside |lam| <= radius, with multiplicity.

    The outer argument-principle count fixes the number of roots; batched
    Newton iteration from a seed lattice locates them, and a small winding
    circle around each distinct root certifies the multiplicity.  The list
    repeats multiple roots; a count mismatch raises.
    """
    engine = EvansEngine(wavetrain, steps=steps or 16 * wavetrain.grid.n_theta)
    count_engine = EvansEngine(wavetrain, steps=max(1024, 8 * wavetrain.grid.n_theta))

    def outer_count():
        for shrink in (0.0, 3e-3, -2.5e-3, 7e-3):
            r = radius + shrink
            corners = ((-r, r), (-r, r))
            try:
                return _winding(count_engine, xi, corners)
            except RootTrackingError:
                continue
        raise RootTrackingError("could not find a clean outer contour")

    n_total = outer_count()
    if n_total == 0:
        return []
    rounds = [0, 7, 11, 15] if seeds is not None else [7, 11, 15]
    for grid_n in rounds:
        if grid_n:
            t = np.linspace(-radius, radius, grid_n)
            xx, yy = np.meshgrid(t, t)
            pts = (xx + 1j * yy).ravel()
            if seeds is not None:
                pts = np.concatenate([np.asarray(seeds, dtype=complex), pts])
        else:
            pts = np.asarray(seeds, dtype=complex)
        pts = pts[np.abs(pts) <= radius * 1.02 + 0.01]
        polished = _newton_polish_batch(engine, xi, pts, tol)
        good = polished[np.abs(polished) <= radius + 1e-7]
        distinct = []
        for lam in good:
            if not any(abs(lam - d) < 5e-6 for d in distinct):
                distinct.append(lam)
        roots = []
        for lam in distinct:
            mult = _circle_count(count_engine, xi, lam, 2e-3)
            roots.extend([lam] * mult)
        if len(roots) == n_total:
            return roots
    raise RootTrackingError(
        "located %d roots but the winding count gives %d" % (len(roots), n_total))


def _circle_count(engine: EvansEngine, xi: float, center: complex,
                  rad: float, n_pts: int = 32) -> int:
    for attempt in range(5):
        path = center + rad * np.exp(2j * np.pi * np.arange(n_pts) / n_pts)
        vals = engine.evans_data(path).evans(xi)
        dphi = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(dphi)) < 0.5 * np.pi:
            return int(np.rint(np.sum(dphi) / TAU))
        n_pts *= 2
        rad *= 0.7
    raise RootTrackingError("multiplicity circle did not resolve at %s" % center)


def _newton_polish_batch(engine: EvansEngine, xi: float, seeds: np.ndarray,
                         tol: float, max_iter: int = 30) -> np.ndarray:
    lam = np.asarray(seeds, dtype=complex).copy()
    q = np.exp(2j * np.pi * xi)
    h = 1e-7
    active = np.ones(len(lam), dtype=bool)
    for _ in range(max_iter):
        batch = np.concatenate([lam[active], lam[active] + h, lam[active] - h])
        mant, log = engine.evans_data(batch).evaluate_at_q(q)
        k = active.sum()
        ref = log.reshape(3, k).max(axis=0)
        vals = (mant * np.exp(log - np.tile(ref, 3))).reshape(3, k)
        dd = (vals[1] - vals[2]) / (2 * h)
        step = np.where(dd != 0, vals[0] / np.where(dd != 0, dd, 1.0), 0.0)
        # keep Newton from running away; far seeds just get dropped later
        step = np.where(np.abs(step) > 0.3, step * (0.3 / np.abs(step)), step)
        lam[active] = lam[active] - step
        still = np.abs(step) > tol
        idx = np.where(active)[0]
        active[idx[~still]] = False
        if not active.any():
            break
    return lam[~np.isnan(lam)]


def _newton_polish(engine: EvansEngine, xi: float, lam0: complex,
                   tol: float, max_iter: int = 40) -> complex:
    lam = complex(lam0)
    h = 1e-7
    for _ in range(max_iter):
        data = engine.evans_data([lam, lam + h, lam - h])
        mant, log = data.evaluate_at_q(np.exp(2j * np.pi * xi))
        ref = log.max()
        vals = mant * np.exp(log - ref)
        dd = (vals[1] - vals[2]) / (2 * h)
        if dd == 0:
            break
        step = vals[0] / dd
        lam = lam - step
        if abs(step) < tol:
            break
    return lam


# ---------------------------------------------------------------------------
# Neutral branch model and the sideband curve


@dataclass
class NeutralBranchModel:
    """Polynomial model of the neutral Floquet exponent on a disk of rates."""

    k: float
    omega: float
    radius: float
    coeffs: np.ndarray          # mu(lam) ~ sum coeffs[j] lam^j, coeffs[0] ~ 0
    fit_residual: float

    @classmethod
    def build(cls, wavetrain: WaveTrain, radius: float = 0.3,
              degree: int = 14, engine: EvansEngine | None = None):
        engine = engine or EvansEngine(wavetrain,
                                       steps=16 * wavetrain.grid.n_theta)
        # bootstrap outward so root selection can follow the branch
        rings = [0.05 * radius, 0.15 * radius, 0.35 * radius,
                 0.65 * radius, 1.0 * radius]
        lams = [np.array([0.0 + 0.0j])]
        for r in rings:
            lams.append(r * np.exp(2j * np.pi * np.arange(16) / 16))
        lams = np.concatenate(lams)
        coeffs = np.zeros(2, dtype=complex)
        mus = np.zeros(len(lams), dtype=complex)
        done = 1
        mus[0] = engine.neutral_exponents([0.0])[0]
        for i, r in enumerate(rings):
            sel = slice(1 + 16 * i, 1 + 16 * (i + 1))
            pred = np.polyval(coeffs[::-1], lams[sel])
            mus[sel] = engine.neutral_exponents(lams[sel], predicted=pred)
            done = sel.stop
            deg = min(degree, max(2, 2 + 3 * i))
            van = np.vander(lams[:done], deg + 1, increasing=True)
            coeffs, *_ = np.linalg.lstsq(van, mus[:done], rcond=None)
        van = np.vander(lams, len(coeffs), increasing=True)
        resid = float(np.max(np.abs(van @ coeffs - mus)))
        return cls(k=wavetrain.k, omega=wavetrain.omega, radius=radius,
                   coeffs=coeffs, fit_residual=resid)

    def mu(self, lam):
        return np.polyval(self.coeffs[::-1], np.asarray(lam, dtype=complex))

    def lab_rate_poly(self, lam_hat: complex) -> np.ndarray:
        """Coefficients of lam + omega*mu(lam) - lam_hat, ascending order."""
        p = self.omega * self.coeffs.copy()
        p[1] += 1.0
        p[0] -= lam_hat
        return p

    def lab_roots(self, lam_hat: complex, keep: float = 0.7) -> np.ndarray:
        """Rates lam with lam + omega*mu(lam) = lam_hat, inside the disk."""
        p = self.lab_rate_poly(lam_hat)
        roots = np.roots(p[::-1])
        return roots[np.abs(roots) <= keep * self.radius]


@dataclass
class NeutralCurve:
    k: float
    xi: np.ndarray              # spatial sideband wavenumbers
    lam: np.ndarray             # frame-shifted curve samples
    floquet_s: np.ndarray       # raw Floquet numbers tracked
    lam_comoving: np.ndarray
    omega_prime_fit: float
    b_fit: float
    fit_coeffs: np.ndarray
    fit_residual: float


def neutral_curve(wavetrain: WaveTrain, xi_max: float = 0.1,
                  n_samples: int = 41, steps: int | None = None,
                  max_step_residual: float = 1e-6) -> NeutralCurve:
    """Track the spectral curve through the translation eigenvalue.

    Roots are seeded from a polynomial model of the neutral exponent and
    polished by batched Newton iteration on the Evans function; the model
    also guards branch selection.  The curve is reported over the spatial
    wavenumber xi = -k*s with the frame shift lam + i*omega*s applied, and
    fitted as -i*w1*xi - b*xi^2 (+ higher corrections).
    """
    engine = EvansEngine(wavetrain,
                         steps=steps or max(2048, 16 * wavetrain.grid.n_theta))
    k, omega = wavetrain.k, wavetrain.omega
    model = NeutralBranchModel.build(
        wavetrain, radius=min(0.45, 2.2 * xi_max / k * abs(omega) + 0.05),
        engine=engine)
    xi = np.linspace(-xi_max, xi_max, n_samples)
    s = -xi / k
    # seed: invert mu(lam) = i s with the polynomial model
    lam = np.empty(n_samples, dtype=complex)
    for idx, sval in enumerate(s):
        p = model.coeffs.copy()
        p[0] -= 1j * sval
        roots = np.roots(p[::-1])
        roots = roots[np.abs(roots) <= model.radius]
        lam[idx] = roots[np.argmin(np.abs(roots))] if len(roots) else 0.0
    # batched Newton polish on the exact Evans function
    target = np.exp(2j * np.pi * s)
    h = 1e-7
    for _ in range(4):
        batch = np.concatenate([lam, lam + h, lam - h])
        mults = engine.evans_data(batch).multipliers()
        pred = np.exp(TAU * model.mu(batch))
        pick = np.argmin(np.abs(mults - pred[:, None]), axis=1)
        q = mults[np.arange(len(batch)), pick].reshape(3, n_samples)
        g = q[0] - target
        dg = (q[1] - q[2]) / (2 * h)
        step = g / dg
        lam = lam - step
        if np.max(np.abs(step)) < 1e-13:
            break
    final_mults = engine.evans_data(lam).multipliers()
    pred = np.exp(TAU * model.mu(lam))
    pick = np.argmin(np.abs(final_mults - pred[:, None]), axis=1)
    got = final_mults[np.arange(n_samples), pick]
    worst = float(np.max(np.abs(got - target)))
    if worst > max_step_residual:
        raise RootTrackingError(
            "neutral branch tracking left residual %.2e; "
            "root likely jumped branches" % worst)
    lam_hat = lam + 1j * omega * s
    van = np.vander(xi, 5, increasing=True)[:, 1:]   # xi .. xi^4, no constant
    coeffs, *_ = np.linalg.lstsq(van, lam_hat, rcond=None)
    fit_res = float(np.max(np.abs(van @ coeffs - lam_hat)))
    omega_prime_fit = float(-coeffs[0].imag)
    b_fit = float(-coeffs[1].real)
    return NeutralCurve(k=k, xi=xi, lam=lam_hat, floquet_s=s,
                        lam_comoving=lam, omega_prime_fit=omega_prime_fit,
                        b_fit=b_fit, fit_coeffs=coeffs, fit_residual=fit_res)


# ---------------------------------------------------------------------------
# Stability verdict and dispersion cross-checks


@dataclass
class StabilityVerdict:
    transversal: bool
    condition_i: bool
    condition_ii: bool
    margin_c: float
    failing: list
    details: dict

    @property
    def stable(self) -> bool:
        return self.transversal and self.condition_i and self.condition_ii


def verify_diffusive_stability(wavetrain: WaveTrain,
                               xi_grid=None, eta_grid=(0.0,),
                               imag_axis_tol: float = 1e-6,
                               zero_tol: float = 1e-7) -> StabilityVerdict:
    """Grid verification of the diffusive spectral stability conditions.

    Condition (i): at xi = eta = 0 the only spectrum near the imaginary axis
    is the simple translation eigenvalue at 0.  Condition (ii): on the grid,
    growth rates satisfy Re <= -c (xi^2 + eta^2) for a fitted margin c > 0.
    """
    from .wavetrain import check_transversality
    if xi_grid is None:
        xi_grid = np.concatenate([np.linspace(-0.5, 0.5, 41),
                                  np.array([-0.02, -0.01, 0.01, 0.02])])
        xi_grid = np.unique(np.round(xi_grid, 12))
    trans = check_transversality(wavetrain)
    lam0 = bloch_eigenvalues(wavetrain, 0.0)
    near_axis = np.abs(lam0.real) <= imag_axis_tol
    zero_like = np.abs(lam0) < zero_tol
    cond_i = bool(zero_like.sum() == 1 and (near_axis & ~zero_like).sum() == 0)
    c_vals = []
    failing = []
    for eta in eta_grid:
        for xi in xi_grid:
            w2 = xi ** 2 + eta ** 2
            if w2 < 1e-14:
                continue
            worst = float(np.max(bloch_eigenvalues(wavetrain, xi, eta).real))
            if worst > 1e-10:
                failing.append({"xi": float(xi), "eta": float(eta),
                                "max_re": worst})
            c_vals.append(-worst / w2)
    margin = float(min(c_vals)) if c_vals else np.nan
    cond_ii = bool(len(failing) == 0 and margin > 0)
    return StabilityVerdict(transversal=bool(trans["simple"]),
                            condition_i=cond_i, condition_ii=cond_ii,
                            margin_c=margin, failing=failing,
                            details={"transversality": trans})


def whitham_flux_check(family: WaveFamily, k: float,
                       xi_max: float = 0.08) -> dict:
    """Cross-validate the dispersion slope from the spectral curve against
    the continuation derivative."""
    wt = family.member_at(k)
    curve = neutral_curve(wt, xi_max=xi_max)
    d_cont, dd_cont = omega_derivatives(family, k)
    return {"k": k,
            "omega_prime_evans": curve.omega_prime_fit,
            "omega_prime_family": d_cont,
            "difference": abs(curve.omega_prime_fit - d_cont),
            "b_fit": curve.b_fit,
            "omega_second_family": dd_cont}


# ---------------------------------------------------------------------------
# CSV / JSON emission


def spectra_to_csv(wavetrain: WaveTrain, xi_grid, eta_grid, path) -> None:
    rows = ["xi,eta,re_lambda,im_lambda"]
    for eta in eta_grid:
        for xi in xi_grid:
            for lam in np.sort_complex(bloch_eigenvalues(wavetrain, xi, eta)):
                rows.append("%.12g,%.12g,%.17g,%.17g"
                            % (xi, eta, lam.real, lam.imag))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def neutral_curve_to_csv(curve: NeutralCurve, path) -> None:
    rows = ["xi,re_lambda,im_lambda"]
    for x, l in zip(curve.xi, curve.lam):
        rows.append("%.12g,%.17g,%.17g" % (x, l.real, l.imag))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
