"""Phase evolution and the multi-scale corrector cascade.

The leading phase solves d_t psi = omega(d_x psi) on a periodic slow domain;
correctors are built order by order: each stage extracts the next
power-series coefficient of the governing operator applied to the composed
ansatz (by jet arithmetic, never by hand-derived formulas), enforces its
solvability by a transport equation for the phase corrector, and removes the
remainder with the partial inverse of the linearized profile operator.  The
arbiter for every sign convention is the recomputed coefficient after the
stage, which must vanish to tolerance.

Grids: slow x is periodic with spectral derivatives, the fast variable
theta rides a coarser torus grid (profiles are nearly band-limited), time is
uniform with a fixed-step 4th-order march and 6th-order finite-difference
time derivatives on stored histories.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import TAU, spectral_derivative, trig_eval
from .jets import EpsJet, jet_compose
from .wavetrain import WaveFamily, FamilyTable, _diff_matrix


class BlowupError(RuntimeError):
    pass


class CascadeError(RuntimeError):
    pass


class RangeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# slow-grid utilities


def fornberg_weights(x: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 on nodes x."""
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for k in range(mn, 0, -1):
                c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
            c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def time_derivative(arr: np.ndarray, dt: float, axis: int = 0,
                    stencil: int = 7) -> np.ndarray:
    """6th-order finite-difference time derivative along a uniform axis."""
    arr = np.moveaxis(arr, axis, 0)
    nt = arr.shape[0]
    if nt < stencil:
        raise ValueError("need at least %d time samples" % stencil)
    out = np.empty_like(arr)
    half = stencil // 2
    nodes = np.arange(stencil, dtype=float)
    for i in range(nt):
        lo = min(max(i - half, 0), nt - stencil)
        w = fornberg_weights(nodes, float(i - lo), 1) / dt
        out[i] = np.tensordot(w, arr[lo:lo + stencil], axes=(0, 0))
    return np.moveaxis(out, 0, axis)


def _lagrange_interp_t(arr: np.ndarray, t_grid: np.ndarray, tq: float,
                       npts: int = 6) -> np.ndarray:
    """Degree-(npts-1) Lagrange interpolation along axis 0 at one time."""
    nt = len(t_grid)
    i = int(np.clip(np.searchsorted(t_grid, tq) - npts // 2, 0, nt - npts))
    sel = slice(i, i + npts)
    ts = t_grid[sel]
    w = np.array([np.prod([(tq - ts[j]) / (ts[m] - ts[j])
                           for j in range(npts) if j != m])
                  for m in range(npts)])
    return np.tensordot(w, arr[sel], axes=(0, 0))


# ---------------------------------------------------------------------------
# eikonal phase


@dataclass
class ModulationField:
    length: float
    kbar: float
    x: np.ndarray               # (nx,)
    t: np.ndarray               # (nt,)
    k: np.ndarray               # (nt, nx) local wavenumber
    phi_per: np.ndarray         # (nt, nx) periodic part of psi
    omega_k: np.ndarray         # (nt, nx) omega(k)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def psi(self, it: int) -> np.ndarray:
        return self.kbar * self.x + self.phi_per[it]

    def eikonal_residual(self) -> float:
        dpsi_dt = time_derivative(self.phi_per, self.dt, axis=0)
        return float(np.max(np.abs(dpsi_dt - self.omega_k)))


def bump_profile(x: np.ndarray, length: float, amplitude: float,
                 width: float, center: float | None = None) -> np.ndarray:
    """Smooth periodic bump with exactly zero mean."""
    c = 0.5 * length if center is None else center
    conc = (length / (np.pi * width)) ** 2
    g = np.exp(conc * (np.cos(TAU * (x - c) / length) - 1.0))
    return amplitude * (g - g.mean())


def solve_eikonal(family: WaveFamily, k0: np.ndarray, length: float, t_end: float,
                  dt: float | None = None, table: FamilyTable | None = None,
                  guard_factor: float = 10.0) -> ModulationField:
    """March d_t psi = omega(d_x psi) with spectral x-derivatives.

    ``k0`` holds the initial wavenumber on an equispaced grid of [0, length);
    its mean is the reference kbar.  Aborts when the wavenumber gradient
    grows by ``guard_factor`` (incipient shock) or k exits the family range.
    """
    k0 = np.asarray(k0, dtype=float)
    nx = len(k0)
    x = length * np.arange(nx) / nx
    kbar = float(k0.mean())
    table = table or family.table()
    if k0.min() < table.k_lo or k0.max() > table.k_hi:
        raise RangeError("initial wavenumber leaves the family range")
    if dt is None:
        dt = 1.0 / 256.0
    nt = int(np.ceil(t_end / dt))
    dt = t_end / nt
    scale = TAU / length

    def dx(arr):
        return scale * spectral_derivative(arr, 1)

    # psi = kbar x + phi; phi periodic; initial phi from integrating k0 - kbar
    spec = np.fft.fft(k0 - kbar)
    m = np.fft.fftfreq(nx, 1.0 / nx)
    with np.errstate(divide="ignore", invalid="ignore"):
        ispec = np.where(m == 0, 0.0, spec / (1j * m * scale))
    phi = np.real(np.fft.ifft(ispec))

    def rhs(p):
        return table.omega(np.clip(kbar + dx(p), table.k_lo, table.k_hi))

    grad0 = float(np.max(np.abs(dx(k0))))
    phis = np.empty((nt + 1, nx))
    phis[0] = phi
    for i in range(nt):
        k1 = rhs(phi)
        k2 = rhs(phi + 0.5 * dt * k1)
        k3 = rhs(phi + 0.5 * dt * k2)
        k4 = rhs(phi + dt * k3)
        phi = phi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        phis[i + 1] = phi
        k_now = kbar + dx(phi)
        if k_now.min() < table.k_lo or k_now.max() > table.k_hi:
            raise RangeError("wavenumber left the family range at t=%g"
                             % ((i + 1) * dt))
        gradk = float(np.max(np.abs(dx(k_now))))
        if grad0 > 0 and gradk > guard_factor * grad0:
            raise BlowupError(
                "wavenumber gradient grew by %gx at t=%g; estimated blow-up "
                "time %g" % (guard_factor, (i + 1) * dt,
                             blowup_time_estimate(family, k0, length, table)))
    t = np.linspace(0.0, t_end, nt + 1)
    k = kbar + scale * spectral_derivative(phis, 1, axis=1)
    return ModulationField(length=length, kbar=kbar, x=x, t=t, k=k,
                           phi_per=phis, omega_k=table.omega(k))


def blowup_time_estimate(family: WaveFamily, k0: np.ndarray, length: float,
                         table: FamilyTable | None = None) -> float:
    """Characteristic-crossing time -1/min d_x c(k0), c = -omega'."""
    table = table or family.table()
    k0 = np.asarray(k0, dtype=float)
    nx = len(k0)
    scale = TAU / length
    c = -table.domega(k0)
    dcdx = scale * spectral_derivative(c, 1)
    mn = float(dcdx.min())
    # interpolation round-off on flat dispersions must read as "no crossing"
    if mn >= -1e-9 * max(1.0, float(np.max(np.abs(k0)))):
        return np.inf
    return -1.0 / mn


# ---------------------------------------------------------------------------
# corrector cascade


@dataclass
class ExpansionData:
    order: int
    fieldmod: ModulationField
    table: FamilyTable
    n_theta: int
    U: list                      # arrays (n, nt, nx, ntheta)
    phi: list                    # arrays (nt, nx)
    consistency: list            # per-stage recheck norms
    system: object = None

    def phases(self, it: int, eps: float, order: int | None = None) -> np.ndarray:
        """Total fast phase argument at grid time index it."""
        order = self.order if order is None else order
        psi = self.fieldmod.psi(it)
        th = psi / eps
        for p in range(min(order, len(self.phi))):
            th = th + eps ** p * self.phi[p][it]
        return th


def _resample_theta(values: np.ndarray, n_target: int, axis: int = -1) -> np.ndarray:
    """Exact Fourier truncation/refinement to n_target samples."""
    n = values.shape[axis]
    if n == n_target:
        return values
    spec = np.moveaxis(np.fft.fft(values, axis=axis), axis, -1)
    out = np.zeros(spec.shape[:-1] + (n_target,), dtype=complex)
    half = min(n, n_target) // 2
    out[..., :half] = spec[..., :half]
    out[..., -half:] = spec[..., n - half:] if n_target < n else spec[..., -half:]
    out *= n_target / n
    res = np.fft.ifft(out, axis=-1)
    res = np.moveaxis(res, -1, axis)
    return res.real if np.isrealobj(values) else res


class _CascadeWorkspace:
    """Per-build tables: profiles, adjoint fields and bordered solves at the
    slow-grid wavenumbers."""

    def __init__(self, system, table: FamilyTable, modfield: ModulationField,
                 n_theta: int):
        self.system = system
        self.table = table
        self.mf = modfield
        self.n_theta = n_theta
        self.nt, self.nx = modfield.k.shape
        k = modfield.k
        prof = table.profile(k)          # (nt, nx, n, ntheta_table)
        adj = table.adjoint(k)
        self.p0 = _resample_theta(np.moveaxis(prof, 2, 0), n_theta)  # (n,nt,nx,nth)
        self.h = _resample_theta(np.moveaxis(adj, 2, 0), n_theta)
        self.dth_p0 = spectral_derivative(self.p0, 1)
        self.d2th_p0 = spectral_derivative(self.p0, 2)
        self.omega = modfield.omega_k
        self.k = k
        self.wq = TAU / n_theta
        self.cg = 2.0 * k * self.wq * np.einsum(
            "cijt,cijt->ij", self.h, self.d2th_p0)

    def solvability_integral(self, rhs: np.ndarray) -> np.ndarray:
        """<h, rhs> over theta, shape (nt, nx)."""
        return self.wq * np.einsum("cijt,cijt->ij", self.h, rhs)

    def partial_inverse(self, rhs: np.ndarray, chunk: int = 8) -> np.ndarray:
        """Bordered solve of L(k) w = (I - Pi0) rhs at every slow point."""
        n, nt, nx, nth = rhs.shape
        size = n * nth
        d1 = _diff_matrix(nth, 1)
        d2 = _diff_matrix(nth, 2)
        coeff = self.solvability_integral(rhs)
        g = rhs - coeff[None, :, :, None] * self.dth_p0
        out = np.empty_like(rhs)
        eye = np.arange(nth)
        for lo in range(0, nt, chunk):
            hi = min(lo + chunk, nt)
            b = (hi - lo) * nx
            kf = self.k[lo:hi].reshape(b)
            om = self.omega[lo:hi].reshape(b)
            jf = self.system.df(
                np.moveaxis(self.p0[:, lo:hi], 0, -1).reshape(b, nth, n))
            mats = np.zeros((b, size + 1, size + 1))
            for a in range(n):
                for c in range(n):
                    blk = np.zeros((b, nth, nth))
                    if a == c:
                        blk += om[:, None, None] * d1 \
                            - (kf ** 2)[:, None, None] * d2
                    blk[:, eye, eye] += jf[:, :, a, c]
                    mats[:, a * nth:(a + 1) * nth, c * nth:(c + 1) * nth] = blk
            dtp = np.moveaxis(self.dth_p0[:, lo:hi], 0, 2).reshape(b, size)
            hh = np.moveaxis(self.h[:, lo:hi], 0, 2).reshape(b, size)
            mats[:, :size, size] = dtp
            mats[:, size, :size] = self.wq * hh
            rhs_b = np.concatenate(
                [np.moveaxis(g[:, lo:hi], 0, 2).reshape(b, size),
                 np.zeros((b, 1))], axis=1)
            sol = np.linalg.solve(mats, rhs_b[..., None])[..., 0]
            w = sol[:, :size].reshape(hi - lo, nx, n, nth)
            out[:, lo:hi] = np.moveaxis(w, 2, 0)
        return out


def build_expansion(family: WaveFamily, modfield: ModulationField, m: int,
                    n_theta: int = 32, table: FamilyTable | None = None,
                    consistency_tol: float = 1e-8) -> ExpansionData:
    """Construct correctors U_1..U_m and phase shifts phi_0..phi_(m-1).

    Stage n solves the transport equation
        d_t phi_n - c_g(t,x) d_x phi_n = -<h, G_n>,   phi_n(0,.) = 0,
    with c_g = 2 k <h, d2_theta p>, then removes the solvable remainder with
    the partial inverse.  The recomputed series coefficient after each stage
    is the correctness arbiter.
    """
    if not (0 <= m <= 3):
        raise ValueError("expansion order must be in 0..3")
    table = table or family.table()
    system = family.system
    ws = _CascadeWorkspace(system, table, modfield, n_theta)
    nt, nx = ws.nt, ws.nx
    n = system.n
    U = [ws.p0.copy()]
    phi = []
    consistency = []
    exp = ExpansionData(order=m, fieldmod=modfield, table=table,
                        n_theta=n_theta, U=U, phi=phi,
                        consistency=consistency, system=system)
    for stage in range(m):
        gn = _series_coefficient(exp, ws, stage + 1)
        gbar = ws.solvability_integral(gn)
        phi_n = _march_transport(ws, gbar)
        phi.append(phi_n)
        dtphi = time_derivative(phi_n, modfield.dt, axis=0)
        scale = TAU / modfield.length
        dxphi = scale * spectral_derivative(phi_n, 1, axis=1)
        bracket = (gn + dtphi[None, :, :, None] * ws.dth_p0
                   - 2.0 * ws.k[None, :, :, None] * dxphi[None, :, :, None]
                   * ws.d2th_p0)
        solv = np.max(np.abs(ws.solvability_integral(bracket)))
        if solv > 1e-6:
            raise CascadeError(
                "solvability defect %.2e at stage %d; transport solve and "
                "series coefficient disagree" % (solv, stage))
        U.append(-ws.partial_inverse(bracket))
        check = np.max(np.abs(_series_coefficient(exp, ws, stage + 1)))
        consistency.append(float(check))
        if check > consistency_tol:
            raise CascadeError(
                "stage %d coefficient recheck %.2e exceeds %.1e"
                % (stage, check, consistency_tol))
    return exp


def _march_transport(ws: _CascadeWorkspace, gbar: np.ndarray,
                     substeps: int = 4) -> np.ndarray:
    """RK4 for d_t phi = c_g d_x phi - gbar, phi(0) = 0.

    Marches on a refined internal step so the stored trajectory satisfies
    the transport equation well below the cascade consistency tolerance;
    coefficients and forcing are interpolated with degree-5 stencils.
    """
    mf = ws.mf
    nt, nx = gbar.shape
    dt = mf.dt / substeps
    scale = TAU / mf.length
    t_grid = mf.t

    def rhs(p, tq):
        cg = _lagrange_interp_t(ws.cg, t_grid, tq)
        gb = _lagrange_interp_t(gbar, t_grid, tq)
        return cg * (scale * spectral_derivative(p, 1)) - gb

    out = np.zeros((nt, nx))
    p = np.zeros(nx)
    for i in range(nt - 1):
        for ss in range(substeps):
            t0 = t_grid[i] + ss * dt
            k1 = rhs(p, t0)
            k2 = rhs(p + 0.5 * dt * k1, t0 + 0.5 * dt)
            k3 = rhs(p + 0.5 * dt * k2, t0 + 0.5 * dt)
            k4 = rhs(p + dt * k3, t0 + dt)
            p = p + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = p
    return out


def _series_coefficient(exp: ExpansionData, ws: _CascadeWorkspace,
                        order: int) -> np.ndarray:
    """Coefficient ``order`` of the governing operator on the ansatz."""
    jets = _operator_jet(exp, ws, order)
    return jets.coeffs[order]


def _operator_jet(exp: ExpansionData, ws: _CascadeWorkspace,
                  order: int) -> EpsJet:
    mf = ws.mf
    scale = TAU / mf.length
    dt = mf.dt

    def zeros_slow():
        return np.zeros((1, ws.nt, ws.nx, 1))

    def slow(arr):
        return arr[None, :, :, None]

    ju = EpsJet([exp.U[j] if j < len(exp.U)
                 else np.zeros_like(exp.U[0]) for j in range(order + 1)])
    a_t = [slow(ws.omega)]
    a_x = [slow(ws.k)]
    a_xx = [slow(scale * spectral_derivative(ws.k, 1, axis=1))]
    for p in range(order):
        if p < len(exp.phi):
            ph = exp.phi[p]
            a_t.append(slow(time_derivative(ph, dt, axis=0)))
            a_x.append(slow(scale * spectral_derivative(ph, 1, axis=1)))
            a_xx.append(slow(scale ** 2 * spectral_derivative(ph, 2, axis=1)))
        else:
            a_t.append(zeros_slow())
            a_x.append(zeros_slow())
            a_xx.append(zeros_slow())
    jat, jax_, jaxx = EpsJet(a_t), EpsJet(a_x), EpsJet(a_xx)

    def dth(c):
        return spectral_derivative(c, 1, axis=-1)

    def d2th(c):
        return spectral_derivative(c, 2, axis=-1)

    def dx(c):
        return scale * spectral_derivative(c, 1, axis=2)

    def ddt(c):
        return time_derivative(c, dt, axis=1)

    ju_th = ju.apply_linear(dth)
    f_of_u = _compose_dealiased(exp.system, ju, order)
    res = (ju.apply_linear(ddt).shift()
           + jat * ju_th
           + f_of_u
           - ju.apply_linear(lambda c: dx(dx(c))).shift(2)
           - 2.0 * (jax_ * ju_th.apply_linear(dx)).shift()
           - (jax_ * jax_) * ju.apply_linear(d2th)
           - (jaxx * ju_th).shift())
    return res.truncate(order)


def _compose_dealiased(system, ju: EpsJet, order: int, pad: int = 2) -> EpsJet:
    nth = ju.coeffs[0].shape[-1]
    fine = EpsJet([_resample_theta(c, pad * nth) for c in ju.coeffs])
    comp = jet_compose(system, fine, order=order)
    return EpsJet([_resample_theta(c, nth) for c in comp.coeffs])


# ---------------------------------------------------------------------------
# ansatz evaluation and residual measurement


def _eval_2d(values: np.ndarray, length: float, x_eval: np.ndarray,
             theta_eval: np.ndarray) -> np.ndarray:
    """Evaluate (n, nx, ntheta) samples at paired (x, theta) points."""
    n, nx, nth = values.shape
    spec = np.fft.fft2(values, axes=(1, 2)) / (nx * nth)
    mx = np.fft.fftfreq(nx, 1.0 / nx)
    mt = np.fft.fftfreq(nth, 1.0 / nth)
    phx = np.exp(1j * np.outer(x_eval, mx) * TAU / length)
    phx[:, nx // 2] = np.cos(x_eval * mx[nx // 2] * TAU / length)
    pht = np.exp(1j * np.outer(theta_eval, mt))
    pht[:, nth // 2] = np.cos(theta_eval * mt[nth // 2])
    out = np.einsum("cmj,pm,pj->cp", spec, phx, pht)
    return out.real


def _slow_eval(values: np.ndarray, length: float, x_eval: np.ndarray) -> np.ndarray:
    return trig_eval(values, TAU * x_eval / length)


def evaluate_ansatz(exp: ExpansionData, eps: float, it: int,
                    x_eval: np.ndarray, order: int | None = None) -> np.ndarray:
    """Composite field at grid time index ``it`` on arbitrary x points."""
    order = exp.order if order is None else order
    mf = exp.fieldmod
    x_eval = np.asarray(x_eval, dtype=float)
    psi = mf.kbar * x_eval + _slow_eval(mf.phi_per[it], mf.length, x_eval)
    theta = psi / eps
    for p in range(min(order, len(exp.phi))):
        theta = theta + eps ** p * _slow_eval(exp.phi[p][it], mf.length, x_eval)
    out = 0.0
    for j in range(order + 1):
        out = out + eps ** j * _eval_2d(exp.U[j][:, it], mf.length,
                                        x_eval, theta)
    return out


@dataclass
class ResidualReport:
    order: int
    eps: list
    l2: list
    hs: list
    slope_l2: float
    slope_hs: float
    s_index: int
    t_eval: float


def residual_order_study(exp: ExpansionData, eps_list, s: int = 2,
                         it: int | None = None, points_per_wave: int = 12,
                         order: int | None = None) -> ResidualReport:
    """Measure the truncation defect of the composed ansatz against eps.

    The defect is evaluated by exact chain-rule differentiation of the
    composite (spectral slow derivatives, finite-difference time stencils on
    the stored histories, trigonometric evaluation in the fast phase), never
    by differencing the fast oscillation.
    """
    order = exp.order if order is None else order
    mf = exp.fieldmod
    if it is None:
        it = (len(mf.t) - 1) // 2
    l2s, hss = [], []
    for eps in eps_list:
        r, x_eval = _residual_field(exp, float(eps), it, points_per_wave, order)
        dxv = mf.length / len(x_eval)
        l2s.append(float(np.sqrt(np.sum(np.abs(r) ** 2) * dxv)))
        from .simulate import hseps_norm
        hss.append(float(hseps_norm(r, mf.length, float(eps), s)))
    eps_arr = np.asarray(list(eps_list), dtype=float)
    slope_l2 = float(np.polyfit(np.log(eps_arr), np.log(l2s), 1)[0]) \
        if len(eps_arr) >= 3 and min(l2s) > 1e-14 else np.nan
    slope_hs = float(np.polyfit(np.log(eps_arr), np.log(hss), 1)[0]) \
        if len(eps_arr) >= 3 and min(hss) > 1e-14 else np.nan
    return ResidualReport(order=order, eps=list(map(float, eps_list)),
                          l2=l2s, hs=hss, slope_l2=slope_l2,
                          slope_hs=slope_hs, s_index=s,
                          t_eval=float(mf.t[it]))


def _residual_field(exp: ExpansionData, eps: float, it: int,
                    points_per_wave: int, order: int):
    mf = exp.fieldmod
    n_wave = mf.kbar * mf.length / (TAU * eps)
    nx_eval = int(2 ** np.ceil(np.log2(max(points_per_wave * n_wave,
                                           2 * len(mf.x)))))
    x_eval = mf.length * np.arange(nx_eval) / nx_eval
    scale = TAU / mf.length
    dt = mf.dt

    psi = mf.kbar * x_eval + _slow_eval(mf.phi_per[it], mf.length, x_eval)
    dxpsi = _slow_eval(mf.k[it], mf.length, x_eval)
    d2xpsi = _slow_eval(scale * spectral_derivative(mf.k[it], 1), mf.length,
                        x_eval)
    dtpsi = _slow_eval(mf.omega_k[it], mf.length, x_eval)

    theta = psi / eps
    dtphi_tot = np.zeros_like(x_eval)
    dxphi_tot = np.zeros_like(x_eval)
    d2xphi_tot = np.zeros_like(x_eval)
    for p in range(min(order, len(exp.phi))):
        ph = exp.phi[p]
        theta = theta + eps ** p * _slow_eval(ph[it], mf.length, x_eval)
        dtphi_tot += eps ** p * _slow_eval(
            time_derivative(ph, dt, axis=0)[it], mf.length, x_eval)
        dxphi_tot += eps ** p * _slow_eval(
            scale * spectral_derivative(ph[it], 1), mf.length, x_eval)
        d2xphi_tot += eps ** p * _slow_eval(
            scale ** 2 * spectral_derivative(ph[it], 2), mf.length, x_eval)

    at = dtpsi + eps * dtphi_tot
    ax = dxpsi + eps * dxphi_tot
    axx = d2xpsi + eps * d2xphi_tot

    n = exp.U[0].shape[0]
    u = np.zeros((n, nx_eval))
    dtu = np.zeros_like(u)
    dthu = np.zeros_like(u)
    d2thu = np.zeros_like(u)
    dxu = np.zeros_like(u)
    d2xu = np.zeros_like(u)
    dxdthu = np.zeros_like(u)
    for j in range(order + 1):
        uj = exp.U[j]
        w = eps ** j
        here = uj[:, it]
        u += w * _eval_2d(here, mf.length, x_eval, theta)
        dtu += w * _eval_2d(time_derivative(uj, dt, axis=1)[:, it],
                            mf.length, x_eval, theta)
        dthu += w * _eval_2d(spectral_derivative(here, 1, axis=-1),
                             mf.length, x_eval, theta)
        d2thu += w * _eval_2d(spectral_derivative(here, 2, axis=-1),
                              mf.length, x_eval, theta)
        dxj = scale * spectral_derivative(here, 1, axis=1)
        dxu += w * _eval_2d(dxj, mf.length, x_eval, theta)
        d2xu += w * _eval_2d(scale * spectral_derivative(dxj, 1, axis=1),
                             mf.length, x_eval, theta)
        dxdthu += w * _eval_2d(spectral_derivative(dxj, 1, axis=-1),
                               mf.length, x_eval, theta)
    fu = exp.system.f(u.T).T
    residual = (eps * dtu + at * dthu + fu
                - eps ** 2 * d2xu - 2.0 * eps * ax * dxdthu
                - ax ** 2 * d2thu - eps * axx * dthu)
    return residual, x_eval
