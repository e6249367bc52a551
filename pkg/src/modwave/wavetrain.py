"""Profile solves and continuation in the wavenumber.

The profile equation  omega * p' + f(p) = k^2 p''  is discretized by Fourier
collocation and solved by a bordered Newton iteration in (p, omega) with the
integral phase condition <p - p_ref, p_ref'> = 0.  Continuation marches in k
with step halving; families interpolate omega(k) and the profile in k, with
an optional Chebyshev re-solve table when spectral accuracy in k is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import TAU, TorusGrid, PeriodicField, spectral_derivative, quad_inner
from .systems import ReactionSystem, analytic_wavetrain


class ProfileConvergenceError(RuntimeError):
    pass


class TrivialSolutionError(RuntimeError):
    pass


class StepUnderflowError(RuntimeError):
    """Continuation step control failed; carries the last good wavenumber."""

    def __init__(self, message, last_k=None):
        super().__init__(message)
        self.last_k = last_k


@dataclass
class WaveTrain:
    k: float
    omega: float
    profile: PeriodicField
    system: ReactionSystem
    residual: float = np.nan
    phase_defect: float = np.nan

    @property
    def grid(self) -> TorusGrid:
        return self.profile.grid

    def dtheta_profile(self) -> np.ndarray:
        return self.profile.deriv(1).values

    def r0(self) -> float:
        """Maximum pointwise amplitude of the profile."""
        return float(np.max(np.linalg.norm(self.profile.values, axis=0)))


def profile_residual(system, k, omega, values) -> np.ndarray:
    return (omega * spectral_derivative(values, 1)
            + system.f(values.T).T
            - k * k * spectral_derivative(values, 2))


def _diff_matrix(n_theta: int, order: int) -> np.ndarray:
    eye = np.eye(n_theta)
    return spectral_derivative(eye, order, axis=0)


def solve_profile(system: ReactionSystem, k: float, guess: PeriodicField,
                  omega_guess: float, p_ref: PeriodicField | None = None,
                  tol: float = 1e-11, max_iter: int = 50) -> WaveTrain:
    """Newton solve of the collocation profile system at fixed k.

    Unknowns are the profile values and omega; the phase condition pins the
    translation against ``p_ref`` (the guess by default).  Converged constant
    states are rejected: the wave train must be nontrivial.
    """
    if k == 0.0:
        raise ValueError("k = 0 is a singular limit, not solvable here")
    grid = guess.grid
    n, nt = system.n, grid.n_theta
    if p_ref is None:
        p_ref = guess
    dref = p_ref.deriv(1).values
    w = grid.spacing

    d1 = _diff_matrix(nt, 1)
    d2 = _diff_matrix(nt, 2)

    p = guess.values.astype(float).copy()
    omega = float(omega_guess)
    size = n * nt
    for _ in range(max_iter):
        res = profile_residual(system, k, omega, p)
        phase = w * np.sum((p - p_ref.values) * dref)
        rnorm = max(np.max(np.abs(res)), abs(phase))
        if rnorm < tol:
            dp_norm = np.max(np.abs(spectral_derivative(p, 1)))
            if dp_norm <= 1e-6:
                raise TrivialSolutionError(
                    "Newton converged to a constant state at k=%g" % k)
            fld = PeriodicField(grid, p)
            return WaveTrain(k=float(k), omega=omega, profile=fld,
                             system=system, residual=float(np.max(np.abs(res))),
                             phase_defect=abs(phase))
        jac = np.zeros((size + 1, size + 1))
        jf = system.df(p.T)  # (nt, n, n)
        for a in range(n):
            for b in range(n):
                blk = np.zeros((nt, nt))
                if a == b:
                    blk += omega * d1 - k * k * d2
                blk[np.arange(nt), np.arange(nt)] += jf[:, a, b]
                jac[a * nt:(a + 1) * nt, b * nt:(b + 1) * nt] = blk
        jac[:size, size] = spectral_derivative(p, 1).reshape(size)
        jac[size, :size] = (w * dref).reshape(size)
        rhs = np.concatenate([res.reshape(size), [phase]])
        try:
            delta = np.linalg.solve(jac, -rhs)
        except np.linalg.LinAlgError as exc:
            raise ProfileConvergenceError("singular Newton system: %s" % exc)
        p = p + delta[:size].reshape(n, nt)
        omega += delta[size]
        if not np.isfinite(p).all() or abs(omega) > 1e6:
            raise ProfileConvergenceError("Newton iteration diverged at k=%g" % k)
    raise ProfileConvergenceError(
        "no convergence after %d iterations at k=%g" % (max_iter, k))


@dataclass
class WaveFamily:
    system: ReactionSystem
    k_samples: np.ndarray
    members: list
    _omega_spline: CubicSpline = field(default=None, repr=False)
    _table: "FamilyTable" = field(default=None, repr=False)

    def __post_init__(self):
        self.k_samples = np.asarray(self.k_samples, dtype=float)
        if self._omega_spline is None:
            om = np.array([wt.omega for wt in self.members])
            self._omega_spline = CubicSpline(self.k_samples, om)

    @property
    def k_min(self) -> float:
        return float(self.k_samples[0])

    @property
    def k_max(self) -> float:
        return float(self.k_samples[-1])

    def omega(self, k):
        return self._omega_spline(k)

    def member_at(self, k: float) -> WaveTrain:
        """Re-solve at k, seeded from the nearest stored member."""
        i = int(np.argmin(np.abs(self.k_samples - k)))
        wt = self.members[i]
        return solve_profile(self.system, k, wt.profile, wt.omega,
                             p_ref=wt.profile)

    def table(self, n_nodes: int = 33) -> "FamilyTable":
        if self._table is None or self._table.n_nodes != n_nodes:
            self._table = FamilyTable.build(self, n_nodes)
        return self._table


def continue_family(system: ReactionSystem, k_min: float, k_max: float,
                    n_steps: int, seed: WaveTrain | None = None,
                    grid: TorusGrid | None = None,
                    max_profile_jump: float = 0.2) -> WaveFamily:
    """March the profile solve across [k_min, k_max].

    ``n_steps`` counts continuation intervals, so the family holds n_steps+1
    samples.  Newton failure or an over-large profile jump halves the step;
    underflow below 1e-5 aborts with the last good wavenumber.
    """
    if not (0.0 < k_min < k_max):
        raise ValueError("need 0 < k_min < k_max")
    grid = grid or TorusGrid(64)
    if seed is None:
        aw = analytic_wavetrain(system, k_min)
        seed = solve_profile(system, k_min, aw.profile(grid), aw.omega)
    targets = np.linspace(k_min, k_max, n_steps + 1)
    members = [seed]
    current = seed
    for k_target in targets[1:]:
        k_here = current.k
        step = k_target - k_here
        while True:
            k_try = k_here + step
            try:
                nxt = solve_profile(system, k_try, current.profile,
                                    current.omega, p_ref=current.profile)
                jump = np.max(np.abs(nxt.profile.values - current.profile.values))
                if jump > max_profile_jump:
                    raise ProfileConvergenceError("profile jump %g too large" % jump)
            except (ProfileConvergenceError, TrivialSolutionError):
                step *= 0.5
                if abs(step) < 1e-5:
                    raise StepUnderflowError(
                        "continuation fold or failure near k=%g" % k_here,
                        last_k=k_here)
                continue
            current = nxt
            k_here = k_try
            if abs(k_here - k_target) < 1e-12:
                break
            step = k_target - k_here
        members.append(current)
    return WaveFamily(system, targets, members)


@dataclass
class FamilyTable:
    """Chebyshev re-solve of a family for spectrally accurate k-interpolation.

    Profiles, frequency and the adjoint-null field are solved at Chebyshev
    nodes, so evaluation anywhere in the k-range (and k-derivatives) carries
    machine-level accuracy for analytic families.
    """

    k_lo: float
    k_hi: float
    n_nodes: int
    cheb_p: np.ndarray       # (n_nodes, n, n_theta) Chebyshev coefficients
    cheb_h: np.ndarray
    cheb_omega: np.ndarray   # (n_nodes,)
    grid: TorusGrid
    system: ReactionSystem

    @staticmethod
    def build(family: WaveFamily, n_nodes: int = 33) -> "FamilyTable":
        from .fredholm import assemble_L, adjoint_null
        k_lo, k_hi = family.k_min, family.k_max
        x = np.cos(np.pi * np.arange(n_nodes) / (n_nodes - 1))  # Lobatto nodes
        ks = 0.5 * (k_lo + k_hi) + 0.5 * (k_hi - k_lo) * x
        grid = family.members[0].grid
        prof = np.empty((n_nodes, family.system.n, grid.n_theta))
        hs = np.empty_like(prof)
        oms = np.empty(n_nodes)
        for i, k in enumerate(ks):
            wt = family.member_at(float(k))
            prof[i] = wt.profile.values
            oms[i] = wt.omega
            hs[i] = adjoint_null(assemble_L(wt)).h.values
        return FamilyTable(k_lo, k_hi, n_nodes,
                           _cheb_coeffs(prof), _cheb_coeffs(hs),
                           _cheb_coeffs(oms), grid, family.system)

    def _x(self, k):
        return (2.0 * np.asarray(k) - (self.k_lo + self.k_hi)) / (self.k_hi - self.k_lo)

    def profile(self, k):
        return _cheb_eval(self.cheb_p, self._x(k))

    def dk_profile(self, k):
        return _cheb_eval(_cheb_derivative(self.cheb_p), self._x(k)) \
            * (2.0 / (self.k_hi - self.k_lo))

    def adjoint(self, k):
        return _cheb_eval(self.cheb_h, self._x(k))

    def omega(self, k):
        return _cheb_eval(self.cheb_omega, self._x(k))

    def domega(self, k):
        return _cheb_eval(_cheb_derivative(self.cheb_omega), self._x(k)) \
            * (2.0 / (self.k_hi - self.k_lo))


def _cheb_coeffs(values_at_lobatto: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients from values at Lobatto nodes (first kind fit)."""
    v = np.asarray(values_at_lobatto, dtype=float)
    n = v.shape[0]
    j = np.arange(n)
    theta = np.pi * j / (n - 1)
    basis = np.cos(np.outer(j, theta)).T  # (node, mode)
    coeffs = np.linalg.solve(basis, v.reshape(n, -1))
    return coeffs.reshape(v.shape)


def _cheb_eval(coeffs: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    n = coeffs.shape[0]
    tk = np.cos(np.arange(n)[:, None] * np.arccos(np.clip(x.ravel(), -1, 1))[None, :])
    flat = coeffs.reshape(n, -1)
    out = tk.T @ flat
    shape = x.shape + coeffs.shape[1:]
    return out.reshape(shape) if shape else float(out)


def _cheb_derivative(coeffs: np.ndarray) -> np.ndarray:
    c = coeffs.reshape(coeffs.shape[0], -1)
    n = c.shape[0]
    d = np.zeros_like(c)
    for j in range(n - 2, -1, -1):
        d[j] = (d[j + 2] if j + 2 < n else 0.0) + 2.0 * (j + 1) * c[j + 1]
    d[0] *= 0.5
    return d.reshape(coeffs.shape)


def check_transversality(wavetrain: WaveTrain,
                         zero_tol: float = 1e-7, gap_tol: float = 1e-3):
    """Simplicity check of the zero eigenvalue of the linearization."""
    from .fredholm import assemble_L
    L = assemble_L(wavetrain)
    return transversality_from_matrix(L.matrix, L.kernel_vector(), zero_tol, gap_tol)


def transversality_from_matrix(mat: np.ndarray, dtheta_p: np.ndarray,
                               zero_tol: float = 1e-7, gap_tol: float = 1e-3) -> dict:
    evals, evecs = np.linalg.eig(mat)
    order = np.argsort(np.abs(evals))
    zero_eig = evals[order[0]]
    gap = float(np.abs(evals[order[1]]))
    n_small = int(np.sum(np.abs(evals) < zero_tol))
    vec = evecs[:, order[0]]
    ref = dtheta_p / np.linalg.norm(dtheta_p)
    cosang = abs(np.vdot(vec, ref)) / np.linalg.norm(vec)
    angle = float(np.arccos(min(1.0, cosang)))
    return {"simple": n_small == 1 and gap > gap_tol,
            "zero_eig": complex(zero_eig),
            "gap": gap,
            "eigvec_angle": angle}


def omega_derivatives(family: WaveFamily, k: float,
                      stencil: int = 7) -> tuple[float, float]:
    """(omega'(k), omega''(k)) from a local degree-4 fit through samples."""
    ks = family.k_samples
    if not (ks[0] <= k <= ks[-1]):
        raise ValueError("k=%g outside family range [%g, %g]" % (k, ks[0], ks[-1]))
    stencil = max(5, stencil)
    i = int(np.argmin(np.abs(ks - k)))
    lo = max(0, min(i - stencil // 2, len(ks) - stencil))
    sel = slice(lo, lo + stencil)
    om = np.array([wt.omega for wt in family.members])[sel]
    coeffs = np.polyfit(ks[sel] - k, om, 4)
    return float(coeffs[-2]), float(2.0 * coeffs[-3])


def family_to_csv(family: WaveFamily, path) -> None:
    """Columns: k, omega, r0, residual, transversality gap."""
    rows = ["k,omega,r0,residual,transversality_gap"]
    for wt in family.members:
        verdict = check_transversality(wt)
        rows.append("%.17g,%.17g,%.17g,%.3e,%.6e"
                    % (wt.k, wt.omega, wt.r0(), wt.residual, verdict["gap"]))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def brusselator_family_seed(system: ReactionSystem, k: float,
                            grid: TorusGrid | None = None) -> WaveTrain:
    """Wave train of the Brusselator by homotopy in b from the onset curve.

    With identity diffusion the oscillatory onset at wavenumber k sits at
    b = 1 + a^2 + 2 k^2; marching b from just above onset to the target value
    keeps every Newton solve inside its basin.
    """
    from .systems import make_brusselator
    grid = grid or TorusGrid(64)
    a = system.parameters["a"]
    b_target = system.parameters["b"]
    b_onset = 1.0 + a * a + 2.0 * k * k
    if b_target <= b_onset:
        raise ValueError("no wave train: b=%g below onset %g at k=%g"
                         % (b_target, b_onset, k))
    db = b_target - b_onset
    b = b_onset + min(0.02, 0.2 * db)
    wt = _brusselator_small_amplitude(a, b, k, grid)
    while b < b_target - 1e-13:
        b_next = min(b_target, b + 0.05)
        sys_next = make_brusselator(a, b_next)
        wt = solve_profile(sys_next, k, wt.profile, wt.omega, p_ref=wt.profile)
        b = b_next
    wt.system = system
    return wt


def _brusselator_small_amplitude(a, b, k, grid) -> WaveTrain:
    from .systems import make_brusselator
    sys_b = make_brusselator(a, b)
    eq = np.array([a, b / a])
    jac = -sys_b.df(eq) - k * k * np.eye(2)   # dynamic Jacobian at wavenumber k
    evals, evecs = np.linalg.eig(jac)
    i = int(np.argmax(evals.real))
    om = float(abs(evals[i].imag))
    v = evecs[:, i]
    amp = 0.25 * np.sqrt(max(b - (1 + a * a + 2 * k * k), 1e-3))
    th = grid.nodes
    vals = eq[:, None] + 2.0 * amp * np.real(v[:, None] * np.exp(1j * th)[None, :])
    guess = PeriodicField(grid, vals)
    last_err = None
    for scale in (1.0, 2.0, 0.5, 4.0):
        try:
            trial = PeriodicField(grid, eq[:, None]
                                  + scale * (guess.values - eq[:, None]))
            return solve_profile(sys_b, k, trial, om, p_ref=trial)
        except (ProfileConvergenceError, TrivialSolutionError) as exc:
            last_err = exc
    raise ProfileConvergenceError(
        "Brusselator onset solve failed at k=%g, b=%g: %s" % (k, b, last_err))
