"""Kreiss-type symmetrizer certificates for the averaged wave-train symbol.

A certificate is a sampled-frequency proof object: Hermitian matrices S at
grid points lam = gamma + i*tau (plus transverse reductions) with
    lambda_min(sym(S @ M1)) >= c * (gamma + tau~^2 + eta^2),   c > 0,
where M1 is the branch-normalized logarithm of the period map.  Low and
medium frequency regimes split M1 into hyperbolic blocks (Lyapunov solves)
plus, at low frequencies, a neutral scalar associated with the translation
branch.

The neutral-block jet machinery works with the modulation (laboratory-frame)
spatial exponents: the phase-frame curve carries an order-one transport
coefficient omega - k*omega'(k), and only after the frame shift
lam_lab = lam + omega*mu do the exponents classify by the dispersion slope
omega'(k), with leading coefficient -1/omega' when omega' != 0 and a
square-root glancing pair when omega' = 0.  The two pictures certify the
same dynamics; the full-symbol certificates below always use the phase-frame
symbol, while the jet fits expose the dispersion-side structure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import TAU
from .linalg import (PanelFactorization, block_split_log, hermitian_part,
                     lyapunov_symmetrizer, ordered_schur_split,
                     GapViolationError, SpectrumSignError)
from .bloch import EvansEngine, NeutralBranchModel, first_order_symbol
from .wavetrain import WaveTrain, solve_profile


class ShrinkDomainError(RuntimeError):
    pass


class FitInconsistencyError(RuntimeError):
    pass


class NeutralDimensionError(RuntimeError):
    pass


class CertificateError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrequencyPoint:
    """Spectral grid point; transverse data enters only through the
    reductions tau~ = tau + drift and lam~ = lam + eta^2."""

    gamma: float
    tau: float
    eta: float = 0.0
    drift: float = 0.0

    @property
    def tau_reduced(self) -> float:
        return self.tau + self.drift

    @property
    def lam_reduced(self) -> complex:
        return complex(self.gamma + self.eta ** 2, self.tau_reduced)

    @property
    def weight(self) -> float:
        return self.gamma + self.tau_reduced ** 2 + self.eta ** 2


@dataclass
class CertificateSample:
    point: FrequencyPoint
    S: np.ndarray
    margin: float

    @property
    def weight(self) -> float:
        return self.point.weight

    @property
    def ratio(self) -> float:
        w = self.weight
        return self.margin / w if w > 0 else np.inf


@dataclass
class SymmetrizerCertificate:
    k: float
    regime: str
    case_tag: str
    c: float
    passed: bool
    min_ratio: float
    worst_point: dict
    s_norm_bound: float
    n_samples: int
    details: dict = field(default_factory=dict)
    samples: list = field(default=None, repr=False)


def low_frequency_grid(big_r: float = 10.0, n_tau: int = 41,
                       n_gamma: int = 9) -> list:
    """gamma in {0} U logspace(1e-4, 1/R), tau in +-linspace(0, 1/R)."""
    edge = 1.0 / big_r
    gammas = np.concatenate([[0.0], np.logspace(-4, np.log10(edge), n_gamma)])
    taus = np.unique(np.concatenate([-np.linspace(0, edge, n_tau),
                                     np.linspace(0, edge, n_tau)]))
    return [FrequencyPoint(g, t) for g in gammas for t in taus
            if (g, t) != (0.0, 0.0)]


def medium_frequency_grid(big_r: float = 10.0, n_radii: int = 7,
                          n_phase: int = 9) -> list:
    """|lam| in [1/R, R] with Re lam >= 0."""
    radii = np.logspace(np.log10(1.0 / big_r), np.log10(big_r), n_radii)
    phases = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_phase)
    pts = []
    for r in radii:
        for ph in phases:
            lam = r * np.exp(1j * ph)
            pts.append(FrequencyPoint(max(lam.real, 0.0), lam.imag))
    return pts


def _m1_from_panels(panels: PanelFactorization, multipliers: np.ndarray,
                    c0: float):
    return block_split_log(panels, multipliers, c0)


def averaged_symbol(wavetrain: WaveTrain, point: FrequencyPoint,
                    engine: EvansEngine | None = None) -> np.ndarray:
    """Branch-normalized logarithm of the period map at one grid point."""
    engine = engine or EvansEngine(wavetrain, steps=2048)
    data = engine.evans_data([point.lam_reduced])
    mults = data.multipliers()[0]
    expo = np.log(mults) / TAU
    re_abs = np.sort(np.abs(expo.real))
    c0 = 0.5 * (re_abs[0] + re_abs[1]) if re_abs[0] < 0.3 * re_abs[1] \
        else 0.45 * re_abs[0]
    single = PanelFactorization(data.panels.factors[0], data.panels.logs[0])
    m1, _ = _m1_from_panels(single, mults, max(c0, 1e-8))
    return m1


def _pullback(s_tilde: np.ndarray, v: np.ndarray, vinv: np.ndarray) -> np.ndarray:
    """Symmetrizer transport through M1 = V B inv(V): S = |V|^2 V^-* S~ V^-1."""
    nrm = np.linalg.norm(v, 2) ** 2
    return nrm * vinv.conj().T @ s_tilde @ vinv


def certificate_samples(wavetrain: WaveTrain, points, neutral_sign: float,
                        engine: EvansEngine | None = None,
                        hyper_floor: float | None = None) -> list:
    """Build one Hermitian S per grid point from the split period map.

    ``neutral_sign`` multiplies the neutral exponent in the block-diagonal
    symmetrizer (the scalar symmetrizer of the translation branch); points
    without a neutral exponent get the purely hyperbolic construction.
    """
    engine = engine or EvansEngine(wavetrain, steps=2048)
    lams = np.array([p.lam_reduced for p in points])
    data = engine.evans_data(lams)
    all_mults = data.multipliers()
    if hyper_floor is None:
        base = engine.evans_data([0.0]).multipliers()[0]
        re0 = np.sort(np.abs(np.log(base).real / TAU))
        hyper_floor = re0[1]
    c0 = 0.45 * hyper_floor
    out = []
    for i, p in enumerate(points):
        mults = all_mults[i]
        single = PanelFactorization(data.panels.factors[i], data.panels.logs[i])
        m1, info = _m1_from_panels(single, mults, c0)
        du, dn, ds = info["dims"]
        blocks = []
        bi = 0
        if du:
            blocks.append(lyapunov_symmetrizer(info["blocks"][bi], +1))
            bi += 1
        if dn:
            mu_star = info["blocks"][bi][0, 0]
            blocks.append(np.array([[neutral_sign]], dtype=complex))
            bi += 1
        if ds:
            blocks.append(-lyapunov_symmetrizer(info["blocks"][bi], -1))
        s_tilde = sla.block_diag(*blocks)
        s = hermitian_part(_pullback(s_tilde, info["transform"],
                                     info["inverse"]))
        margin = float(np.min(np.linalg.eigvalsh(hermitian_part(s @ m1))))
        out.append(CertificateSample(point=p, S=s, margin=margin))
    return out


def medium_frequency_symmetrizer(wavetrain: WaveTrain, point: FrequencyPoint,
                                 engine: EvansEngine | None = None
                                 ) -> CertificateSample:
    """Single-point certificate in the spectral-gap regime (no neutral
    exponent allowed at the point)."""
    engine = engine or EvansEngine(wavetrain, steps=2048)
    data = engine.evans_data([point.lam_reduced])
    mults = data.multipliers()[0]
    expo = np.log(mults) / TAU
    gap = float(np.min(np.abs(expo.real)))
    if gap < 1e-8:
        raise GapViolationError("no spectral gap at %s" % (point,))
    single = PanelFactorization(data.panels.factors[0], data.panels.logs[0])
    m1, info = _m1_from_panels(single, mults, 0.45 * gap)
    if info["dims"][1] != 0:
        raise GapViolationError("unexpected neutral exponent at %s" % (point,))
    s_plus = lyapunov_symmetrizer(info["blocks"][0], +1)
    s_minus = lyapunov_symmetrizer(info["blocks"][1], -1)
    s = hermitian_part(_pullback(sla.block_diag(s_plus, -s_minus),
                                 info["transform"], info["inverse"]))
    margin = float(np.min(np.linalg.eigvalsh(hermitian_part(s @ m1))))
    return CertificateSample(point=point, S=s, margin=margin)


def verify_certificate(samples, c: float | None = None, k: float = np.nan,
                       regime: str = "", case_tag: str = "") -> SymmetrizerCertificate:
    """Check the margin inequality across a family of samples.

    With ``c`` given, the verdict is pass/fail at that constant; otherwise
    the largest admissible c is determined (bisection to two significant
    digits, equivalently the floor of the worst margin ratio).
    """
    herm_defect = max(float(np.max(np.abs(s.S - s.S.conj().T)))
                      for s in samples)
    if herm_defect > 1e-12:
        raise CertificateError("symmetrizer sample is not Hermitian: %g"
                               % herm_defect)
    ratios = np.array([s.ratio for s in samples])
    finite = ratios[np.isfinite(ratios)]
    min_ratio = float(np.min(finite))
    worst = samples[int(np.argmin(np.where(np.isfinite(ratios), ratios,
                                           np.inf)))]
    if c is None:
        c = _floor_two_digits(min_ratio) if min_ratio > 0 else min_ratio
    passed = bool(min_ratio >= c > 0)
    s_norm = max(float(np.linalg.norm(s.S, 2)) for s in samples)
    return SymmetrizerCertificate(
        k=k, regime=regime, case_tag=case_tag, c=float(c), passed=passed,
        min_ratio=min_ratio,
        worst_point={"gamma": worst.point.gamma, "tau": worst.point.tau,
                     "eta": worst.point.eta, "margin": worst.margin,
                     "ratio": worst.ratio},
        s_norm_bound=s_norm, n_samples=len(samples), samples=list(samples))


def _floor_two_digits(x: float) -> float:
    if x <= 0 or not np.isfinite(x):
        return x
    mag = 10.0 ** np.floor(np.log10(x) - 1)
    return float(np.floor(x / mag) * mag)


def certificate_to_json(cert: SymmetrizerCertificate, path) -> None:
    payload = {
        "k": cert.k, "regime": cert.regime, "case_tag": cert.case_tag,
        "c": cert.c, "passed": cert.passed, "min_ratio": cert.min_ratio,
        "worst_point": cert.worst_point, "s_norm_bound": cert.s_norm_bound,
        "n_samples": cert.n_samples, "details": cert.details,
        "grid": [{"gamma": s.point.gamma, "tau": s.point.tau,
                  "eta": s.point.eta, "margin": s.margin,
                  "ratio": (None if not np.isfinite(s.ratio) else s.ratio)}
                 for s in (cert.samples or [])],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


# ---------------------------------------------------------------------------
# Laboratory-frame neutral block: sampling, jet fits, Kreiss construction


class LabBlockSampler:
    """Spatial-exponent data of the modulation block at laboratory rates.

    Solves lam_co + omega * mu(lam_co) = lam_hat for the phase-frame rate(s)
    riding the neutral branch mu, then reports w = -k * mu, the exponent
    coordinate in which the neutral block takes its dispersion normal form.
    """

    def __init__(self, wavetrain: WaveTrain, steps: int = 4096,
                 model_radius: float = 0.55, model_tol: float = 1e-7):
        self.wavetrain = wavetrain
        self.k = wavetrain.k
        self.omega = wavetrain.omega
        self.engine = EvansEngine(wavetrain, steps=steps)
        # shrink the model disk until the neutral branch fits cleanly;
        # beyond an exponent collision the polynomial fit degrades sharply
        self.model = None
        for radius in model_radius * np.array([1.0, 0.8, 0.64, 0.5, 0.4, 0.3]):
            model = NeutralBranchModel.build(wavetrain, radius=radius,
                                             engine=self.engine)
            if model.fit_residual < model_tol:
                self.model = model
                break
        if self.model is None:
            raise NeutralDimensionError(
                "neutral branch model did not converge on any disk "
                "(last residual %.2e)" % model.fit_residual)
        self.trusted_radius = 0.85 * self.model.radius
        self._dmodel = np.polyder(np.poly1d(self.model.coeffs[::-1]))

    def mu_exact(self, lam_co: np.ndarray) -> np.ndarray:
        pred = self.model.mu(lam_co)
        return self.engine.neutral_exponents(lam_co, predicted=pred)

    def _newton(self, lam_hat: np.ndarray, seeds: np.ndarray,
                max_iter: int = 14, tol: float = 1e-12) -> np.ndarray:
        lam = seeds.astype(complex).copy()
        f = None
        for _ in range(max_iter):
            mu = self.mu_exact(lam)
            f = lam + self.omega * mu - lam_hat
            dmu = self._dmodel(lam)
            lam = lam - f / (1.0 + self.omega * dmu)
            if np.max(np.abs(f)) < tol:
                break
        # mild extrapolation beyond the fit disk is fine as long as the
        # lab relation closed; selection errors would leave a residual
        if np.max(np.abs(lam)) > 1.25 * self.trusted_radius:
            raise NeutralDimensionError(
                "phase-frame rate %.3f left the trusted branch disk %.3f; "
                "shrink the stencil" % (np.max(np.abs(lam)), self.trusted_radius))
        if f is not None and np.max(np.abs(f)) > 1e-9:
            raise NeutralDimensionError(
                "lab-root iteration left residual %.2e; branch selection "
                "failed" % np.max(np.abs(f)))
        return lam

    def scalar_roots(self, lam_hat: np.ndarray) -> np.ndarray:
        """Single lab root per rate (transport case, omega' != 0)."""
        lam_hat = np.asarray(lam_hat, dtype=complex)
        alpha = self.model.coeffs[1]              # d mu / d lam at 0
        denom = 1.0 + self.omega * alpha
        if abs(denom) < 1e-8:
            raise NeutralDimensionError(
                "glancing family: the scalar lab root is degenerate")
        seeds = lam_hat / denom
        lam_co = self._newton(lam_hat, seeds)
        mu = (lam_hat - lam_co) / self.omega
        return -self.k * mu

    def pair_roots(self, lam_hat: np.ndarray) -> np.ndarray:
        """Both small lab roots (glancing case); shape (len(lam_hat), 2)."""
        lam_hat = np.asarray(lam_hat, dtype=complex)
        m2 = self.model.coeffs[2]
        disc = np.sqrt(lam_hat / (self.omega * m2))
        seeds = np.stack([disc, -disc], axis=-1)
        flat_seeds = seeds.reshape(-1)
        flat_hat = np.repeat(lam_hat, 2)
        lam_co = self._newton(flat_hat, flat_seeds)
        mu = (flat_hat - lam_co) / self.omega
        return (-self.k * mu).reshape(-1, 2)

    def lab_block(self, lam_hat: np.ndarray) -> np.ndarray:
        """Analytic 2x2 companion realization from the glancing root pair."""
        w = self.pair_roots(lam_hat)
        tr = w.sum(axis=-1)
        det = w[:, 0] * w[:, 1]
        out = np.zeros(lam_hat.shape + (2, 2), dtype=complex)
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = -det
        out[..., 1, 1] = tr
        return out


@dataclass
class NeutralBlockJet:
    """Fitted low-frequency model of the modulation block.

    Case "i" stores the scalar series w(lam) ~ sum series[j] lam^j; case
    "ii" stores the coefficients of the normal form
        [[0, 1], [lt + c*lt^2 + e0*kappa*lt, d*lt + f*kappa]],  lt = c0*lam,
    after the positive rescale c0 (the fitted linear coefficient of the
    lower-left entry).
    """

    case_tag: str
    k: float
    omega: float
    omega_prime: float
    series: np.ndarray | None = None
    c0: float = np.nan
    coeffs: dict = field(default_factory=dict)
    kappa_scale: float = 0.0
    fit_residual: float = np.nan
    diagnostics: dict = field(default_factory=dict)
    samplers: dict = field(default=None, repr=False)

    def normalized_block(self, lam_hat: complex, kappa: float = 0.0) -> np.ndarray:
        if self.case_tag != "ii":
            raise ValueError("matrix form exists only in the glancing case")
        lt = self.c0 * lam_hat
        co = self.coeffs
        c = co["c1"] + 1j * co["c2"]
        d = co["d1"] + 1j * co["d2"]
        e0 = co["e01"] + 1j * co["e02"]
        m = np.array([[0.0, 1.0],
                      [lt + c * lt ** 2 + e0 * kappa * lt,
                       d * lt + co["f"] * kappa]], dtype=complex)
        return m

    def series_eval(self, lam_hat) -> np.ndarray:
        if self.case_tag != "i":
            raise ValueError("scalar series exists only in the transport case")
        lam_hat = np.asarray(lam_hat, dtype=complex)
        return np.polyval(self.series[::-1], lam_hat)


def local_omega_prime(wavetrain: WaveTrain, delta: float = 2e-3) -> float:
    """Dispersion slope from re-solved neighbors (4th-order stencil)."""
    k = wavetrain.k
    oms = []
    for kk in (k - 2 * delta, k - delta, k + delta, k + 2 * delta):
        wt = solve_profile(wavetrain.system, kk, wavetrain.profile,
                           wavetrain.omega, p_ref=wavetrain.profile)
        oms.append(wt.omega)
    return float((oms[0] - 8 * oms[1] + 8 * oms[2] - oms[3]) / (12 * delta))


def extract_neutral_block(wavetrain: WaveTrain, lam_radius: float = 5e-3,
                          kappa_radius: float = 5e-3, n_stencil: int = 16,
                          steps: int = 4096,
                          case_tol: tuple = (1e-4, 1e-6)) -> NeutralBlockJet:
    """Fit the low-frequency modulation block from exponent samples.

    The case tag follows the dispersion slope: |omega'| above the first
    tolerance is the transport case (scalar block), below the second the
    glancing case (2x2 block with the square-root pair).  The fitted jet
    must reproduce the sampled blocks to 1e-6 on the stencil.
    """
    if lam_radius > 1e-2 or kappa_radius > 1e-2:
        raise ValueError("stencil radii must not exceed 1e-2")
    omega_prime = local_omega_prime(wavetrain)
    k = wavetrain.k
    if abs(omega_prime) > case_tol[0]:
        case = "i"
    elif abs(omega_prime) < case_tol[1]:
        case = "ii"
    else:
        raise NeutralDimensionError(
            "omega'(k)=%g is between the case tolerances" % omega_prime)

    base = LabBlockSampler(wavetrain, steps=steps)
    if case == "i":
        lam = lam_radius * np.exp(2j * np.pi * np.arange(n_stencil) / n_stencil)
        lam = np.concatenate([lam, 0.5 * lam])
        w = base.scalar_roots(lam)
        if np.max(np.abs(w)) > 0.5:
            raise NeutralDimensionError("scalar lab root left the small-"
                                        "exponent regime on the stencil")
        van = np.vander(lam, 5, increasing=True)
        series, *_ = np.linalg.lstsq(van, w, rcond=None)
        resid = float(np.max(np.abs(van @ series - w)))
        if resid > 1e-6:
            raise FitInconsistencyError("scalar jet fit residual %.2e" % resid)
        return NeutralBlockJet(case_tag="i", k=k, omega=wavetrain.omega,
                               omega_prime=omega_prime, series=series,
                               fit_residual=resid,
                               diagnostics={"alpha_fit": complex(series[1]),
                                            "alpha_expected": -1.0 / omega_prime},
                               samplers={0.0: base})

    # glancing case: sample over a (lam, kappa) product stencil
    kappas = [0.0, kappa_radius, -kappa_radius]
    samplers = {0.0: base}
    for kap in kappas[1:]:
        wt = solve_profile(wavetrain.system, k + kap, wavetrain.profile,
                           wavetrain.omega, p_ref=wavetrain.profile)
        samplers[kap] = LabBlockSampler(wt, steps=steps)
    lam = lam_radius * np.exp(2j * np.pi * np.arange(n_stencil) / n_stencil)
    lam = np.concatenate([lam, 0.45 * lam])
    rows_21, rows_22, design_21, design_22 = [], [], [], []
    for kap in kappas:
        blocks = samplers[kap].lab_block(lam)
        m21 = blocks[:, 1, 0]
        m22 = blocks[:, 1, 1]
        rows_21.append(m21)
        rows_22.append(m22)
        # full tensor basis lam^i kap^j; the first three columns carry the
        # normal-form coefficients (lam, lam^2, kap*lam)
        cols_21 = [lam, lam ** 2, kap * lam]
        cols_21 += [lam ** i * kap ** j
                    for i in range(1, 5) for j in range(3)
                    if (i, j) not in ((1, 0), (2, 0), (1, 1))]
        design_21.append(np.stack(cols_21, axis=1))
        cols_22 = [lam, np.full_like(lam, kap)]
        cols_22 += [lam ** i * kap ** j
                    for i in range(4) for j in range(3)
                    if (i, j) not in ((0, 0), (1, 0), (0, 1))]
        design_22.append(np.stack(cols_22, axis=1))
    y21 = np.concatenate(rows_21)
    y22 = np.concatenate(rows_22)
    a21 = np.concatenate(design_21, axis=0)
    a22 = np.concatenate(design_22, axis=0)
    co21, *_ = np.linalg.lstsq(a21, y21, rcond=None)
    co22, *_ = np.linalg.lstsq(a22, y22, rcond=None)
    resid = max(float(np.max(np.abs(a21 @ co21 - y21))),
                float(np.max(np.abs(a22 @ co22 - y22))))
    if resid > 1e-6:
        raise FitInconsistencyError("glancing jet fit residual %.2e" % resid)
    c0c, c_coeff, e0_raw = co21[0], co21[1], co21[2]
    d_raw, f_raw = co22[0], co22[1]
    if not (abs(c0c.imag) < 1e-4 * abs(c0c) + 1e-8 and c0c.real > 0):
        raise FitInconsistencyError(
            "linear coefficient %s is not positive real" % c0c)
    c0 = float(c0c.real)
    # rescale lam -> lt = c0*lam so the linear coefficient becomes 1
    c_n = c_coeff / c0 ** 2
    e0_n = e0_raw / c0               # coefficient of kappa*lt
    d_n = d_raw / c0
    f_n = f_raw
    if abs(f_n.imag) > 1e-5 + 1e-3 * abs(f_n):
        raise FitInconsistencyError("kappa-trace coefficient not real: %s" % f_n)
    coeffs = {"a1": 0.0, "a2": 0.0, "b1": 0.0, "b2": 0.0,
              "c1": float(c_n.real), "c2": float(c_n.imag),
              "d1": float(d_n.real), "d2": float(d_n.imag),
              "e01": float(e0_n.real), "e02": float(e0_n.imag),
              "f": float(f_n.real)}
    # glancing scaling diagnostic: |w| ~ |lam|^(1/2)
    lam_small = np.logspace(-5, -3, 9)
    wmax = np.abs(base.pair_roots(lam_small.astype(complex))).max(axis=1)
    slope = float(np.polyfit(np.log(lam_small), np.log(wmax), 1)[0])
    constraint = abs(coeffs["e02"] * coeffs["f"] * kappa_radius)
    if constraint > 1e-4:
        raise FitInconsistencyError(
            "reality constraint violated: |e02*f*kappa| = %.2e" % constraint)
    return NeutralBlockJet(case_tag="ii", k=k, omega=wavetrain.omega,
                           omega_prime=omega_prime, c0=c0, coeffs=coeffs,
                           kappa_scale=kappa_radius, fit_residual=resid,
                           diagnostics={"sqrt_slope": slope,
                                        "constraint": constraint},
                           samplers=samplers)


def case_i_symmetrizer(jet: NeutralBlockJet, gamma_max: float = 0.05,
                       tau_max: float = 0.05, n_grid: int = 11) -> dict:
    """Scalar symmetrizer s = -omega'(k) for the transport case.

    Validates Re(s * w(lam)) >= c (gamma + tau^2) on the grid, against
    direct exponent samples when a sampler is available and against the
    fitted series otherwise.  The quadratic identity
    Re(s*w) = gamma + q*(tau^2 - gamma^2) + O(lam^3), q = b/omega'^2, is the
    series-level version of the same bound.
    """
    if jet.case_tag != "i":
        raise ValueError("transport-case symmetrizer needs a case-i jet")
    s = -jet.omega_prime
    gammas = np.linspace(0.0, gamma_max, max(3, n_grid // 2))
    taus = np.linspace(-tau_max, tau_max, n_grid)
    pts = [(g, t) for g in gammas for t in taus if (g, t) != (0.0, 0.0)]
    lam = np.array([complex(g, t) for g, t in pts])
    if jet.samplers is not None:
        w = jet.samplers[0.0].scalar_roots(lam)
    else:
        w = jet.series_eval(lam)
    vals = np.real(s * w)
    weights = np.array([g + t ** 2 for g, t in pts])
    ratios = vals / weights
    c = float(np.min(ratios))
    worst = pts[int(np.argmin(ratios))]
    return {"case": "i", "s": s, "c": c, "passed": bool(c > 0),
            "worst_point": {"gamma": worst[0], "tau": worst[1]},
            "grid_size": len(pts)}


def case_i_product_series(omega_prime: float, b: float, lam: complex) -> float:
    """Re(s*w) through second order: gamma + (b/omega'^2)(tau^2 - gamma^2)."""
    g, t = lam.real, lam.imag
    return g + (b / omega_prime ** 2) * (t ** 2 - g ** 2)


def glancing_sigma(coeffs: dict, tau: float, kappa: float) -> float:
    den = 1.0 - coeffs["c2"] * tau + coeffs["e01"] * kappa
    if abs(den) < 0.2:
        raise ShrinkDomainError(
            "sigma denominator %.3f too small; shrink the (tau, kappa) "
            "domain" % den)
    return (-tau - coeffs["e02"] * kappa - coeffs["c1"] * tau) / den


def glancing_alpha_beta(coeffs: dict, tau: float, kappa: float,
                        sigma: float) -> tuple[float, float]:
    c1, c2 = coeffs["c1"], coeffs["c2"]
    d1, d2 = coeffs["d1"], coeffs["d2"]
    b1, b2 = coeffs["b1"], coeffs["b2"]
    e01, e02 = coeffs["e01"], coeffs["e02"]
    f = coeffs["f"]
    den = 1.0 - c2 * tau + e01 * kappa
    sig_kf_over_tau = -(1.0 + c1) * kappa * f / den
    a = np.array([[1.0 - b2 * tau, -(c1 * tau ** 2 - e02 * kappa * tau)],
                  [-b1, 1.0 - (c2 * tau - e01 * kappa)]])
    rhs = np.array([sigma * d1 * tau + d2 * tau - kappa * f,
                    d1 - sigma * d2 + sig_kf_over_tau])
    det = np.linalg.det(a)
    if abs(det) < 0.2:
        raise ShrinkDomainError(
            "glancing coefficient system near-singular (det=%.3f); "
            "shrink the (tau, kappa) domain" % det)
    alpha, beta = np.linalg.solve(a, rhs)
    return float(alpha), float(beta)


def case_ii_symmetrizer(jet: NeutralBlockJet, gamma_max: float = 0.02,
                        tau_max: float = 0.02, n_grid: int = 9,
                        kappas=None) -> dict:
    """Kreiss construction for the glancing 2x2 block.

    sigma comes from the decoupled third equation; (alpha, beta) solve the
    bounded linear system (regularized with the reality constraint
    e02*f*kappa = 0).  The grid check runs in the rescaled variables and the
    reported constant is converted back to the physical normalization.
    """
    if jet.case_tag != "ii":
        raise ValueError("glancing symmetrizer needs a case-ii jet")
    co = jet.coeffs
    if abs(co["e02"] * co["f"] * jet.kappa_scale) > 1e-4:
        raise FitInconsistencyError("e02*f*kappa constraint violated")
    kappas = [0.0] if kappas is None else list(kappas)
    c0 = jet.c0
    gammas = np.linspace(0.0, gamma_max, max(3, n_grid // 2))
    taus = np.linspace(-tau_max, tau_max, n_grid)
    worst = None
    min_ratio = np.inf
    samples = []
    for kap in kappas:
        for g in gammas:
            for t in taus:
                if g == 0.0 and t == 0.0:
                    continue
                gt, tt = c0 * g, c0 * t
                sigma = glancing_sigma(co, tt, kap)
                alpha, beta = glancing_alpha_beta(co, tt, kap, sigma)
                s = np.array([[alpha, 1.0 + 1j * sigma],
                              [1.0 - 1j * sigma, beta]], dtype=complex)
                m = jet.normalized_block(complex(g, t), kap)
                margin = float(np.min(np.linalg.eigvalsh(
                    hermitian_part(s @ m))))
                ratio = margin / (gt + tt ** 2)
                samples.append({"gamma": g, "tau": t, "kappa": kap,
                                "sigma": sigma, "alpha": alpha, "beta": beta,
                                "margin": margin, "ratio": ratio})
                if ratio < min_ratio:
                    min_ratio = ratio
                    worst = samples[-1]
    c_phys = min_ratio * min(c0, c0 ** 2, 1.0)
    return {"case": "ii", "c_normalized": float(min_ratio),
            "c": float(c_phys), "passed": bool(min_ratio > 0),
            "worst_point": worst, "grid_size": len(samples),
            "sqrt_slope": jet.diagnostics.get("sqrt_slope")}


def high_frequency_check(wavetrain: WaveTrain, lams=(25.0, 100.0, 400.0)) -> dict:
    """Pointwise-in-theta hyperbolic split and Lyapunov bound at large rates.

    The split margin scales like sqrt(gamma); the report carries the worst
    constant and the log-log growth exponent across the sampled rates.
    """
    margins = []
    for lam in lams:
        a = first_order_symbol(wavetrain, complex(lam))
        worst = np.inf
        for j in range(a.shape[0]):
            evals = np.linalg.eigvals(a[j])
            gap = float(np.min(np.abs(evals.real)))
            if gap < 1e-10:
                raise GapViolationError(
                    "no pointwise split at theta index %d, lam=%s" % (j, lam))
            n_plus = int(np.sum(evals.real > 0))
            if n_plus != a.shape[-1] // 2:
                raise GapViolationError(
                    "unbalanced split at theta index %d, lam=%s" % (j, lam))
            split = ordered_schur_split(a[j], 0.45 * gap)
            sp = lyapunov_symmetrizer(split.plus, +1)
            sm = lyapunov_symmetrizer(split.minus, -1)
            s = hermitian_part(_pullback(sla.block_diag(sp, -sm),
                                         split.transform, split.inverse))
            margin = float(np.min(np.linalg.eigvalsh(
                hermitian_part(s @ a[j]))))
            worst = min(worst, margin)
        margins.append(worst)
    margins = np.array(margins)
    lams_arr = np.array([abs(l) for l in lams])
    slope = float(np.polyfit(np.log(lams_arr), np.log(margins), 1)[0])
    constants = margins / np.sqrt(lams_arr)
    return {"lams": list(map(float, lams_arr)),
            "margins": margins.tolist(),
            "slope": slope,
            "sqrt_constants": constants.tolist(),
            "constant_spread": float(constants.max() / constants.min()),
            "passed": bool(np.all(margins > 0))}


def full_certificate(wavetrain: WaveTrain, regime: str = "low",
                     omega_prime: float | None = None,
                     points=None, big_r: float = 10.0,
                     engine: EvansEngine | None = None,
                     steps: int = 2048) -> SymmetrizerCertificate:
    """Grid certificate for the full symbol in one frequency regime."""
    if omega_prime is None:
        omega_prime = local_omega_prime(wavetrain)
    drift = wavetrain.omega - wavetrain.k * omega_prime
    neutral_sign = -np.sign(drift) if drift != 0 else -1.0
    if points is None:
        points = (low_frequency_grid(big_r) if regime == "low"
                  else medium_frequency_grid(big_r))
    engine = engine or EvansEngine(wavetrain, steps=steps)
    samples = certificate_samples(wavetrain, points, neutral_sign,
                                  engine=engine)
    case_tag = "i" if abs(omega_prime) > 1e-4 else "ii"
    cert = verify_certificate(samples, k=wavetrain.k, regime=regime,
                              case_tag=case_tag)
    cert.details["omega_prime"] = float(omega_prime)
    cert.details["neutral_sign"] = float(neutral_sign)
    return cert
