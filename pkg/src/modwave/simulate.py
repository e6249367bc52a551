"""Direct spectral simulation and quantitative validation runs.

The solver integrates the unscaled dynamics v_t = v_xx - f(v) with Strang
splitting: exact Fourier diffusion between two explicit midpoint reaction
half-steps, fixed step size for bit-reproducibility.  Runs at scaled
parameter eps map the scaled window [0, T] to [0, T/eps] unscaled time on
the domain [0, L/eps).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import TAU, spectral_derivative
from .modulation import ExpansionData, evaluate_ansatz


class ResolutionError(ValueError):
    pass


def hseps_norm(values: np.ndarray, length: float, eps: float, s: int) -> float:
    """Scale-weighted Sobolev norm (sum over orders 0..s of eps^j d^j).

    ||h||^2 = sum_j eps^(2j) ||d_x^j h||_L2^2, evaluated as a Fourier
    multiplier on the periodic domain of the given length.
    """
    if s > 4:
        raise ValueError("norm order limited to s <= 4")
    v = np.atleast_2d(np.asarray(values))
    nx = v.shape[-1]
    spec = np.fft.rfft(v, axis=-1)
    m = np.fft.rfftfreq(nx, d=1.0 / nx)
    kappa = TAU * m / length
    weights = np.ones_like(kappa)
    for j in range(1, s + 1):
        weights = weights + (eps * kappa) ** (2 * j)
    # Parseval with rfft: double interior modes
    mult = np.full_like(kappa, 2.0)
    mult[0] = 1.0
    if nx % 2 == 0:
        mult[-1] = 1.0
    total = np.sum(weights * mult * np.abs(spec) ** 2) * length / nx ** 2
    return float(np.sqrt(total))


@dataclass
class SimulationRun:
    eps: float
    length_scaled: float
    x_unscaled: np.ndarray
    t_snapshots: np.ndarray        # scaled times
    snapshots: np.ndarray          # (n_snap, n, nx)
    dt_unscaled: float
    n_steps: int
    provenance: str = "prescribed"

    @property
    def x_scaled(self) -> np.ndarray:
        return self.eps * self.x_unscaled


def simulate_direct(system, eps: float, u0: np.ndarray, t_end: float,
                    length_scaled: float, snapshot_times=None,
                    dt: float | None = None, min_ppw: int = 16,
                    kbar: float | None = None,
                    provenance: str = "prescribed") -> SimulationRun:
    """Integrate the unscaled dynamics from u0 on [0, L/eps).

    ``u0`` has shape (n, nx); snapshot times are in scaled units.  The step
    defaults to min(0.25 dx^2, 0.01) unscaled and is shortened to land
    snapshots exactly.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    n, nx = u0.shape
    length_unscaled = length_scaled / eps
    if kbar is not None:
        ppw = nx / (length_unscaled * kbar / TAU)
        if ppw < min_ppw:
            raise ResolutionError(
                "only %.1f grid points per fast wavelength; need >= %d"
                % (ppw, min_ppw))
    dx = length_unscaled / nx
    if dt is None:
        dt = min(0.25 * dx * dx, 0.01)
    if snapshot_times is None:
        snapshot_times = [t_end]
    snapshot_times = np.asarray(sorted(set([0.0] + list(snapshot_times))))
    kappa = TAU * np.fft.rfftfreq(nx, d=1.0 / nx) / length_unscaled
    u = u0.copy()
    snaps = [u0.copy()]
    total_steps = 0
    t_now = 0.0
    for t_next in snapshot_times[1:]:
        t_target = t_next / eps
        n_steps = max(1, int(np.ceil((t_target - t_now) / dt - 1e-12)))
        h = (t_target - t_now) / n_steps
        decay = np.exp(-kappa ** 2 * h)
        for _ in range(n_steps):
            u = _reaction_half(system, u, 0.5 * h)
            u = np.fft.irfft(np.fft.rfft(u, axis=-1) * decay, n=nx, axis=-1)
            u = _reaction_half(system, u, 0.5 * h)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("simulation blew up before t=%g" % t_next)
        snaps.append(u.copy())
        total_steps += n_steps
        t_now = t_target
    x = length_unscaled * np.arange(nx) / nx
    return SimulationRun(eps=eps, length_scaled=length_scaled, x_unscaled=x,
                         t_snapshots=snapshot_times, snapshots=np.array(snaps),
                         dt_unscaled=dt, n_steps=total_steps,
                         provenance=provenance)


def _reaction_half(system, u: np.ndarray, h: float) -> np.ndarray:
    """Explicit midpoint step of u_t = -f(u)."""
    mid = u - 0.5 * h * system.f(u.T).T
    return u - h * system.f(mid.T).T


def ansatz_on_unscaled_grid(exp: ExpansionData, eps: float, it: int,
                            nx: int, order: int | None = None) -> np.ndarray:
    """Sample the composite ansatz on the unscaled simulation grid."""
    mf = exp.fieldmod
    x_scaled = mf.length * np.arange(nx) / nx
    return evaluate_ansatz(exp, eps, it, x_scaled, order=order)


def quantized_eps(kbar: float, length: float, eps: float) -> float:
    """Snap eps so the fast phase winds an integer number of turns."""
    winding = kbar * length / (TAU * eps)
    m = max(1, int(round(winding)))
    return kbar * length / (TAU * m)


@dataclass
class ConvergenceReport:
    order: int
    eps: list
    hs_errors: list
    linf_errors: list
    hs_errors_next: list
    slope_hs: float
    slope_next: float
    s_index: int
    t_end: float
    settings: dict = field(default_factory=dict)


def convergence_study(exp: ExpansionData, eps_list, s: int = 2,
                      t_end: float | None = None, n_snapshots: int = 5,
                      min_ppw: int = 16, dt: float | None = None,
                      order: int | None = None) -> ConvergenceReport:
    """Prescribed-data error of the order-m ansatz against direct solves.

    For each admissible eps the run starts exactly on the ansatz at t = 0,
    records sup-over-snapshot errors in the scale-weighted Sobolev norm and
    the sup norm, and also measures the distance to the next-order ansatz to
    expose the improved rate.  Requires the expansion to carry order m+1.
    """
    order = (exp.order - 1) if order is None else order
    if order + 1 > exp.order:
        raise ValueError("expansion must carry order m+1 for the comparison")
    mf = exp.fieldmod
    if t_end is None:
        t_end = float(mf.t[-1])
    it_list = _snapshot_indices(mf, t_end, n_snapshots)
    snap_times = [float(mf.t[i]) for i in it_list]
    hs_err, linf_err, hs_next = [], [], []
    used_eps = []
    for eps in eps_list:
        eps_q = quantized_eps(mf.kbar, mf.length, float(eps))
        if abs(eps_q - eps) > 1e-9:
            raise ValueError("eps=%g violates phase quantization; nearest "
                             "admissible %.12g" % (eps, eps_q))
        nx = _grid_for_eps(mf, eps_q, min_ppw)
        u0 = ansatz_on_unscaled_grid(exp, eps_q, 0, nx, order=order)
        run = simulate_direct(exp.system, eps_q, u0, snap_times[-1],
                              mf.length, snapshot_times=snap_times,
                              dt=dt, min_ppw=min_ppw, kbar=mf.kbar)
        errs, sups, errs_next = [], [], []
        for j, it in enumerate(it_list):
            ua = ansatz_on_unscaled_grid(exp, eps_q, it, nx, order=order)
            diff = run.snapshots[j + 1] - ua
            errs.append(hseps_norm(diff, mf.length, eps_q, s))
            sups.append(float(np.max(np.abs(diff))))
            ua_next = ansatz_on_unscaled_grid(exp, eps_q, it, nx,
                                              order=order + 1)
            errs_next.append(hseps_norm(run.snapshots[j + 1] - ua_next,
                                        mf.length, eps_q, s))
        hs_err.append(max(errs))
        linf_err.append(max(sups))
        hs_next.append(max(errs_next))
        used_eps.append(eps_q)
    eps_arr = np.asarray(used_eps)
    slope = float(np.polyfit(np.log(eps_arr), np.log(hs_err), 1)[0]) \
        if len(eps_arr) >= 3 else np.nan
    slope_next = float(np.polyfit(np.log(eps_arr), np.log(hs_next), 1)[0]) \
        if len(eps_arr) >= 3 else np.nan
    return ConvergenceReport(order=order, eps=list(map(float, used_eps)),
                             hs_errors=hs_err, linf_errors=linf_err,
                             hs_errors_next=hs_next, slope_hs=slope,
                             slope_next=slope_next, s_index=s,
                             t_end=snap_times[-1],
                             settings={"n_snapshots": n_snapshots,
                                       "min_ppw": min_ppw, "dt": dt})


def _snapshot_indices(mf, t_end: float, n_snapshots: int):
    idx_end = int(np.argmin(np.abs(mf.t - t_end)))
    picks = np.linspace(0, idx_end, n_snapshots + 1)[1:]
    return sorted(set(int(round(p)) for p in picks if p > 0))


def _grid_for_eps(mf, eps: float, min_ppw: int) -> int:
    n_wave = mf.kbar * mf.length / (TAU * eps)
    need = max(2 * min_ppw * n_wave, 4 * len(mf.x))
    return int(2 ** np.ceil(np.log2(need)))


@dataclass
class AttractionReport:
    eps: float
    delta: float
    layer_growth: float
    final_distance: float
    final_distance_unperturbed: float
    constant: float               # final distance / eps^m
    order: int


def initial_layer_probe(exp: ExpansionData, eps: float, delta: float | None = None,
                        s: int = 2, t_end: float | None = None,
                        seed: int = 0, order: int | None = None,
                        min_ppw: int = 16, dt: float | None = None) -> AttractionReport:
    """Perturb prescribed data and track the distance back to the ansatz.

    The perturbation is a random smooth field rescaled to the requested
    scale-weighted norm (default eps^(m+1)); the report carries the growth
    over the initial layer [0, eps] and the final-time distance constant.
    """
    order = (exp.order - 1) if order is None else order
    mf = exp.fieldmod
    if t_end is None:
        t_end = float(mf.t[-1])
    eps_q = quantized_eps(mf.kbar, mf.length, float(eps))
    if delta is None:
        delta = eps_q ** (order + 1)
    nx = _grid_for_eps(mf, eps_q, min_ppw)
    u0 = ansatz_on_unscaled_grid(exp, eps_q, 0, nx, order=order)
    rng = np.random.default_rng(seed)
    pert = np.zeros_like(u0)
    x = mf.length * np.arange(nx) / nx
    for j in range(1, 9):
        amp = rng.standard_normal((u0.shape[0], 2)) / j
        pert += (amp[:, :1] * np.cos(TAU * j * x / mf.length)
                 + amp[:, 1:] * np.sin(TAU * j * x / mf.length))
    pert *= delta / hseps_norm(pert, mf.length, eps_q, s)

    it_list = _snapshot_indices(mf, t_end, 4)
    snap_times = [float(mf.t[i]) for i in it_list]
    layer_time = min(eps_q, snap_times[0])
    times = sorted(set([layer_time] + snap_times))
    run_p = simulate_direct(exp.system, eps_q, u0 + pert, times[-1],
                            mf.length, snapshot_times=times, dt=dt,
                            min_ppw=min_ppw, kbar=mf.kbar,
                            provenance="perturbed")
    run_0 = simulate_direct(exp.system, eps_q, u0, times[-1],
                            mf.length, snapshot_times=times, dt=dt,
                            min_ppw=min_ppw, kbar=mf.kbar)
    i_layer = times.index(layer_time)
    layer_diff = hseps_norm(run_p.snapshots[i_layer + 1]
                            - run_0.snapshots[i_layer + 1],
                            mf.length, eps_q, s)
    it_final = it_list[-1]
    ua = ansatz_on_unscaled_grid(exp, eps_q, it_final, nx, order=order)
    d_final = hseps_norm(run_p.snapshots[-1] - ua, mf.length, eps_q, s)
    d_final0 = hseps_norm(run_0.snapshots[-1] - ua, mf.length, eps_q, s)
    return AttractionReport(eps=eps_q, delta=float(delta),
                            layer_growth=float(layer_diff / delta),
                            final_distance=float(d_final),
                            final_distance_unperturbed=float(d_final0),
                            constant=float(d_final / eps_q ** order),
                            order=order)


# ---------------------------------------------------------------------------
# emission helpers


def snapshots_to_csv(run: SimulationRun, path, snapshot: int = -1) -> None:
    u = run.snapshots[snapshot]
    header = "x," + ",".join("u%d" % (i + 1) for i in range(u.shape[0]))
    rows = [header]
    for j in range(u.shape[1]):
        rows.append(",".join(["%.17g" % (run.x_scaled[j])]
                             + ["%.17g" % u[i, j] for i in range(u.shape[0])]))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def convergence_to_json(report: ConvergenceReport, path) -> None:
    import json
    with open(path, "w") as fh:
        json.dump({
            "order": report.order, "eps": report.eps,
            "hs_errors": report.hs_errors,
            "linf_errors": report.linf_errors,
            "hs_errors_next_order": report.hs_errors_next,
            "slope_hs": report.slope_hs, "slope_next": report.slope_next,
            "s_index": report.s_index, "t_end": report.t_end,
            "settings": report.settings}, fh, indent=1)


def gnuplot_script(csv_path, out_path, script_path, title="error vs eps") -> None:
    lines = [
        "set logscale xy",
        'set xlabel "eps"',
        'set ylabel "error"',
        'set title "%s"' % title,
        'set datafile separator ","',
        'set term pngcairo size 800,600',
        'set output "%s"' % out_path,
        'plot "%s" using 1:2 with linespoints title "H^s error", \\' % csv_path,
        '     "%s" using 1:3 with linespoints title "vs next order"' % csv_path,
    ]
    with open(script_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
