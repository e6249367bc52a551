"""Command-line orchestration: profile, family, stability, evans,
symmetrizer, modulate, expand, simulate, validate.

Exit codes: 0 success (verdicts ride in the outputs), 2 configuration
error, 3 guard refusal, 4 certificate failure.  Every command writes a
manifest with content digests so a rerun can be checked byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_config, ConfigError
from .grid import TAU, TorusGrid
from .systems import analytic_wavetrain
from .wavetrain import (continue_family, solve_profile, check_transversality,
                        family_to_csv, brusselator_family_seed)
from .bloch import (verify_diffusive_stability, neutral_curve, spectra_to_csv,
                    neutral_curve_to_csv, locate_evans_roots,
                    bloch_eigenvalues)
from .symmetrizer import (full_certificate, certificate_to_json,
                          extract_neutral_block, case_i_symmetrizer,
                          case_ii_symmetrizer, verify_certificate,
                          CertificateSample, high_frequency_check)
from .modulation import (solve_eikonal, bump_profile, build_expansion,
                         blowup_time_estimate, residual_order_study,
                         BlowupError)
from .simulate import (convergence_study, initial_layer_probe, simulate_direct,
                       snapshots_to_csv, convergence_to_json, gnuplot_script,
                       quantized_eps, ansatz_on_unscaled_grid, hseps_norm)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_CERTIFICATE = 4


class _Manifest:
    def __init__(self, config: RunConfig, out_dir: str, command: str):
        self.out_dir = out_dir
        self.data = {"command": command, "version": __version__,
                     "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
                     "config": config.as_dict(), "files": [], "stages": {}}
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def record(self, name: str) -> None:
        p = self.path(name)
        with open(p, "rb") as fh:
            blob = fh.read()
        self.data["files"].append({"path": name,
                                   "sha256": hashlib.sha256(blob).hexdigest(),
                                   "bytes": len(blob)})

    def stage(self, name: str, ok: bool, **info) -> None:
        self.data["stages"][name] = {"passed": bool(ok), **info}

    def write(self, name="manifest.json") -> None:
        with open(self.path(name), "w") as fh:
            json.dump(self.data, fh, indent=1, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _family(cfg: RunConfig):
    system = cfg.build_system()
    grid = TorusGrid(int(cfg["grid.n_theta"]))
    kmin, kmax = float(cfg["family.kmin"]), float(cfg["family.kmax"])
    if system.name == "brusselator":
        seed = brusselator_family_seed(system, kmin, grid)
        return continue_family(system, kmin, kmax, int(cfg["family.steps"]),
                               seed=seed, grid=grid)
    return continue_family(system, kmin, kmax, int(cfg["family.steps"]),
                           grid=grid)


def _modulation(cfg: RunConfig, family):
    table = family.table()
    length = cfg.domain_length
    nx = int(cfg["modulation.nx"])
    x = length * np.arange(nx) / nx
    k0 = float(cfg["modulation.kbar"]) + bump_profile(
        x, length, float(cfg["modulation.amplitude"]),
        float(cfg["modulation.width"]))
    t_end = float(cfg["modulation.T"])
    if t_end <= 0:
        t_star = blowup_time_estimate(family, k0, length, table)
        t_end = 1.0 if not np.isfinite(t_star) else 0.5 * t_star
    mf = solve_eikonal(family, k0, length, t_end,
                       dt=float(cfg["modulation.dt"]), table=table)
    return mf, table


def cmd_profile(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    family_to_csv(family, out.path("family.csv"))
    out.record("family.csv")
    ok = all(check_transversality(wt)["simple"] for wt in family.members)
    out.stage("profile", ok, members=len(family.members))
    return EXIT_OK


cmd_family = cmd_profile


def cmd_stability(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    k = float(cfg["stability.k"])
    wt = family.member_at(k)
    xi = np.linspace(-float(cfg["stability.xi_max"]),
                     float(cfg["stability.xi_max"]),
                     int(cfg["stability.n_xi"]))
    eta = [float(v) for v in str(cfg["stability.eta"]).split(",")]
    verdict = verify_diffusive_stability(wt, xi_grid=xi, eta_grid=eta)
    spectra_to_csv(wt, xi, eta, out.path("bloch_spectra.csv"))
    out.record("bloch_spectra.csv")
    curve = neutral_curve(wt, xi_max=float(cfg["stability.curve_xi_max"]))
    neutral_curve_to_csv(curve, out.path("neutral_curve.csv"))
    out.record("neutral_curve.csv")
    payload = {"k": k, "stable": verdict.stable,
               "transversal": verdict.transversal,
               "condition_i": verdict.condition_i,
               "condition_ii": verdict.condition_ii,
               "margin_c": verdict.margin_c,
               "failing": verdict.failing,
               "omega_prime_fit": curve.omega_prime_fit,
               "b_fit": curve.b_fit}
    with open(out.path("stability.json"), "w") as fh:
        json.dump(payload, fh, indent=1, default=_json_default)
    out.record("stability.json")
    out.stage("stability", True, stable=verdict.stable)
    return EXIT_OK


def cmd_evans(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    k = float(cfg["stability.k"])
    wt = family.member_at(k)
    rows = ["xi,re_root,im_root"]
    for xi in (0.0, 0.1, 0.25):
        seeds = bloch_eigenvalues(wt, xi)
        roots = locate_evans_roots(wt, xi, radius=0.5,
                                   seeds=seeds[np.abs(seeds) < 0.55])
        for r in roots:
            rows.append("%.12g,%.17g,%.17g" % (xi, r.real, r.imag))
    with open(out.path("evans_roots.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    out.record("evans_roots.csv")
    curve = neutral_curve(wt, xi_max=float(cfg["stability.curve_xi_max"]))
    neutral_curve_to_csv(curve, out.path("neutral_curve.csv"))
    out.record("neutral_curve.csv")
    out.stage("evans", True)
    return EXIT_OK


def cmd_symmetrizer(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    k = float(cfg["symmetrizer.k"])
    wt = family.member_at(k)
    big_r = float(cfg["symmetrizer.R"])
    low = full_certificate(wt, regime="low", big_r=big_r,
                           steps=int(cfg["symmetrizer.steps"]))
    med = full_certificate(wt, regime="medium", big_r=big_r,
                           steps=int(cfg["symmetrizer.steps"]))
    if bool(cfg["symmetrizer.tamper_sign"]):
        bad = [CertificateSample(s.point, -s.S, -s.margin) for s in low.samples]
        low = verify_certificate(bad, k=wt.k, regime="low",
                                 case_tag=low.case_tag)
    jet = extract_neutral_block(wt)
    block = (case_i_symmetrizer(jet) if jet.case_tag == "i"
             else case_ii_symmetrizer(jet))
    hf = high_frequency_check(wt)
    certificate_to_json(low, out.path("certificate_low.json"))
    certificate_to_json(med, out.path("certificate_medium.json"))
    with open(out.path("certificate_block.json"), "w") as fh:
        json.dump({"jet_case": jet.case_tag, "block": block,
                   "high_frequency": hf}, fh, indent=1, default=_json_default)
    for name in ("certificate_low.json", "certificate_medium.json",
                 "certificate_block.json"):
        out.record(name)
    ok = low.passed and med.passed and block["passed"] and hf["passed"]
    out.stage("symmetrizer", ok, c_low=low.c, c_medium=med.c,
              case=jet.case_tag)
    if not ok:
        worst = low.worst_point if not low.passed else med.worst_point
        print("certificate failure at %s" % (worst,), file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def cmd_modulate(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    mf, _ = _modulation(cfg, family)
    rows = ["x,k_initial,k_final,psi_final"]
    psi_f = mf.psi(len(mf.t) - 1)
    for j in range(len(mf.x)):
        rows.append("%.17g,%.17g,%.17g,%.17g"
                    % (mf.x[j], mf.k[0, j], mf.k[-1, j], psi_f[j]))
    with open(out.path("modulation.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    out.record("modulation.csv")
    out.stage("modulate", True, T=float(mf.t[-1]),
              eikonal_residual=mf.eikonal_residual())
    return EXIT_OK


def cmd_expand(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    mf, table = _modulation(cfg, family)
    m = int(cfg["expansion.m"])
    exp = build_expansion(family, mf, m, n_theta=int(cfg["expansion.n_theta"]),
                          table=table)
    eps_list = [quantized_eps(mf.kbar, mf.length, e) for e in cfg.eps_list]
    report = residual_order_study(exp, eps_list, s=int(cfg["simulation.s"]))
    payload = {"m": m, "eps": report.eps, "l2": report.l2, "hs": report.hs,
               "slope_l2": report.slope_l2, "slope_hs": report.slope_hs,
               "consistency": exp.consistency}
    with open(out.path("residuals.json"), "w") as fh:
        json.dump(payload, fh, indent=1, default=_json_default)
    out.record("residuals.json")
    rows = ["eps,l2,hs"]
    for e, l2, hs in zip(report.eps, report.l2, report.hs):
        rows.append("%.12g,%.17g,%.17g" % (e, l2, hs))
    with open(out.path("residuals.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    out.record("residuals.csv")
    out.stage("expand", True, slope=report.slope_l2)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: _Manifest) -> int:
    family = _family(cfg)
    mf, table = _modulation(cfg, family)
    exp = build_expansion(family, mf, int(cfg["expansion.m"]),
                          n_theta=int(cfg["expansion.n_theta"]), table=table)
    eps = quantized_eps(mf.kbar, mf.length, cfg.eps_list[0])
    nwave = mf.kbar * mf.length / (TAU * eps)
    nx = int(2 ** np.ceil(np.log2(
        2 * int(cfg["simulation.min_ppw"]) * nwave)))
    u0 = ansatz_on_unscaled_grid(exp, eps, 0, nx)
    run = simulate_direct(family.system, eps, u0, float(mf.t[-1]), mf.length,
                          snapshot_times=[float(mf.t[-1])],
                          dt=float(cfg["simulation.dt"]), kbar=mf.kbar)
    snapshots_to_csv(run, out.path("snapshot.csv"))
    out.record("snapshot.csv")
    out.stage("simulate", True, eps=eps, steps=run.n_steps)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: _Manifest, force: bool = False) -> int:
    family = _family(cfg)
    k = float(cfg["stability.k"])
    wt = family.member_at(k)
    verdict = verify_diffusive_stability(wt)
    if not verdict.stable and not force:
        print("refusing to validate an unstable family (use --force)",
              file=sys.stderr)
        out.stage("validate", False, reason="unstable", k=k)
        out.write()
        return EXIT_GUARD
    mf, table = _modulation(cfg, family)
    m = int(cfg["expansion.m"])
    exp = build_expansion(family, mf, min(m + 1, 3), table=table,
                          n_theta=int(cfg["expansion.n_theta"]))
    eps_list = [quantized_eps(mf.kbar, mf.length, e) for e in cfg.eps_list]
    res = residual_order_study(exp, eps_list, s=int(cfg["simulation.s"]),
                               order=m)
    conv = convergence_study(exp, eps_list, s=int(cfg["simulation.s"]),
                             dt=float(cfg["simulation.dt"]),
                             n_snapshots=int(cfg["simulation.snapshots"]),
                             order=m)
    res_ok = (len(eps_list) < 3) or abs(res.slope_l2 - (m + 1)) < 0.2 + 0.05 * m
    conv_ok = (len(eps_list) < 3) or conv.slope_hs > m - 0.2
    convergence_to_json(conv, out.path("convergence.json"))
    out.record("convergence.json")
    rows = ["eps,hs_error,hs_error_next,linf"]
    for e, a, b, c in zip(conv.eps, conv.hs_errors, conv.hs_errors_next,
                          conv.linf_errors):
        rows.append("%.12g,%.17g,%.17g,%.17g" % (e, a, b, c))
    with open(out.path("convergence.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    out.record("convergence.csv")
    gnuplot_script("convergence.csv", "convergence.png",
                   out.path("convergence.gp"))
    out.record("convergence.gp")
    payload = {"residual_slope": res.slope_l2,
               "residual_target": m + 1,
               "convergence_slope": conv.slope_hs,
               "convergence_target": m,
               "next_order_slope": conv.slope_next,
               "residual_ok": res_ok, "convergence_ok": conv_ok}
    with open(out.path("validate.json"), "w") as fh:
        json.dump(payload, fh, indent=1, default=_json_default)
    out.record("validate.json")
    out.stage("validate", res_ok and conv_ok, **payload)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modwave",
        description="wave trains: profiles, spectra, certificates, validation")
    parser.add_argument("command",
                        choices=["profile", "family", "stability", "evans",
                                 "symmetrizer", "modulate", "expand",
                                 "simulate", "validate"])
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--epsilon", default=None,
                        help="comma list overriding the config")
    parser.add_argument("--order", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig({})
        overrides = {}
        if args.epsilon is not None:
            overrides["epsilon"] = args.epsilon
        if args.order is not None:
            overrides["expansion.m"] = args.order
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output.dir"] = args.out
        if overrides:
            cfg = RunConfig({**cfg.as_dict(), **overrides})
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    out = _Manifest(cfg, cfg["output.dir"], args.command)
    handlers = {"profile": cmd_profile, "family": cmd_family,
                "stability": cmd_stability, "evans": cmd_evans,
                "symmetrizer": cmd_symmetrizer, "modulate": cmd_modulate,
                "expand": cmd_expand, "simulate": cmd_simulate}
    try:
        if args.command == "validate":
            code = cmd_validate(cfg, out, force=args.force)
        else:
            code = handlers[args.command](cfg, out)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as exc:
        print("eikonal blow-up: %s" % exc, file=sys.stderr)
        out.stage(args.command, False, error=str(exc))
        out.write()
        return EXIT_CONFIG
    out.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
