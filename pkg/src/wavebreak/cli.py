"""Batch experiment front end.

Subcommands: profile, run (physical), selfsim, shoot, fit, sweep, check.
Every experiment writes CSV time series plus a JSON manifest embedding
the fully-resolved config and its hash; exit codes are typed by abort
reason so batch drivers can triage without parsing logs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from wavebreak import __version__
from wavebreak.config import ConfigError, apply_overrides, parse_config
from wavebreak.diagnostics import (
    InsufficientSpanError,
    fit_blowup_rate,
    holder_seminorm_values,
)
from wavebreak.grid import Grid
from wavebreak.initial_data import (
    AnsatzBuilder,
    DataConstraintError,
    DataParams,
    DomainTooSmallError,
    build_physical_data,
    make_W0,
    calibrated_W0,
)
from wavebreak.physical import StepperConfig, run_until_blowup
from wavebreak.profile import BurgersProfile
from wavebreak.selfsim import (
    ModulationState,
    SelfSimEvolution,
    SelfSimParams,
    initial_state,
    run_selfsim,
    shoot_unstable,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ABORT = 4          # solver aborted (constraint/modulation failure, nan)
EXIT_BOUNDARY = 5       # boundary-activity stop before target
EXIT_FIT = 6            # diagnostics could not produce the requested fit

_STOP_CODES = {
    "gradient_threshold": EXIT_OK,
    "t_stop": EXIT_OK,
    "s_end": EXIT_OK,
    "trap_exit": EXIT_OK,
    "boundary_activity": EXIT_BOUNDARY,
    "dt_min": EXIT_ABORT,
    "nan": EXIT_ABORT,
}


def _out_root(cfg):
    return os.environ.get("WAVEBREAK_OUTPUT", cfg["output.directory"])


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return path


def _write_manifest(path, cfg, payload):
    doc = {"config": cfg.raw, "config_hash": cfg.hash,
           "package_version": __version__}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return path


def _data_params(cfg):
    d = cfg["data"]
    pert = None
    shape = d["perturbation"]["shape"]
    if shape != "none":
        amp = d["perturbation"]["amplitude"]
        if amp == "calibrated":
            pert = calibrated_W0(shape, d["perturbation"]["width"], cfg.k,
                                 d["tau0"], eps0=d["eps0"])
        else:
            pert = make_W0(shape, float(amp), d["perturbation"]["width"],
                           cfg.k, d["perturbation"]["carrier"])
    return DataParams(
        k=cfg.k, tau0=d["tau0"], xi0=d["xi0"], kappa0=d["kappa0"],
        w0=tuple(d["w0"]), perturbation=pert, eps0=d["eps0"],
        gamma=d["gamma"],
    ).validate()


def _selfsim_params(cfg):
    s = cfg["selfsim"]
    return SelfSimParams(
        k=cfg.k, sigma0=-math.log(cfg["data.tau0"]), gamma=cfg["data.gamma"],
        y0=s["y0"], A=s["A"], eps0=cfg["data.eps0"], ds_max=s["ds_max"],
        cfl=s["cfl"], fit_radius=s["fit_radius"],
        sponge_fraction=s["sponge_fraction"],
        sponge_strength=s["sponge_strength"],
        taper_fraction=s["taper_fraction"], record_ds=s["record_ds"],
    )


def _maybe_svg(cfg, path, title, xlabel, ylabel, series, logx=False, logy=False):
    if not cfg["output.svg"]:
        return None
    from wavebreak.svgplot import LinePlot

    plot = LinePlot(title=title, xlabel=xlabel, ylabel=ylabel,
                    logx=logx, logy=logy)
    for x, y, label in series:
        plot.add(x, y, label)
    return plot.write(path)


# -- subcommands ------------------------------------------------------------

def cmd_profile(cfg, outdir):
    k = cfg.k
    prof = BurgersProfile(k)
    y = np.linspace(-10.0, 10.0, 1001)
    vals = prof(y)
    dvals = prof.deriv(y, 1)
    res = np.abs((1.0 - prof.b) * vals + (prof.b * y + vals) * dvals)
    _write_csv(os.path.join(outdir, "profile.csv"),
               ["y", "profile", "dprofile", "residual"],
               list(zip(y, vals, dvals, res)))
    _maybe_svg(cfg, os.path.join(outdir, "profile.svg"),
               f"stationary profile, k={k}", "y", "value",
               [(y, vals, "profile")])
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg, {
        "subcommand": "profile",
        "max_residual": float(np.max(np.abs(res))),
    })
    return EXIT_OK


def cmd_run(cfg, outdir):
    p = _data_params(cfg)
    g = Grid(cfg["grid.n"], cfg["grid.half_length"])
    try:
        u0 = build_physical_data(p, g)
    except (DomainTooSmallError, DataConstraintError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    ph = cfg["physical"]
    sc = StepperConfig(c_adv=ph["c_adv"], c_grad=ph["c_grad"],
                       g_max=ph["g_max"],
                       boundary_threshold=ph["boundary_threshold"],
                       n_max=ph["n_max"], track_modulation=True,
                       modulation_k=cfg.k,
                       holder_sigmas=tuple(cfg["diagnostics.sigmas"]))
    rec, u, t = run_until_blowup(u0, cfg.symbol(), sc, t_stop=ph["t_stop"])
    header, rows = rec.as_rows()
    _write_csv(os.path.join(outdir, "run.csv"), header, rows)
    payload = {"subcommand": "run", "stop_reason": rec.stop_reason,
               "t_final": t, "grid_n_final": u.grid.n, "fits": {}}
    tarr = np.asarray(rec.t)
    garr = np.asarray(rec.grad_max)
    grow = garr >= cfg["diagnostics.grad_min"]
    try:
        fit = fit_blowup_rate(tarr[grow], garr[grow],
                              min_decades=cfg["diagnostics.min_decades"])
        payload["fits"]["grad_max"] = fit.as_dict()
    except InsufficientSpanError as err:
        payload["fits"]["grad_max"] = {"error": str(err)}
    _maybe_svg(cfg, os.path.join(outdir, "run.svg"),
               "gradient history", "t", "sup |du/dx|",
               [(tarr, garr, "sup |du/dx|")], logy=True)
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg, payload)
    if "error" in payload["fits"]["grad_max"] and rec.stop_reason not in ("t_stop",):
        return max(_STOP_CODES.get(rec.stop_reason, EXIT_ABORT), EXIT_FIT)
    return _STOP_CODES.get(rec.stop_reason, EXIT_ABORT)


def cmd_selfsim(cfg, outdir):
    p = _data_params(cfg)
    par = _selfsim_params(cfg)
    g = Grid(cfg["grid.n"], cfg["grid.half_length"])
    ev = SelfSimEvolution(g, cfg.symbol(), par)
    U0 = ev.initial_field(p)
    st0 = initial_state(p, par)
    sigmas = tuple(cfg["diagnostics.sigmas"])
    rec, U, st = run_selfsim(U0, st0, cfg.symbol(), par,
                             s_end=cfg["selfsim.s_end"], evolution=ev,
                             track_sigmas=sigmas)
    k = cfg.k
    wcols = [f"w{j}" for j in range(2, 2 * k)]
    mnames = sorted(rec.margins[0]) if rec.margins and rec.margins[0] else []
    header = (["s", "tau", "xi", "kappa", "es_tau_s"] + wcols + ["w_top"]
              + [f"margin_{m}" for m in mnames]
              + ["grad"] + [f"holder_{sig:.6g}" for sig in sigmas])
    rows = []
    for i in range(len(rec.s)):
        row = [rec.s[i], rec.tau[i], rec.xi[i], rec.kappa[i], rec.P[i]]
        row += list(rec.w[i]) + [rec.w_top[i]]
        row += [rec.margins[i].get(m, float("nan")) for m in mnames]
        row += [rec.grad[i]] + [rec.holder[sig][i] for sig in sigmas]
        rows.append(row)
    _write_csv(os.path.join(outdir, "selfsim.csv"), header, rows)
    payload = {"subcommand": "selfsim", "stop_reason": rec.stop_reason,
               "trapped_until": rec.trapped_until, "tau_final": st.tau,
               "fits": {}}
    t = rec.physical_times()
    grad = rec.physical_grad()
    try:
        fit = fit_blowup_rate(t, grad, min_decades=cfg["diagnostics.min_decades"])
        payload["fits"]["grad_max"] = fit.as_dict()
        for sig in sigmas:
            h = rec.physical_holder(sig, par.b)
            try:
                payload["fits"][f"holder_{sig:.6g}"] = fit_blowup_rate(
                    t, h, min_decades=cfg["diagnostics.min_decades"]).as_dict()
            except InsufficientSpanError as err:
                payload["fits"][f"holder_{sig:.6g}"] = {"error": str(err)}
    except InsufficientSpanError as err:
        payload["fits"]["grad_max"] = {"error": str(err)}
    _maybe_svg(cfg, os.path.join(outdir, "selfsim.svg"),
               "modulation source", "s", "|exp(s) tau_s|",
               [(np.asarray(rec.s), np.abs(np.asarray(rec.P)) + 1e-300,
                 "|exp(s) tau_s|")], logy=True)
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg, payload)
    if rec.stop_reason.startswith("aborted"):
        return EXIT_ABORT
    return EXIT_OK


def cmd_shoot(cfg, outdir):
    if cfg.k < 2:
        _write_manifest(os.path.join(outdir, "manifest.json"), cfg, {
            "subcommand": "shoot", "w0_best": [], "note": "empty search space",
        })
        return EXIT_OK
    par = _selfsim_params(cfg)
    g = Grid(cfg["grid.n"], cfg["grid.half_length"])
    sym = cfg.symbol()
    ev = SelfSimEvolution(g, sym, par)
    horizon = cfg["shoot.s_horizon"]

    def make_run(w0):
        p = DataParams(k=cfg.k, tau0=cfg["data.tau0"], w0=tuple(w0))
        U0 = ev.initial_field(p)
        st0 = initial_state(p, par)
        rec, _, _ = run_selfsim(U0, st0, sym, par, s_end=par.sigma0 + horizon,
                                stop_on_trap_exit=True, evolution=ev)
        return rec.trapped_until

    res = shoot_unstable(make_run, cfg.k, cfg["data.gamma"], par.sigma0,
                         budget=cfg["shoot.budget"])
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg, {
        "subcommand": "shoot",
        "w0_best": list(res.w0_best),
        "trapped_until": res.trapped_until,
        "boundary_horizons": res.boundary_horizons,
        "evaluations": res.evaluations,
        "budget_exhausted": res.budget_exhausted,
    })
    return EXIT_OK


def cmd_fit(cfg, outdir, csv_path, t_column, q_column):
    with open(csv_path, newline="") as fh:
        rd = csv.DictReader(fh)
        rows = list(rd)
    try:
        t = np.array([float(r[t_column]) for r in rows])
        q = np.array([float(r[q_column]) for r in rows])
    except KeyError as err:
        print(f"fit error: column {err} not in {csv_path}", file=sys.stderr)
        return EXIT_CONFIG
    keep = q >= cfg["diagnostics.grad_min"]
    if keep.sum() < 10:
        keep = np.ones_like(q, bool)
    try:
        fit = fit_blowup_rate(t[keep], q[keep],
                              min_decades=cfg["diagnostics.min_decades"])
    except InsufficientSpanError as err:
        print(f"fit error: {err}", file=sys.stderr)
        return EXIT_FIT
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg, {
        "subcommand": "fit", "source": os.path.abspath(csv_path),
        "columns": [t_column, q_column], "fit": fit.as_dict(),
    })
    print(json.dumps(fit.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sweep(cfg_text, overrides_list, args):
    """Fan out one experiment per override set, sharded per run directory."""
    codes = []
    for i, ovr in enumerate(overrides_list):
        merged = apply_overrides(cfg_text, list(args.override) + ovr)
        cfg = parse_config(merged)
        outdir = os.path.join(_out_root(cfg), f"sweep_{i:03d}")
        os.makedirs(outdir, exist_ok=True)
        codes.append(_dispatch(args.sweep_subcommand, cfg, outdir, args))
    print(json.dumps({"exit_codes": codes}))
    return max(codes) if codes else EXIT_OK


def cmd_check(cfg, outdir):
    """Fast invariant suite: symbol orders, profile residual, grid round trip."""
    from wavebreak.symbols import LinearSymbol, verify_symbol_orders

    xi = np.geomspace(1.0, 1e4, 60)
    report = {}
    worst_slope = 0.0
    for name, sym in (("fkdv_0.5", LinearSymbol.fkdv(0.5)),
                      ("whitham", LinearSymbol.whitham()),
                      ("fburgers_0.5", LinearSymbol.fburgers(0.5))):
        rep = verify_symbol_orders(sym, 2, xi)
        err = rep.worst_exponent_error()
        worst_slope = max(worst_slope, err)
        report[name] = {"worst_exponent_error": err,
                        "max_envelope_constant": rep.max_envelope_constant}
    prof = BurgersProfile(cfg.k)
    y = np.linspace(-10, 10, 1001)
    report["profile_residual"] = float(np.max(np.abs(prof.residual(y))))
    g = Grid(256, 3.0)
    rng = np.random.default_rng(cfg["seed"])
    from wavebreak.grid import Field

    f = Field(g, rng.standard_normal(g.n))
    rt = float(np.max(np.abs(np.fft.ifft(np.fft.fft(f.values)).real - f.values)))
    report["fft_round_trip"] = rt
    ok = (report["profile_residual"] < 1e-9 and rt < 1e-13
          and worst_slope < 0.05)
    _write_manifest(os.path.join(outdir, "manifest.json"), cfg,
                    {"subcommand": "check", "report": report, "ok": bool(ok)})
    print(json.dumps({"ok": bool(ok)}))
    return EXIT_OK if ok else EXIT_ABORT


# -- entry point ------------------------------------------------------------

def _dispatch(sub, cfg, outdir, args):
    if sub == "profile":
        return cmd_profile(cfg, outdir)
    if sub == "run":
        return cmd_run(cfg, outdir)
    if sub == "selfsim":
        return cmd_selfsim(cfg, outdir)
    if sub == "shoot":
        return cmd_shoot(cfg, outdir)
    if sub == "fit":
        return cmd_fit(cfg, outdir, args.csv, args.t_column, args.q_column)
    if sub == "check":
        return cmd_check(cfg, outdir)
    raise ValueError(f"unknown subcommand {sub!r}")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="wavebreak",
        description="gradient blow-up laboratory for dispersive Burgers flows",
    )
    ap.add_argument("--config", help="YAML config file", default=None)
    ap.add_argument("--override", action="append", default=[],
                    metavar="KEY=VALUE", help="config override, repeatable")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in ("profile", "run", "selfsim", "shoot", "check"):
        sub.add_parser(name)
    fit = sub.add_parser("fit")
    fit.add_argument("csv")
    fit.add_argument("--t-column", default="t")
    fit.add_argument("--q-column", default="grad_max")
    sw = sub.add_parser("sweep")
    sw.add_argument("sweep_subcommand",
                    choices=("profile", "run", "selfsim", "shoot"))
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="one sweep point per --set, ';'-separated overrides")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    try:
        if args.subcommand == "sweep":
            points = [p.split(";") for p in args.set] or [[]]
            return cmd_sweep(text, points, args)
        merged = apply_overrides(text, args.override)
        cfg = parse_config(merged)
    except ValueError as err:
        # ConfigError and the symbol-regime validators are all ValueErrors
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = _out_root(cfg)
    os.makedirs(outdir, exist_ok=True)
    try:
        return _dispatch(args.subcommand, cfg, outdir, args)
    except (DataConstraintError, DomainTooSmallError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as err:
        # parameter combinations rejected by the solver contracts
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
