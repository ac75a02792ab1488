"""Command-line front end.

Every subcommand resolves a configuration (preset, then ``--config`` file,
then ``--set section.key=value``, then explicit flags), writes
``resolved_config.ini`` and ``resolved_config.json`` to ``--out`` and then its
own CSV/JSON artifacts. See :mod:`unijunction.config` for the file format.

Exit codes: 0 success, 1 domain failure (blow-up, no root, non-convergence),
2 usage, parse or missing-file errors. On a nonzero exit after the output
directory exists, a ``FAILED`` marker holding the diagnostic is written there.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analysis, chaos, fit, integrate, sweep
from .config import load_circuit, reference_spectrum, resolve, write_config
from .errors import ParseError, UnijunctionError
from .model import GCoeffs, State, derive_dimensionless

log = logging.getLogger("unijunction")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
FAILED_MARKER = "FAILED"

# flag name -> config key for the integrator overrides shared by all commands
_INTEGRATOR_FLAGS = ("rtol", "atol", "h_init", "h_max", "t_transient", "t_record", "sample_dt")
_COMMON = {"command", "preset", "config", "set", "out", "seed", "verbose", "m",
           *_INTEGRATOR_FLAGS}


class UsageError(Exception):
    pass


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def _initial_state(args):
    return State(*args.init) if getattr(args, "init", None) else None


# ---------------------------------------------------------------- commands

def cmd_simulate(args, cfg, out):
    p = cfg.params
    traj = integrate.integrate_trajectory(_initial_state(args), p, cfg.g, cfg.integrator)
    traj.to_csv(out / "trajectory.csv")
    ms = integrate.extract_maxima(traj, args.coordinate)
    ms.to_csv(out / f"maxima_{args.coordinate}.csv")
    vals = ms.values
    _write_json(out / "simulate.json", {
        "m": p.m,
        "samples": len(traj),
        "final_state": list(traj.final_state.as_tuple()),
        "coordinate": args.coordinate,
        "maxima_count": len(vals),
        "maxima_spread": float(np.ptp(vals)) if len(vals) else None,
    })


def cmd_bifurcate(args, cfg, out):
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    grid = np.linspace(args.m_from, args.m_to, args.points)
    d = sweep.bifurcation_sweep(grid, cfg.params, cfg.g, cfg.integrator,
                                continuation=args.continuation, descending=args.descending,
                                coordinate=args.coordinate, workers=args.workers)
    d.to_csv(out / "bifurcation.csv")
    summary = sweep.diagram_summary(d, gap=args.gap)
    sweep.summary_to_json(summary, out / "bifurcation_summary.json")
    if d.failures:
        detail = "; ".join(f"m={m:g}: {msg}" for m, msg in sorted(d.failures.items()))
        raise UnijunctionError(f"{len(d.failures)} sweep column(s) failed: {detail}")


def _reference_report(res, preset, m, zero_threshold):
    ref = reference_spectrum(preset, m)
    if ref is None:
        return None
    ref = np.asarray(ref, dtype=float)
    ref_cls = chaos.classify_attractor(ref, zero_threshold)
    agrees = ref_cls.sign_pattern == res.attractor_class.sign_pattern
    return {
        "spectrum": ref.tolist(),
        "sign_pattern": ref_cls.sign_pattern,
        "class": ref_cls.kind.value,
        "d_ky": chaos.kaplan_yorke(ref),
        "sign_pattern_agrees": agrees,
        "difference": (res.spectrum - ref).tolist(),
        "note": None if agrees else (
            "computed sign pattern differs from the reference; the initial state, "
            "transient and integrator settings used are listed under 'settings'"),
    }


def cmd_lyapunov(args, cfg, out):
    ly = cfg.lyapunov
    res = chaos.lyapunov_spectrum(_initial_state(args), cfg.params, cfg.g, cfg.integrator,
                                  renorm_interval=ly.renorm_interval, total_time=ly.total_time,
                                  zero_threshold=ly.zero_threshold)
    doc = res.to_dict()
    doc["m"] = cfg.params.m
    doc["reference"] = _reference_report(res, cfg.preset, cfg.params.m, ly.zero_threshold)
    _write_json(out / "lyapunov.json", doc)
    every = max(1, len(res.history_times) // 2000)
    res.history_to_csv(out / "lyapunov_history.csv", every=every)
    print(res.attractor_class.report)


def cmd_equilibria(args, cfg, out):
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    if args.m is not None:
        grid = np.array([cfg.params.m])
    else:
        grid = np.linspace(args.m_from, args.m_to, args.points)
    sw = analysis.stability_sweep(grid, cfg.params, cfg.g)
    sw.to_csv(out / "equilibria.csv")
    _write_json(out / "equilibria.json", {
        "points": len(sw),
        "unstable_count": sum(pt.eigen.is_unstable for pt in sw),
        "stable_at": sw.stable_at,
        "max_char_residual": max(pt.eigen.char_residual for pt in sw),
        "max_fixed_point_residual": max(pt.fixed_point.residual for pt in sw),
    })


def cmd_fit(args, cfg, out):
    if args.data:
        if args.physical:
            k = derive_dimensionless(cfg.circuit).k
            raw = fit.load_iv_csv(args.data)
            data = fit.dataset_from_physical(raw.x, raw.v, k, cfg.circuit.alpha_scale,
                                             cfg.circuit.v_scale, source=raw.source)
        else:
            data = fit.load_iv_csv(args.data)
    else:
        rng = np.random.default_rng(cfg.seed)
        data = fit.synthetic_dataset(cfg.g, n=args.synthetic, noise=args.noise, rng=rng)
        np.savetxt(out / "fit_data.csv", data.points, delimiter=",", header="x,v",
                   comments="", fmt="%.17g")
    init = GCoeffs(*args.init) if args.init else None
    res = fit.fit_g(data, init=init, max_iter=args.max_iter)
    doc = res.to_dict()
    doc["source"] = data.source
    doc["points"] = len(data)
    _write_json(out / "fit.json", doc)


def cmd_poincare(args, cfg, out):
    traj = integrate.integrate_trajectory(_initial_state(args), cfg.params, cfg.g,
                                          cfg.integrator)
    ms = integrate.extract_maxima(traj, args.coordinate)
    ms.to_csv(out / "maxima.csv")
    amp = float(np.ptp(traj.coordinate(args.coordinate)))
    doc = {"m": cfg.params.m, "coordinate": args.coordinate, "maxima_count": len(ms),
           "signal_amplitude": amp}
    if len(ms) >= 2:
        nmm = chaos.next_maxima_map(ms)
        nmm.to_csv(out / "next_maxima.csv")
        doc["structure"] = chaos.map_structure(nmm, signal_amplitude=amp).value
        doc["curve_gap"] = chaos.curve_gap(nmm.points) if len(nmm) > 2 else None
    else:
        doc["structure"] = chaos.map_structure(
            chaos.NextMaximaMap(np.empty((0, 2))), signal_amplitude=amp).value
    _write_json(out / "poincare.json", doc)


def cmd_hysteresis(args, cfg, out):
    freq = args.freq
    if args.freq_hz is not None:
        freq = integrate.physical_to_drive_freq(args.freq_hz, cfg.circuit.beta1)
    loop = integrate.simulate_driven_branch(cfg.g, cfg.params.mu, args.offset, args.amplitude,
                                            freq, cfg.integrator,
                                            samples_per_period=args.samples_per_period)
    loop.to_csv(out / "hysteresis.csv")
    _write_json(out / "hysteresis.json", {
        "drive_offset": loop.drive_offset, "drive_amplitude": loop.drive_amplitude,
        "drive_freq": loop.drive_freq, "loop_area": loop.loop_area,
        "pinch_distance": loop.pinch_distance, "extent": loop.extent,
        "pinch_fraction": loop.pinch_distance / loop.extent if loop.extent else None,
    })


def cmd_derive_params(args, cfg, out):
    circuit = load_circuit(args.circuit) if args.circuit else cfg.circuit
    d = derive_dimensionless(circuit, reference=cfg.params)
    doc = d.as_dict()
    doc["circuit"] = circuit.as_dict()
    _write_json(out / "derived_params.json", doc)
    print(json.dumps(doc, indent=2))


COMMANDS = {
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "lyapunov": cmd_lyapunov,
    "equilibria": cmd_equilibria,
    "fit": cmd_fit,
    "poincare": cmd_poincare,
    "hysteresis": cmd_hysteresis,
    "derive-params": cmd_derive_params,
}


# ------------------------------------------------------------------ parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--preset", help="named preset (default paper-2018)")
    g.add_argument("--config", help="sectioned key = value configuration file")
    g.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="inline override, repeatable")
    g.add_argument("--out", default="out", help="output directory (default ./out)")
    g.add_argument("--seed", type=int, help="seed for generated test data")
    g.add_argument("--m", type=float, help="modulation parameter m")
    g.add_argument("-v", "--verbose", action="store_true")
    ig = common.add_argument_group("integrator")
    for name in _INTEGRATOR_FLAGS:
        ig.add_argument("--" + name.replace("_", "-"), dest=name, type=float)

    parser = argparse.ArgumentParser(prog="unijunction", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    init_kw = dict(nargs=4, type=float, metavar=("X", "Y", "Z", "U"),
                   help="initial state (default: fixed point nudged along x)")

    p = add("simulate", "integrate one trajectory")
    p.add_argument("--init", **init_kw)
    p.add_argument("--coordinate", default="u", choices=("x", "y", "z", "u"))

    p = add("bifurcate", "maxima of a coordinate across an m grid")
    p.add_argument("--m-from", type=float, default=0.0)
    p.add_argument("--m-to", type=float, default=1.0)
    p.add_argument("--points", type=int, default=sweep.DEFAULT_GRID_POINTS)
    p.add_argument("--coordinate", default="u", choices=("x", "y", "z", "u"))
    p.add_argument("--continuation", action="store_true",
                   help="start each column from the previous column's final state")
    p.add_argument("--descending", action="store_true")
    p.add_argument("--workers", type=int,
                   help=f"thread count (capped by ${sweep.WORKERS_ENV})")
    p.add_argument("--gap", type=float, default=sweep.DEFAULT_GAP,
                   help="gap separating branches in the summary")

    p = add("lyapunov", "Lyapunov spectrum, Kaplan-Yorke dimension and attractor class")
    p.add_argument("--init", **init_kw)
    p.add_argument("--renorm-interval", type=float)
    p.add_argument("--total-time", type=float)
    p.add_argument("--zero-threshold", type=float)

    p = add("equilibria", "fixed point and eigenvalues across an m grid")
    p.add_argument("--m-from", type=float, default=0.0)
    p.add_argument("--m-to", type=float, default=1.0)
    p.add_argument("--points", type=int, default=101)

    p = add("fit", "fit g(x) to I-V data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV with columns x, v")
    src.add_argument("--synthetic", type=int, metavar="N",
                     help="fit N points generated from the preset's g")
    p.add_argument("--noise", type=float, default=0.0,
                   help="relative multiplicative noise for --synthetic")
    p.add_argument("--physical", action="store_true",
                   help="--data holds current (A) and voltage (V); rescale with the circuit's k")
    p.add_argument("--init", nargs=3, type=float, metavar=("A", "B", "C"))
    p.add_argument("--max-iter", type=int, default=200)

    p = add("poincare", "next-maxima map of one trajectory")
    p.add_argument("--init", **init_kw)
    p.add_argument("--coordinate", default="u", choices=("x", "y", "z", "u"))

    p = add("hysteresis", "sinusoidally driven fast branch")
    p.add_argument("--offset", type=float, default=1.6)
    p.add_argument("--amplitude", type=float, default=1.6)
    fg = p.add_mutually_exclusive_group()
    fg.add_argument("--freq", type=float, default=integrate.physical_to_drive_freq(20e3),
                    help="dimensionless angular frequency")
    fg.add_argument("--freq-hz", type=float, help="physical frequency, mapped with beta1")
    p.add_argument("--samples-per-period", type=int, default=2000)

    p = add("derive-params", "dimensionless parameters from circuit values")
    p.add_argument("--circuit", help="file with a [circuit] section (default: preset)")
    return parser


def _overrides(args):
    sets = list(args.set)
    if args.m is not None:
        sets.append(f"params.m={args.m!r}")
    if args.seed is not None:
        sets.append(f"run.seed={args.seed}")
    for name in _INTEGRATOR_FLAGS:
        v = getattr(args, name)
        if v is not None:
            sets.append(f"integrator.{name}={v!r}")
    for name in ("renorm_interval", "total_time", "zero_threshold"):
        v = getattr(args, name, None)
        if v is not None:
            sets.append(f"lyapunov.{name}={v!r}")
    return sets


def _resolved_json(cfg, command):
    doc = {"command": command, "preset": cfg.preset, "seed": cfg.seed, "options": cfg.extra}
    for name, obj in cfg.sections().items():
        doc[name] = {f.name: getattr(obj, f.name) for f in fields(obj)}
    return doc


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    for path in (args.config, getattr(args, "data", None), getattr(args, "circuit", None)):
        if path and not Path(path).is_file():
            print(f"error: no such file: {path}", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = resolve(args.preset, args.config, _overrides(args))
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    extra = {k: v for k, v in vars(args).items()
             if k not in _COMMON and k not in ("renorm_interval", "total_time", "zero_threshold")}
    cfg = type(cfg)(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, "extra": extra})

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / FAILED_MARKER
    if marker.exists():
        marker.unlink()
    code, message = EXIT_OK, None
    try:
        write_config(cfg, out / "resolved_config.ini", command=args.command)
        _write_json(out / "resolved_config.json", _resolved_json(cfg, args.command))
        COMMANDS[args.command](args, cfg, out)
    except (UsageError, ParseError, FileNotFoundError) as exc:
        code, message = EXIT_USAGE, f"{type(exc).__name__}: {exc}"
    except (UnijunctionError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code, message = EXIT_DOMAIN, f"{type(exc).__name__}: {exc}"
    if code != EXIT_OK:
        marker.write_text(f"command: {args.command}\nexit: {code}\n{message}\n", encoding="utf-8")
        print(f"error: {message}", file=sys.stderr)
    return code


def run(command, argv=()):
    """Programmatic entry point: ``run("lyapunov", ["--m", "0.3"])``."""
    return main([command, *argv])


if __name__ == "__main__":
    sys.exit(main())
