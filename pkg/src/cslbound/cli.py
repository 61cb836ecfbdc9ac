"""Command-line front end.

Every flag may also be given in a JSON file passed with ``--config`` (keys
are the flag names with dashes replaced by underscores); explicit flags take
precedence.  Each run writes its outputs and then, atomically, a manifest
with content hashes of inputs and outputs.

Exit codes: 0 success, 1 unexpected failure, 2 unreadable or invalid input,
3 quadrature failure, 4 non-convergence, 5 insufficient or degenerate data,
6 residual check failed under ``--strict``.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as fio
from .csl_noise import csl_psd_scan, max_workers
from .errors import (ConvergenceError, DegenerateDataError, GeometryError, GridResolutionError,
                     QuadratureError, TooFewPointsError, UnsupportedWindowError)
from .exclusion import (ONE_SIDED_FACTOR, REFERENCE_LAMBDA, AdlerRegion, NoInteriorMaximumError,
                        default_rc_grid, design_base, design_scan, exclusion_curve, minimal_layers,
                        optimal_thickness)
from .mass_model import MultilayerStack, load_geometry, reference_geometry_path
from .quadrature import QuadConfig
from .spectral_fit import fit_spectrum, residual_distribution_check
from .synth import SynthConfig, reference_params, synth_spectrum, synth_thermal
from .thermal_inference import (ResonatorParams, ThermalDataset, feldman_cousins_interval, fit_linear,
                                fit_saturation, nonthermal_psd)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_QUAD, EXIT_CONV, EXIT_DATA, EXIT_STRICT = range(7)


class CliError(Exception):
    def __init__(self, message, code, stage=None):
        super().__init__(message)
        self.code = code
        self.stage = stage


def _exit_code(exc):
    if isinstance(exc, QuadratureError):
        return EXIT_QUAD
    if isinstance(exc, ConvergenceError):
        return EXIT_CONV
    if isinstance(exc, (TooFewPointsError, DegenerateDataError)):
        return EXIT_DATA
    if isinstance(exc, (GeometryError, fio.FormatError, UnsupportedWindowError, GridResolutionError,
                        NoInteriorMaximumError, ValueError, KeyError, TypeError)):
        return EXIT_INPUT
    return EXIT_FAIL


def _describe(exc):
    if isinstance(exc, QuadratureError):
        return f"quadrature failed at rC = {exc.rC:.6g} m: {exc}"
    return f"{type(exc).__name__}: {exc}"


# --- shared helpers -------------------------------------------------------------

def _rc_grid(args):
    if args.rc is not None:
        return np.atleast_1d(np.asarray(args.rc, dtype=float))
    return default_rc_grid(args.rc_num, args.rc_min, args.rc_max)


def _quad(args, method="quadrature"):
    rtol = args.rtol
    if rtol is None:
        rtol = 1e-6 if method == "multilayer" else 1e-5
    return QuadConfig(rtol=rtol, max_evals=args.max_evals)


def _geometry(args):
    path = Path(args.geometry) if args.geometry else reference_geometry_path()
    return load_geometry(path), path


def _manifest_path(args, out):
    return Path(args.manifest) if args.manifest else Path(str(out) + ".manifest.json")


def _config_record(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "config", "manifest")}


def _add_grid_flags(p):
    p.add_argument("--rc", type=float, nargs="+", help="explicit rC values (m)")
    p.add_argument("--rc-min", type=float, default=1e-9)
    p.add_argument("--rc-max", type=float, default=1e-4)
    p.add_argument("--rc-num", type=int, default=60)
    p.add_argument("--rtol", type=float, default=None,
                   help="relative tolerance (default 1e-5 for 3D quadrature, 1e-6 for the closed form)")
    p.add_argument("--max-evals", type=int, default=100_000_000)
    p.add_argument("--workers", type=int, default=None, help="thread count (capped by CSLBOUND_MAX_WORKERS)")


def _workers(args):
    cap = max_workers()
    return min(args.workers, cap) if args.workers else cap


# --- commands -------------------------------------------------------------------

def cmd_csl_noise(args):
    mass, gpath = _geometry(args)
    grid = _rc_grid(args)
    if args.lam < 0:
        raise ValueError("lambda must be non-negative")
    target = mass
    method = args.method
    if method == "multilayer":
        stacks = [c for c in mass.components if isinstance(c, MultilayerStack)]
        if args.component:
            stacks = [c for c in stacks if c.label == args.component]
        if len(stacks) != 1:
            raise GeometryError("the multilayer method needs exactly one stack (use --component)")
        target = stacks[0]
    scan = csl_psd_scan(target, grid, _quad(args, method), lam=1.0, workers=_workers(args), method=method)
    rows = [(rc, args.lam, args.lam * v) for rc, v in scan]
    out = fio.write_table(args.out, fio.SCAN_COLUMNS, rows)
    fio.write_manifest(_manifest_path(args, out), "csl-noise", _config_record(args), [gpath], [out])
    return EXIT_OK


def _spectrum_meta(spectrum, args):
    Qp = args.qprime if args.qprime is not None else spectrum.meta.get("Qprime")
    if Qp is None:
        raise fio.FormatError("Qprime missing from metadata (or pass --qprime)")
    return float(Qp)


def _fit_one(spectrum, args, Qp):
    window = tuple(args.window) if args.window else None
    mask = None if args.no_mask else "auto"
    return fit_spectrum(spectrum, Qprime=Qp, window=window, mask=mask, c_fraction=args.c_fraction,
                        residual_check=False)


def cmd_fit_spectrum(args):
    if not args.spectrum:
        raise ValueError("--spectrum is required")
    spectrum = fio.read_spectrum(args.spectrum, args.meta)
    Qp = _spectrum_meta(spectrum, args)
    fit = _fit_one(spectrum, args, Qp)
    fit.residual_test = residual_distribution_check(spectrum, fit)
    record = fit.to_dict()
    record["temperature_K"] = spectrum.meta.get("temperature_K")
    record["Q"] = spectrum.meta.get("Q")
    if args.mask_report:
        record["mask_report"] = {"count": len(fit.masked_bins),
                                 "frequencies_hz": spectrum.freqs[fit.masked_bins].tolist()}
        print(f"masked {len(fit.masked_bins)} bins: " + " ".join(fio.fmt(f) for f in spectrum.freqs[fit.masked_bins]))
    out = fio.write_json(args.out, record)
    meta = fio.meta_path_for(args.spectrum) if args.meta is None else Path(args.meta)
    fio.write_manifest(_manifest_path(args, out), "fit-spectrum", _config_record(args),
                       [args.spectrum, meta], [out])
    if args.strict and not fit.residual_test.passed:
        print(f"residual check failed (p = {fit.residual_test.p_value:.3g})", file=sys.stderr)
        return EXIT_STRICT
    return EXIT_OK


def _resonator(args):
    return ResonatorParams(args.k, args.f0, args.m, args.phi_x, args.sigma_k)


def _thermal_analysis(data: ThermalDataset, args):
    """Saturation fit on all points, restricted linear fit, S_F0 and its FC limit."""
    import warnings

    record = {}
    if len(data) >= 5:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                sat = fit_saturation(data, n=args.n)
                record["saturation"] = sat.to_dict()
            except (ConvergenceError, DegenerateDataError) as exc:
                record["saturation"] = {"error": str(exc)}
        record["saturation_warnings"] = [str(w.message) for w in caught]
    restricted = data.restrict(args.t_restrict)
    lin = fit_linear(restricted, rel_sigma_x=args.rel_sigma_x)
    record["linear"] = lin.to_dict()
    record["linear"]["n_points"] = len(restricted)
    S, sS = nonthermal_psd(lin, _resonator(args))
    lo, hi = feldman_cousins_interval(S, sS, args.cl)
    record["nonthermal_psd"] = {"value": S, "sigma": sS}
    record["feldman_cousins"] = {"cl": args.cl, "lower": lo, "upper": hi}
    return record, hi


def cmd_fit_thermal(args):
    if not args.data:
        raise ValueError("--data is required")
    data = fio.read_thermal(args.data)
    record, _ = _thermal_analysis(data, args)
    out = fio.write_json(args.out, record)
    fio.write_manifest(_manifest_path(args, out), "fit-thermal", _config_record(args), [args.data], [out])
    return EXIT_OK


def cmd_feldman_cousins(args):
    lo, hi = feldman_cousins_interval(args.measured, args.sigma, args.cl, args.step, args.precision)
    record = {"measured": args.measured, "sigma": args.sigma, "cl": args.cl, "lower": lo, "upper": hi}
    print(f"{fio.fmt(lo)} {fio.fmt(hi)}")
    if args.out:
        out = fio.write_json(args.out, record)
        fio.write_manifest(_manifest_path(args, out), "feldman-cousins", _config_record(args), [], [out])
    return EXIT_OK


def _curve_extra(curve):
    rc, frac = AdlerRegion().overlap(curve)
    return {"adler_overlap": {"rC_m": rc.tolist(), "excluded_fraction": frac.tolist()},
            "lambda_upper_at_1e-7": curve.at(1e-7) if curve.rC_grid[0] <= 1e-7 <= curve.rC_grid[-1] else None}


def cmd_exclusion(args):
    mass, gpath = _geometry(args)
    curve = exclusion_curve(mass, args.s_upper, _rc_grid(args), args.cl, _quad(args), args.psd_factor,
                            _workers(args))
    out = fio.write_table(args.out, fio.CURVE_COLUMNS, zip(curve.rC_grid, curve.lambda_upper))
    fio.write_manifest(_manifest_path(args, out), "exclusion", _config_record(args), [gpath], [out],
                       extra={"geometry_hash": fio.sha256_file(gpath), "S_upper": args.s_upper,
                              "CL": args.cl, **_curve_extra(curve)})
    return EXIT_OK


def cmd_design_scan(args):
    base = design_base(args.L1, args.L2)
    n_list = args.n_lay or list(range(1, 31))
    scan = design_scan(base, n_list, args.d, args.s_target, args.rc_design, args.psd_factor)
    out = fio.write_table(args.out, fio.DESIGN_COLUMNS, scan)
    extra = {"minimal_n_lay": minimal_layers(scan, args.threshold), "threshold": args.threshold}
    if args.optimal_thickness:
        extra["optimal_thickness_m"] = optimal_thickness(args.rc_design)
    print(f"minimal n_lay below {fio.fmt(args.threshold)}: {extra['minimal_n_lay']}")
    if "optimal_thickness_m" in extra:
        print(f"optimal thickness: {fio.fmt(extra['optimal_thickness_m'])} m")
    fio.write_manifest(_manifest_path(args, out), "design-scan", _config_record(args), [], [out], extra=extra)
    return EXIT_OK


# --- synthetic data -----------------------------------------------------------

DEFAULT_TEMPERATURES = (0.02, 0.03, 0.045, 0.065, 0.1, 0.13, 0.17, 0.22, 0.28, 0.35, 0.45, 0.58, 0.75, 1.0)


def quality_factor(T):
    """Smooth Q(T) resembling the measured trend (1.5e6 at 0.1 K, 2.85e6 at 1 K)."""
    return 1.5e6 * (np.asarray(T) / 0.1) ** 0.279


def synth_dataset(outdir, resonator: ResonatorParams, S_inj=0.0, temperatures=DEFAULT_TEMPERATURES,
                  seed=0, n_av=60, x_co=0.0, Qprime=3.5e5, A=1e-12):
    """Directory of per-temperature spectra for :func:`cmd_pipeline`.

    The fitted Lorentzian amplitude also carries the back-action term
    ``C ((f1^2 - f0^2)^2 / f0^4 - 1/Q'^2)``, which is temperature independent,
    so the recovered non-thermal force noise is ``S_inj`` plus that term
    converted with ``k^2 / Phi_x^2``.
    """
    from .constants import CONSTANTS

    outdir = Path(outdir)
    files = []
    kB = CONSTANTS.kB
    w0 = resonator.omega0
    for i, T in enumerate(temperatures):
        Q = float(quality_factor(T))
        Teff = (T ** 4 + (x_co * Q) ** 4) ** 0.25 if x_co > 0 else T
        B = resonator.Phi_x ** 2 * (S_inj / resonator.k ** 2 + 4 * kB * Teff / (resonator.k * w0 * Q))
        p = reference_params(f0=resonator.f0, Qprime=Qprime, A=A, B=B)
        spec = synth_spectrum(SynthConfig(p, n_av=n_av, seed=(seed << 8) + i))
        f, m = fio.write_spectrum(outdir / "spectra" / f"T{i:02d}.csv", spec, temperature_K=float(T),
                                  Qprime=Qprime, Q=Q)
        files += [f, m]
    files.append(fio.write_json(outdir / "resonator.json", {
        "k": resonator.k, "f0": resonator.f0, "m": resonator.m, "Phi_x": resonator.Phi_x,
        "sigma_k": resonator.sigma_k}))
    return files


def cmd_synth(args):
    if args.kind == "spectrum":
        p = reference_params(f0=args.f0, Qprime=args.qprime, A=args.A, B=args.B)
        if args.C is not None or args.f1 is not None:
            from dataclasses import replace
            p = replace(p, C=args.C if args.C is not None else p.C, f1=args.f1 if args.f1 is not None else p.f1)
        band = tuple(args.band) if args.band else None
        spec = synth_spectrum(SynthConfig(p, args.n_av, args.sample_rate, args.n_samples, args.seed,
                                          args.mode, band))
        outs = fio.write_spectrum(args.out, spec, temperature_K=args.temperature, Qprime=p.Qprime, Q=args.Q)
        manifest = _manifest_path(args, args.out)
    elif args.kind == "thermal":
        x_co = 5.3e-8 if args.x_co is None else args.x_co
        data = synth_thermal(args.B0, args.Ba, args.Bb, x_co, args.n, None, args.noise, args.seed, args.Q)
        outs = [fio.write_thermal(args.out, data)]
        manifest = _manifest_path(args, args.out)
    else:
        res = ResonatorParams(args.k, args.f0, args.m, args.phi_x, args.sigma_k)
        outs = synth_dataset(args.out, res, args.s_inj, seed=args.seed, n_av=args.n_av, x_co=args.x_co or 0.0,
                             Qprime=args.qprime, A=args.A)
        manifest = Path(args.manifest) if args.manifest else Path(args.out) / "synth.manifest.json"
    fio.write_manifest(manifest, "synth", _config_record(args), [], list(outs))
    return EXIT_OK


# --- pipeline -----------------------------------------------------------------

def cmd_pipeline(args):
    if not args.dir:
        raise ValueError("--dir is required")
    root = Path(args.dir)
    outdir = Path(args.out_dir) if args.out_dir else root / "results"
    inputs, outputs = [], []
    manifest = Path(args.manifest) if args.manifest else outdir / "manifest.json"
    stage = "load"
    try:
        spectra_files = sorted((root / "spectra").glob("*.csv"))
        if not spectra_files:
            raise fio.FormatError(f"no spectra found in {root / 'spectra'}")
        res_file = root / "resonator.json"
        r = fio.read_json(res_file)
        for key in ("k", "f0", "m", "Phi_x"):
            if key not in r:
                raise fio.FormatError(f"{res_file}: missing {key}")
        args.k, args.f0, args.m, args.phi_x = r["k"], r["f0"], r["m"], r["Phi_x"]
        args.sigma_k = r.get("sigma_k", 0.0)
        gpath = root / "geometry.json"
        gpath = gpath if gpath.exists() else reference_geometry_path()
        mass = load_geometry(gpath)
        spectra = [fio.read_spectrum(f) for f in spectra_files]
        inputs = [res_file, gpath] + [p for f in spectra_files for p in (f, fio.meta_path_for(f))]
        for s, f in zip(spectra, spectra_files):
            for key in ("temperature_K", "Q"):
                if key not in s.meta:
                    raise fio.FormatError(f"{fio.meta_path_for(f)}: missing {key}")

        stage = "fit-spectrum"

        def one(s):
            return _fit_one(s, args, _spectrum_meta(s, args))

        with ThreadPoolExecutor(max_workers=_workers(args)) as pool:
            fits = list(pool.map(one, spectra))
        for f, fit in zip(spectra_files, fits):
            outputs.append(fio.write_json(outdir / "fits" / (f.stem + ".json"), fit.to_dict()))

        stage = "thermal"
        data = ThermalDataset(
            [s.meta["temperature_K"] for s in spectra], [s.meta["Q"] for s in spectra],
            [fit.lorentzian_amplitude for fit in fits], [fit.lorentzian_sigma for fit in fits])
        outputs.append(fio.write_thermal(outdir / "thermal_dataset.csv", data))
        record, upper = _thermal_analysis(data, args)
        outputs.append(fio.write_json(outdir / "thermal.json", record))

        stage = "exclusion"
        curve = exclusion_curve(mass, upper, _rc_grid(args), args.cl, _quad(args), args.psd_factor,
                                _workers(args))
        outputs.append(fio.write_table(outdir / "curve.csv", fio.CURVE_COLUMNS,
                                       zip(curve.rC_grid, curve.lambda_upper)))
    except Exception as exc:
        outputs = [p for p in outputs if Path(p).exists()]
        fio.write_manifest(manifest, "pipeline", _config_record(args),
                           [p for p in inputs if Path(p).exists()], outputs,
                           status="failed", failed_stage=stage, extra={"error": _describe(exc)})
        raise CliError(f"pipeline stage '{stage}' failed: {_describe(exc)}", _exit_code(exc), stage) from exc
    fio.write_manifest(manifest, "pipeline", _config_record(args), inputs, outputs,
                       extra={"S_upper": upper, "CL": args.cl, **_curve_extra(curve)})
    print(f"S_F0 = {fio.fmt(record['nonthermal_psd']['value'])} +- {fio.fmt(record['nonthermal_psd']['sigma'])} N^2/Hz; "
          f"upper limit {fio.fmt(upper)} N^2/Hz")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def _add_resonator_flags(p):
    p.add_argument("--k", type=float, default=0.43, help="stiffness (N/m)")
    p.add_argument("--sigma-k", type=float, default=0.01)
    p.add_argument("--f0", type=float, default=3532.7)
    p.add_argument("--m", type=float, default=7.1e-10, help="effective mass (kg)")
    p.add_argument("--phi-x", type=float, default=2.38e7, help="coupling (Phi0/m)")


def _add_thermal_flags(p):
    p.add_argument("--t-restrict", type=float, default=0.1, help="lowest T used in the linear fit (K)")
    p.add_argument("--n", type=float, default=4.0, help="saturation exponent")
    p.add_argument("--rel-sigma-x", type=float, default=0.01)
    p.add_argument("--cl", type=float, default=0.95)


def _add_fit_flags(p):
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--qprime", type=float, default=None)
    p.add_argument("--c-fraction", type=float, default=None)
    p.add_argument("--no-mask", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="cslbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with flag values")
        p.add_argument("--manifest", help="manifest path")
        p.set_defaults(func=func)
        return p

    p = add("csl-noise", cmd_csl_noise, "CSL force PSD over an rC grid")
    p.add_argument("--geometry")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--method", choices=("quadrature", "multilayer"), default="quadrature")
    p.add_argument("--component", help="stack label for --method multilayer")
    p.add_argument("--out", default="csl_scan.csv")
    _add_grid_flags(p)

    p = add("fit-spectrum", cmd_fit_spectrum, "fit one averaged spectrum")
    p.add_argument("--spectrum")
    p.add_argument("--meta")
    p.add_argument("--mask-report", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", default="fit.json")
    _add_fit_flags(p)

    p = add("fit-thermal", cmd_fit_thermal, "thermal fits, S_F0 and its upper limit")
    p.add_argument("--data")
    p.add_argument("--out", default="thermal.json")
    _add_resonator_flags(p)
    _add_thermal_flags(p)

    p = add("feldman-cousins", cmd_feldman_cousins, "unified interval for a non-negative mean")
    p.add_argument("--measured", type=float, required=False, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--cl", type=float, default=0.95)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--precision", type=float, default=None)
    p.add_argument("--out")

    p = add("exclusion", cmd_exclusion, "lambda upper limit versus rC")
    p.add_argument("--geometry")
    p.add_argument("--s-upper", type=float, default=None, help="force-noise limit (N^2/Hz)")
    p.add_argument("--cl", type=float, default=0.95)
    p.add_argument("--psd-factor", type=float, default=ONE_SIDED_FACTOR)
    p.add_argument("--out", default="curve.csv")
    _add_grid_flags(p)

    p = add("design-scan", cmd_design_scan, "testable lambda versus number of layer pairs")
    p.add_argument("--n-lay", type=int, nargs="+")
    p.add_argument("--d", type=float, default=320e-9)
    p.add_argument("--L1", type=float, default=100e-6)
    p.add_argument("--L2", type=float, default=100e-6)
    p.add_argument("--s-target", type=float, default=2e-36)
    p.add_argument("--rc-design", type=float, default=1e-7)
    p.add_argument("--threshold", type=float, default=REFERENCE_LAMBDA)
    p.add_argument("--psd-factor", type=float, default=ONE_SIDED_FACTOR)
    p.add_argument("--optimal-thickness", action="store_true")
    p.add_argument("--out", default="design_scan.csv")

    p = add("synth", cmd_synth, "synthetic spectrum, thermal dataset or pipeline directory")
    p.add_argument("--kind", choices=("spectrum", "thermal", "dataset"), default="spectrum")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("psd-scatter", "time-domain"), default="psd-scatter")
    p.add_argument("--n-av", type=int, default=60)
    p.add_argument("--sample-rate", type=float, default=1e5)
    p.add_argument("--n-samples", type=int, default=2 ** 22)
    p.add_argument("--band", type=float, nargs=2)
    p.add_argument("--A", type=float, default=1e-12)
    p.add_argument("--B", type=float, default=6.8e-19)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--f1", type=float, default=None)
    p.add_argument("--qprime", type=float, default=3.5e5)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--Q", type=float, default=2.83e6)
    p.add_argument("--B0", type=float, default=0.0)
    p.add_argument("--Ba", type=float, default=1.6e-12)
    p.add_argument("--Bb", type=float, default=1.7e-12)
    p.add_argument("--x-co", type=float, default=None,
                   help="crossover T/Q (K); default 5.3e-8 for thermal, none for dataset")
    p.add_argument("--n", type=float, default=4.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--s-inj", type=float, default=0.0)
    _add_resonator_flags(p)

    p = add("pipeline", cmd_pipeline, "spectra directory to exclusion curve")
    p.add_argument("--dir")
    p.add_argument("--out-dir")
    p.add_argument("--psd-factor", type=float, default=ONE_SIDED_FACTOR)
    _add_fit_flags(p)
    _add_thermal_flags(p)
    _add_grid_flags(p)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = fio.read_json(args.config)
        if not isinstance(cfg, dict):
            raise fio.FormatError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
        if unknown:
            raise fio.FormatError(f"unknown config keys: {unknown}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def _check_required(args):
    need = {"feldman-cousins": ("measured", "sigma"), "exclusion": ("s_upper",), "synth": ("out",)}
    for key in need.get(args.command, ()):
        if getattr(args, key) is None:
            raise ValueError(f"--{key.replace('_', '-')} is required")


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except fio.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        _check_required(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - mapped to documented exit codes
        code = _exit_code(exc)
        print(f"error: {_describe(exc)}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
