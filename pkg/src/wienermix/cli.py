"""Command-line front end.

Each subcommand builds or loads a transform, runs one study from the library,
writes its outputs (JSON verdicts, CSV tables) into --out, and finishes with a
manifest.json that records the seed, the resolved parameters, and the sha256 of
every written file.  Runs contain no timestamps: repeating a command with the
same settings reproduces every output byte for byte.

Exit codes: 0 the run passed, 1 a verification failed (non-unitary kernel,
rejected statistical suite, mixing curve off its overlay), 2 bad input
(unreadable/malformed files or config).

Settings may come from an INI-style config file (section [run] for the global
flags, one section per subcommand for its options); explicit command-line
flags override the file.
"""

import argparse
import configparser
import math
import sys

from pathlib import Path as FilePath

import numpy as np

from .errors import NonUnitaryOperatorError, WienermixError
from .gamma import (
    gamma_ergodicity,
    gamma_from_csv,
    gamma_piecewise_planar,
    gamma_random,
    gamma_sweep,
    gamma_to_csv,
    level_to_csv,
)
from .harness import (
    RunManifest,
    ergodic_average_study,
    gaussianity_suite,
    identity_transform,
    mixing_decay_study,
)
from .hilbert import (
    FLOAT_FMT,
    ChaosKernel,
    Grid,
    HVector,
    Kernel2,
    _write_csv,
    dump_json,
    hs_norm,
    hvector_from_csv,
    kernel_from_csv,
    square_array_from_csv,
)
from .rotations import (
    RotationOp,
    basis_shift_operator,
    classify,
    spectral_measure,
)
from .sampling import (
    AmplitudeObservable,
    WickObservable,
    path_from_csv,
    path_to_csv,
    sample_batch,
    sample_wiener,
    stream,
)
from .shifts import (
    apply_shift,
    carleman_det2_log,
    check_unitary_shift,
    log_radon_nikodym_batch,
)

__all__ = ["main"]


# ----------------------------------------------------------------------
# settings: CLI flags > config file > defaults
# ----------------------------------------------------------------------


def _float_list(raw):
    vals = [float(x) for x in str(raw).split(",") if x.strip() != ""]
    if not vals:
        raise ValueError("empty list")
    return vals


_GLOBAL_SPEC = {
    "seed": (int, 0),
    "m": (int, 64),
    "paths": (int, 10000),
    "out": (str, "."),
}

# per-command option tables: key -> (converter, default); keys double as the
# CLI flag names (--key) and the config field names
_COMMAND_SPEC = {
    "check-kernel": {"in": (str, None), "tol": (float, 1e-10)},
    "apply-shift": {"kernel": (str, None), "in": (str, None)},
    "rn-report": {"kernel": (str, None), "tol": (float, 1e-10)},
    "spectrum": {
        "op": (str, None),
        "builtin": (str, "planar"),
        "angle": (float, 1.0),
        "probe": (str, None),
    },
    "classify": {
        "op": (str, None),
        "builtin": (str, "planar"),
        "angle": (float, 1.0),
        "atom-tol": (float, 1e-8),
        "horizon": (int, None),
    },
    "mixing": {
        "transform": (str, "planar"),
        "op": (str, None),
        "angle": (float, 1.0),
        "nmax": (int, 50),
        "probe": (str, None),
    },
    "gamma": {
        "family": (str, "sweep"),
        "in": (str, None),
        "n": (int, 2),
        "angle": (float, math.pi / 3.0),
        "breaks": (_float_list, [0.5, 1.0]),
        "angles": (_float_list, [math.pi / 3.0, math.pi / 2.0]),
        "bins": (int, None),
    },
    "gaussianity": {
        "transform": (str, "identity"),
        "kernel": (str, None),
        "op": (str, None),
        "alpha": (float, 0.01),
    },
    "birkhoff": {
        "transform": (str, "planar"),
        "kernel": (str, None),
        "op": (str, None),
        "angle": (float, 1.0),
        "n-steps": (int, None),
        "observable": (str, "wick"),
        "probe": (str, None),
    },
}


class InputError(WienermixError):
    """CLI-level bad input (file, flag combination, or config problem)."""


def _load_config(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InputError(f"config {path}: {exc.strerror or exc}") from None
    except configparser.MissingSectionHeaderError as exc:
        raise InputError(
            f"config {path}, line {exc.lineno}: "
            f"field outside any [section]: {exc.line.strip()}"
        ) from None
    except configparser.ParsingError as exc:
        lineno, text = exc.errors[0]
        raise InputError(f"config {path}, line {lineno}: cannot parse {text}") from None
    except configparser.DuplicateOptionError as exc:
        raise InputError(
            f"config {path}, line {exc.lineno}, section [{exc.section}]: "
            f"duplicate field '{exc.option}'"
        ) from None
    except configparser.Error as exc:
        raise InputError(f"config {path}: {exc}") from None
    known = {"run": set(_GLOBAL_SPEC)}
    known.update({cmd: set(spec) for cmd, spec in _COMMAND_SPEC.items()})
    for section in cp.sections():
        if section not in known:
            raise InputError(f"config {path}: unknown section [{section}]")
        for key in cp[section]:
            if key not in known[section]:
                raise InputError(f"config {path}, section [{section}]: unknown field '{key}'")
    return cp


def _resolve(args, config, command):
    """Merge CLI values, config values, and defaults into one settings dict."""
    settings = {}
    for section, spec in (("run", _GLOBAL_SPEC), (command, _COMMAND_SPEC[command])):
        for key, (conv, default) in spec.items():
            cli = getattr(args, key.replace("-", "_"), None)
            if cli is not None:
                settings[key] = cli
            elif config is not None and config.has_option(section, key):
                raw = config.get(section, key)
                try:
                    settings[key] = conv(raw)
                except ValueError:
                    raise InputError(
                        f"config section [{section}], field '{key}': cannot parse {raw!r}"
                    ) from None
            else:
                settings[key] = default
    return settings


# ----------------------------------------------------------------------
# shared plumbing
# ----------------------------------------------------------------------


def _outdir(settings):
    out = FilePath(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_params(settings):
    # the output directory does not influence the results, so it stays out of
    # the manifest: reruns into different directories stay byte-identical
    return {k: v for k, v in settings.items() if k not in ("seed", "out")}


def _finish(command, settings, outdir, written):
    manifest = RunManifest(
        command=command, master_seed=settings["seed"], params=_manifest_params(settings)
    )
    for path in written:
        manifest.record(path.name, path)
    dump_json(manifest.as_dict(), outdir / "manifest.json")


def _load_kernel(path):
    try:
        return kernel_from_csv(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _load_rotation(path):
    try:
        A = square_array_from_csv(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return RotationOp(A)
    except NonUnitaryOperatorError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_probe(path, grid):
    if path is None:
        return HVector.constant(grid)
    try:
        h = hvector_from_csv(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    if h.grid.m != grid.m:
        raise InputError(f"{path}: probe has m={h.grid.m}, run uses m={grid.m}")
    return h


def _builtin_rotation(name, m, angle, seed):
    if name == "identity":
        return RotationOp.identity(m)
    if name == "planar":
        return RotationOp.planar(m, angle)
    if name == "equidistributed":
        return RotationOp.equidistributed(m)
    if name == "haar":
        return RotationOp.haar(m, stream(seed, "cli-haar"))
    raise InputError(f"unknown rotation '{name}' (identity, planar, equidistributed, haar)")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _cmd_check_kernel(settings, outdir):
    if settings["in"] is None:
        raise InputError("check-kernel needs --in KERNEL.csv")
    K = _load_kernel(settings["in"])
    rep = check_unitary_shift(K, tol=settings["tol"])
    payload = {"verdict": "unitary" if rep.is_unitary else "non-unitary"}
    payload.update(rep.as_dict())
    out = outdir / "check_kernel.json"
    dump_json(payload, out)
    return (0 if rep.is_unitary else 1), [out]


def _cmd_apply_shift(settings, outdir):
    if settings["kernel"] is None:
        raise InputError("apply-shift needs --kernel KERNEL.csv")
    K = _load_kernel(settings["kernel"])
    written = []
    if settings["in"] is not None:
        try:
            p = path_from_csv(settings["in"])
        except OSError as exc:
            raise InputError(f"{settings['in']}: {exc.strerror or exc}") from None
        if p.grid.m != K.grid.m:
            raise InputError(
                f"path has m={p.grid.m} but kernel has m={K.grid.m}; grids must match"
            )
    else:
        p = sample_wiener(K.grid, stream(settings["seed"], "cli-path"))
        src = outdir / "input_path.csv"
        path_to_csv(p, src)
        written.append(src)
    q = apply_shift(K, p)
    shifted = outdir / "shifted_path.csv"
    path_to_csv(q, shifted)
    written.append(shifted)
    summary = outdir / "apply_shift.json"
    dump_json(
        {
            "m": K.grid.m,
            "kernel_hs_norm": hs_norm(K),
            "max_abs_increment_change": float(np.max(np.abs(q.increments - p.increments))),
        },
        summary,
    )
    written.append(summary)
    return 0, written


def _cmd_rn_report(settings, outdir):
    if settings["kernel"] is not None:
        K = _load_kernel(settings["kernel"])
    else:
        K = Kernel2.reflection(HVector.constant(Grid(settings["m"])))
    tol = settings["tol"]
    n_paths = settings["paths"]
    W = sample_batch(K.grid, n_paths, stream(settings["seed"], "rn-paths"))
    try:
        reports = log_radon_nikodym_batch(K, W, tol=tol)
    except NonUnitaryOperatorError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1, []
    log_det2, _ = carleman_det2_log(K)
    half_hs2 = 0.5 * hs_norm(K) ** 2
    identity_residual = abs(log_det2 - half_hs2)
    identity_ok = identity_residual <= tol

    table = outdir / "rn_paths.csv"
    _write_csv(
        table,
        ["path", "log_lambda", "ito_integral", "quadratic_energy"],
        [
            (
                i,
                FLOAT_FMT % rep.log_lambda,
                FLOAT_FMT % rep.ito_integral,
                FLOAT_FMT % rep.quadratic_energy,
            )
            for i, rep in enumerate(reports)
        ],
    )
    lam = np.array([rep.log_lambda for rep in reports])
    summary = outdir / "rn_report.json"
    dump_json(
        {
            "m": K.grid.m,
            "paths": n_paths,
            "hs_norm": hs_norm(K),
            "log_det2": log_det2,
            "half_hs_norm_sq": half_hs2,
            "identity_residual": identity_residual,
            "identity_tol": tol,
            "identity_ok": identity_ok,
            "mean_abs_log_lambda": float(np.mean(np.abs(lam))),
            "mean_log_lambda": float(np.mean(lam)),
            "max_abs_log_lambda": float(np.max(np.abs(lam))),
        },
        summary,
    )
    return (0 if identity_ok else 1), [table, summary]


def _cmd_spectrum(settings, outdir):
    if settings["op"] is not None:
        R = _load_rotation(settings["op"])
    else:
        R = _builtin_rotation(
            settings["builtin"], settings["m"], settings["angle"], settings["seed"]
        )
    h = _load_probe(settings["probe"], R.grid)
    sm = spectral_measure(R, h)
    table = outdir / "spectrum.csv"
    _write_csv(
        table,
        ["theta", "weight"],
        [(FLOAT_FMT % t, FLOAT_FMT % w) for t, w in zip(sm.thetas, sm.weights)],
    )
    summary = outdir / "spectrum.json"
    dump_json({"m": R.m, **sm.as_dict()}, summary)
    return 0, [table, summary]


def _cmd_classify(settings, outdir):
    if settings["op"] is not None:
        R = _load_rotation(settings["op"])
    else:
        R = _builtin_rotation(
            settings["builtin"], settings["m"], settings["angle"], settings["seed"]
        )
    probes = [HVector.basis(R.grid, i) for i in range(R.m)]
    rep = classify(R, probes, atom_tol=settings["atom-tol"], horizon=settings["horizon"])
    out = outdir / "classify.json"
    payload = rep.as_dict()
    payload["m"] = R.m
    # one spectral measure per basis probe is bulky and redundant for the
    # verdict; keep only the probe the max atom came from
    payload["probe_measures"] = [payload["probe_measures"][rep.max_atom_probe]]
    dump_json(payload, out)
    return 0, [out]


def _cmd_mixing(settings, outdir):
    kind = settings["transform"]
    if settings["op"] is not None:
        transform = _load_rotation(settings["op"])
        m = transform.m
    elif kind == "truncated":
        transform = basis_shift_operator(settings["m"])
        m = settings["m"]
    else:
        transform = _builtin_rotation(kind, settings["m"], settings["angle"], settings["seed"])
        m = settings["m"]
    h = _load_probe(settings["probe"], Grid(m))
    rep = mixing_decay_study(transform, h, settings["nmax"], settings["paths"], settings["seed"])
    table = outdir / "mixing.csv"
    _write_csv(
        table,
        ["lag", "mc", "se", "analytic"],
        [
            (int(n), FLOAT_FMT % x, FLOAT_FMT % s, FLOAT_FMT % a)
            for n, x, s, a in zip(rep.lags, rep.mc, rep.se, rep.analytic)
        ],
    )
    summary = outdir / "mixing.json"
    dump_json({"m": m, "paths": settings["paths"], **rep.as_dict()}, summary)
    return (0 if rep.all_within else 1), [table, summary]


def _cmd_gamma(settings, outdir):
    n = settings["n"]
    family = settings["family"]
    if settings["in"] is not None:
        try:
            G = gamma_from_csv(settings["in"])
        except OSError as exc:
            raise InputError(f"{settings['in']}: {exc.strerror or exc}") from None
    elif family == "random":
        G = gamma_random(Grid(settings["m"]), n, stream(settings["seed"], "cli-gamma"))
    else:
        if n != 2:
            raise InputError(f"family '{family}' is planar; it needs --n 2 (got {n})")
        if family == "sweep":
            G = gamma_sweep(Grid(settings["m"]))
        elif family == "constant":
            G = gamma_piecewise_planar(Grid(settings["m"]), [1.0], [settings["angle"]])
        elif family == "piecewise":
            G = gamma_piecewise_planar(Grid(settings["m"]), settings["breaks"], settings["angles"])
        else:
            raise InputError(f"unknown family '{family}' (constant, sweep, piecewise, random)")
    verdict = gamma_ergodicity(G, n_bins=settings["bins"])
    written = []
    echo = outdir / "gamma_samples.csv"
    gamma_to_csv(G, echo)
    written.append(echo)
    for lv in verdict.levels:
        p = outdir / f"level_{lv.j}.csv"
        level_to_csv(lv, p)
        written.append(p)
    out = outdir / "gamma_verdict.json"
    payload = verdict.as_dict()
    payload["m"] = G.grid.m
    payload["n"] = G.n
    dump_json(payload, out)
    written.append(out)
    return 0, written


def _build_gaussianity_transform(settings, grid):
    if settings["kernel"] is not None:
        return _load_kernel(settings["kernel"])
    if settings["op"] is not None:
        return _load_rotation(settings["op"])
    name = settings["transform"]
    if name == "identity":
        return identity_transform()
    if name == "reflection":
        return Kernel2.reflection(HVector.constant(grid))
    if name == "chaos2":
        return ChaosKernel(2, HVector.constant(grid), HVector.constant(grid))
    if name == "truncated":
        return basis_shift_operator(grid)
    raise InputError(
        f"unknown transform '{name}' (identity, reflection, chaos2, truncated, "
        "or --kernel/--op FILE)"
    )


def _cmd_gaussianity(settings, outdir):
    grid = Grid(settings["m"])
    transform = _build_gaussianity_transform(settings, grid)
    suite = gaussianity_suite(
        transform, grid, settings["paths"], settings["seed"], alpha=settings["alpha"]
    )
    table = outdir / "gaussianity.csv"
    _write_csv(
        table,
        ["name", "statistic", "reference", "std_error", "z", "passed"],
        [
            (
                r.name,
                FLOAT_FMT % r.statistic,
                FLOAT_FMT % r.reference,
                FLOAT_FMT % r.std_error,
                FLOAT_FMT % r.z,
                int(r.passed),
            )
            for r in suite.reports
        ],
    )
    summary = outdir / "gaussianity.json"
    dump_json(suite.as_dict(), summary)
    return (0 if suite.passed else 1), [table, summary]


def _cmd_birkhoff(settings, outdir):
    grid = Grid(settings["m"])
    if settings["kernel"] is not None:
        transform = _load_kernel(settings["kernel"])
        grid = transform.grid
    elif settings["op"] is not None:
        transform = _load_rotation(settings["op"])
        grid = transform.grid
    elif settings["transform"] == "truncated":
        transform = basis_shift_operator(grid)
    else:
        transform = _builtin_rotation(
            settings["transform"], grid.m, settings["angle"], settings["seed"]
        )
    h = _load_probe(settings["probe"], grid)
    if settings["observable"] == "wick":
        obs = WickObservable(h)
    elif settings["observable"] == "amplitude":
        obs = AmplitudeObservable(grid, h.coords)
    else:
        raise InputError(f"unknown observable '{settings['observable']}' (wick, amplitude)")
    n_steps = settings["n-steps"] if settings["n-steps"] is not None else grid.m
    rep = ergodic_average_study(
        transform,
        obs,
        grid,
        settings["paths"],
        n_steps,
        settings["seed"],
        observable_name=settings["observable"],
    )
    out = outdir / "birkhoff.json"
    dump_json({"m": grid.m, **rep.as_dict()}, out)
    return 0, [out]


_RUNNERS = {
    "check-kernel": _cmd_check_kernel,
    "apply-shift": _cmd_apply_shift,
    "rn-report": _cmd_rn_report,
    "spectrum": _cmd_spectrum,
    "classify": _cmd_classify,
    "mixing": _cmd_mixing,
    "gamma": _cmd_gamma,
    "gaussianity": _cmd_gaussianity,
    "birkhoff": _cmd_birkhoff,
}


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="INI settings file (flags override it)")
    common.add_argument("--seed", type=int, metavar="INT", help="master seed (default 0)")
    common.add_argument("--m", type=int, metavar="INT", help="grid size (default 64)")
    common.add_argument("--paths", type=int, metavar="INT", help="Monte Carlo paths (default 10000)")
    common.add_argument("--out", metavar="DIR", help="output directory (default .)")

    ap = argparse.ArgumentParser(
        prog="wienermix",
        description="Measure-preserving transforms of discretized Wiener space: "
        "build, verify, classify.",
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("check-kernel", parents=[common], help="unitarity report for a kernel CSV")
    p.add_argument("--in", metavar="FILE", help="kernel CSV (m line, then i,j,value)")
    p.add_argument("--tol", type=float, metavar="X", help="residual tolerance (default 1e-10)")

    p = sub.add_parser("apply-shift", parents=[common], help="transform a path by a kernel shift")
    p.add_argument("--kernel", metavar="FILE", help="kernel CSV")
    p.add_argument("--in", metavar="FILE", help="path CSV (t,w rows); sampled when omitted")

    p = sub.add_parser(
        "rn-report", parents=[common], help="density report for a unitary shift over MC paths"
    )
    p.add_argument("--kernel", metavar="FILE", help="kernel CSV (default: built-in reflection)")
    p.add_argument("--tol", type=float, metavar="X", help="identity tolerance (default 1e-10)")

    p = sub.add_parser("spectrum", parents=[common], help="spectral measure at a probe direction")
    p.add_argument("--op", metavar="FILE", help="orthogonal matrix CSV")
    p.add_argument("--builtin", metavar="NAME", help="identity|planar|equidistributed|haar")
    p.add_argument("--angle", type=float, metavar="X", help="planar angle in radians (default 1)")
    p.add_argument("--probe", metavar="FILE", help="direction CSV (default: constant density)")

    p = sub.add_parser("classify", parents=[common], help="ergodicity classification of a rotation")
    p.add_argument("--op", metavar="FILE", help="orthogonal matrix CSV")
    p.add_argument("--builtin", metavar="NAME", help="identity|planar|equidistributed|haar")
    p.add_argument("--angle", type=float, metavar="X", help="planar angle in radians (default 1)")
    p.add_argument("--atom-tol", type=float, metavar="X", help="atom resolution (default 1e-8)")
    p.add_argument("--horizon", type=int, metavar="N", help="autocorrelation lags (default m-1)")

    p = sub.add_parser("mixing", parents=[common], help="correlation decay along the orbit")
    p.add_argument("--transform", metavar="NAME", help="planar|identity|equidistributed|truncated")
    p.add_argument("--op", metavar="FILE", help="orthogonal matrix CSV (overrides --transform)")
    p.add_argument("--angle", type=float, metavar="X", help="planar angle in radians (default 1)")
    p.add_argument("--nmax", type=int, metavar="N", help="largest lag (default 50)")
    p.add_argument("--probe", metavar="FILE", help="direction CSV (default: constant density)")

    p = sub.add_parser("gamma", parents=[common], help="modulated-integrator ergodicity verdict")
    p.add_argument("--family", metavar="NAME", help="constant|sweep|piecewise|random")
    p.add_argument("--in", metavar="FILE", help="modulation CSV (m,n lines, then i,r,c,value)")
    p.add_argument("--n", type=int, metavar="N", help="ambient dimension (default 2)")
    p.add_argument("--angle", type=float, metavar="X", help="constant-family angle (default pi/3)")
    p.add_argument("--breaks", type=_float_list, metavar="A,B,...", help="piecewise break points")
    p.add_argument("--angles", type=_float_list, metavar="A,B,...", help="piecewise angles")
    p.add_argument("--bins", type=int, metavar="N", help="theta bins (default max(64, m))")

    p = sub.add_parser("gaussianity", parents=[common], help="is the transformed law still Wiener?")
    p.add_argument("--transform", metavar="NAME", help="identity|reflection|chaos2|truncated")
    p.add_argument("--kernel", metavar="FILE", help="kernel CSV (overrides --transform)")
    p.add_argument("--op", metavar="FILE", help="orthogonal matrix CSV (overrides --transform)")
    p.add_argument("--alpha", type=float, metavar="X", help="suite level (default 0.01)")

    p = sub.add_parser("birkhoff", parents=[common], help="orbit-average spread study")
    p.add_argument("--transform", metavar="NAME", help="planar|identity|equidistributed|truncated")
    p.add_argument("--kernel", metavar="FILE", help="kernel CSV (overrides --transform)")
    p.add_argument("--op", metavar="FILE", help="orthogonal matrix CSV (overrides --transform)")
    p.add_argument("--angle", type=float, metavar="X", help="planar angle in radians (default 1)")
    p.add_argument("--n-steps", type=int, metavar="N", help="orbit length (default m)")
    p.add_argument("--observable", metavar="NAME", help="wick|amplitude (default wick)")
    p.add_argument("--probe", metavar="FILE", help="direction CSV (default: constant density)")

    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args.config) if args.config else None
        settings = _resolve(args, config, args.command)
        outdir = _outdir(settings)
        code, written = _RUNNERS[args.command](settings, outdir)
        _finish(args.command, settings, outdir, written)
    except (InputError, WienermixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    if code == 0:
        print(f"{args.command}: pass")
    else:
        print(f"{args.command}: FAIL (see {outdir})")
    return code


if __name__ == "__main__":
    sys.exit(main())
