"""Command-line front end: ``jrepack compress|decompress|analyze|bench``.

Subcommand ``tables`` dumps the probability tables in the binary format of
:meth:`jrepack.tables.LaplaceTableSet.to_bytes`.

Exit codes
----------
0  success
1  unexpected internal error
2  bad usage, missing input, unsupported or malformed JPEG
3  corrupt or incompatible container
4  verification failed (``decompress --verify``, ``tables --check``)
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .container import CompressInfo, compress, decompress, gain_percent
from .errors import ConfigError, CorruptContainer, CorruptStream, JrepackError, UnsupportedJpeg
from .jpeg import parse_jpeg
from .predictor import SCALE, VARIANCE, PredictorParams

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_CORRUPT = 3
EXIT_MISMATCH = 4

_PARAM_KEYS = {
    "alpha": float, "a": float, "b": float, "gamma": float,
    "sigma_init": float, "sigma_min": float, "activity": float,
    "local_activity": float, "activity_offset": float,
}
_CONFIG_KEYS = dict(
    _PARAM_KEYS, threshold=float, cross_bucket=bool, sort=bool,
    variance_mode=bool, force_msac=bool, force_rlrg=bool,
)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config(path):
    """Parse a ``key = value`` file (``#`` comments) into typed settings."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise CliError(f"cannot read config {path}: {e.strerror}", EXIT_INPUT) from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        conv = _CONFIG_KEYS[key]
        try:
            out[key] = _bool(value) if conv is bool else conv(value)
        except ValueError:
            raise ConfigError(f"{path}:{n}: bad value for {key}") from None
    return out


def settings_from_args(args):
    """Merge config file and command-line flags (flags win)."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg.get("force_msac") and cfg.get("force_rlrg"):
        raise ConfigError("--force-msac and --force-rlrg are mutually exclusive")
    kw = {k: cfg[k] for k in _PARAM_KEYS if k in cfg}
    if "a" in kw and "b" not in kw:
        kw["b"] = 1.0 - 2.0 * kw["a"]
    elif "b" in kw and "a" not in kw:
        kw["a"] = (1.0 - kw["b"]) / 2.0
    kw["mode"] = VARIANCE if cfg.get("variance_mode") else SCALE
    kw["cross_bucket"] = bool(cfg.get("cross_bucket", False))
    params = PredictorParams(**kw)
    coder = "msac" if cfg.get("force_msac") else "rlrg" if cfg.get("force_rlrg") else "auto"
    threshold = cfg.get("threshold", 0.75)
    if not 0 <= threshold <= 1:
        raise ConfigError("threshold must lie in [0, 1]")
    return {
        "params": params,
        "coder": coder,
        "threshold": threshold,
        "sort": cfg.get("sort", True),
    }


def _read_input(path):
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input not found: {path}", EXIT_INPUT)
    return p.read_bytes()


def _compress_bytes(data, settings, verify=True, info=None):
    return compress(
        data,
        settings["params"],
        threshold=settings["threshold"],
        coder=settings["coder"],
        sort=settings["sort"],
        verify=verify,
        info=info,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_compress(args):
    settings = settings_from_args(args)
    data = _read_input(args.input)
    info = CompressInfo()
    try:
        out = _compress_bytes(data, settings, verify=not args.no_verify, info=info)
    except UnsupportedJpeg as e:
        raise CliError(f"unsupported JPEG: {e}", EXIT_INPUT) from None
    except CorruptStream as e:
        raise CliError(f"invalid JPEG: {e}", EXIT_INPUT) from None
    dest = Path(args.output) if args.output else Path(str(args.input) + ".jrpk")
    dest.write_bytes(out)
    note = " (raw-scan fallback)" if info.fallback else ""
    print(
        f"{args.input}: original {len(data)} bytes, repacked {len(out)} bytes, "
        f"gain {gain_percent(len(data), len(out)):.2f}%{note}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_decompress(args):
    blob = _read_input(args.input)
    try:
        data = decompress(blob)
    except CorruptContainer as e:
        raise CliError(f"corrupt container: {e}", EXIT_CORRUPT) from None
    if args.output:
        dest = Path(args.output)
    elif str(args.input).endswith(".jrpk"):
        dest = Path(str(args.input)[:-5])
    else:
        dest = Path(str(args.input) + ".jpg")
    dest.write_bytes(data)
    if args.verify:
        ref = _read_input(args.verify)
        if ref != data:
            raise CliError(f"verify failed: output differs from {args.verify}", EXIT_MISMATCH)
        print(f"{dest}: verified identical to {args.verify}", file=sys.stderr)
    return EXIT_OK


def _analysis_image(path):
    data = _read_input(path)
    try:
        return parse_jpeg(data)
    except UnsupportedJpeg as e:
        raise CliError(f"unsupported JPEG: {e}", EXIT_INPUT) from None
    except CorruptStream as e:
        raise CliError(f"invalid JPEG: {e}", EXIT_INPUT) from None


def cmd_analyze(args):
    from . import stats

    if args.report == "process":
        rep = stats.simulate_sigma_process(
            args.alpha, args.beta, args.scale, args.k_max, args.trials, args.seed
        )
        _emit(args.output, rep.to_csv())
        for r in rep.rows:
            print(
                f"k={r['k']:>3}  mean {r['emp_mean']:.5f} (exact {r['exact_mean']:.5f}, "
                f"printed {r['printed_mean']:.5f}, z={r['z_mean']:+.2f})  "
                f"var {r['emp_var']:.5f} (exact {r['exact_var']:.5f}, "
                f"printed {r['printed_var']:.5f}, z={r['z_var']:+.2f})",
                file=sys.stderr,
            )
        return EXIT_OK
    if not args.inputs:
        raise CliError("analyze needs at least one input JPEG", EXIT_INPUT)
    images = [(p, _analysis_image(p)) for p in args.inputs]
    outputs = []
    for path, img in images:
        comp = args.component
        if not 0 <= comp < len(img.components):
            raise CliError(f"{path}: no component {comp}", EXIT_INPUT)
        if args.report == "corr":
            text = stats.bucket_correlations(
                img, comp, n_boot=args.boot, seed=args.seed, dc_deltas=args.deltas
            ).to_csv()
        elif args.report == "std":
            text = stats.std_map_to_csv(stats.position_std_map(img, comp))
        elif args.report == "zeros":
            text = stats.zero_fractions_to_csv(stats.zero_fractions(img))
        else:
            values = img.components[comp].zigzag()[:, args.bucket]
            rep = stats.distribution_overlay(values, deltas=args.deltas)
            text = rep.to_csv()
            print(
                f"{path}: sigma={rep.sigma:.4f} ks={rep.ks_distance:.4f} "
                f"tail>5sigma={rep.tail_mass:.5f} (model {rep.model_tail_mass:.5f}) "
                f"semilog R^2={rep.semilog_r2:.3f}",
                file=sys.stderr,
            )
        outputs.append((path, text))
    if len(outputs) == 1:
        _emit(args.output, outputs[0][1])
    else:
        outdir = Path(args.output or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        for path, text in outputs:
            (outdir / f"{Path(path).stem}.{args.report}.csv").write_text(text)
    return EXIT_OK


def _emit(dest, text):
    if dest:
        Path(dest).write_text(text)
    else:
        sys.stdout.write(text)


def _bench_one(job):
    path, settings = job
    row = {"name": Path(path).name, "original": None, "recompressed": None,
           "gain": None, "fallback": None, "roundtrip": None, "error": None}
    try:
        data = Path(path).read_bytes()
        row["original"] = len(data)
        info = CompressInfo()
        out = _compress_bytes(data, settings, info=info)
        row["recompressed"] = len(out)
        row["gain"] = round(gain_percent(len(data), len(out)), 4)
        row["fallback"] = info.fallback
        row["roundtrip"] = decompress(out) == data
    except JrepackError as e:
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def format_table(rows, mean):
    lines = [f"{'image name':<28} {'original size':>14} {'re-compressed size':>19} {'gain, %':>8}"]
    for r in rows:
        if r["error"]:
            lines.append(f"{Path(r['name']).stem:<28} {'ERROR':>14}  {r['error']}")
        else:
            flag = "" if r["roundtrip"] else "  ROUND-TRIP MISMATCH"
            lines.append(
                f"{Path(r['name']).stem:<28} {r['original']:>14} {r['recompressed']:>19} "
                f"{r['gain']:>8.2f}{flag}"
            )
    if mean is not None:
        lines.append(f"{'average':<28} {'':>14} {'':>19} {mean:>8.2f}")
    return "\n".join(lines) + "\n"


def cmd_bench(args):
    settings = settings_from_args(args)
    d = Path(args.directory)
    if not d.is_dir():
        raise CliError(f"not a directory: {d}", EXIT_INPUT)
    files = sorted(p for p in d.iterdir() if p.is_file() and p.suffix.lower() in (".jpg", ".jpeg"))
    if not files:
        raise CliError(f"no JPEG files in {d}", EXIT_INPUT)
    jobs = [(str(p), settings) for p in files]
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    good = [r["gain"] for r in rows if r["error"] is None]
    mean = sum(good) / len(good) if good else None
    sys.stdout.write(format_table(rows, mean))
    print(f"{len(rows)} files in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    if args.json:
        p = settings["params"]
        doc = {
            "files": rows,
            "mean_gain": None if mean is None else round(mean, 4),
            "settings": {
                "coder": settings["coder"], "threshold": settings["threshold"],
                "sort": settings["sort"], "predictor": p.get_params(),
            },
        }
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_tables(args):
    import hashlib

    from .tables import build_tables, reference_tables

    tables = build_tables()
    blob = tables.to_bytes()
    if args.check and reference_tables() != tables:
        raise CliError("built tables differ from the shipped reference blob", EXIT_MISMATCH)
    if args.output:
        Path(args.output).write_bytes(blob)
    print(f"{len(blob)} bytes, sha256 {hashlib.sha256(blob).hexdigest()}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_codec_options(p):
    p.add_argument("--config", help="key = value settings file")
    g = p.add_argument_group("predictor")
    g.add_argument("--alpha", type=float, help="smoothing weight (default 0.25)")
    g.add_argument("--A", dest="a", type=float, help="horizontal/vertical blend weight (default 0.4)")
    g.add_argument("--B", dest="b", type=float, help="diagonal blend weight (default 1 - 2A)")
    g.add_argument("--gamma", type=float, help="cross-bucket smoothing weight (default 0.9)")
    g.add_argument("--sigma-init", type=float, help="initial scale (default 1.0)")
    g.add_argument("--sigma-min", type=float, help="scale floor (default 0.05)")
    g.add_argument("--activity", type=float, help="block activity exponent (default 0.5)")
    g.add_argument("--local-activity", type=float, help="adjacent-frequency activity exponent (default 0.4)")
    g.add_argument("--activity-offset", type=float, help="activity ratio offset (default 1.0)")
    g.add_argument("--cross-bucket", action="store_true", default=None, help="enable the cross-bucket term")
    g.add_argument("--variance-mode", action="store_true", default=None, help="smooth variances instead of scales")
    c = p.add_argument_group("coders")
    c.add_argument("--threshold", type=float, help="zero fraction above which RLRG is used (default 0.75)")
    c.add_argument("--sort", dest="sort", action="store_true", default=None,
                   help="sort RLRG buckets by the previous bucket (default)")
    c.add_argument("--no-sort", dest="sort", action="store_false")
    x = c.add_mutually_exclusive_group()
    x.add_argument("--force-msac", action="store_true", default=None, help="use MSAC for every bucket")
    x.add_argument("--force-rlrg", action="store_true", default=None, help="use RLRG for every bucket")


def build_parser():
    parser = argparse.ArgumentParser(prog="jrepack", description="Lossless JPEG repacker.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="repack a baseline JPEG")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="output path (default INPUT.jrpk)")
    p.add_argument("--no-verify", action="store_true", help="skip the in-memory decode check")
    _add_codec_options(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="restore the original JPEG")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--verify", metavar="REFERENCE", help="compare the result with this file")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("analyze", help="coefficient statistics as CSV")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--report", required=True, choices=["corr", "std", "overlay", "zeros", "process"])
    p.add_argument("-o", "--output", help="CSV file (one input) or directory (several)")
    p.add_argument("--component", type=int, default=0)
    p.add_argument("--bucket", type=int, default=1, choices=range(64), metavar="K")
    p.add_argument("--deltas", action="store_true", help="use DC differences (overlay of bucket 0, corr)")
    p.add_argument("--boot", type=int, default=200, help="corr: bootstrap resamples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.5, help="process: decay")
    p.add_argument("--beta", type=float, default=1.0, help="process: gain")
    p.add_argument("--scale", type=float, default=1.0, help="process: Laplace scale of Z")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--k-max", type=int, default=100)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="repack every JPEG of a directory and tabulate gains")
    p.add_argument("directory")
    p.add_argument("--json", help="also write machine-readable results here")
    p.add_argument("--jobs", type=int, default=1)
    _add_codec_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tables", help="dump the probability tables as a binary blob")
    p.add_argument("-o", "--output", help="write the blob here")
    p.add_argument("--check", action="store_true", help="compare with the shipped reference")
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"jrepack: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"jrepack: bad settings: {e}", file=sys.stderr)
        return EXIT_INPUT
    except JrepackError as e:
        print(f"jrepack: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
