"""Command-line front end.

Subcommands
-----------
run       one campaign -> results CSV + manifest JSON
sweep     the four schemes x two precoders grid of one profile
plotdata  results CSV -> sorted two-column CDF CSV
selftest  quick invariant checks, one pass/fail line each

Failures exit nonzero and print a JSON object ``{"error": ..., "type": ...}``
on standard error. The default output directory is ``$CFDIFF_OUTPUT_DIR``,
falling back to the current directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMES, ConfigError, SimConfig, parse_config
from .simulator import SimResult, prelog_factor, run_campaign

__all__ = ["main", "write_results", "write_manifest", "cdf_rows", "selftest"]

OUTPUT_ENV = "CFDIFF_OUTPUT_DIR"
RESULT_COLUMNS = ("setup", "ue", "scheme", "precoder", "ber", "se", "bits", "errors")
PRECODERS = {"lpmmse": "distributed", "pmmse": "centralized"}
PROFILES = {
    # default 40-AP network with 4-AP clusters and the rate-3/4 design
    "fig2": {"L_k": 4, "N": 4},
    # 2-AP clusters (Alamouti) with 10-antenna APs
    "fig3": {"L_k": 2, "N": 10},
}

log = logging.getLogger("cfdiff")


class CliError(RuntimeError):
    pass


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_results(result: SimResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in result.rows():
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return path


def read_results(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise CliError(f"results file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise CliError(f"{path} lacks columns {sorted(missing)}")
        return list(reader)


def write_manifest(cfg: SimConfig, outputs: list, started: str, path) -> Path:
    """Manifest with the config snapshot and a digest per output file."""
    path = Path(path)
    manifest = {
        "tool": "cfdiff",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in outputs],
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def cdf_rows(values) -> list[tuple[float, float]]:
    """Sorted values paired with cumulative probabilities ``k / n``."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    return [(float(x), (k + 1) / n) for k, x in enumerate(v)]


# ---------------------------------------------------------------------------
# subcommands

def _config_from_args(args, **extra) -> SimConfig:
    overrides = {
        "scheme": getattr(args, "scheme", None),
        "processing": PRECODERS.get(getattr(args, "precoder", None) or ""),
        "setups": args.setups,
        "blocks": args.blocks,
        "seed": args.seed,
        "workers": args.workers,
    }
    overrides.update(extra)
    return parse_config(args.config, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_one(cfg: SimConfig, out: Path, stem: str) -> tuple[Path, SimResult]:
    res = run_campaign(cfg)
    return write_results(res, out / f"{stem}.csv"), res


def cmd_run(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    cfg = _config_from_args(args)
    out = _out_dir(args)
    stem = args.name or f"results_{cfg.scheme}_{cfg.precoder}"
    csv_path, res = _run_one(cfg, out, stem)
    manifest = write_manifest(cfg, [csv_path], started, out / f"{stem}.manifest.json")
    print(f"{csv_path}  median BER {res.median_setup('ber'):.4g}  "
          f"median SE {res.median_setup('se'):.4g}")
    print(manifest)
    return 0


def cmd_sweep(args) -> int:
    started = datetime.now(timezone.utc).isoformat()
    profile = PROFILES[args.profile]
    out = _out_dir(args)
    written = []
    base = None
    for scheme in SCHEMES:
        for precoder, processing in PRECODERS.items():
            cfg = _config_from_args(args, scheme=scheme, processing=processing, **profile)
            base = base or cfg
            path, res = _run_one(cfg, out, f"{args.profile}_{scheme}_{precoder}")
            written.append(path)
            print(f"{path}  median BER {res.median_setup('ber'):.4g}  "
                  f"median SE {res.median_setup('se'):.4g}")
    manifest = write_manifest(base, written, started, out / f"{args.profile}.manifest.json")
    print(manifest)
    return 0


def cmd_plotdata(args) -> int:
    rows = read_results(args.results)
    values = [float(r[args.metric]) for r in rows]
    if not values:
        raise CliError(f"{args.results} has no data rows")
    target = Path(args.output) if args.output else \
        Path(args.results).with_name(Path(args.results).stem + f"_cdf_{args.metric}.csv")
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([args.metric, "cdf"])
        for v, p in cdf_rows(values):
            writer.writerow([repr(v), repr(p)])
    print(target)
    return 0


def selftest(verbose: bool = True) -> bool:
    """Fast versions of the core invariants; returns True when all pass."""
    from .access import assign_pilots_and_cluster
    from .diffcoding import (DESIGNS, PskConstellation, StbcCodebook,
                             appendix_identity_check, diff_encode_chain,
                             dstbc_ml_decode_bruteforce, dstbc_ml_decode_fast)
    from .geometry import build_large_scale, drop_topology
    from .mathcore import RandomStream, hermitian_solve, standard_complex_normal

    rng = np.random.default_rng(2024)
    const = PskConstellation(8)
    checks = {}

    def unitary_chains():
        for d in DESIGNS.values():
            idx = rng.integers(0, 8, size=(200, 47, d.n_s))
            C = diff_encode_chain(d.map(const.points[idx]))
            eye = np.eye(d.n_t)
            err = np.linalg.norm(np.conj(np.swapaxes(C, -1, -2)) @ C - eye, axis=(-2, -1))
            if err.max() > 1e-10:
                return False
        return True

    def appendix_identity():
        for d in DESIGNS.values():
            for _ in range(200):
                g = standard_complex_normal(rng, d.n_t)
                idx = rng.integers(0, 8, size=(2, d.n_s))
                C = diff_encode_chain(d.map(const.points[idx]))
                lhs, rhs = appendix_identity_check(g, C[1], d.map(const.points[idx[0]]))
                if abs(lhs - rhs) > 1e-9 * rhs:
                    return False
        return True

    def decoder_equivalence():
        for d in DESIGNS.values():
            book = StbcCodebook(d, const)
            y_prev = standard_complex_normal(rng, (100, d.P))
            y_t = standard_complex_normal(rng, (100, d.P))
            if not np.array_equal(dstbc_ml_decode_bruteforce(y_t, y_prev, book),
                                  dstbc_ml_decode_fast(y_t, y_prev, d, const)):
                return False
        return True

    def gray_mapping():
        lab = const.labels
        return all(bin(lab[i] ^ lab[(i + 1) % 8]).count("1") == 1 for i in range(8))

    def hermitian_solver():
        M = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        A = M @ M.conj().T + np.eye(6)
        b = rng.standard_normal(6) + 0j
        return np.linalg.norm(A @ hermitian_solve(A, b) - b) <= 1e-8 * np.linalg.norm(b)

    def serving_map_valid():
        topo = drop_topology(40, 20, 500.0, 11.65, 1.65, RandomStream(5))
        sm = assign_pilots_and_cluster(build_large_scale(topo, RandomStream(6), N=4), 10, 4)
        sm.validate()
        return True

    def prelog():
        d = SimConfig()
        return (abs(prelog_factor(d) - 0.69) < 1e-12
                and abs(prelog_factor(d.replace(scheme="dpsk")) - 0.945) < 1e-12
                and abs(prelog_factor(d.replace(scheme="coherent-sync")) - 0.95) < 1e-12)

    for name, fn in [("unitary differential chains", unitary_chains),
                     ("desired-signal identity", appendix_identity),
                     ("fast vs brute-force decoder", decoder_equivalence),
                     ("Gray neighbours differ in one bit", gray_mapping),
                     ("Hermitian solver residual", hermitian_solver),
                     ("serving map invariants", serving_map_valid),
                     ("pre-log factors", prelog)]:
        try:
            ok = bool(fn())
        except Exception as err:  # report, don't abort the suite
            log.debug("selftest %s raised %r", name, err)
            ok = False
        checks[name] = ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all(checks.values())


def cmd_selftest(args) -> int:
    return 0 if selftest() else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfdiff", description="Cell-free downlink simulator with differential coding.")
    parser.add_argument("--version", action="version", version=f"cfdiff {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def campaign_flags(p):
        p.add_argument("--config", help="sectioned key=value or JSON config file")
        p.add_argument("--setups", type=int)
        p.add_argument("--blocks", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")

    p = sub.add_parser("run", help="run one campaign")
    campaign_flags(p)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--precoder", choices=tuple(PRECODERS))
    p.add_argument("--name", help="file stem for the outputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="all schemes x precoders for one profile")
    campaign_flags(p)
    p.add_argument("--profile", choices=tuple(PROFILES), default="fig2")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plotdata", help="results CSV -> CDF CSV")
    p.add_argument("results")
    p.add_argument("--metric", choices=("se", "ber"), default="se")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("selftest", help="run the invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CliError, OSError, ValueError) as err:
        payload = {"error": str(err), "type": type(err).__name__}
        for attr in ("line", "key"):
            if getattr(err, attr, None) is not None:
                payload[attr] = getattr(err, attr)
        print(json.dumps(payload), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
