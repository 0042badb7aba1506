"""Experiment runner: named scenarios, seeding, and CSV emission.

Scenarios map one-to-one onto figure families; `promac manifest` lists
the exact flag sets that regenerate each figure's data and
`promac figure <id>` runs one of them. Output is always CSV (header row,
comma separators, '.' decimals, LF endings), written atomically.

Configuration may come from a flat key=value file (--config); explicit
command-line flags override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass

from . import analysis, simkit
from .depsets import (
    BoundExhaustedError,
    DependencyProfile,
    InfeasibleSearchError,
    build_profile,
    search_shortest_sets,
    uniform_profile,
    window_profile,
)
from .simkit import (
    CHANNEL_PRESETS,
    DEFAULT_PROFILE_SEED,
    GilbertElliot,
    SchemeConfig,
    TrialPlan,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

CSV_SCHEMAS = {
    "deps": ("order", "g", "rank", "length", "marks"),
    "delay": ("scheme", "tag_bits", "g", "immediate_bits", "x", "y_min", "y_max"),
    "resilience": ("scheme", "tag_bits", "g", "immediate_bits", "x", "y_min", "y_max"),
    "memory": ("scheme", "tag_bits", "g", "immediate_bits", "x", "y_min", "y_max"),
    "jam": ("scheme", "tag_bits", "q", "success", "ci"),
    "channel": ("scheme", "tag_bits", "channel", "mean_unverifiable", "ci"),
    "predictor": ("scheme", "tag_bits", "channel", "alpha", "success", "ci"),
    "dos": ("scheme", "k_drops", "discarded"),
    "manifest": ("figure", "scenario", "flags"),
}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_csv(path: str, header, rows):
    """Atomic CSV write: temp file in the target directory, then rename."""
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(_fmt(v) for v in row) + "\n"
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Curve:
    """One scheme parameterization in a bundle: scheme:tag_bits[:g[:imm]]."""

    scheme: str
    tag_bits: int
    g: int
    immediate_bits: int = 0

    @classmethod
    def parse(cls, text: str, max_loss: int) -> "Curve":
        parts = text.split(":")
        scheme = parts[0]
        tag_bits = int(parts[1]) if len(parts) > 1 else 32
        imm = int(parts[3]) if len(parts) > 3 else 0
        if len(parts) > 2 and parts[2] != "":
            g = int(parts[2])
        else:
            progressive = tag_bits - imm
            g = max(1, max_loss // progressive) if progressive else 1
        return cls(scheme, tag_bits, g, imm)

    def profile(self, pool_size: int, profile_seed: bytes) -> DependencyProfile:
        if self.scheme == "spmac":
            return build_profile(self.tag_bits, 128, self.g, self.immediate_bits,
                                 pool_size, profile_seed)
        if self.scheme in ("window", "whips", "cumac", "minimac"):
            return window_profile(self.tag_bits, 128)
        if self.scheme == "truncated":
            return uniform_profile(self.tag_bits, self.tag_bits, (0,))
        if self.scheme in ("golomb", "sidon"):
            order = 128 // self.tag_bits
            g = 1 if self.scheme == "golomb" else self.g
            best = search_shortest_sets(order, g, 1)[0]
            return uniform_profile(self.tag_bits, 128, best.marks)
        raise ValueError(f"unknown scheme {self.scheme!r}")


def _curves(args) -> list[Curve]:
    if args.curve:
        return [Curve.parse(c, args.max_loss) for c in args.curve]
    if args.scheme is None:
        raise ValueError("need --scheme or at least one --curve")
    imm = args.immediate_bits
    g = args.g if args.g is not None else max(1, args.max_loss // max(1, args.tag_bits - imm))
    return [Curve(args.scheme, args.tag_bits, g, imm)]


def _channel(args) -> tuple[str, GilbertElliot]:
    if args.preset:
        return args.preset, CHANNEL_PRESETS[args.preset]
    if None in (args.p, args.r, args.eg, args.eb):
        raise ValueError("need --preset or all of --p --r --eg --eb")
    return "custom", GilbertElliot(args.p, args.r, args.eg, args.eb)


def _plan(args) -> TrialPlan:
    return TrialPlan(runs=args.runs, events_per_run=args.events,
                     confidence=args.confidence, seed=args.seed)


# ---------------------------------------------------------------- scenarios

def run_deps(args) -> list[tuple]:
    sets = search_shortest_sets(args.order, args.g, args.count, args.bound)
    rows = [(args.order, args.g, i, s.length, " ".join(map(str, s.marks)))
            for i, s in enumerate(sets)]
    best = sets[0]
    print(f"deps: order {args.order}, g {args.g}: shortest length {best.length}: "
          f"{{{','.join(map(str, best.marks))}}}")
    return rows


def run_delay(args) -> list[tuple]:
    rows = []
    for c in _curves(args):
        if c.scheme == "spmac":
            lo, hi = analysis.delay_envelope(c.tag_bits, 128, c.g, c.immediate_bits,
                                             args.pool, args.horizon)
        else:
            curve = analysis.delay_curve(c.profile(args.pool, args.profile_seed), args.horizon)
            lo = hi = curve
        for x in range(args.horizon + 1):
            rows.append((c.scheme, c.tag_bits, c.g, c.immediate_bits, x, lo[x], hi[x]))
    print(f"delay: {len(rows)} points over horizon {args.horizon}")
    return rows


def run_resilience(args) -> list[tuple]:
    rows = []
    for c in _curves(args):
        prof = c.profile(args.pool, args.profile_seed)
        for k in range(args.drops + 1):
            sec = analysis.worst_case_resilience(analysis.ResilienceQuery(prof, k))
            rows.append((c.scheme, c.tag_bits, c.g, c.immediate_bits, k, sec, sec))
    print(f"resilience: {len(rows)} points up to {args.drops} drops")
    if rows:
        last = rows[-1]
        print(f"  {last[0]} tag_bits={last[1]}: security {last[5]} at k={last[4]}")
    return rows


def run_memory(args) -> list[tuple]:
    grid = [int(t) for t in args.tag_grid.split(",")]
    rows = []
    for scheme in (args.scheme.split(",") if args.scheme else
                   ["whips", "cumac", "minimac", "spmac", "truncated"]):
        for t in grid:
            try:
                if scheme == "minimac":
                    lo = analysis.memory_model("minimac", t, 128, msg_len=args.msg_len_min)[0]
                    hi = analysis.memory_model("minimac", t, 128, msg_len=args.msg_len_max)[0]
                else:
                    lo, hi = analysis.memory_model(scheme, t, 128, pool_size=args.pool)
            except (ValueError, InfeasibleSearchError):
                continue  # configuration not expressible for this scheme
            rows.append((scheme, t, 1, 0, t, lo, hi))
    print(f"memory: {len(rows)} rows over tag grid {grid}")
    return rows


def run_jam(args) -> list[tuple]:
    qs = [args.q] if args.q is not None else [round(0.05 * i, 2) for i in range(21)]
    rows = []
    plan = _plan(args)
    for c in _curves(args):
        for q in qs:
            if c.scheme in ("window", "whips", "cumac", "minimac"):
                n = 128 // c.tag_bits
                rows.append((c.scheme, c.tag_bits, q,
                             analysis.jam_success_probability(n, q), 0.0))
            else:
                cfg = SchemeConfig(c.scheme, c.tag_bits, g=c.g,
                                   immediate_bits=c.immediate_bits, pool_size=args.pool,
                                   profile_seed=args.profile_seed)
                if c.immediate_bits > 0:
                    rows.append((c.scheme, c.tag_bits, q, 0.0, 0.0))
                else:
                    res = simkit.run_jammer_experiment(cfg, q, plan)
                    rows.append((c.scheme, c.tag_bits, q, res.mean, res.ci))
    print(f"jam: {len(rows)} rows")
    return rows


def run_channel(args) -> list[tuple]:
    name, model = _channel(args)
    plan = _plan(args)
    rows = []
    for c in _curves(args):
        cfg = SchemeConfig(c.scheme, c.tag_bits, g=c.g, immediate_bits=c.immediate_bits,
                           pool_size=args.pool, profile_seed=args.profile_seed)
        res = simkit.run_channel_experiment(cfg, model, plan, accounting=args.accounting)
        rows.append((c.scheme, c.tag_bits, name, res.mean, res.ci))
        print(f"channel[{args.accounting}] {c.scheme}/{c.tag_bits}b/{name}: "
              f"unverifiable {res.mean:.4f} ± {res.ci:.4f}")
    return rows


def run_predictor(args) -> list[tuple]:
    name, model = _channel(args)
    plan = _plan(args)
    alphas = [args.alpha] if args.alpha is not None else [round(0.1 * i, 2) for i in range(11)]
    rows = []
    for c in _curves(args):
        cfg = SchemeConfig(c.scheme, c.tag_bits, g=c.g, immediate_bits=c.immediate_bits,
                           pool_size=args.pool, profile_seed=args.profile_seed)
        for a in alphas:
            res = simkit.run_predictor_experiment(cfg, model, a, plan)
            rows.append((c.scheme, c.tag_bits, name, a, res.mean, res.ci))
    print(f"predictor: {len(rows)} rows on {name}")
    return rows


def run_dos(args) -> list[tuple]:
    rows = []
    for k in range(args.drops + 1):
        res = simkit.run_dos_comparison(k)
        for scheme in ("traditional", "aggregated", "shifted-xor", "window", "spmac"):
            rows.append((scheme, k, res[scheme]))
    print(f"dos: up to {args.drops} drops; at k={args.drops}: " +
          ", ".join(f"{s}={r[2]}" for s, r in
                    zip(("traditional", "aggregated", "shifted-xor", "window", "spmac"),
                        rows[-5:])))
    return rows


# ---------------------------------------------------------------- manifest

FIGURE_MANIFEST: list[tuple[str, str, list[str]]] = [
    ("fig4a", "delay", ["--curve", "golomb:8", "--curve", "golomb:16", "--curve", "golomb:32",
                        "--curve", "window:8", "--curve", "window:16", "--curve", "window:32",
                        "--curve", "truncated:8", "--curve", "truncated:16", "--curve", "truncated:32",
                        "--horizon", "200"]),
    ("fig4b", "resilience", ["--curve", "golomb:8", "--curve", "golomb:16", "--curve", "golomb:32",
                             "--curve", "window:16", "--curve", "truncated:16", "--drops", "8"]),
    ("fig5a", "delay", ["--curve", "sidon:8", "--curve", "sidon:16", "--curve", "sidon:32",
                        "--curve", "window:16", "--curve", "truncated:16", "--horizon", "100"]),
    ("fig5b", "resilience", ["--curve", "sidon:8", "--curve", "sidon:16", "--curve", "sidon:32",
                             "--curve", "window:16", "--curve", "truncated:16", "--drops", "8"]),
    ("fig6a", "delay", ["--curve", "spmac:8", "--curve", "spmac:16", "--curve", "spmac:32",
                        "--curve", "spmac:32::16", "--curve", "window:16", "--horizon", "100"]),
    ("fig6b", "resilience", ["--curve", "spmac:8", "--curve", "spmac:16", "--curve", "spmac:32",
                             "--curve", "spmac:32::16", "--curve", "window:16", "--drops", "8"]),
    ("fig8", "jam", ["--curve", "window:8", "--curve", "window:16", "--curve", "window:32"]),
    ("fig9a", "channel", ["--curve", "window:8", "--curve", "window:16", "--curve", "window:32",
                          "--curve", "spmac:8", "--preset", "high-error",
                          "--accounting", "influence"]),
    ("fig9b", "predictor", ["--curve", "window:8", "--curve", "window:16", "--curve", "window:32",
                            "--preset", "high-error"]),
    ("fig10", "memory", []),
    ("fig11", "dos", ["--drops", "8"]),
    ("fig12a", "delay", ["--max-loss", "16", "--curve", "spmac:32::16", "--curve", "spmac:16::8",
                         "--curve", "spmac:16", "--curve", "spmac:32", "--horizon", "150"]),
    ("fig12b", "resilience", ["--max-loss", "16", "--curve", "spmac:32::16", "--curve", "spmac:16::8",
                              "--curve", "spmac:16", "--curve", "spmac:32", "--drops", "8"]),
]


def figure_manifest() -> list[tuple[str, str, list[str]]]:
    """Scenario presets reproducing each figure's data set."""
    return list(FIGURE_MANIFEST)


def run_manifest(args) -> list[tuple]:
    return [(fig, scenario, " ".join(flags)) for fig, scenario, flags in FIGURE_MANIFEST]


# ---------------------------------------------------------------- parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value file; flags override file values")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--seed", type=int,
                   default=int(os.environ.get("PROMAC_SEED", "0")),
                   help="experiment RNG seed (env PROMAC_SEED as fallback)")
    p.add_argument("--profile-seed", type=_hex16, default=DEFAULT_PROFILE_SEED,
                   help="16-byte hex selection secret for dependency profiles")
    p.add_argument("--pool", type=int, default=64, help="dependency pool size")
    p.add_argument("--max-loss", type=int, default=32,
                   help="target security loss per dropped packet (picks g)")


def _add_curveish(p: argparse.ArgumentParser):
    p.add_argument("--scheme", help="single scheme name")
    p.add_argument("--tag-bits", type=int, default=32)
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--immediate-bits", type=int, default=0)
    p.add_argument("--curve", action="append", default=[],
                   metavar="SCHEME:TAG_BITS[:G[:IMM]]",
                   help="repeatable multi-config bundle entry")


def _add_channelish(p: argparse.ArgumentParser):
    p.add_argument("--preset", choices=sorted(CHANNEL_PRESETS))
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--eg", type=float)
    p.add_argument("--eb", type=float)


def _add_planish(p: argparse.ArgumentParser):
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--events", type=int, default=1000)
    p.add_argument("--confidence", type=float, default=0.99)


def _hex16(s: str) -> bytes:
    b = bytes.fromhex(s)
    if len(b) != 16:
        raise argparse.ArgumentTypeError("profile seed must be 16 bytes of hex")
    return b


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="promac",
                                 description="progressive message authentication laboratory")
    sub = ap.add_subparsers(dest="scenario", required=True)

    p = sub.add_parser("deps", help="search shortest dependency sets")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--g", type=int, default=1)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--bound", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=run_deps)

    p = sub.add_parser("delay", help="bit security vs packets received")
    _add_curveish(p)
    p.add_argument("--horizon", type=int, default=200)
    _add_common(p)
    p.set_defaults(fn=run_delay)

    p = sub.add_parser("resilience", help="worst-case security vs adversarial drops")
    _add_curveish(p)
    p.add_argument("--drops", type=int, default=8)
    _add_common(p)
    p.set_defaults(fn=run_resilience)

    p = sub.add_parser("memory", help="per-stream sender state bytes")
    p.add_argument("--scheme", default=None, help="comma list; default all")
    p.add_argument("--tag-grid", default="128,64,48,32,24,16,10,8")
    p.add_argument("--msg-len-min", type=int, default=10)
    p.add_argument("--msg-len-max", type=int, default=50)
    _add_common(p)
    p.set_defaults(fn=run_memory)

    p = sub.add_parser("jam", help="selective jammer success rates")
    _add_curveish(p)
    p.add_argument("--q", type=float, default=None, help="single jam probability; default sweep")
    _add_planish(p)
    _add_common(p)
    p.set_defaults(fn=run_jam)

    p = sub.add_parser("channel", help="unverifiable fraction on a lossy channel")
    _add_curveish(p)
    _add_channelish(p)
    _add_planish(p)
    p.add_argument("--accounting", choices=("strict", "influence"), default="strict",
                   help="strict: receiver-ledger replay; influence: symmetric "
                        "influence spans (replicates the published measurements)")
    _add_common(p)
    p.set_defaults(fn=run_channel)

    p = sub.add_parser("predictor", help="channel-predicting injection attack")
    _add_curveish(p)
    _add_channelish(p)
    _add_planish(p)
    p.add_argument("--alpha", type=float, default=None, help="prediction accuracy; default sweep")
    _add_common(p)
    p.set_defaults(fn=run_predictor)

    p = sub.add_parser("dos", help="adversarial-drop discard comparison")
    p.add_argument("--drops", type=int, default=8)
    _add_common(p)
    p.set_defaults(fn=run_dos)

    p = sub.add_parser("manifest", help="list figure-reproduction presets")
    _add_common(p)
    p.set_defaults(fn=run_manifest)

    p = sub.add_parser("figure", help="run one manifest entry")
    p.add_argument("figure_id", choices=[f for f, _, _ in FIGURE_MANIFEST])
    p.add_argument("--runs", type=int, default=None, help="override manifest runs")
    p.add_argument("--events", type=int, default=None, help="override manifest events")
    p.add_argument("--out", default="-")
    p.add_argument("--seed", type=int, default=int(os.environ.get("PROMAC_SEED", "0")))
    return ap


def _load_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            key, _, val = ln.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser, argv):
    """File values fill in everything not given explicitly on the command line."""
    if not getattr(args, "config", None):
        return args
    conf = _load_config(args.config)
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=")[0].replace("-", "_"))
    for key, val in conf.items():
        if key in explicit or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if key == "curve":
            setattr(args, key, val.split())
        elif key == "profile_seed":
            setattr(args, key, _hex16(val))
        elif isinstance(current, bool):
            setattr(args, key, val.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(val))
        elif isinstance(current, float):
            setattr(args, key, float(val))
        else:
            setattr(args, key, val)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else 0

    if args.scenario == "figure":
        fig = {f: (s, flags) for f, s, flags in FIGURE_MANIFEST}[args.figure_id]
        scenario, flags = fig
        forwarded = [scenario, *flags, "--out", args.out, "--seed", str(args.seed)]
        if scenario in ("jam", "channel", "predictor"):
            if args.runs is not None:
                forwarded += ["--runs", str(args.runs)]
            if args.events is not None:
                forwarded += ["--events", str(args.events)]
        return main(forwarded)

    try:
        args = _apply_config(args, parser, argv)
        rows = args.fn(args)
        write_csv(args.out, CSV_SCHEMAS[args.scenario], rows)
    except (BoundExhaustedError, InfeasibleSearchError) as e:
        print(f"infeasible search: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError, KeyError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
