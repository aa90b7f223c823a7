"""Command line front end.

Every subcommand is a pure function of its flags plus the seed: given
the same package version, configuration, and seed, output files are
byte identical, for any ``--workers`` count.  Exit codes: 0 on
success, 1 on a usage or configuration error, 2 on a numerical
failure (the failure is described by a single JSON object on stderr).

Parameters resolve in order: command line flags, then ``--config``
file entries (``key = value`` lines, ``#`` comments), then the
``SCHEIDEGGER_WORKERS`` environment variable (worker count only),
then built-in defaults.  ``--dry-run`` prints the resolved parameters
in config-file form and computes nothing.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields

from .cluster import (
    TreeSizeError,
    extract_cluster,
    extract_dual_tree,
    load_tree,
    save_tree,
    tree_from_newick,
    tree_to_newick,
)
from .diagnostics import (
    FUNCTIONALS,
    _eligible_sites,
    converge,
    depth_tail_mc,
    depth_tail_oracle,
    eta_estimate,
    horton,
    kappa_identity_check,
    uniform_binary_tree,
)
from .lattice import LatticeEnvironment, even_site
from .metric import MetricSizeError, gh_bounds, gh_exact, metric_from_csv, metric_to_csv
from .rng import derive_seed
from .skeleton import (
    HorizonError,
    backward_skeleton,
    sample_boundary,
    skeleton_metric,
    skeleton_to_json,
)

__all__ = ["RunConfig", "run", "main"]

STATS_SCHEMA = "scheidegger-stats/1"
KS_TABLE_SCHEMA = "scheidegger-ks-table/1"
NEWICK_HEADER = "[scheidegger-newick/1]"
ERROR_SCHEMA = "scheidegger-error/1"

_SEED_LIMIT = 2**64


class UsageError(Exception):
    """Bad flags, bad config file, or out-of-range parameters."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route through the
    # UsageError path instead so usage problems report status 1
    def error(self, message: str):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Resolved parameters for one invocation.

    Fields a command does not use stay ``None``.  Ranges enforced by
    :meth:`validate`: ``0 <= seed < 2**64``; every entry of
    ``n_values`` at least 1; ``replicates``, ``points``, ``leaves``,
    ``trees``, ``workers``, ``site_cap`` at least 1; ``pad`` at least
    1; ``delta`` in (0, 0.25]; ``horizon`` and ``meet_cap`` positive;
    ``fmt`` one of ``json`` or ``newick``; ``functional`` a registered
    id; ``root_x`` even (time-0 lattice sites sit on even parity).
    """

    command: str
    seed: int = 0
    n_values: tuple[int, ...] | None = None
    replicates: int | None = None
    conditioned_samples: int | None = None
    continuum_replicates: int | None = None
    functional: str | None = None
    delta: float | None = None
    points: int | None = None
    pad: float | None = None
    site_cap: int | None = None
    meet_cap: float | None = None
    horizon: float | None = None
    leaves: int | None = None
    trees: int | None = None
    root_x: int | None = None
    exact_cap: int | None = None
    workers: int = 1
    fmt: str | None = None
    out: str | None = None
    out_json: str | None = None
    out_csv: str | None = None
    forward_out: str | None = None
    dual_out: str | None = None
    skeleton_out: str | None = None
    tree: str | None = None
    a: str | None = None
    b: str | None = None
    dry_run: bool = False

    def validate(self) -> None:
        def need(cond: bool, message: str) -> None:
            if not cond:
                raise UsageError(message)

        need(0 <= self.seed < _SEED_LIMIT, "seed must fit in 64 bits")
        if self.n_values is not None:
            need(all(n >= 1 for n in self.n_values), "n must be at least 1")
        for name in ("replicates", "points", "leaves", "trees", "site_cap",
                     "conditioned_samples", "continuum_replicates", "exact_cap"):
            value = getattr(self, name)
            if value is not None:
                need(value >= 1, f"{name} must be at least 1")
        need(self.workers >= 1, "workers must be at least 1")
        if self.pad is not None:
            need(self.pad >= 1.0, "pad must be at least 1")
        if self.delta is not None:
            need(0.0 < self.delta <= 0.25, "delta must lie in (0, 0.25]")
        for name in ("meet_cap", "horizon"):
            value = getattr(self, name)
            if value is not None:
                need(value > 0.0, f"{name} must be positive")
        if self.fmt is not None:
            need(self.fmt in ("json", "newick"), "fmt must be json or newick")
        if self.functional is not None:
            need(
                self.functional in FUNCTIONALS,
                f"unknown functional {self.functional!r}; "
                f"registered: {sorted(FUNCTIONALS)}",
            )
        if self.root_x is not None:
            need(self.root_x % 2 == 0, "root-x must be even")


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty n list")
    return values


def _build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="scheidegger", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")
    by_name: dict[str, _Parser] = {}

    def sub(name: str, help_text: str) -> _Parser:
        p = subs.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", default=None, metavar="FILE",
                       help="key=value config file; explicit flags win")
        p.add_argument("--dry-run", action="store_true", dest="dry_run",
                       help="validate and print resolved parameters, compute nothing")
        by_name[name] = p
        return p

    def seed_arg(p: _Parser, default: int = 0) -> None:
        p.add_argument("--seed", type=int, default=default,
                       help=f"master seed, 64-bit (default {default})")

    def workers_arg(p: _Parser) -> None:
        p.add_argument("--workers", type=int, default=None,
                       help="process count; results are identical for any value "
                            "(default: SCHEIDEGGER_WORKERS or 1)")

    p = sub("simulate-tree", "extract one forward cluster tree and its dual tree")
    seed_arg(p)
    p.add_argument("--n", type=int, default=16, help="depth cap in levels (default 16)")
    p.add_argument("--root-x", type=int, default=0, dest="root_x",
                   help="root position at time 0, even (default 0)")
    p.add_argument("--fmt", choices=("json", "newick"), default="json",
                   help="tree file format (default json)")
    p.add_argument("--forward-out", default="tree-forward.json", dest="forward_out",
                   help="forward tree path (default tree-forward.json)")
    p.add_argument("--dual-out", default="tree-dual.json", dest="dual_out",
                   help="dual tree path (default tree-dual.json)")

    p = sub("depth-tail", "Monte-Carlo cluster depth tails against the exact recursion")
    seed_arg(p)
    p.add_argument("--n", type=_int_tuple, default=(4, 16, 64, 256, 1024),
                   help="tail levels, comma separated (default 4,16,64,256,1024)")
    p.add_argument("--replicates", type=int, default=10_000,
                   help="independent environments (default 10000)")
    workers_arg(p)
    p.add_argument("--out", default=None, help="stats CSV path (default stdout)")

    p = sub("eta", "mean crossing count over the unit window at the root scale")
    seed_arg(p)
    p.add_argument("--n", type=_int_tuple, default=(400,),
                   help="scales, comma separated (default 400)")
    p.add_argument("--replicates", type=int, default=20_000,
                   help="independent environments (default 20000)")
    p.add_argument("--pad", type=float, default=6.0,
                   help="window padding in units of sqrt(n) (default 6)")
    p.add_argument("--site-cap", type=int, default=2_000_000, dest="site_cap",
                   help="refuse windows above this many start sites (default 2000000)")
    workers_arg(p)
    p.add_argument("--out", default=None, help="stats CSV path (default stdout)")

    p = sub("kappa", "factorization identity check for site-summed functionals")
    seed_arg(p)
    p.add_argument("--n", type=_int_tuple, default=(100,),
                   help="conditioning depths, comma separated (default 100)")
    p.add_argument("--replicates", type=int, default=10_000,
                   help="environments per stream (default 10000)")
    p.add_argument("--conditioned-samples", type=int, default=None,
                   dest="conditioned_samples",
                   help="accepted conditional draws (default replicates/3, min 100)")
    p.add_argument("--functional", choices=sorted(FUNCTIONALS),
                   default="tanh-diam-forward",
                   help="registered functional id (default tanh-diam-forward)")
    workers_arg(p)
    p.add_argument("--out", default=None, help="stats CSV path (default stdout)")

    p = sub("horton", "Horton-Strahler branch counts and ratios")
    seed_arg(p)
    p.add_argument("--tree", default=None,
                   help="analyze one tree file (json or newick) instead of a corpus")
    p.add_argument("--leaves", type=int, default=2**14,
                   help="leaves per sampled tree in corpus mode (default 16384)")
    p.add_argument("--trees", type=int, default=50,
                   help="corpus size (default 50)")
    p.add_argument("--out", default=None, help="stats CSV path (default stdout)")

    p = sub("sample-crt", "sample a continuum boundary pair, skeleton, and metric")
    seed_arg(p)
    p.add_argument("--delta", type=float, default=1e-3,
                   help="grid step (default 0.001)")
    p.add_argument("--k", type=int, default=8, dest="points",
                   help="skeleton start points (default 8)")
    p.add_argument("--horizon", type=float, default=8.0,
                   help="meeting-time cap; draws beyond it fail with status 2 "
                        "(default 8)")
    p.add_argument("--out", default="crt-metric.csv",
                   help="metric CSV path (default crt-metric.csv)")
    p.add_argument("--skeleton-out", default=None, dest="skeleton_out",
                   help="also write the skeleton JSON here")

    p = sub("gh", "Gromov-Hausdorff distance between two exported metric spaces")
    p.add_argument("--a", required=True, help="first metric CSV")
    p.add_argument("--b", required=True, help="second metric CSV")
    p.add_argument("--exact-cap", type=int, default=8, dest="exact_cap",
                   help="largest size solved exactly; above it print "
                        "lower and upper bounds (default 8)")

    p = sub("converge", "discrete-vs-continuum summary comparison across scales")
    seed_arg(p)
    p.add_argument("--n", type=_int_tuple, default=(100, 400),
                   help="lattice scales, comma separated (default 100,400)")
    p.add_argument("--replicates", type=int, default=1500,
                   help="conditioned trees per scale (default 1500)")
    p.add_argument("--continuum-replicates", type=int, default=None,
                   dest="continuum_replicates",
                   help="reference corpus size (default 2x replicates)")
    p.add_argument("--points", type=int, default=8,
                   help="sample points per tree (default 8)")
    p.add_argument("--delta", type=float, default=1e-3,
                   help="reference grid step, keep well below 1/max(n) "
                        "(default 0.001)")
    p.add_argument("--meet-cap", type=float, default=24.0, dest="meet_cap",
                   help="depth factor at which draws are truncated (default 24)")
    workers_arg(p)
    p.add_argument("--out-json", default=None, dest="out_json",
                   help="report JSON path (default stdout)")
    p.add_argument("--out-csv", default=None, dest="out_csv",
                   help="plot-ready KS table CSV path")

    return parser, by_name


def _coerce(raw: str, action: argparse.Action, key: str):
    if isinstance(action, argparse._StoreTrueAction):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key} expects a boolean, got {raw!r}")
    if action.type is not None:
        try:
            return action.type(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}")
    return raw


def _load_config(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if "=" not in text:
                    raise UsageError(
                        f"{path}:{lineno}: expected key=value, got {text!r}"
                    )
                key, raw = text.split("=", 1)
                entries[key.strip()] = raw.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    return entries


def _parse(argv: list[str]) -> argparse.Namespace:
    parser, by_name = _build_parser()
    ns = parser.parse_args(argv)
    config_path = getattr(ns, "config", None)
    if config_path:
        entries = _load_config(config_path)
        sub = by_name[ns.command]
        actions = {a.dest: a for a in sub._actions if a.dest != "help"}
        defaults = {}
        for key, raw in entries.items():
            if key == "command":
                if raw != ns.command:
                    raise UsageError(
                        f"config is for command {raw!r}, invoked {ns.command!r}"
                    )
                continue
            if key == "config" or key not in actions:
                raise UsageError(f"unknown config key {key!r} for {ns.command}")
            defaults[key] = _coerce(raw, actions[key], key)
        sub.set_defaults(**defaults)
        # flags win: a second parse keeps explicit command-line values
        # on top of the config-provided defaults
        ns = parser.parse_args(argv)
    return ns


def _resolve(ns: argparse.Namespace) -> RunConfig:
    if hasattr(ns, "workers") and ns.workers is None:
        raw = os.environ.get("SCHEIDEGGER_WORKERS")
        if raw is not None:
            try:
                ns.workers = int(raw)
            except ValueError:
                raise UsageError(f"SCHEIDEGGER_WORKERS is not an int: {raw!r}")
        else:
            ns.workers = 1
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, value in vars(ns).items():
        if key in ("config",):
            continue
        name = "n_values" if key == "n" else key
        if name in known and value is not None:
            values[name] = value
    if isinstance(values.get("n_values"), int):
        values["n_values"] = (values["n_values"],)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _print_params(cfg: RunConfig) -> None:
    lines = [f"command={cfg.command}"]
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        if f.name in ("command", "dry_run"):
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        key = "n" if f.name == "n_values" else f.name
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key}={text}")
    sys.stdout.write("\n".join(lines) + "\n")


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


def _write_stats(rows: list[tuple], out: str | None) -> None:
    lines = [f"# schema={STATS_SCHEMA}", "n,statistic,estimate,se,oracle,z"]
    for row in rows:
        lines.append(",".join(_fmt_cell(cell) for cell in row))
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)


def _z_or_none(estimate: float, oracle: float, se: float):
    if se == 0.0:
        return None if estimate == oracle else math.inf
    return (estimate - oracle) / se


def _write_tree(tree, path: str, fmt: str) -> None:
    if fmt == "newick":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(NEWICK_HEADER + "\n" + tree_to_newick(tree) + "\n")
    else:
        save_tree(tree, path)


def _read_tree(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        # newick with the version comment on its own header line
        _, _, rest = stripped.partition("]")
        return tree_from_newick(rest.strip())
    if stripped.startswith("("):
        return tree_from_newick(stripped)
    return load_tree(path)


def _cmd_simulate_tree(cfg: RunConfig) -> int:
    env = LatticeEnvironment(cfg.seed)
    root = even_site(cfg.root_x, 0)
    depth = cfg.n_values[0]
    forward = extract_cluster(env, root, max_depth=depth)
    dual = extract_dual_tree(env, root, max_depth=depth)
    _write_tree(forward, cfg.forward_out, cfg.fmt)
    _write_tree(dual, cfg.dual_out, cfg.fmt)
    return 0


def _cmd_depth_tail(cfg: RunConfig) -> int:
    table = depth_tail_mc(
        cfg.seed, list(cfg.n_values), cfg.replicates, workers=cfg.workers
    )
    rows = [
        (r.n, "depth-tail", r.estimate, r.se, r.oracle,
         _z_or_none(r.estimate, r.oracle, r.se))
        for r in table
    ]
    _write_stats(rows, cfg.out)
    return 0


def _cmd_eta(cfg: RunConfig) -> int:
    rows = []
    for i, n in enumerate(cfg.n_values):
        est = eta_estimate(
            derive_seed(cfg.seed, i),
            n,
            cfg.replicates,
            pad=cfg.pad,
            site_cap=cfg.site_cap,
            workers=cfg.workers,
        )
        oracle = len(_eligible_sites(n)) * depth_tail_oracle(n)
        rows.append(
            (n, "eta", est.mean, est.se, oracle,
             _z_or_none(est.mean, oracle, est.se))
        )
    _write_stats(rows, cfg.out)
    return 0


def _cmd_kappa(cfg: RunConfig) -> int:
    rows = []
    for i, n in enumerate(cfg.n_values):
        report = kappa_identity_check(
            derive_seed(cfg.seed, i),
            n,
            cfg.replicates,
            cfg.functional,
            conditioned_samples=cfg.conditioned_samples,
            workers=cfg.workers,
        )
        rows.append(
            (n, "kappa-direct", report.direct, report.direct_se,
             report.factorized, report.z)
        )
        rows.append((n, "qualify-count", report.count_mean, report.count_se,
                     None, None))
        rows.append((n, "kappa-conditional", report.conditional_mean,
                     report.conditional_se, None, None))
    _write_stats(rows, cfg.out)
    return 0


def _cmd_horton(cfg: RunConfig) -> int:
    if cfg.tree is not None:
        stats = horton(_read_tree(cfg.tree))
        rows: list[tuple] = [
            (k + 1, "branch-count", count, None, None, None)
            for k, count in enumerate(stats.branch_counts)
        ]
        rows.extend(
            (k + 1, "horton-ratio", ratio, None, 4.0, None)
            for k, ratio in enumerate(stats.ratios)
        )
        _write_stats(rows, cfg.out)
        return 0
    all_stats = [
        horton(uniform_binary_tree(cfg.leaves, derive_seed(cfg.seed, t)))
        for t in range(cfg.trees)
    ]
    max_order = max(s.max_order for s in all_stats)
    rows = []
    for k in range(max_order):
        counts = [s.branch_counts[k] for s in all_stats if s.max_order > k]
        mean = sum(counts) / len(counts)
        var = sum((c - mean) ** 2 for c in counts) / len(counts)
        se = math.sqrt(var / len(counts))
        rows.append((k + 1, "branch-count", mean, se, None, None))
    for k in range(max_order - 1):
        ratios = [s.ratios[k] for s in all_stats if s.max_order > k + 1]
        mean = sum(ratios) / len(ratios)
        var = sum((r - mean) ** 2 for r in ratios) / len(ratios)
        se = math.sqrt(var / len(ratios))
        # the asymptotic bifurcation ratio is the reference only at
        # orders far from the trunk; z is left to the reader
        rows.append((k + 1, "horton-ratio", mean, se, 4.0, None))
    _write_stats(rows, cfg.out)
    return 0


def _cmd_sample_crt(cfg: RunConfig) -> int:
    boundary = sample_boundary(cfg.seed, delta=cfg.delta, horizon=cfg.horizon)
    skeleton = backward_skeleton(
        boundary, k=cfg.points, seed=derive_seed(cfg.seed, 1)
    )
    space = skeleton_metric(skeleton, cfg.points)
    metric_to_csv(space, cfg.out)
    if cfg.skeleton_out is not None:
        with open(cfg.skeleton_out, "w", newline="", encoding="utf-8") as fh:
            fh.write(skeleton_to_json(skeleton) + "\n")
    return 0


def _cmd_gh(cfg: RunConfig) -> int:
    try:
        space_a = metric_from_csv(cfg.a)
        space_b = metric_from_csv(cfg.b)
    except OSError as exc:
        raise UsageError(f"cannot read metric file: {exc}")
    except ValueError as exc:
        raise UsageError(str(exc))
    if max(len(space_a), len(space_b)) <= cfg.exact_cap:
        distance = gh_exact(space_a, space_b, size_cap=cfg.exact_cap)
        sys.stdout.write(f"{distance:.17g}\n")
    else:
        result = gh_bounds(space_a, space_b)
        sys.stdout.write(f"{result.lower:.17g} {result.upper:.17g}\n")
    return 0


def _cmd_converge(cfg: RunConfig) -> int:
    report = converge(
        cfg.seed,
        n_values=cfg.n_values,
        replicates=cfg.replicates,
        points=cfg.points,
        meet_cap=cfg.meet_cap,
        delta=cfg.delta,
        continuum_replicates=cfg.continuum_replicates,
        workers=cfg.workers,
    )
    payload = report.to_json() + "\n"
    if cfg.out_json is None:
        sys.stdout.write(payload)
    else:
        with open(cfg.out_json, "w", newline="", encoding="utf-8") as fh:
            fh.write(payload)
    if cfg.out_csv is not None:
        lines = [f"# schema={KS_TABLE_SCHEMA}", "n,statistic,ks,pvalue"]
        for n in report.n_values:
            for row in report.reports[n].rows:
                lines.append(
                    f"{n},{row.name},{row.statistic:.17g},{row.pvalue:.17g}"
                )
        with open(cfg.out_csv, "w", newline="", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


_COMMANDS = {
    "simulate-tree": _cmd_simulate_tree,
    "depth-tail": _cmd_depth_tail,
    "eta": _cmd_eta,
    "kappa": _cmd_kappa,
    "horton": _cmd_horton,
    "sample-crt": _cmd_sample_crt,
    "gh": _cmd_gh,
    "converge": _cmd_converge,
}


def run(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        ns = _parse(list(argv))
        cfg = _resolve(ns)
        if cfg.dry_run:
            _print_params(cfg)
            return 0
        return _COMMANDS[cfg.command](cfg)
    except SystemExit as exc:
        # argparse exits directly for --help
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except (HorizonError, MemoryError, MetricSizeError, TreeSizeError,
            OverflowError, FloatingPointError, ValueError) as exc:
        payload = {
            "schema": ERROR_SCHEMA,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            payload["diagnostics"] = diagnostics
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
        return 2


def main() -> None:
    sys.exit(run())
