"""Experiment runner CLI.

Each subcommand reads one JSON config file (schema-checked, unknown keys
rejected), runs the corresponding engine deterministically for the given
seed and worker count, and writes JSON records / CSV tables / optional
SVG plots under the output directory.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import development, limits, stratonovich
from .cylinder import (CylinderMeasure, Partition, PartitionError,
                       expectation_mc, expectation_quadrature, make_functional)
from .heatkernel import KernelError, KernelEvaluator
from .manifolds import GeometryError, manifold_from_config


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


# -- config plumbing ------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def check_keys(stanza, allowed, required, where):
    if not isinstance(stanza, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(stanza) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")
    missing = set(required) - set(stanza)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def build_manifold(cfg):
    stanza = cfg.get("manifold")
    if stanza is None:
        raise ConfigError("config needs a 'manifold' stanza")
    try:
        return manifold_from_config(stanza)
    except (GeometryError, TypeError, KeyError, ValueError) as err:
        raise ConfigError(f"bad manifold stanza: {err}") from err


def build_base_point(cfg, manifold):
    raw = cfg.get("base_point")
    if raw is None:
        raise ConfigError("config needs 'base_point'")
    pt = np.atleast_1d(np.asarray(raw, dtype=np.float64))
    try:
        pt = manifold.normalize(pt)
        manifold.check_point(pt, tol=1e-8)
    except GeometryError as err:
        raise ConfigError(f"bad base_point: {err}") from err
    return pt


def build_partition(spec, where="partition"):
    check_keys(spec, {"uniform", "times"}, set(), where)
    if ("uniform" in spec) == ("times" in spec):
        raise ConfigError(f"{where} needs exactly one of 'uniform' or 'times'")
    try:
        if "uniform" in spec:
            return Partition.uniform(int(spec["uniform"]))
        return Partition(np.asarray(spec["times"], dtype=np.float64))
    except (PartitionError, ValueError) as err:
        raise ConfigError(f"bad {where}: {err}") from err


def build_chain(spec, where="chain"):
    check_keys(spec, {"dyadic", "start", "partitions"}, set(), where)
    if ("dyadic" in spec) == ("partitions" in spec):
        raise ConfigError(f"{where} needs exactly one of 'dyadic' or 'partitions'")
    try:
        if "dyadic" in spec:
            return Partition.dyadic_chain(int(spec["dyadic"]),
                                          start=int(spec.get("start", 2)))
        return [Partition(np.asarray(t, dtype=np.float64))
                for t in spec["partitions"]]
    except (PartitionError, ValueError) as err:
        raise ConfigError(f"bad {where}: {err}") from err


def build_functional_spec(cfg, key="functional"):
    stanza = cfg.get(key)
    if stanza is None:
        raise ConfigError(f"config needs a '{key}' stanza")
    check_keys(stanza, {"name", "params"}, {"name"}, key)
    return stanza["name"], dict(stanza.get("params", {}))


# -- output plumbing ------------------------------------------------------

def _out_dir(args):
    out = args.out or os.environ.get("WIENERPATH_OUT") or "."
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as err:
        raise OutputError(f"cannot create output directory {out}: {err}") from err
    return out


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from err


def _write_json(args, name, payload):
    if args.format in ("json", "both"):
        path = os.path.join(_out_dir(args), f"{name}.json")
        _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
        return path
    return None


def _write_csv(args, name, header, rows):
    if args.format in ("csv", "both"):
        path = os.path.join(_out_dir(args), f"{name}.csv")
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as err:
            raise OutputError(f"cannot write {path}: {err}") from err
        return path
    return None


def _report_payload(rep):
    return json.loads(rep.to_json())


def _report_row(rep):
    return [rep.extra.get("level", ""), rep.n, f"{rep.mesh:.12g}",
            f"{rep.estimate:.17g}", f"{rep.stderr:.17g}", rep.samples,
            rep.scheme, rep.functional, rep.seed, rep.workers]


_ROW_HEADER = ["level", "n", "mesh", "estimate", "stderr", "samples",
               "scheme", "functional", "seed", "workers"]


def _maybe_plot(args, name, reports, title):
    if args.plot:
        from .svgplot import convergence_plot
        path = os.path.join(_out_dir(args), f"{name}.svg")
        convergence_plot(reports, path, title=title)
        return path
    return None


# -- subcommands ----------------------------------------------------------

def cmd_kernel(args, cfg):
    check_keys(cfg, {"manifold", "t", "x", "y", "s", "checks", "nodes"},
               {"manifold", "t", "x"}, "config")
    manifold = build_manifold(cfg)
    t = float(cfg["t"])
    x = manifold.normalize(np.atleast_1d(np.asarray(cfg["x"], dtype=np.float64)))
    y = manifold.normalize(np.atleast_1d(np.asarray(
        cfg.get("y", cfg["x"]), dtype=np.float64)))
    nodes = int(cfg.get("nodes", 2048))
    ev = KernelEvaluator(manifold)
    record = {"manifold": manifold.config(), "t": t,
              "x": list(map(float, x)), "y": list(map(float, y)),
              "value": float(np.squeeze(ev.kernel(t, x, y)))}
    if cfg.get("checks", True):
        record["normalization_residual"] = float(ev.normalization_check(t, x, nodes))
        s = float(cfg.get("s", t))
        record["semigroup_residual"] = float(ev.semigroup_check(s, t, x, y, nodes))
    print(json.dumps(record, sort_keys=True))
    _write_json(args, "kernel", record)
    return 0


def cmd_sample(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "partition", "count"},
               {"manifold", "base_point", "partition"}, "config")
    manifold = build_manifold(cfg)
    x0 = build_base_point(cfg, manifold)
    partition = build_partition(cfg["partition"])
    count = int(cfg.get("count", 1))
    measure = CylinderMeasure(manifold, x0, partition)
    rng = np.random.default_rng(args.seed)
    pts = measure.sample_batch(rng, count)
    rows = []
    for i in range(count):
        for j, t in enumerate(partition.times[1:]):
            rows.append([i, f"{t:.12g}"]
                        + [f"{v:.17g}" for v in pts[i, j]] + [args.seed])
    header = (["sample", "time"]
              + [f"coord{k}" for k in range(manifold.point_dim)] + ["seed"])
    csv_path = _write_csv(args, "sample", header, rows)
    payload = {"manifold": manifold.config(), "seed": args.seed,
               "count": count, "times": [float(t) for t in partition.times],
               "points": pts.tolist()}
    _write_json(args, "sample", payload)
    print(f"sampled {count} skeletons (n={partition.n})"
          + (f" -> {csv_path}" if csv_path else ""))
    return 0


def cmd_estimate(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "partition", "functional",
                     "samples", "method", "nodes"},
               {"manifold", "base_point", "partition", "functional"}, "config")
    manifold = build_manifold(cfg)
    x0 = build_base_point(cfg, manifold)
    partition = build_partition(cfg["partition"])
    name, params = build_functional_spec(cfg)
    try:
        functional = make_functional(name, manifold, partition, **params)
    except (ValueError, TypeError, GeometryError) as err:
        raise ConfigError(f"bad functional: {err}") from err
    measure = CylinderMeasure(manifold, x0, partition)
    method = cfg.get("method", "mc")
    if method == "mc":
        rep = expectation_mc(measure, functional, int(cfg.get("samples", 10000)),
                             args.seed, args.workers)
    elif method == "quadrature":
        rep = expectation_quadrature(measure, functional,
                                     nodes=int(cfg.get("nodes", 64)))
    else:
        raise ConfigError(f"unknown method {method!r} (mc|quadrature)")
    print(rep.to_json())
    _write_json(args, "estimate", _report_payload(rep))
    _write_csv(args, "estimate", _ROW_HEADER, [_report_row(rep)])
    return 0


def _chain_and_path_functional(cfg):
    manifold = build_manifold(cfg)
    x0 = build_base_point(cfg, manifold)
    chain = build_chain(cfg["chain"])
    name, params = build_functional_spec(cfg)
    try:
        pf = limits.make_path_functional(name, **params)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad functional: {err}") from err
    return manifold, x0, chain, pf


def cmd_converge(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "chain", "functional",
                     "samples", "p", "nodes"},
               {"manifold", "base_point", "chain", "functional"}, "config")
    manifold, x0, chain, pf = _chain_and_path_functional(cfg)
    samples = cfg.get("samples", 20000)
    nodes = cfg.get("nodes")
    nodes = int(nodes) if nodes is not None else None
    family = limits.discretized_family(pf, manifold, chain)
    reports = limits.limit_estimate(manifold, x0, family, samples=samples,
                                    seed=args.seed, workers=args.workers,
                                    nodes=nodes)
    deltas = limits.co_cauchy_diagnostic(
        manifold, x0, family, p=int(cfg.get("p", 1)),
        samples=samples if np.isscalar(samples) else max(samples),
        seed=None if args.seed is None else args.seed + 1000,
        workers=args.workers, nodes=nodes)
    rows = []
    for k, rep in enumerate(reports):
        row = _report_row(rep)
        row.append(f"{deltas[k - 1].estimate:.17g}" if k > 0 else "")
        rows.append(row)
    _write_csv(args, "converge", _ROW_HEADER + ["delta_k"], rows)
    payload = {"levels": [_report_payload(r) for r in reports],
               "diagnostics": [_report_payload(r) for r in deltas],
               "extrapolated": limits.extrapolated_value(reports)}
    _write_json(args, "converge", payload)
    _maybe_plot(args, "converge", reports, f"converge: {pf.name}")
    print(limits.convergence_table(reports))
    print(f"limit estimate (finest level): {payload['extrapolated']:.8f}")
    return 0


def cmd_stratonovich(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "chain", "field", "samples"},
               {"manifold", "base_point", "chain", "field"}, "config")
    manifold = build_manifold(cfg)
    x0 = build_base_point(cfg, manifold)
    chain = build_chain(cfg["chain"])
    stanza = cfg["field"]
    check_keys(stanza, {"name", "params"}, {"name"}, "field")
    try:
        field = stratonovich.make_field(stanza["name"],
                                        **dict(stanza.get("params", {})))
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad field: {err}") from err
    reports = stratonovich.stratonovich_convergence(
        field, manifold, x0, chain, int(cfg.get("samples", 20000)),
        seed=args.seed, workers=args.workers)
    _write_csv(args, "stratonovich", _ROW_HEADER,
               [_report_row(r) for r in reports])
    _write_json(args, "stratonovich",
                {"levels": [_report_payload(r) for r in reports],
                 "field": field.name})
    _maybe_plot(args, "stratonovich", reports, f"L2 of midpoint sum: {field.name}")
    print(limits.convergence_table(reports))
    return 0


def cmd_develop(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "direction", "input", "output"},
               {"direction", "input", "output"}, "config")
    direction = cfg["direction"]
    if direction not in ("develop", "antidevelop"):
        raise ConfigError("direction must be 'develop' or 'antidevelop'")
    try:
        file_manifold, partition, verts = development.read_path_file(cfg["input"])
    except OSError as err:
        raise OutputError(f"cannot read path file: {err}") from err
    except (ValueError, PartitionError, GeometryError) as err:
        raise ConfigError(f"bad path file: {err}") from err
    if direction == "develop":
        manifold = build_manifold(cfg)
        x0 = build_base_point(cfg, manifold)
        flat = development.FlatPiecewisePath(partition, verts)
        curved = development.develop(flat, manifold, x0)
        development.write_path_file(cfg["output"], manifold, partition,
                                    curved.vertices)
        print(f"developed {partition.n}-segment path onto {manifold!r} "
              f"-> {cfg['output']}")
    else:
        manifold = file_manifold
        x0 = verts[0]
        deltas, ok = development.antidevelop_vertices(
            manifold, partition, verts[None, :, :], x0)
        if not bool(np.all(ok)):
            raise KernelError("anti-development hit the cut locus")
        flat_verts = np.concatenate(
            [np.zeros((1, deltas.shape[2])), np.cumsum(deltas[0], axis=0)])
        from .manifolds import Euclidean
        development.write_path_file(cfg["output"], Euclidean(deltas.shape[2]),
                                    partition, flat_verts)
        print(f"anti-developed path -> {cfg['output']}")
    return 0


def cmd_geometric(args, cfg):
    check_keys(cfg, {"manifold", "base_point", "chain", "functional",
                     "samples", "scheme"},
               {"manifold", "base_point", "chain", "functional"}, "config")
    manifold, x0, chain, pf = _chain_and_path_functional(cfg)
    scheme = cfg.get("scheme", "geometric")
    if scheme not in ("geometric", "cylinder", "both"):
        raise ConfigError("scheme must be geometric, cylinder, or both")
    samples = cfg.get("samples", 20000)
    geo = cyl = None
    if scheme in ("geometric", "both"):
        geo = development.geometric_limit_estimate(
            manifold, x0, pf, chain, samples, args.seed, args.workers)
    if scheme in ("cylinder", "both"):
        cyl = limits.limit_estimate(manifold, x0, pf, chain, samples=samples,
                                    seed=args.seed, workers=args.workers)
    rows = []
    for reports in (geo, cyl):
        if reports:
            rows.extend(_report_row(r) for r in reports)
    _write_csv(args, "geometric", _ROW_HEADER, rows)
    payload = {"scheme": scheme}
    if geo:
        payload["geometric"] = [_report_payload(r) for r in geo]
        print("geometric scheme:")
        print(limits.convergence_table(geo))
    if cyl:
        payload["cylinder"] = [_report_payload(r) for r in cyl]
        print("cylinder scheme:")
        print(limits.convergence_table(cyl))
    if geo and cyl:
        diff = geo[-1].estimate - cyl[-1].estimate
        joint = float(np.hypot(geo[-1].stderr, cyl[-1].stderr))
        payload["final_level_difference"] = diff
        payload["final_level_joint_stderr"] = joint
        print(f"final-level difference: {diff:+.3e} (joint stderr {joint:.3e})")
    _write_json(args, "geometric", payload)
    _maybe_plot(args, "geometric", geo or cyl, f"geometric: {pf.name}")
    return 0


COMMANDS = {
    "kernel": cmd_kernel,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "converge": cmd_converge,
    "stratonovich": cmd_stratonovich,
    "develop": cmd_develop,
    "geometric": cmd_geometric,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wienerpath",
        description="Finite-dimensional approximation schemes for Wiener "
                    "path integrals on closed manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory "
                       "(default: WIENERPATH_OUT or cwd)")
        p.add_argument("--format", choices=("csv", "json", "both"),
                       default="both")
        p.add_argument("--plot", action="store_true",
                       help="emit an SVG convergence plot")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (KernelError, GeometryError, FloatingPointError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except OutputError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
