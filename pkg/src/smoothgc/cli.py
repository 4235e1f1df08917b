"""Command-line pipelines: cluster, train, eval, sweep, inspect, convolve.

Progress goes to standard error; machine-readable results go to standard
output and to files under --out.  A command exits 0 only when its report was
fully written; partial outputs are removed on failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as data_io
from . import plots
from .config import TrainConfig, parse_value, read_config
from .errors import SmoothgcError
from .graph import AttributedGraph, LayerSource
from .metrics import evaluate
from .sensor import fixed_k_representation
from .spectral import kmeans, linear_kernel, spectral_embedding, symmetrize
from .training import auto_select_proportion, train

log = logging.getLogger("smoothgc")


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value
    return out


def _load_config(args) -> TrainConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else TrainConfig()
    overrides = _parse_overrides(getattr(args, "set", None))
    if overrides:
        parsed = {key: parse_value(key, raw) for key, raw in overrides.items()}
        cfg = replace(cfg, **parsed)
    cfg.validate()
    return cfg


def _load_dataset(args, cfg: TrainConfig, need_r: bool = True) -> AttributedGraph:
    log.info("loading dataset %s / %s", args.content, args.cites)
    graph = data_io.load_citation_dataset(
        args.content, args.cites, row_normalize=cfg.row_normalize_features
    )
    if getattr(args, "r", None):
        graph.r = int(args.r)
    if need_r and graph.r is None:
        raise SmoothgcError("dataset has no labels; pass --r to set the cluster count")
    log.info("loaded n=%d, |E|=%d, m=%d, r=%s", graph.n, graph.n_edges,
             graph.m, graph.r)
    return graph


class _Outputs:
    """Track written files so a failed command leaves nothing behind."""

    def __init__(self):
        self.paths: list[Path] = []

    def path(self, p) -> Path:
        p = Path(p)
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            for victim in (p, Path(f"{p}.timings.json")):
                try:
                    victim.unlink()
                except OSError:
                    pass


def _fixed_k_report(graph: AttributedGraph, cfg: TrainConfig, k: int,
                    seed: int, partition) -> data_io.RunReport:
    final = {"inertia": partition.inertia}
    if graph.labels is not None:
        final.update(evaluate(partition.assignments, graph.labels))
    config = dict(cfg.to_dict(), k=k, seed=seed)
    return data_io.RunReport(
        mode="fixed-k", config=config, dataset=data_io.dataset_summary(graph),
        seed=seed, workers=cfg.workers, epochs=[], final=final, orders=[],
        stopped_early=False, n_epochs=0,
        assignments=[int(a) for a in partition.assignments],
    )


def _embedding(x_bar: np.ndarray, r: int, cfg: TrainConfig) -> np.ndarray:
    return spectral_embedding(x_bar, r, normalize=cfg.normalize_embedding,
                              dense_max=cfg.dense_eigh_max,
                              materialize_max=cfg.kernel_materialize_max)


def cmd_cluster(args) -> int:
    cfg = _load_config(args)
    graph = _load_dataset(args, cfg)
    seeds = _parse_seeds(args.seeds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _Outputs()
    try:
        reports: list[data_io.RunReport] = []
        if args.mode == "fixed-k":
            if args.k is None:
                raise SmoothgcError("fixed-k mode needs --k")
            log.info("computing order-%d representation", args.k)
            source = LayerSource(graph, args.k, cfg.self_loops, cfg.memory_budget_mb)
            x_bar = fixed_k_representation(source, args.k)
            embedding = _embedding(x_bar, graph.r, cfg)
            for seed in seeds:
                partition = kmeans(embedding, graph.r, seed,
                                   restarts=cfg.kmeans_restarts)
                reports.append(_fixed_k_report(graph, cfg, args.k, seed, partition))
                log.info("seed %d done", seed)
        else:
            for seed in seeds:
                cfg_seed = replace(cfg, seed=seed)
                _, report = train(graph, cfg_seed, args.mode)
                reports.append(report)
                log.info("seed %d done (%d epochs)", seed, report.n_epochs)

        per_seed = []
        for seed, report in zip(seeds, reports):
            data_io.write_report(report, outputs.path(out_dir / f"report_seed{seed}.json"))
            data_io.write_assignments_csv(
                report.assignments, outputs.path(out_dir / f"assignments_seed{seed}.csv")
            )
            if report.epochs:
                plots.render_loss_curve(
                    [e["loss"] for e in report.epochs],
                    outputs.path(out_dir / f"loss_seed{seed}.png"),
                )
            if report.orders:
                plots.render_order_histogram(
                    report.order_histogram(),
                    outputs.path(out_dir / f"orders_seed{seed}.png"),
                )
            row = {"seed": seed}
            row.update({k: v for k, v in report.final.items()
                        if isinstance(v, (int, float))})
            per_seed.append(row)

        metric_keys = [k for k in ("acc", "nmi", "f1", "loss", "inertia")
                       if all(k in row for row in per_seed)]
        aggregate = {
            "report_version": data_io.REPORT_VERSION,
            "kind": "aggregate",
            "mode": args.mode,
            "seeds": seeds,
            "mean": {k: sum(row[k] for row in per_seed) / len(per_seed)
                     for k in metric_keys},
            "per_seed": per_seed,
        }
        text = json.dumps(aggregate, sort_keys=True, indent=2)
        agg_path = outputs.path(out_dir / "aggregate.json")
        agg_path.write_text(text + "\n", encoding="utf-8")
        plots.render_metric_bars(per_seed, outputs.path(out_dir / "metrics.png"))
        print(text)
        return 0
    except Exception:
        outputs.cleanup()
        raise


def cmd_train(args) -> int:
    cfg = _load_config(args)
    graph = _load_dataset(args, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _Outputs()
    try:
        _, report = train(graph, cfg, args.mode)
        data_io.write_report(report, outputs.path(out_dir / "report.json"))
        data_io.write_assignments_csv(report.assignments,
                                      outputs.path(out_dir / "assignments.csv"))
        plots.render_loss_curve([e["loss"] for e in report.epochs],
                                outputs.path(out_dir / "loss.png"))
        plots.render_order_histogram(report.order_histogram(),
                                     outputs.path(out_dir / "orders.png"))
        print(json.dumps(report.final, sort_keys=True, indent=2))
        return 0
    except Exception:
        outputs.cleanup()
        raise


def cmd_eval(args) -> int:
    cfg = TrainConfig()
    graph = data_io.load_citation_dataset(args.content, args.cites,
                                          row_normalize=cfg.row_normalize_features)
    if graph.labels is None:
        raise SmoothgcError("eval needs ground-truth labels in the content file")
    assignments = data_io.read_assignments_csv(args.assignments)
    if assignments.shape[0] != graph.n:
        raise SmoothgcError(
            f"assignment file covers {assignments.shape[0]} nodes, dataset has {graph.n}"
        )
    metrics = evaluate(assignments, graph.labels)
    text = json.dumps(metrics, sort_keys=True, indent=2)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    graph = _load_dataset(args, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _Outputs()
    try:
        chosen, sweep = auto_select_proportion(graph, cfg, args.mode)
        sweep["chosen_lambda_sep"] = chosen
        sweep["mode"] = args.mode
        sweep["config"] = cfg.to_dict()
        text = json.dumps(sweep, sort_keys=True, indent=2)
        outputs.path(out_dir / "sweep.json").write_text(text + "\n", encoding="utf-8")
        rows = sweep["rows"]
        keys = sorted({k for row in rows for k in row})
        lines = [",".join(keys)]
        for row in rows:
            lines.append(",".join(repr(row[k]) if isinstance(row.get(k), float)
                                  else str(row.get(k, "")) for k in keys))
        outputs.path(out_dir / "sweep.csv").write_text("\n".join(lines) + "\n",
                                                       encoding="utf-8")
        plots.render_sweep(rows, outputs.path(out_dir / "sweep.png"))
        print(text)
        return 0
    except Exception:
        outputs.cleanup()
        raise


def cmd_inspect(args) -> int:
    doc = data_io.read_report(args.report)
    orders = doc.get("orders") or []
    if not orders:
        raise SmoothgcError(f"{args.report}: report carries no per-node orders")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _Outputs()
    try:
        arr = np.asarray(orders, dtype=np.int64)
        vals, counts = np.unique(arr, return_counts=True)
        pairs = [(int(v), int(c)) for v, c in zip(vals, counts)]
        data_io.write_histogram_csv(pairs, outputs.path(out_dir / "orders.csv"))
        plots.render_order_histogram(pairs, outputs.path(out_dir / "orders.png"))
        fraction = float((arr <= args.threshold).mean())
        log.info("fraction of nodes with order <= %d:", args.threshold)
        print(repr(fraction))
        return 0
    except Exception:
        outputs.cleanup()
        raise


def cmd_convolve(args) -> int:
    cfg = _load_config(args)
    graph = _load_dataset(args, cfg, need_r=False)
    outputs = _Outputs()
    try:
        if args.k < 0:
            raise SmoothgcError(f"--k must be >= 0, got {args.k}")
        if args.k == 0:
            x_bar = graph.features
        else:
            source = LayerSource(graph, args.k, cfg.self_loops, cfg.memory_budget_mb)
            x_bar = source.layer(args.k)
        data_io.write_matrix_csv(x_bar, outputs.path(args.out))
        if args.kernel:
            w = symmetrize(linear_kernel(x_bar))
            data_io.write_matrix_csv(w, outputs.path(args.kernel))
        return 0
    except Exception:
        outputs.cleanup()
        raise


def _add_dataset_args(p: argparse.ArgumentParser, need_r: bool = True) -> None:
    p.add_argument("--content", required=True, help="path to the .content file")
    p.add_argument("--cites", required=True, help="path to the .cites file")
    if need_r:
        p.add_argument("--r", type=int, default=None,
                       help="expected cluster count (default: inferred from labels)")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                   help="override a config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothgc",
        description="Attributed graph clustering with depth-adaptive "
                    "low-pass graph convolution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="run a clustering pipeline over seeds")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--mode", choices=("fixed-k", "as-gc", "nas-gc"), required=True)
    p.add_argument("--k", type=int, default=None, help="convolution order (fixed-k)")
    p.add_argument("--seeds", default="0", help="e.g. '0,1,2' or '0-9'")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="train once and emit a report")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--mode", choices=("as-gc", "nas-gc"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="recompute metrics from a stored assignment")
    _add_dataset_args(p, need_r=False)
    p.add_argument("--assignments", required=True, help="node,cluster CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search the loss proportion")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--mode", choices=("as-gc", "nas-gc"), default="nas-gc")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="halting-order distribution of a report")
    p.add_argument("--report", required=True)
    p.add_argument("--threshold", type=int, default=12,
                   help="report the fraction of nodes with order <= this")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("convolve", help="export a filtered feature matrix")
    _add_dataset_args(p, need_r=False)
    _add_config_args(p)
    p.add_argument("--k", type=int, required=True, help="0 echoes the raw features")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--kernel", default=None,
                   help="also write the similarity kernel to this CSV")
    p.set_defaults(func=cmd_convolve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SmoothgcError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
