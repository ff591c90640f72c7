"""Command-line interface.

Subcommands: gen, validate, train-local, train, eval, infer, bench, sweep.
Exit codes: 0 success, 1 usage error, 2 data error, 3 budget/size error.
Reports are written as line-delimited JSON plus plain-text tables, with PNG
figures rendered alongside unless --no-plots is given. The run seed comes
from --seed, falling back to the STRUCTURA_SEED environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .constraints import ConstraintSet, check
from .errors import (
    ConstraintError,
    DataFormatError,
    GraphStructureError,
    InfeasibleError,
    SizeBudgetError,
    StructuraError,
)
from .exact import ExactConfig
from .corpus import (
    SyntheticSpec,
    corpus_from_payload,
    corpus_to_payload,
    feature_dims_for,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .graphs import ArgMiningMeta, LinkLabel, NodeLabel, StanceMeta, Task
from .randomized import RandConfig
from .scoring import ScorerBank
from .training import (
    Backend,
    Corpus,
    Split,
    TrainConfig,
    evaluate,
    local_factor_accuracy,
    run_backend,
    train_local,
    train_structured,
)
from .harness import bench_inference, sweep_restarts, write_history, write_records

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_seed() -> int:
    raw = os.environ.get("STRUCTURA_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise DataFormatError(f"STRUCTURA_SEED must be an integer, got {raw!r}")


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataFormatError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"config {p}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise DataFormatError(f"config {p}: top level must be an object")
    return payload


def build_parser() -> _Parser:
    parser = _Parser(prog="structura", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="run seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument(
        "--backend",
        choices=[b.value for b in Backend],
        default=None,
        help="inference backend",
    )
    common.add_argument("--restarts", type=int, default=None)
    group = common.add_mutually_exclusive_group()
    group.add_argument("--constrained", dest="constrained", action="store_true", default=None)
    group.add_argument("--unconstrained", dest="constrained", action="store_false")
    common.add_argument("--author-constraints", action="store_true", default=False)
    plots = common.add_mutually_exclusive_group()
    plots.add_argument("--plots", dest="plots", action="store_true", default=True)
    plots.add_argument("--no-plots", dest="plots", action="store_false")

    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--task", choices=[t.value for t in Task], required=True)
    p.add_argument("--graphs", type=int, default=20)
    p.add_argument("--nodes", default="2:4", help="min:max nodes per graph")
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--max-paragraph-size", type=int, default=3)
    p.add_argument(
        "--splits",
        default=None,
        help="comma counts for train,dev,test files (default: one train file)",
    )
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("validate", parents=[common], help="constraint-check a corpus")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("train-local", parents=[common], help="fit local factor scorers")
    p.add_argument("--train", required=True)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="structured training")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--init", default=None, help="initial checkpoint (default: train local)")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--hamming-weight", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("infer", parents=[common], help="predict one document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--doc", default=None, help="document id (default: first)")
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("bench", parents=[common], help="time inference backends")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--backends", default="exact,rand_c,rand")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", parents=[common], help="restart-count sweep")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--restart-list", default="1,5,10,20")
    p.add_argument("--out", required=True)

    return parser


def _seed_of(args, config) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in config:
        return int(config["seed"])
    return _env_seed()


def _rand_config(args, config, seed) -> RandConfig:
    payload = dict(config.get("rand", {}))
    payload.setdefault("seed", seed)
    cfg = RandConfig(
        restarts=int(payload.get("restarts", 5)),
        constrained=bool(payload.get("constrained", True)),
        seed=int(payload["seed"]),
        max_moves=payload.get("max_moves"),
        greedy_edge_labels=bool(payload.get("greedy_edge_labels", False)),
        relabel_each_candidate=bool(payload.get("relabel_each_candidate", True)),
    )
    if args.restarts is not None:
        cfg = replace(cfg, restarts=args.restarts)
    if args.constrained is not None:
        cfg = replace(cfg, constrained=args.constrained)
    return cfg


def _exact_config(config) -> ExactConfig:
    payload = config.get("exact", {})
    return ExactConfig(
        enumeration_cap=int(payload.get("enumeration_cap", 262_144)),
        use_branch_and_bound=bool(payload.get("use_branch_and_bound", True)),
        time_budget=payload.get("time_budget"),
    )


def _constraints(task: Task, args, config) -> ConstraintSet:
    payload = config.get("constraints")
    if payload is not None:
        cs = ConstraintSet.from_dict(payload)
        if cs.task is not task:
            raise DataFormatError(
                f"config constraints are for {cs.task.value}, corpus is {task.value}"
            )
        return cs
    return ConstraintSet.for_task(task, author_constraints=args.author_constraints)


def _backend_of(args, default=Backend.EXACT) -> Backend:
    return Backend(args.backend) if args.backend else default


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen(args, config) -> int:
    seed = _seed_of(args, config)
    payload = dict(config.get("synthetic", {}))
    payload.setdefault("task", args.task)
    payload.setdefault("graphs", args.graphs)
    try:
        lo, hi = (int(v) for v in args.nodes.split(":"))
    except ValueError:
        raise UsageError(f"--nodes expects MIN:MAX, got {args.nodes!r}")
    payload.setdefault("nodes_min", lo)
    payload.setdefault("nodes_max", hi)
    payload.setdefault("feature_dim", args.feature_dim)
    payload.setdefault("margin", args.margin)
    payload.setdefault("noise", args.noise)
    payload.setdefault("max_paragraph_size", args.max_paragraph_size)
    payload.setdefault("seed", seed)
    spec = SyntheticSpec.from_dict(payload)
    out = _outdir(args)
    if args.splits is None:
        corpus = generate_synthetic(spec)
        path = out / "train.json"
        save_corpus(corpus, path)
        print(f"wrote {corpus.n} graphs to {path}")
        return EXIT_OK
    try:
        counts = [int(v) for v in args.splits.split(",")]
    except ValueError:
        raise UsageError(f"--splits expects comma-separated counts, got {args.splits!r}")
    if len(counts) != 3:
        raise UsageError("--splits expects exactly three counts (train,dev,test)")
    for split, count, offset in zip(
        (Split.TRAIN, Split.DEV, Split.TEST), counts, range(3)
    ):
        if count <= 0:
            continue
        sub_spec = replace(spec, graphs=count, seed=spec.seed + offset, split=split)
        corpus = generate_synthetic(sub_spec)
        path = out / f"{split.value}.json"
        save_corpus(corpus, path)
        print(f"wrote {corpus.n} graphs to {path}")
    return EXIT_OK


def _cmd_validate(args, config) -> int:
    corpus = load_corpus(args.corpus)
    cs = _constraints(corpus.task, args, config)
    bad = 0
    for g, gold in corpus.pairs():
        violations = check(g, gold, cs)
        for v in violations:
            print(f"{g.id}: [{v.rule.value}] {v.message}")
        bad += bool(violations)
    if bad:
        print(f"{bad} of {corpus.n} graphs violate the constraints")
        return EXIT_DATA
    print(f"all {corpus.n} graphs satisfy the constraints")
    return EXIT_OK


def _train_config(args, config, seed, task, local: bool) -> TrainConfig:
    base = (
        TrainConfig.local_defaults(task) if local else TrainConfig.structured_defaults(task)
    )
    payload = config.get("train", {})
    cfg = replace(
        base,
        learning_rate=float(payload.get("learning_rate", base.learning_rate)),
        weight_decay=float(payload.get("weight_decay", base.weight_decay)),
        patience=int(payload.get("patience", base.patience)),
        max_epochs=int(payload.get("max_epochs", base.max_epochs)),
        hamming_weight=float(payload.get("hamming_weight", base.hamming_weight)),
        seed=seed,
    )
    lr = getattr(args, "lr", None)
    if lr is not None:
        cfg = replace(cfg, learning_rate=lr)
    return cfg


def _cmd_train_local(args, config) -> int:
    seed = _seed_of(args, config)
    corpus = load_corpus(args.train)
    cfg = _train_config(args, config, seed, corpus.task, local=True)
    if args.epochs is not None:
        cfg = replace(cfg, max_epochs=args.epochs)
    bank = ScorerBank.build(corpus.task, feature_dims_for(corpus))
    trained = train_local(corpus, bank, cfg)
    out = _outdir(args)
    path = out / "local_checkpoint.json"
    trained.save(path)
    acc = local_factor_accuracy(corpus, trained)
    print(f"local factor accuracy {acc:.4f}; checkpoint at {path}")
    return EXIT_OK


def _cmd_train(args, config) -> int:
    seed = _seed_of(args, config)
    train_corpus = load_corpus(args.train)
    dev_corpus = load_corpus(args.dev, task=train_corpus.task)
    cfg = _train_config(args, config, seed, train_corpus.task, local=False)
    if args.patience is not None:
        cfg = replace(cfg, patience=args.patience)
    if args.max_epochs is not None:
        cfg = replace(cfg, max_epochs=args.max_epochs)
    if args.hamming_weight is not None:
        cfg = replace(cfg, hamming_weight=args.hamming_weight)
    cfg = replace(
        cfg,
        backend=_backend_of(args, Backend.EXACT),
        rand=_rand_config(args, config, seed),
    )
    cs = _constraints(train_corpus.task, args, config)
    exact_cfg = _exact_config(config)
    if args.init:
        init = ScorerBank.load(args.init)
    else:
        init = train_local(
            train_corpus,
            ScorerBank.build(train_corpus.task, feature_dims_for(train_corpus)),
            replace(
                TrainConfig.local_defaults(train_corpus.task), seed=seed
            ),
        )
    result = train_structured(train_corpus, dev_corpus, init, cfg, cs, exact_cfg)
    out = _outdir(args)
    ckpt = out / "checkpoint.json"
    result.bank.save(ckpt)
    write_history(result.history, out / "history.jsonl")
    if args.plots:
        from .figures import render_history_figure

        render_history_figure(result.history, out / "history.png")
    best = result.history[result.best_epoch]
    print(
        f"trained {len(result.history)} epochs; best dev loss {best.dev_loss:.4f} "
        f"at epoch {best.epoch}; checkpoint at {ckpt}"
    )
    return EXIT_OK


def _cmd_eval(args, config) -> int:
    seed = _seed_of(args, config)
    corpus = load_corpus(args.corpus)
    bank = ScorerBank.load(args.checkpoint)
    cs = _constraints(corpus.task, args, config)
    report = evaluate(
        corpus,
        bank,
        cs,
        backend=_backend_of(args, Backend.EXACT),
        rand_cfg=_rand_config(args, config, seed),
        exact_cfg=_exact_config(config),
    )
    out = _outdir(args)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), sort_keys=True))
    (out / "metrics.txt").write_text(report.table() + "\n")
    print(report.table())
    return EXIT_OK


def _predicted_structure(g, assignment) -> dict:
    meta = g.metadata
    if isinstance(meta, ArgMiningMeta):
        nodes = {
            meta.prop_ids[i]: NodeLabel(int(assignment.values[meta.node_var[i]])).name
            for i in range(len(meta.prop_ids))
        }
        links = []
        for pair in meta.pairs:
            if assignment.values[meta.link_var[pair]] == 1:
                links.append(
                    {
                        "src": meta.prop_ids[pair[0]],
                        "dst": meta.prop_ids[pair[1]],
                        "stance": LinkLabel(
                            int(assignment.values[meta.stance_var[pair]])
                        ).name,
                    }
                )
        return {"id": g.id, "nodes": nodes, "links": links}
    assert isinstance(meta, StanceMeta)
    from .graphs import AgreementLabel, StanceLabel

    stances = {
        meta.post_ids[i]: StanceLabel(int(assignment.values[meta.post_var[i]])).name
        for i in range(len(meta.post_ids))
    }
    edges = [
        {
            "post": meta.post_ids[i],
            "label": AgreementLabel(int(assignment.values[var])).name,
        }
        for i, var in sorted(meta.edge_var.items())
    ]
    return {"id": g.id, "stances": stances, "agreements": edges}


def _cmd_infer(args, config) -> int:
    seed = _seed_of(args, config)
    corpus = load_corpus(args.corpus)
    bank = ScorerBank.load(args.checkpoint)
    cs = _constraints(corpus.task, args, config)
    if args.doc is None:
        g = corpus.graphs[0]
    else:
        matches = [g for g in corpus.graphs if g.id == args.doc]
        if not matches:
            raise DataFormatError(f"document {args.doc!r} not in corpus")
        g = matches[0]
    res = run_backend(
        g,
        bank,
        cs,
        _backend_of(args, Backend.EXACT),
        rand_cfg=_rand_config(args, config, seed),
        exact_cfg=_exact_config(config),
    )
    print(json.dumps(_predicted_structure(g, res.assignment), sort_keys=True))
    return EXIT_OK


def _cmd_bench(args, config) -> int:
    seed = _seed_of(args, config)
    corpus = load_corpus(args.corpus)
    bank = ScorerBank.load(args.checkpoint)
    cs = _constraints(corpus.task, args, config)
    try:
        backends = [Backend(b.strip()) for b in args.backends.split(",") if b.strip()]
    except ValueError as exc:
        raise UsageError(str(exc))
    report = bench_inference(
        corpus,
        bank,
        cs,
        backends,
        rand_cfg=_rand_config(args, config, seed),
        exact_cfg=_exact_config(config),
        reps=args.reps,
    )
    out = _outdir(args)
    write_records(report.records(), out / "bench.jsonl")
    (out / "bench.txt").write_text(report.table() + "\n")
    if args.plots:
        from .figures import render_bench_figure

        render_bench_figure(report, out / "bench.png")
    print(report.table())
    return EXIT_OK


def _cmd_sweep(args, config) -> int:
    seed = _seed_of(args, config)
    corpus = load_corpus(args.corpus)
    bank = ScorerBank.load(args.checkpoint)
    cs = _constraints(corpus.task, args, config)
    try:
        restart_list = [int(v) for v in args.restart_list.split(",")]
    except ValueError:
        raise UsageError(f"--restart-list expects comma ints, got {args.restart_list!r}")
    report = sweep_restarts(
        corpus,
        bank,
        cs,
        restart_list,
        rand_cfg=_rand_config(args, config, seed),
        exact_cfg=_exact_config(config),
    )
    out = _outdir(args)
    write_records(report.records(), out / "sweep.jsonl")
    (out / "sweep.txt").write_text(report.table() + "\n")
    if args.plots:
        from .figures import render_sweep_figure

        render_sweep_figure(report, out / "sweep.png")
    print(report.table())
    return EXIT_OK


COMMANDS = {
    "gen": _cmd_gen,
    "validate": _cmd_validate,
    "train-local": _cmd_train_local,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "bench": _cmd_bench,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        config = _load_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SizeBudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DataFormatError, GraphStructureError, InfeasibleError, ConstraintError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StructuraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
