"""Command-line entry point wiring the full pipeline.

Subcommands: generate (dataset -> weighted examples file), learn (task file
-> optimal hypothesis), classify (hypothesis + predictions -> label
probabilities), sweep (perturbation-robustness experiments -> reports),
check (parse/validate files).

Exit codes: 0 success, 2 usage error, 3 infeasible task, 4 resource cap
exceeded, 5 I/O or file-format error.  All randomness flows from --seed
flags; identical invocations produce identical outputs (enable --timing to
record wall times in sweep reports, which breaks byte-reproducibility).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import extractors as ex
from .bench import (SweepConfig, build_task, cached_candidates, emit_report,
                    run_sweep)
from .datasets import (generate_sudoku_dataset, load_zoo, read_boards)
from .errors import (InfeasibleTaskError, ParseError,
                     ResourceLimitError, StratificationError)
from .learner import fire_matrix, interpretability, learn_optimal, load_task
from .logic import Atom, LogicProgram, parse_program
from .probinfer import classify_prob, export_problog, slot_from_prediction
from .wcdpi import read_examples, write_examples, WCDPI

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_RESOURCE = 4
EXIT_IO = 5


def _dataset_for(args) -> list:
    if args.task == "zoo":
        return load_zoo(args.data)
    if args.boards:
        return read_boards(args.boards)
    return generate_sudoku_dataset(args.valid_boards, args.invalid_boards,
                                   seed=ex.stable_seed(args.seed, "sudoku-data"))


def _profile_or_records(args):
    if args.predictions:
        return None, ex.load_predictions(args.predictions)
    profile = replace(ex.PROFILES[args.profile],
                      rng_seed=ex.stable_seed(args.seed, args.task, "extractor"))
    return profile, None


def cmd_generate(args) -> int:
    dataset = _dataset_for(args)
    profile, records = _profile_or_records(args)
    bundle = build_task(dataset, args.fold, folds=args.folds,
                        fraction=args.fraction, profile=profile,
                        prediction_records=records, lam=args.penalty_scale,
                        gamma=args.gamma,
                        baseline_mode=args.baseline_penalty is not None,
                        seed=args.seed)
    examples = list(bundle.task.examples)
    if args.baseline_penalty is not None and args.baseline_penalty != 10:
        examples = [WCDPI(w.id, args.baseline_penalty, w.pi, w.context)
                    for w in examples]
    write_examples(examples, args.out)
    pens = [e.penalty for e in examples]
    print(f"wrote {len(examples)} examples to {args.out}")
    print(f"penalties: min={min(pens)} mean={sum(pens) / len(pens):.2f} max={max(pens)}")
    return EXIT_OK


def cmd_learn(args) -> int:
    task = load_task(args.task_file)
    if args.examples:
        task = replace_examples(task, read_examples(args.examples))
    if args.gamma is not None:
        task.gamma = args.gamma
    if args.baseline_penalty is not None:
        task.examples = tuple(WCDPI(w.id, args.baseline_penalty, w.pi, w.context)
                              for w in task.examples)
    candidates = cached_candidates(task.bias, task.background, args.candidate_cap)
    table = fire_matrix(candidates, task.examples, task.background)
    hyp = learn_optimal(task, candidates=candidates, table=table,
                        timeout_s=args.timeout, max_nodes=args.max_nodes,
                        prune_dominated=not args.no_dominance_pruning)
    text = hyp.text if hyp.rules else "% empty hypothesis"
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    print(f"% score={hyp.score} penalty_part={hyp.penalty_part} "
          f"length_part={hyp.length_part} gamma={task.gamma}")
    print(f"% interpretability={interpretability(hyp)} "
          f"optimal={'yes' if hyp.optimal else 'no (timeout)'}")
    if task.gamma == 0:
        print("% gamma=0: pure coverage optimization; rule length ignored")
    if hyp.score == math.inf:
        raise InfeasibleTaskError(
            "an example with infinite penalty is uncovered by every hypothesis")
    return EXIT_OK


def replace_examples(task, examples):
    task.examples = tuple(examples)
    return task


def cmd_classify(args) -> int:
    hyp_rules = parse_program(Path(args.hypothesis).read_text(encoding="utf-8")).rules
    background = LogicProgram()
    if args.background:
        background = parse_program(Path(args.background).read_text(encoding="utf-8"))
    records = ex.load_predictions(args.predictions)
    by_example: dict[str, list] = {}
    for r in records:
        by_example.setdefault(r.example_id, []).append(r)

    if args.mode == "binary":
        labels = [args.positive_label, args.negative_label]
        positive = args.positive_label
        encode = lambda l: Atom(l)
    else:
        labels = args.labels.split(",")
        positive = None
        if args.label_predicate:
            encode = lambda l: Atom(args.label_predicate, (l,))
        else:
            encode = lambda l: Atom(l)

    out_lines = []
    problog_chunks = []
    for eid, recs in by_example.items():
        slots = [slot_from_prediction(r) for r in recs]
        dist = classify_prob(hyp_rules, background, slots, args.mode, labels,
                             positive_label=positive, encode_label=encode,
                             epsilon=args.prune_eps, exact_cap=args.exact_cap,
                             mc=args.mc, mc_samples=args.samples,
                             seed=ex.stable_seed(args.seed, eid, "mc"))
        rec = {"example_id": eid,
               "probs": {l: dist.probs[l] for l in sorted(dist.probs)},
               "abstain_mass": dist.abstain_mass,
               "prediction": dist.predicted,
               "confidence": dist.confidence,
               "method": dist.method}
        if dist.samples is not None:
            rec["samples"] = dist.samples
        out_lines.append(json.dumps(rec))
        if args.export_problog:
            problog_chunks.append(f"% example {eid}")
            problog_chunks.append(export_problog(
                hyp_rules, background, slots,
                queries=[encode(l) for l in labels]).rstrip())
    payload = "\n".join(out_lines) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if args.export_problog:
        Path(args.export_problog).write_text("\n".join(problog_chunks) + "\n",
                                             encoding="utf-8")
        print(f"wrote ProbLog export to {args.export_problog}", file=sys.stderr)
    print(f"classified {len(by_example)} examples", file=sys.stderr)
    return EXIT_OK


def _parse_fractions(spec: str) -> tuple[float, ...]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("fraction range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("fraction step must be positive")
        out = []
        f = start
        while f <= stop + 1e-9:
            out.append(round(f, 10))
            f += step
        return tuple(out)
    return tuple(float(p) for p in spec.split(","))


def _sweep_one(cfg: SweepConfig, name: str, args) -> list[Path]:
    report = run_sweep(cfg)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in args.format.split(","):
        suffix = {"csv": "csv", "json": "json", "markdown": "md"}[fmt]
        path = outdir / f"{args.task}_{name}.{suffix}"
        path.write_bytes(emit_report(report, fmt))
        written.append(path)
    ok_cells = sum(1 for c in report.cells if c.error is None)
    if ok_cells == 0:
        raise ResourceLimitError("every sweep cell failed")
    return written


def cmd_sweep(args) -> int:
    fractions = _parse_fractions(args.fractions)
    runs: list[tuple[str, SweepConfig]] = []
    base = dict(task=args.task, fractions=fractions, folds=args.folds,
                lam=args.penalty_scale, gamma=args.gamma, seed=args.seed,
                mc_samples=args.mc_samples, prune_eps=args.prune_eps,
                exact_cap=args.exact_cap, candidate_cap=args.candidate_cap,
                timeout_s=args.timeout, max_nodes=args.max_nodes, timing=args.timing,
                zoo_path=args.data, sudoku_valid=args.valid_boards,
                sudoku_invalid=args.invalid_boards)
    if args.predictions:
        runs.append(("file", SweepConfig(predictions_path=args.predictions, **base)))
    else:
        for profile in args.profiles.split(","):
            runs.append((profile, SweepConfig(profile=profile, **base)))
    if args.baseline:
        runs.append((f"baseline_{args.baseline_profile}",
                     SweepConfig(profile=args.baseline_profile,
                                 baseline_mode=True, **base)))

    all_written: list[Path] = []
    if args.jobs > 1 and len(runs) > 1:
        import multiprocessing as mp
        with mp.Pool(min(args.jobs, len(runs))) as pool:
            results = pool.starmap(_sweep_one,
                                   [(cfg, name, args) for name, cfg in runs])
        for written in results:
            all_written.extend(written)
    else:
        for name, cfg in runs:
            all_written.extend(_sweep_one(cfg, name, args))
    for path in all_written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_check(args) -> int:
    loaders = {
        "program": lambda p: parse_program(Path(p).read_text(encoding="utf-8")).rules,
        "examples": read_examples,
        "predictions": ex.load_predictions,
        "task": lambda p: [load_task(p)],
        "boards": read_boards,
    }
    loader = loaders[args.kind]
    for path in args.paths:
        items = loader(path)
        print(f"OK {path} ({len(list(items))} items)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nsl",
        description="Neuro-symbolic rule learning from noisy feature predictions")
    p.add_argument("--version", action="version", version=f"nsl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_dataset_flags(q):
        q.add_argument("--task", choices=("zoo", "sudoku"), required=True,
                       help="benchmark task")
        q.add_argument("--data", default=None,
                       help="zoo table path (default: packaged copy)")
        q.add_argument("--boards", default=None,
                       help="board file path (default: generate from --seed)")
        q.add_argument("--valid-boards", type=int, default=200,
                       help="generated valid boards (default 200)")
        q.add_argument("--invalid-boards", type=int, default=200,
                       help="generated invalid boards (default 200)")

    def add_extractor_flags(q):
        q.add_argument("--profile", choices=sorted(ex.PROFILES),
                       default="softmax_sim",
                       help="synthetic extractor profile (default softmax_sim)")
        q.add_argument("--predictions", default=None,
                       help="prediction file (overrides --profile)")

    g = sub.add_parser("generate", help="generate a weighted examples file")
    add_dataset_flags(g)
    add_extractor_flags(g)
    g.add_argument("--fraction", type=float, default=0.0,
                   help="perturbed fraction of training examples (default 0)")
    g.add_argument("--fold", type=int, default=0, help="fold index (default 0)")
    g.add_argument("--folds", type=int, default=5, help="fold count (default 5)")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--penalty-scale", type=int, default=100, metavar="LAMBDA",
                   help="confidence scale before flooring (default 100)")
    g.add_argument("--gamma", type=float, default=1.0,
                   help="rule-length weight recorded in the task (default 1)")
    g.add_argument("--baseline-penalty", type=int, default=None, metavar="N",
                   help="force every example penalty to N (baseline scoring)")
    g.add_argument("--out", required=True, help="output examples file")
    g.set_defaults(func=cmd_generate)

    l = sub.add_parser("learn", help="learn the optimal hypothesis for a task file")
    l.add_argument("--task-file", required=True, help="task file path")
    l.add_argument("--examples", default=None,
                   help="examples file overriding the task file's #examples")
    l.add_argument("--gamma", type=float, default=None,
                   help="override the task file's length weight")
    l.add_argument("--baseline-penalty", type=int, default=None, metavar="N",
                   help="force every example penalty to N (baseline scoring)")
    l.add_argument("--candidate-cap", type=int, default=100_000,
                   help="candidate space cap (default 100000)")
    l.add_argument("--timeout", type=float, default=300.0,
                   help="search timeout in seconds (default 300)")
    l.add_argument("--max-nodes", type=int, default=None,
                   help="deterministic search node budget (default unlimited)")
    l.add_argument("--no-dominance-pruning", action="store_true",
                   help="disable sound candidate dominance pruning")
    l.add_argument("--out", default=None, help="hypothesis output file")
    l.set_defaults(func=cmd_learn)

    c = sub.add_parser("classify", help="probabilistic classification of predictions")
    c.add_argument("--hypothesis", required=True, help="hypothesis program file")
    c.add_argument("--background", default=None, help="background program file")
    c.add_argument("--predictions", required=True, help="prediction file")
    c.add_argument("--mode", choices=("binary", "multiclass"), required=True)
    c.add_argument("--positive-label", default="invalid",
                   help="binary mode positive label (default invalid)")
    c.add_argument("--negative-label", default="valid",
                   help="binary mode negative label (default valid)")
    c.add_argument("--labels", default=",".join(
        ("mammal", "bird", "reptile", "fish", "amphibian", "bug", "invertebrate")),
        help="multiclass labels, comma-separated")
    c.add_argument("--label-predicate", default="class",
                   help="multiclass label wrapper predicate (default class)")
    c.add_argument("--prune-eps", type=float, default=1e-6, metavar="EPS",
                   help="slot support pruning threshold (default 1e-6)")
    c.add_argument("--exact-cap", type=int, default=10 ** 6,
                   help="exact enumeration cap (default 1e6)")
    c.add_argument("--mc", action="store_true",
                   help="enable Monte Carlo fallback above the exact cap")
    c.add_argument("--samples", type=int, default=100_000,
                   help="Monte Carlo sample count (default 100000)")
    c.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    c.add_argument("--out", default=None, help="output file (default stdout)")
    c.add_argument("--export-problog", default=None, metavar="PATH",
                   help="also write a ProbLog-dialect cross-check program")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", help="perturbation sweep with cross-validation")
    add_dataset_flags(s)
    s.add_argument("--profiles", default="softmax_sim,edl_sim",
                   help="synthetic profiles, comma-separated")
    s.add_argument("--predictions", default=None,
                   help="prediction file (replaces synthetic profiles)")
    s.add_argument("--baseline", action="store_true",
                   help="also run the constant-penalty-10 baseline")
    s.add_argument("--baseline-profile", default="softmax_sim",
                   help="extractor profile the baseline consumes (default softmax_sim)")
    s.add_argument("--fractions", default="0:1:0.1",
                   help="fractions as start:stop:step or comma list (default 0:1:0.1)")
    s.add_argument("--folds", type=int, default=5, help="fold count (default 5)")
    s.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    s.add_argument("--penalty-scale", type=int, default=100, metavar="LAMBDA",
                   help="confidence scale before flooring (default 100)")
    s.add_argument("--gamma", type=float, default=1.0,
                   help="rule-length weight (default 1)")
    s.add_argument("--mc-samples", type=int, default=4000,
                   help="Monte Carlo samples per perturbed-test example (default 4000)")
    s.add_argument("--prune-eps", type=float, default=1e-6,
                   help="slot support pruning threshold (default 1e-6)")
    s.add_argument("--exact-cap", type=int, default=10 ** 6,
                   help="exact enumeration cap (default 1e6)")
    s.add_argument("--candidate-cap", type=int, default=100_000,
                   help="candidate space cap (default 100000)")
    s.add_argument("--timeout", type=float, default=300.0,
                   help="per-cell search timeout in seconds (default 300)")
    s.add_argument("--max-nodes", type=int, default=200_000,
                   help="deterministic per-cell search node budget (default 200000)")
    s.add_argument("--timing", action="store_true",
                   help="record wall times in reports (breaks byte-reproducibility)")
    s.add_argument("--jobs", type=int, default=1,
                   help="parallel sweep runs (default 1)")
    s.add_argument("--out-dir", default="reports", help="report directory")
    s.add_argument("--format", default="csv",
                   help="report formats: csv,json,markdown (default csv)")
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("check", help="parse and validate files")
    k.add_argument("--kind", choices=("program", "examples", "predictions",
                                      "task", "boards"), required=True)
    k.add_argument("paths", nargs="+", help="files to validate")
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InfeasibleTaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParseError, StratificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
