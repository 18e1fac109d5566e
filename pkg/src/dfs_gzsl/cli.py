"""Command-line entry point: ``dfs-gzsl {bench,train,eval,gradcheck}``.

Exit codes: 0 success, 2 data or validation error, 3 numeric failure,
4 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from .afg import AfgConfig
from .checkpoint import dump_config, load_checkpoint, save_checkpoint
from .classifier import OracleClassifier, aligned_test_features, evaluate_aligned
from .data_io import SyntheticBenchmarkSpec, generate_synthetic_benchmark, load_dataset, save_dataset
from .errors import DataError, DfsError, NumericError, ShapeMismatchError
from .gradsuite import CASES, run_suite
from .losses import AfgLossWeights
from .pipeline import ClassifierSettings, RunConfig, evaluate_models, train_models
from .sfg import ConditionMode, SfgConfig
from .synthesis import SynthesisPlan, build_classifier_trainset, save_synthesized, synthesize_seen, synthesize_unseen

EXIT_OK, EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _bench_flags(p: argparse.ArgumentParser) -> None:
    d = SyntheticBenchmarkSpec()
    g = p.add_argument_group("synthetic benchmark")
    g.add_argument("--classes-seen", type=_positive_int, default=d.num_seen)
    g.add_argument("--classes-unseen", type=_positive_int, default=d.num_unseen)
    g.add_argument("--visual-dim", type=_positive_int, default=d.visual_dim)
    g.add_argument("--semantic-dim", type=_positive_int, default=d.semantic_dim)
    g.add_argument("--samples-per-class", type=_positive_int, default=d.samples_per_class)
    g.add_argument("--covariance-scale", type=float, default=d.covariance_scale)
    g.add_argument("--map-gain", type=float, default=d.map_gain)
    g.add_argument("--bench-seed", type=int, default=None, help="benchmark seed (default: --seed)")


def _bench_spec(args) -> SyntheticBenchmarkSpec:
    seed = args.seed if args.bench_seed is None else args.bench_seed
    try:
        return SyntheticBenchmarkSpec(
            num_seen=args.classes_seen, num_unseen=args.classes_unseen, visual_dim=args.visual_dim,
            semantic_dim=args.semantic_dim, samples_per_class=args.samples_per_class,
            covariance_scale=args.covariance_scale, map_gain=args.map_gain, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _data_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset manifest")
    src.add_argument("--benchmark", action="store_true", help="generate the synthetic benchmark in memory")
    _bench_flags(p)


def _load(args):
    if args.data:
        return load_dataset(args.data), None
    spec = _bench_spec(args)
    return generate_synthetic_benchmark(spec), spec


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfs-gzsl", description="Diverse feature synthesis for generalized zero-shot learning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bench", help="write the synthetic benchmark to disk")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    _bench_flags(p)

    a, s = AfgConfig(), SfgConfig()
    w = AfgLossWeights()
    p = sub.add_parser("train", help="train the aligned and synthetic feature generators")
    _data_source(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs-afg", type=_nonneg_int, default=a.epochs)
    p.add_argument("--epochs-sfg", type=_nonneg_int, default=s.epochs)
    p.add_argument("--aligned-dim", type=_positive_int, default=a.aligned_dim)
    p.add_argument("--hidden", type=_positive_int, default=a.e_sem_hidden[0], help="width of every hidden layer")
    p.add_argument("--batch-size", type=_positive_int, default=a.batch_size)
    p.add_argument("--lr", type=_positive_float, default=a.learning_rate)
    p.add_argument("--beta1", type=float, default=w.beta1)
    p.add_argument("--eta", type=float, default=w.eta)
    p.add_argument("--delta", type=float, default=w.delta)
    p.add_argument("--beta2", type=float, default=s.beta2)
    p.add_argument("--condition", choices=[m.value for m in ConditionMode], default=s.condition_mode.value)

    p = sub.add_parser("eval", help="synthesize, fit the classifier and report GZSL accuracy")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory or manifest")
    _data_source(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-seen", type=_positive_int, default=SynthesisPlan().per_seen_class_count)
    p.add_argument("--per-unseen", type=_positive_int, default=SynthesisPlan().per_unseen_class_count)
    c = ClassifierSettings()
    p.add_argument("--clf-epochs", type=_nonneg_int, default=c.epochs)
    p.add_argument("--clf-lr", type=_positive_float, default=c.lr)
    p.add_argument("--clf-batch-size", type=_positive_int, default=c.batch_size)
    p.add_argument("--compare-baseline", action="store_true", help="also evaluate the AFG-only baseline generator")
    p.add_argument("--export-synthesized", action="store_true", help="write the classifier training set")
    p.add_argument("--oracle-labels", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss gradient")
    p.add_argument("--tolerance", type=_positive_float, default=1e-4)
    p.add_argument("--instances", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", nargs="+", choices=list(CASES), default=None)
    p.add_argument("--l1-ties", action="store_true", help="place exact ties in the L1 instances")
    p.add_argument("--inject-sign-flip", action="append", choices=list(CASES), default=[],
                   help=argparse.SUPPRESS)
    return parser


def cmd_bench(args) -> int:
    spec = _bench_spec(args)
    path = save_dataset(generate_synthetic_benchmark(spec), args.out_dir)
    (Path(args.out_dir) / "benchmark.json").write_text(dump_config(spec.to_dict()) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return EXIT_OK


def _train_config(args, spec):
    hidden = (args.hidden,)
    try:
        weights = AfgLossWeights(beta1=args.beta1, eta=args.eta, delta=args.delta)
        afg = AfgConfig(aligned_dim=args.aligned_dim, e_sem_hidden=hidden, d_sem_hidden=hidden,
                        e_vis_hidden=hidden, d_vis_hidden=hidden, epochs=args.epochs_afg,
                        batch_size=args.batch_size, learning_rate=args.lr, weights=weights, seed=args.seed)
        sfg = SfgConfig(e3_hidden=hidden, d3_hidden=hidden, beta2=args.beta2, epochs=args.epochs_sfg,
                        batch_size=args.batch_size, learning_rate=args.lr,
                        condition_mode=ConditionMode(args.condition), seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunConfig(afg=afg, sfg=sfg, dataset_path=args.data, benchmark=spec,
                     out_dir=args.out_dir, seed=args.seed)


def _history_csv(afg, sfg) -> str:
    cols = ["reconstruction", "kl", "da", "ca"]
    rows = ["stage,epoch,total," + ",".join(cols)]
    for stage, hist in (("afg", afg.history), ("sfg", sfg.history)):
        for epoch, bd in enumerate(hist):
            vals = [repr(bd.components[c]) if c in bd.components else "" for c in cols]
            rows.append(f"{stage},{epoch},{bd.total!r}," + ",".join(vals))
    return "\n".join(rows) + "\n"


def cmd_train(args) -> int:
    dataset, spec = _load(args)
    config = _train_config(args, spec)
    afg, sfg = train_models(dataset, config.afg, config.sfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()
    save_checkpoint(out / "checkpoint", afg, sfg, fingerprint=fp)
    (out / "loss_history.csv").write_text(_history_csv(afg, sfg), encoding="utf-8")
    (out / "config.json").write_text(dump_config(config.to_dict()) + "\n", encoding="utf-8")
    print(f"trained: {len(afg.history)} AFG epochs, {len(sfg.history)} SFG epochs; checkpoint {out / 'checkpoint'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    afg, sfg, fields = load_checkpoint(args.checkpoint)
    dataset, _ = _load(args)
    if afg.e_vis.in_dim != dataset.visual_dim or afg.e_sem.in_dim != dataset.semantic_dim:
        raise ShapeMismatchError(
            f"checkpoint expects visual/semantic dims {afg.e_vis.in_dim}/{afg.e_sem.in_dim}, "
            f"dataset has {dataset.visual_dim}/{dataset.semantic_dim}")
    if sfg is None:
        raise DataError("checkpoint has no SFG networks")
    fp = fields.get("config_fingerprint", "")
    out = Path(args.out_dir)
    if args.oracle_labels:
        test = dataset.test_indices()
        feats = aligned_test_features(afg, dataset.visual_rows(test))
        clf = OracleClassifier(feats, dataset.labels[test])
        report = evaluate_aligned(clf, feats, dataset.labels[test], dataset.seen_classes,
                                  dataset.unseen_classes, fp, label="oracle")
        report.write(out)
        print(f"oracle acc_h={report.acc_h:.4f}")
        return EXIT_OK

    plan = SynthesisPlan(args.per_seen, args.per_unseen, args.seed)
    clf = ClassifierSettings(args.clf_epochs, args.clf_lr, args.clf_batch_size)
    report = evaluate_models(afg, sfg, dataset, plan, clf, baseline=False, fingerprint=fp)
    report.write(out)
    print(f"dfs acc_s={report.acc_s:.4f} acc_u={report.acc_u:.4f} acc_h={report.acc_h:.4f}")
    if args.compare_baseline:
        base = evaluate_models(afg, None, dataset, plan, clf, baseline=True, fingerprint=fp)
        base.write(out, prefix="baseline_")
        print(f"baseline acc_s={base.acc_s:.4f} acc_u={base.acc_u:.4f} acc_h={base.acc_h:.4f}")
    if args.export_synthesized:
        trainset = build_classifier_trainset(synthesize_seen(afg, dataset, plan),
                                             synthesize_unseen(afg, sfg, dataset, plan))
        save_synthesized(trainset, out)
    (out / "eval_config.json").write_text(
        dump_config({"plan": asdict(plan), "classifier": asdict(clf), "checkpoint_fingerprint": fp}) + "\n",
        encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_suite(args.cases, args.instances, args.seed, args.tolerance,
                        tuple(args.inject_sign_flip), args.l1_ties)
    by_case: dict = {}
    for r in results:
        by_case.setdefault(r.name, []).append(r)
    ok = True
    for name, rs in by_case.items():
        worst = max(r.report.max_rel_error for r in rs)
        passed = all(r.passed for r in rs)
        ok &= passed
        skipped = sum(r.report.n_skipped for r in rs)
        line = f"{name:<10} {'PASS' if passed else 'FAIL'}  max_rel_error={worst:.3e}  instances={len(rs)}"
        if skipped:
            line += f"  skipped={skipped}"
        print(line)
        for note in sorted({n for r in rs for n in r.report.notes}):
            print(f"    note: {note}")
    print(f"gradcheck {'passed' if ok else 'FAILED'} at tolerance {args.tolerance:g}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"bench": cmd_bench, "train": cmd_train, "eval": cmd_eval, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DfsError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
