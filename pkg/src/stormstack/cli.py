"""Command-line pipeline: generate -> featurize -> train -> evaluate ->
predict, plus report to merge saved evaluations.

Artifacts live under the output directory (--out, default runs/):

    events.csv, volumes.csv      raw generated dataset
    train.csv, val.csv, test.csv featurized splits
    model.ckpt, train_log.csv    fitted model and epoch log
    metrics_<name>.txt / .csv    per-classifier evaluation
    report.txt                   merged comparison table
    run_config.txt               resolved configuration echo

Exit status: 0 success, 1 usage error, 2 data or validation error,
3 numeric failure; each error prints one diagnostic line on stderr.
The STORMSTACK_THREADS environment variable caps worker threads used
while featurizing (default 1).
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import dataio
from .config import resolve, resolved_lines
from .errors import DataError, NumericError, StormError, UsageError, ValidationError
from .features import AUX_CHANNELS, balance, build_sample, split
from .metrics import evaluate, format_metrics_row, read_report_csv, render_table, write_report_csv
from .model import KNNClassifier, forward, predict_class, standardize_inputs
from .synthetic import generate_synthetic
from .training import train as fit_model

MODEL_NAME = "Kalman-Conv BiLSTM with Attention"
BASELINES = ("knn", "rnn", "lstm", "bilstm")
_REPORT_ORDER = ("KNN", "RNN", "LSTM", "BiLSTM", MODEL_NAME)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through the
    # usage-error path instead so the exit-code contract holds
    def error(self, message):
        raise UsageError(message)


def _thread_count():
    raw = os.environ.get("STORMSTACK_THREADS")
    if raw is None:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise UsageError(f"STORMSTACK_THREADS must be an integer, got {raw!r}") from None
    if count < 1:
        raise UsageError(f"STORMSTACK_THREADS must be at least 1, got {count}")
    return count


def _write_run_log(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "run_config.txt"), "w", newline="") as fh:
        for line in resolved_lines(cfg):
            fh.write(line + "\n")


def _out(cfg, name):
    return os.path.join(cfg.out_dir, name)


def cmd_generate(cfg, args):
    events, volumes = generate_synthetic(cfg.synthetic_config())
    _write_run_log(cfg)
    dataio.write_events(_out(cfg, "events.csv"), events, AUX_CHANNELS)
    dataio.write_volumes(_out(cfg, "volumes.csv"), events, volumes)
    print(f"generated {len(events)} events with {cfg.steps} volumes each -> {cfg.out_dir}")
    return 0


def cmd_featurize(cfg, args):
    events, channels = dataio.load_events(_out(cfg, "events.csv"))
    volumes = dataio.load_volumes(_out(cfg, "volumes.csv"))
    missing = [e.event_id for e in events if e.event_id not in volumes]
    if missing:
        raise ValidationError(f"no volumes for events {missing[:5]} (of {len(missing)})")

    def featurize_one(event):
        return build_sample(
            event, volumes[event.event_id],
            threshold=cfg.threshold, channels=channels,
            kalman_q=cfg.kalman_q, kalman_r=cfg.kalman_r,
        )

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(featurize_one, events))
    else:
        samples = [featurize_one(e) for e in events]
    balanced = balance(samples, cfg.seed)
    parts = split(balanced, cfg.fractions, cfg.seed)
    _write_run_log(cfg)
    dataio.write_sequences(_out(cfg, "train.csv"), parts.train)
    dataio.write_sequences(_out(cfg, "val.csv"), parts.validation)
    dataio.write_sequences(_out(cfg, "test.csv"), parts.test)
    print(f"featurized {len(samples)} events -> splits {parts.sizes()} in {cfg.out_dir}")
    return 0


def _load_split(cfg, name):
    return dataio.load_sequences(_out(cfg, f"{name}.csv"))


def _data_shape(samples, what):
    shapes = {s.data.shape for s in samples}
    if len(shapes) != 1:
        raise ValidationError(f"{what} samples disagree on shape: {sorted(shapes)}")
    return shapes.pop()


def cmd_train(cfg, args):
    train_set = _load_split(cfg, "train")
    val_set = _load_split(cfg, "val")
    steps, width = _data_shape(train_set + val_set, "training")
    model_config = standardize_inputs(cfg.model_config(steps, width), train_set)
    params, log = fit_model(train_set, val_set, model_config, cfg.train_config())
    _write_run_log(cfg)
    dataio.save_checkpoint(params, model_config, _out(cfg, "model.ckpt"))
    with open(_out(cfg, "train_log.csv"), "w", newline="") as fh:
        fh.write("epoch,train_loss,val_loss,val_accuracy\n")
        for epoch, train_loss, val_loss, val_acc in log:
            fh.write(f"{epoch},{train_loss!r},{val_loss!r},{val_acc!r}\n")
    last = log[-1] if log else (None, float("nan"), float("nan"), float("nan"))
    print(f"trained {len(log)} epochs, final val_loss {last[2]:.4f}"
          f" val_accuracy {last[3]:.4f} -> {cfg.out_dir}/model.ckpt")
    return 0


def _metrics_slug(name):
    return "model" if name == MODEL_NAME else name.lower()


def _write_evaluation(cfg, report):
    slug = _metrics_slug(report.name)
    write_report_csv(_out(cfg, f"metrics_{slug}.csv"), [report])
    with open(_out(cfg, f"metrics_{slug}.txt"), "w", newline="") as fh:
        fh.write(format_metrics_row(report.name, report) + "\n")
    print(format_metrics_row(report.name, report))


def cmd_evaluate(cfg, args):
    test_set = _load_split(cfg, "test")
    positive = args.positive_class
    params, model_config = dataio.load_checkpoint(_out(cfg, "model.ckpt"))
    _write_run_log(cfg)

    def classify(sample):
        return predict_class(forward(sample, params, model_config))

    _write_evaluation(cfg, evaluate(classify, test_set, positive, MODEL_NAME))
    requested = [b.strip() for b in args.baselines.split(",") if b.strip()] if args.baselines else []
    unknown = [b for b in requested if b not in BASELINES]
    if unknown:
        raise UsageError(f"unknown baselines {unknown}; choose from {list(BASELINES)}")
    if not requested:
        return 0
    train_set = _load_split(cfg, "train")
    val_set = _load_split(cfg, "val")
    steps, width = _data_shape(train_set + val_set + test_set, "dataset")
    for baseline in requested:
        if baseline == "knn":
            knn = KNNClassifier(k=cfg.knn_k).fit(train_set)
            report = evaluate(knn.predict, test_set, positive, "KNN")
        else:
            variant_config = standardize_inputs(
                cfg.model_config(steps, width, recurrent=baseline, attention=False), train_set
            )
            variant_params, _ = fit_model(train_set, val_set, variant_config, cfg.train_config())

            def classify_variant(sample, p=variant_params, c=variant_config):
                return predict_class(forward(sample, p, c))

            names = {"rnn": "RNN", "lstm": "LSTM", "bilstm": "BiLSTM"}
            report = evaluate(classify_variant, test_set, positive, names[baseline])
        _write_evaluation(cfg, report)
    return 0


def cmd_predict(cfg, args):
    checkpoint = args.checkpoint or _out(cfg, "model.ckpt")
    source = args.input or _out(cfg, "test.csv")
    params, model_config = dataio.load_checkpoint(checkpoint)
    samples = dataio.load_sequences(source)
    _write_run_log(cfg)
    path = _out(cfg, "predictions.csv")
    with open(path, "w", newline="") as fh:
        fh.write("sample_id,label,p_tornado,p_hail,p_wind,predicted\n")
        for s in samples:
            probs = forward(s, params, model_config)
            p0, p1, p2 = (float(p) for p in probs)
            fh.write(f"{s.sample_id},{s.label},{p0!r},{p1!r},{p2!r},"
                     f"{predict_class(probs)}\n")
    print(f"wrote probabilities for {len(samples)} samples -> {path}")
    return 0


def cmd_report(cfg, args):
    reports = []
    for name in _REPORT_ORDER:
        path = _out(cfg, f"metrics_{_metrics_slug(name)}.csv")
        if os.path.exists(path):
            reports.extend(read_report_csv(path))
    if not reports:
        raise DataError(f"no metrics_*.csv files found in {cfg.out_dir}; run evaluate first")
    _write_run_log(cfg)
    table = render_table(reports)
    with open(_out(cfg, "report.txt"), "w", newline="") as fh:
        fh.write(table)
    print(table, end="")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
}


def build_parser():
    parser = _Parser(prog="stormstack", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, help_text in (
        ("generate", "write a synthetic event/volume dataset"),
        ("featurize", "turn raw volumes into balanced, split sequence files"),
        ("train", "fit the sequence classifier and save a checkpoint"),
        ("evaluate", "score the checkpoint (and baselines) on the test split"),
        ("predict", "write per-sample class probabilities"),
        ("report", "merge saved evaluations into one comparison table"),
    ):
        sub = subs.add_parser(name, help=help_text)
        sub.add_argument("--config", metavar="PATH", help="key=value config file")
        sub.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        sub.add_argument("--out", metavar="DIR", help="artifact directory (default runs/)")
        if name == "evaluate":
            sub.add_argument("--baselines", metavar="LIST", default="",
                             help="comma-separated subset of knn,rnn,lstm,bilstm")
        if name in ("evaluate", "report"):
            sub.add_argument("--positive-class", type=int, default=0, metavar="N",
                             choices=(0, 1, 2), help="one-vs-rest positive class (default 0)")
        if name == "predict":
            sub.add_argument("--checkpoint", metavar="PATH", help="model file (default OUT/model.ckpt)")
            sub.add_argument("--input", metavar="PATH", help="sequence file (default OUT/test.csv)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        _thread_count()  # validate the env var before any work
        cfg = resolve(args.config, args.seed, args.out)
        return _COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except StormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
