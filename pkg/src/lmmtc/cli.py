"""Command-line front end: data generation, training, evaluation, analysis.

Every run directory is self-describing: it holds the configs that
produced it, the artifacts, and a manifest.json with sha256 hashes of
everything written.  Config precedence is flags > config file > defaults
(see each subcommand's --help).  One --seed drives all randomness; the
library fans it out into fixed purpose streams.

Exit codes: 0 success, 1 domain error, 2 usage error.
Set LMMTC_LOG to error, info, or debug to control stderr logging.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import attention_summary, correlation_matrix, export_heatmap
from .data import GenSpec, generate_synthetic, load_jsonl, save_jsonl, split
from .errors import ConfigError, ContractError, JsonlParseError, LmmtcError
from .inference import (
    load_predictions_jsonl,
    predict_batch,
    save_predictions_jsonl,
)
from .metrics import full_report
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, pretrain_mlm, train
from .vocab import LabelSpace, Vocabulary, build_base_vocab, extend_with_label_tokens

log = logging.getLogger("lmmtc")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

_PRECEDENCE_NOTE = "Precedence: flags > values from config files > built-in defaults."

# (flag dest, TrainConfig JSON key)
_TRAIN_OVERRIDES = [
    ("learning_rate", "learning_rate"),
    ("batch_size", "batch_size"),
    ("epochs", "epochs"),
    ("warmup_ratio", "warmup_ratio"),
    ("mask_prob", "mask_prob"),
    ("lambda_mlm", "lambda"),
    ("weight_decay", "weight_decay"),
    ("seed", "seed"),
    ("strategy", "strategy"),
    ("log_every_batches", "log_every_batches"),
]

_MODEL_KEYS = ("d_model", "n_heads", "n_layers", "d_ffn", "max_len", "dropout")


def _setup_logging():
    name = os.environ.get("LMMTC_LOG", "info").strip().lower()
    level = _LOG_LEVELS.get(name)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if level is None else level,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    if level is None and name:
        log.warning("unknown LMMTC_LOG value %r, using info", name)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(obj, path):
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


@dataclass
class RunManifest:
    command: str
    config_paths: dict
    seed: int | None
    artifact_hashes: dict
    started_at: str
    finished_at: str
    version: str

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_paths": self.config_paths,
            "seed": self.seed,
            "artifact_hashes": self.artifact_hashes,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "version": self.version,
        }


def _write_manifest(out_dir, command: str, config_paths: dict, seed, started_at: str):
    """Hash every artifact under out_dir and drop exactly one manifest.json."""
    out_dir = Path(out_dir)
    hashes = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            hashes[p.relative_to(out_dir).as_posix()] = _sha256(p)
    manifest = RunManifest(
        command=command,
        config_paths={k: str(v) for k, v in config_paths.items() if v is not None},
        seed=seed,
        artifact_hashes=hashes,
        started_at=started_at,
        finished_at=_utc_now(),
        version=__version__,
    )
    _write_json(manifest.to_dict(), out_dir / "manifest.json")


def _load_json_file(path, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} {path} is not valid JSON: {e}")
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} {path} must hold a JSON object")
    return obj


def _resolve_train_config(args) -> TrainConfig:
    base = TrainConfig()
    if getattr(args, "train_config", None):
        base = TrainConfig.from_dict(
            _load_json_file(args.train_config, "train config")
        )
    d = base.to_dict()
    for dest, key in _TRAIN_OVERRIDES:
        v = getattr(args, dest, None)
        if v is not None:
            d[key] = v
    return TrainConfig.from_dict(d)


def _resolve_model_dict(args) -> dict:
    d = {}
    if getattr(args, "model_config", None):
        raw = _load_json_file(args.model_config, "model config")
        for k, v in raw.items():
            if k in ("vocab_size", "n_labels", "strategy"):
                continue  # always derived from the data and train config
            if k not in _MODEL_KEYS:
                raise ConfigError(f"unknown model config key {k!r}")
            d[k] = v
    for k in _MODEL_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    return d


def _log_epoch(epoch: int, rec: dict):
    if "dev" in rec:
        log.info(
            "epoch %d  masked_fraction=%.4f  dev micro_f1=%.4f",
            epoch, rec["masked_fraction"], rec["dev"]["micro_f1"],
        )
    else:
        log.info("epoch %d  masked_fraction=%.4f", epoch, rec["masked_fraction"])


def _read_texts_jsonl(path):
    """Lenient prediction input: JSONL with id and text; labels optional."""
    ids, texts = [], []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise JsonlParseError(str(e), line_no=line_no) from e
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise JsonlParseError(
                    "record must carry id and text fields", line_no=line_no
                )
            ids.append(str(rec["id"]))
            texts.append(str(rec["text"]))
    if not ids:
        raise ContractError(f"no records in {path}")
    return ids, texts


def _load_model(args):
    params, config = load_checkpoint(args.ckpt)
    vocab = Vocabulary.load(args.vocab)
    label_space = LabelSpace.load(args.labels)
    return params, config, vocab, label_space


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    started = _utc_now()
    spec = GenSpec.load(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    train_ex, test_ex, label_space = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_jsonl(out / "train.jsonl", train_ex)
    save_jsonl(out / "test.jsonl", test_ex)
    label_space.save(out / "labels.json")
    spec.save(out / "genspec.json")
    log.info(
        "generated %d train / %d test docs over %d labels",
        len(train_ex), len(test_ex), label_space.size,
    )
    _write_manifest(out, "gen-data", {"spec": args.spec}, spec.seed, started)
    return 0


def _train_and_dump(
    examples,
    test_examples,
    label_space,
    train_cfg: TrainConfig,
    model_dict: dict,
    out: Path,
    min_freq: int,
    dev_examples=None,
    vocab=None,
    initial_params=None,
    model_cfg=None,
):
    """Shared train-run body: fit, then write the full artifact set."""
    if vocab is None:
        vocab = extend_with_label_tokens(
            build_base_vocab([ex.text for ex in examples], min_freq=min_freq),
            label_space,
            train_cfg.strategy,
        )
    if model_cfg is None:
        model_cfg = ModelConfig(
            vocab_size=vocab.size,
            n_labels=label_space.size,
            strategy=train_cfg.strategy,
            **model_dict,
        )
    result = train(
        examples, label_space, vocab, model_cfg, train_cfg,
        dev_examples=dev_examples, initial_params=initial_params,
        progress=_log_epoch,
    )
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.json")
    label_space.save(out / "labels.json")
    train_cfg.save(out / "train_config.json")
    result.history.save(out / "history.jsonl")
    save_checkpoint(result.params, model_cfg, out / "model_final.ckpt",
                    seed=train_cfg.seed)
    if result.best_params is not None:
        save_checkpoint(result.best_params, model_cfg, out / "model_best.ckpt",
                        seed=train_cfg.seed)
        log.info("best dev epoch: %d", result.best_epoch)

    report = None
    if test_examples:
        preds = predict_batch(
            result.params, model_cfg, vocab, label_space,
            [ex.text for ex in test_examples], train_cfg.batch_size,
        )
        save_predictions_jsonl(
            out / "predictions.jsonl",
            [ex.id for ex in test_examples],
            preds,
        )
        report = full_report(
            [ex.labels for ex in test_examples], [p.labels for p in preds]
        )
        report.save(out / "report.json")
        log.info(
            "test: accuracy=%.4f micro_f1=%.4f micro_jaccard=%.4f hamming=%.4f",
            report.accuracy, report.micro_f1, report.micro_jaccard,
            report.hamming_loss,
        )
    return report


def cmd_train(args) -> int:
    started = _utc_now()
    data_dir = Path(args.data)
    labels_path = args.labels or data_dir / "labels.json"
    label_space = LabelSpace.load(labels_path)
    train_cfg = _resolve_train_config(args)
    examples = load_jsonl(data_dir / "train.jsonl", label_space)

    vocab = initial_params = model_cfg = None
    if args.init:
        if not args.vocab:
            raise ConfigError("--init requires --vocab (the vocabulary the "
                              "checkpoint was trained with)")
        initial_params, model_cfg = load_checkpoint(args.init)
        vocab = Vocabulary.load(args.vocab)
        if vocab.size != model_cfg.vocab_size:
            raise ContractError(
                f"vocab has {vocab.size} tokens, checkpoint expects "
                f"{model_cfg.vocab_size}"
            )
        if model_cfg.strategy != train_cfg.strategy:
            raise ContractError(
                f"checkpoint strategy {model_cfg.strategy!r} != train "
                f"strategy {train_cfg.strategy!r}"
            )
        if model_cfg.n_labels != label_space.size:
            raise ContractError(
                f"checkpoint has {model_cfg.n_labels} labels, data has "
                f"{label_space.size}"
            )

    dev_examples = None
    if args.dev_ratio:
        examples, dev_examples = split(
            examples, 1.0 - args.dev_ratio, seed=train_cfg.seed
        )
        log.info("dev split: %d train / %d dev", len(examples), len(dev_examples))

    test_path = data_dir / "test.jsonl"
    test_examples = (
        load_jsonl(test_path, label_space) if test_path.exists() else None
    )

    out = Path(args.out)
    _train_and_dump(
        examples, test_examples, label_space, train_cfg,
        _resolve_model_dict(args), out, args.min_freq,
        dev_examples=dev_examples, vocab=vocab,
        initial_params=initial_params, model_cfg=model_cfg,
    )
    _write_manifest(
        out, "train",
        {"data": args.data, "labels": labels_path,
         "train_config": args.train_config, "model_config": args.model_config,
         "init": args.init, "vocab": args.vocab},
        train_cfg.seed, started,
    )
    return 0


def cmd_pretrain(args) -> int:
    started = _utc_now()
    data_dir = Path(args.data)
    labels_path = args.labels or data_dir / "labels.json"
    label_space = LabelSpace.load(labels_path)
    train_cfg = _resolve_train_config(args)
    examples = load_jsonl(data_dir / "train.jsonl", label_space)
    corpus = [ex.text for ex in examples]

    vocab = extend_with_label_tokens(
        build_base_vocab(corpus, min_freq=args.min_freq),
        label_space,
        train_cfg.strategy,
    )
    model_cfg = ModelConfig(
        vocab_size=vocab.size,
        n_labels=label_space.size,
        strategy=train_cfg.strategy,
        **_resolve_model_dict(args),
    )
    result = pretrain_mlm(corpus, vocab, model_cfg, train_cfg,
                          progress=_log_epoch)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.json")
    label_space.save(out / "labels.json")
    train_cfg.save(out / "train_config.json")
    result.history.save(out / "history.jsonl")
    save_checkpoint(result.params, model_cfg, out / "model_pretrained.ckpt",
                    seed=train_cfg.seed)
    _write_manifest(
        out, "pretrain",
        {"data": args.data, "labels": labels_path,
         "train_config": args.train_config, "model_config": args.model_config},
        train_cfg.seed, started,
    )
    return 0


def cmd_eval(args) -> int:
    started = _utc_now()
    params, config, vocab, label_space = _load_model(args)
    examples = load_jsonl(args.data, label_space)
    preds = predict_batch(
        params, config, vocab, label_space,
        [ex.text for ex in examples], args.batch_size,
    )
    report = full_report(
        [ex.labels for ex in examples], [p.labels for p in preds]
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.save(out / "report.json")
        save_predictions_jsonl(
            out / "predictions.jsonl", [ex.id for ex in examples], preds
        )
        _write_manifest(
            out, "eval",
            {"ckpt": args.ckpt, "vocab": args.vocab, "labels": args.labels,
             "data": args.data},
            None, started,
        )
    return 0


def cmd_predict(args) -> int:
    params, config, vocab, label_space = _load_model(args)
    if args.text is not None:
        ids, texts = ["text-00000"], [args.text]
    else:
        ids, texts = _read_texts_jsonl(args.data)
    preds = predict_batch(params, config, vocab, label_space, texts,
                          args.batch_size)
    if args.out:
        save_predictions_jsonl(args.out, ids, preds)
        log.info("wrote %d predictions to %s", len(preds), args.out)
    else:
        for ex_id, p in zip(ids, preds):
            print(json.dumps(
                {"id": ex_id, "proba": p.proba, "labels": p.labels},
                sort_keys=True,
            ))
    return 0


def cmd_analyze_attention(args) -> int:
    started = _utc_now()
    params, config, vocab, label_space = _load_model(args)
    _, texts = _read_texts_jsonl(args.data)
    summary = attention_summary(
        params, config, vocab, label_space, texts, args.batch_size
    )
    layers = range(config.n_layers) if args.layer is None else [args.layer]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(label_space.names)
    fmts = ("csv", "svg") if args.fmt == "both" else (args.fmt,)
    for k in layers:
        if not 0 <= k < config.n_layers:
            raise ContractError(
                f"layer {k} outside [0, {config.n_layers - 1}]"
            )
        for fmt in fmts:
            export_heatmap(
                summary.per_layer[k], names, names,
                out / f"attention_layer{k}.{fmt}", fmt,
            )
    _write_manifest(
        out, "analyze attention",
        {"ckpt": args.ckpt, "vocab": args.vocab, "labels": args.labels,
         "data": args.data},
        None, started,
    )
    return 0


def cmd_analyze_correlation(args) -> int:
    started = _utc_now()
    label_space = LabelSpace.load(args.labels)
    examples = load_jsonl(args.data, label_space)
    y = np.array([ex.labels for ex in examples])
    result = correlation_matrix(y, args.method)
    if result.degenerate:
        log.warning(
            "labels with zero variance (rows zeroed): %s",
            ", ".join(label_space.names[i] for i in result.degenerate),
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(label_space.names)
    fmts = ("csv", "svg") if args.fmt == "both" else (args.fmt,)
    for fmt in fmts:
        export_heatmap(
            result.values, names, names,
            out / f"correlation_{args.method}.{fmt}", fmt,
        )
    _write_manifest(
        out, "analyze correlation",
        {"data": args.data, "labels": args.labels}, None, started,
    )
    return 0


def cmd_metrics(args) -> int:
    label_space = LabelSpace.load(args.labels)
    gold = load_jsonl(args.gold, label_space)
    preds = load_predictions_jsonl(args.pred)
    by_id = {}
    for rec in preds:
        if rec["id"] in by_id:
            raise ContractError(f"duplicate prediction id {rec['id']!r}")
        by_id[rec["id"]] = rec["labels"]
    missing = [ex.id for ex in gold if ex.id not in by_id]
    if missing:
        raise ContractError(
            f"{len(missing)} gold ids have no prediction, first: {missing[0]!r}"
        )
    if len(by_id) != len(gold):
        raise ContractError(
            f"{len(by_id)} predictions for {len(gold)} gold examples"
        )
    for ex in gold:
        if len(by_id[ex.id]) != label_space.size:
            raise ContractError(
                f"prediction {ex.id!r} has {len(by_id[ex.id])} labels, "
                f"expected {label_space.size}"
            )
    report = full_report(
        [ex.labels for ex in gold], [by_id[ex.id] for ex in gold]
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_compare_strategies(args) -> int:
    started = _utc_now()
    data_dir = Path(args.data)
    labels_path = args.labels or data_dir / "labels.json"
    label_space = LabelSpace.load(labels_path)
    base_cfg = _resolve_train_config(args)
    examples = load_jsonl(data_dir / "train.jsonl", label_space)
    test_path = data_dir / "test.jsonl"
    if not test_path.exists():
        raise ContractError(
            f"compare-strategies needs {test_path} to score both runs"
        )
    test_examples = load_jsonl(test_path, label_space)
    model_dict = _resolve_model_dict(args)

    out = Path(args.out)
    reports = {}
    for strategy in ("diff", "same"):
        run_started = _utc_now()
        cfg = TrainConfig.from_dict({**base_cfg.to_dict(), "strategy": strategy})
        log.info("training %s strategy (seed %d)", strategy, cfg.seed)
        run_dir = out / strategy
        report = _train_and_dump(
            examples, test_examples, label_space, cfg, model_dict,
            run_dir, args.min_freq,
        )
        _write_manifest(
            run_dir, f"compare-strategies [{strategy}]",
            {"data": args.data, "labels": labels_path,
             "train_config": args.train_config,
             "model_config": args.model_config},
            cfg.seed, run_started,
        )
        reports[strategy] = report.to_dict()

    delta = {
        k: reports["diff"][k] - reports["same"][k]
        for k in ("accuracy", "micro_f1", "micro_jaccard", "hamming_loss")
    }
    comparison = {"diff": reports["diff"], "same": reports["same"],
                  "delta": delta}
    _write_json(comparison, out / "comparison.json")
    log.info("micro_f1 delta (diff - same): %+.4f", delta["micro_f1"])
    _write_manifest(
        out, "compare-strategies",
        {"data": args.data, "labels": labels_path,
         "train_config": args.train_config, "model_config": args.model_config},
        base_cfg.seed, started,
    )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_train_override_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("training overrides", _PRECEDENCE_NOTE)
    g.add_argument("--learning-rate", type=float, dest="learning_rate")
    g.add_argument("--batch-size", type=int, dest="batch_size")
    g.add_argument("--epochs", type=int)
    g.add_argument("--warmup-ratio", type=float, dest="warmup_ratio")
    g.add_argument("--mask-prob", type=float, dest="mask_prob")
    g.add_argument("--lambda", type=float, dest="lambda_mlm",
                   help="MLM weight in the joint loss")
    g.add_argument("--weight-decay", type=float, dest="weight_decay")
    g.add_argument("--seed", type=int, help="drives all randomness in the run")
    g.add_argument("--log-every-batches", type=int, dest="log_every_batches")


def _add_model_override_flags(p: argparse.ArgumentParser, with_strategy=True):
    g = p.add_argument_group("model overrides", _PRECEDENCE_NOTE)
    if with_strategy:
        g.add_argument("--strategy", choices=["diff", "same"])
    g.add_argument("--d-model", type=int, dest="d_model")
    g.add_argument("--n-heads", type=int, dest="n_heads")
    g.add_argument("--n-layers", type=int, dest="n_layers")
    g.add_argument("--d-ffn", type=int, dest="d_ffn")
    g.add_argument("--max-len", type=int, dest="max_len")
    g.add_argument("--dropout", type=float)


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--train-config", help="JSON file of training settings")
    p.add_argument("--model-config", help="JSON file of encoder settings")
    p.add_argument("--min-freq", type=int, default=1,
                   help="drop base-vocab tokens rarer than this (default 1)")


def _add_model_files(p: argparse.ArgumentParser):
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--vocab", required=True, help="vocab.json from the run")
    p.add_argument("--labels", required=True, help="labels.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmmtc",
        description="Label-cloze multi-label text classification.",
        epilog=_PRECEDENCE_NOTE,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate a synthetic labelled corpus")
    p.add_argument("--spec", required=True, help="generation spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pretrain", help="masked-token warmup on raw text")
    p.add_argument("--data", required=True,
                   help="directory with train.jsonl and labels.json")
    p.add_argument("--labels", help="labels.json (default: in --data)")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    _add_train_override_flags(p)
    _add_model_override_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="fit the joint label-cloze objective")
    p.add_argument("--data", required=True,
                   help="directory with train.jsonl (+ optional test.jsonl)")
    p.add_argument("--labels", help="labels.json (default: in --data)")
    p.add_argument("--out", required=True)
    p.add_argument("--dev-ratio", type=float, dest="dev_ratio",
                   help="hold out this fraction for best-epoch tracking")
    p.add_argument("--init", help="warm-start checkpoint (requires --vocab)")
    p.add_argument("--vocab", help="vocab.json matching --init")
    _add_config_flags(p)
    _add_train_override_flags(p)
    _add_model_override_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labelled JSONL")
    _add_model_files(p)
    p.add_argument("--data", required=True, help="labelled JSONL file")
    p.add_argument("--out", help="also write report.json + predictions.jsonl")
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write per-document probabilities")
    _add_model_files(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="JSONL with id and text fields")
    src.add_argument("--text", help="classify one literal document")
    p.add_argument("--out", help="predictions.jsonl path (default: stdout)")
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze", help="attention and correlation summaries")
    asub = p.add_subparsers(dest="what", required=True, metavar="KIND")

    pa = asub.add_parser("attention", help="label-pair attention heatmaps")
    _add_model_files(pa)
    pa.add_argument("--data", required=True, help="JSONL with id and text")
    pa.add_argument("--out", required=True)
    pa.add_argument("--layer", type=int, help="one layer (default: all)")
    pa.add_argument("--fmt", choices=["csv", "svg", "both"], default="both")
    pa.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    pa.set_defaults(func=cmd_analyze_attention)

    pc = asub.add_parser("correlation", help="label co-occurrence matrix")
    pc.add_argument("--data", required=True, help="labelled JSONL file")
    pc.add_argument("--labels", required=True)
    pc.add_argument("--out", required=True)
    pc.add_argument("--method", choices=["pearson", "spearman"],
                    default="pearson")
    pc.add_argument("--fmt", choices=["csv", "svg", "both"], default="both")
    pc.set_defaults(func=cmd_analyze_correlation)

    p = sub.add_parser("metrics", help="score predictions against gold labels")
    p.add_argument("--pred", required=True, help="predictions.jsonl")
    p.add_argument("--gold", required=True, help="labelled JSONL file")
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser(
        "compare-strategies",
        help="train diff and same with identical settings, report deltas",
    )
    p.add_argument("--data", required=True,
                   help="directory with train.jsonl and test.jsonl")
    p.add_argument("--labels", help="labels.json (default: in --data)")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    _add_train_override_flags(p)
    _add_model_override_flags(p, with_strategy=False)
    p.set_defaults(func=cmd_compare_strategies)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except LmmtcError as e:
        log.error("%s", e)
        return 1
    except OSError as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
