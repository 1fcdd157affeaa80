"""Command-line surface wiring corpus -> preprocessing -> training -> evaluation.

Subcommands: ingest, prep, vocab, pretrain (mlm-nsp | tweets), train, eval,
predict.  Exit codes: 0 success, 1 usage error, 2 data/validation error.
Logs go to stderr; data goes to stdout or --out paths.  Every subcommand
honors --seed and the training subcommands honor --dry-run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from dialemo import textprep
from dialemo.corpus import (
    DialogueSet,
    Source,
    filter_labels,
    label_distribution,
    parse_dialogues,
    split_train_val,
)
from dialemo.errors import ConfigError, DataError, TrainingDiverged
from dialemo.evaluate import confusion, render_report, report, report_to_dict
from dialemo.labels import EVAL_LABEL_INDEX, EVAL_LABELS
from dialemo.model import (
    Model,
    ModelConfig,
    init_params,
    load_checkpoint_file,
    save_checkpoint_file,
    vocab_checksum,
)
from dialemo.runconfig import RunConfig, resolve_run_config
from dialemo.tokenizer import (
    Vocab,
    build_vocab,
    encode_pair,
    load_vocab,
    read_scenes,
    save_vocab,
)
from dialemo.train import (
    class_weights,
    filter_tweets,
    predict_labels,
    pretrain_emotion_hashtags,
    pretrain_mlm_nsp,
    read_tweets_file,
    reinit_head,
    train_classifier,
)

log = logging.getLogger("dialemo")

CHECKPOINT_NAME = "model.cek"
VOCAB_NAME = "vocab.txt"
METRICS_NAME = "metrics.jsonl"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (env DIALEMO_CONFIG)")
    p.add_argument("--dataset", choices=["friends", "emotionpush"])
    p.add_argument("--seed", type=int, help="override train.seed")


def _run_config(args: argparse.Namespace) -> RunConfig:
    flags = {}
    for field in ("seed", "max_len", "batch_size", "n_epochs", "learning_rate", "n_train"):
        if hasattr(args, field):
            flags[field] = getattr(args, field)
    return resolve_run_config(args.config, args.dataset, flags)


def build_parser() -> _Parser:
    parser = _Parser(prog="dialemo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus file and print statistics")
    _add_common(p)
    p.add_argument("--data", required=True, help="EmotionLines-layout JSON file")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("prep", help="emit the causal-pairs file")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "all"], default="all")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--filter", action="store_true", help="keep only evaluation labels")
    p.add_argument("--render", action="store_true", help="print rendered pair strings")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("vocab", help="build a vocabulary file")
    _add_common(p)
    p.add_argument("--pairs", action="append", default=[], help="pairs file (repeatable)")
    p.add_argument("--scenes", action="append", default=[], help="scene corpus (repeatable)")
    p.add_argument("--tweets", action="append", default=[], help="tweet file (repeatable)")
    p.add_argument("--min-freq", type=int)
    p.add_argument("--size-cap", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pretrain", help="run one of the pre-training regimes")
    pre_sub = p.add_subparsers(dest="task", required=True)

    q = pre_sub.add_parser("mlm-nsp", help="masked LM + next sentence prediction")
    _add_common(q)
    q.add_argument("--scenes", required=True, help="scene-segmented corpus file")
    q.add_argument("--vocab", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--n-epochs", type=int)
    q.add_argument("--batch-size", type=int)
    q.add_argument("--learning-rate", type=float)
    q.add_argument("--max-len", type=int)
    q.add_argument("--dry-run", action="store_true")

    q = pre_sub.add_parser("tweets", help="emotion-hashtag classification")
    _add_common(q)
    q.add_argument("--tweets", required=True, help="tweet records file")
    q.add_argument("--vocab")
    q.add_argument("--init-dir", help="checkpoint dir to continue from")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--n-epochs", type=int)
    q.add_argument("--batch-size", type=int)
    q.add_argument("--learning-rate", type=float)
    q.add_argument("--max-len", type=int)
    q.add_argument("--dry-run", action="store_true")

    p = sub.add_parser("train", help="fine-tune the classifier")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: built from the train split)")
    p.add_argument("--init-dir", help="checkpoint dir to start from (its vocab is used)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--metrics", help="metrics log path (default <out-dir>/metrics.jsonl)")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--dry-run", action="store_true")

    p = sub.add_parser("eval", help="report metrics from a checkpoint and gold file")
    _add_common(p)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "all"], default="val")
    p.add_argument("--n-train", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("predict", help="label an unlabeled dialogue file")
    _add_common(p)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    return parser


# ------------------------------------------------------------ shared steps

def _load_corpus(path: str, cfg: RunConfig, require_emotion: bool = True) -> DialogueSet:
    source = Source(cfg.dataset)
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_dialogues(raw, source, require_emotion=require_emotion)


def _select_split(ds: DialogueSet, split: str, cfg: RunConfig) -> DialogueSet:
    if split == "all":
        return ds
    train, val = split_train_val(ds, min(cfg.n_train, len(ds)))
    return train if split == "train" else val


def _prepare_pairs(ds: DialogueSet, cfg: RunConfig) -> list[textprep.CausalPair]:
    pairs = []
    for d in ds:
        pairs.extend(
            textprep.prepare_dialogue(
                d,
                personality_tokens=cfg.personality_tokens,
                chat_normalize=cfg.chat_normalize,
            )
        )
    return pairs


def _encode_for_eval(pairs, vocab: Vocab, max_len: int):
    return [
        encode_pair(p, vocab, max_len, label=EVAL_LABEL_INDEX[p.label]) for p in pairs
    ]


def _save_dir(out_dir: str, model: Model, vocab: Vocab, metrics=None, metrics_path=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / VOCAB_NAME, "w", encoding="utf-8") as fh:
        save_vocab(vocab, fh)
    save_checkpoint_file(model, out / CHECKPOINT_NAME, vocab_checksum(vocab))
    if metrics is not None:
        path = Path(metrics_path) if metrics_path else out / METRICS_NAME
        with open(path, "w", encoding="utf-8") as fh:
            for m in metrics:
                fh.write(json.dumps(m.to_dict()) + "\n")
    log.info("saved checkpoint to %s", out / CHECKPOINT_NAME)


def _load_dir(ckpt_dir: str, cfg: RunConfig) -> tuple[Model, Vocab]:
    d = Path(ckpt_dir)
    try:
        with open(d / VOCAB_NAME, "r", encoding="utf-8") as fh:
            vocab = load_vocab(fh, lowercase=cfg.lowercase)
    except OSError as exc:
        raise DataError(f"cannot read vocabulary from {ckpt_dir}: {exc}") from exc
    model, stored_sha = load_checkpoint_file(d / CHECKPOINT_NAME)
    if stored_sha and stored_sha != vocab_checksum(vocab):
        raise DataError(f"vocabulary in {ckpt_dir} does not match the checkpoint checksum")
    return model, vocab


# ------------------------------------------------------------- subcommands

def _cmd_ingest(args) -> int:
    cfg = _run_config(args)
    ds = _load_corpus(args.data, cfg)
    train, val = split_train_val(ds, min(cfg.n_train, len(ds)))
    stats = {"dialogues": len(ds), "utterances": ds.n_utterances}
    keep = set(EVAL_LABELS)
    for name, part in (("train", train), ("val", val)):
        pairs = filter_labels(_prepare_pairs(part, cfg), keep)
        dist = label_distribution(pairs)
        stats[name] = {
            "examples": len(pairs),
            "labels": {lab.value: dist.get(lab, 0) for lab in EVAL_LABELS},
        }
    stats["filtered_total"] = stats["train"]["examples"] + stats["val"]["examples"]
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        print(f"dialogues:            {stats['dialogues']}")
        print(f"utterances:           {stats['utterances']}")
        print(f"filtered examples:    {stats['filtered_total']} "
              f"= {stats['train']['examples']} train + {stats['val']['examples']} val")
        for name in ("train", "val"):
            dist = stats[name]["labels"]
            row = ", ".join(f"{k}: {v}" for k, v in dist.items())
            print(f"{name:>5} labels:         {row}")
    return 0


def _cmd_prep(args) -> int:
    cfg = _run_config(args)
    ds = _select_split(_load_corpus(args.data, cfg), args.split, cfg)
    pairs = _prepare_pairs(ds, cfg)
    if args.filter:
        pairs = filter_labels(pairs, set(EVAL_LABELS))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.render:
            for p in pairs:
                out.write(textprep.render_pair(p) + "\n")
        else:
            textprep.write_pairs_file(pairs, Source(cfg.dataset), out)
    finally:
        if args.out:
            out.close()
    log.info("wrote %d pairs", len(pairs))
    return 0


def _cmd_vocab(args) -> int:
    cfg = _run_config(args)
    texts: list[str] = []
    for path in args.pairs:
        with open(path, "r", encoding="utf-8") as fh:
            pairs, _ = textprep.read_pairs_file(fh)
        for p in pairs:
            texts.append(p.target_text)
            texts.append(p.context_text)
    for path in args.scenes:
        with open(path, "r", encoding="utf-8") as fh:
            for scene in read_scenes(fh):
                texts.extend(scene)
    for path in args.tweets:
        with open(path, "r", encoding="utf-8") as fh:
            texts.extend(t.text for t in filter_tweets(read_tweets_file(fh)))
    if not texts:
        raise DataError("no input texts; pass --pairs, --scenes, or --tweets")
    vocab = build_vocab(
        texts,
        min_freq=args.min_freq or cfg.vocab_min_freq,
        size_cap=args.size_cap or cfg.vocab_size_cap,
        lowercase=cfg.lowercase,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        save_vocab(vocab, fh)
    log.info("wrote %d tokens to %s", len(vocab), args.out)
    return 0


def _cmd_pretrain_mlm_nsp(args) -> int:
    cfg = _run_config(args)
    with open(args.vocab, "r", encoding="utf-8") as fh:
        vocab = load_vocab(fh, lowercase=cfg.lowercase)
    with open(args.scenes, "r", encoding="utf-8") as fh:
        scenes = [s for s in read_scenes(fh) if len(s) >= 2]
    if len(scenes) < 2:
        raise DataError("need at least two scenes with two or more utterances each")
    if args.dry_run:
        log.info("dry run: %d scenes, vocab %d; config valid", len(scenes), len(vocab))
        return 0
    model = Model(cfg.model_config(len(vocab)), init_params(
        cfg.model_config(len(vocab)), np.random.default_rng(cfg.seed)))
    model, metrics = pretrain_mlm_nsp(model, scenes, cfg.train_config(), vocab)
    for m in metrics:
        log.info("epoch %d: mlm %.4f nsp %.4f", m.epoch, m.mlm_loss, m.nsp_loss)
    _save_dir(args.out_dir, model, vocab, metrics)
    return 0


def _cmd_pretrain_tweets(args) -> int:
    cfg = _run_config(args)
    with open(args.tweets, "r", encoding="utf-8") as fh:
        tweets = filter_tweets(read_tweets_file(fh))
    if not tweets:
        raise DataError("no tweets survived filtering")
    if args.init_dir:
        model, vocab = _load_dir(args.init_dir, cfg)
    else:
        if not args.vocab:
            raise DataError("pretrain tweets needs --vocab or --init-dir")
        with open(args.vocab, "r", encoding="utf-8") as fh:
            vocab = load_vocab(fh, lowercase=cfg.lowercase)
        mc = cfg.model_config(len(vocab))
        model = Model(mc, init_params(mc, np.random.default_rng(cfg.seed)))
    if args.dry_run:
        log.info("dry run: %d tweets, vocab %d; config valid", len(tweets), len(vocab))
        return 0
    model, metrics = pretrain_emotion_hashtags(model, tweets, cfg.train_config(), vocab)
    for m in metrics:
        log.info("epoch %d: loss %.4f", m.epoch, m.train_loss)
    _save_dir(args.out_dir, model, vocab, metrics)
    return 0


def _cmd_train(args) -> int:
    cfg = _run_config(args)
    ds = _load_corpus(args.data, cfg)
    train_ds, val_ds = split_train_val(ds, min(cfg.n_train, len(ds)))
    keep = set(EVAL_LABELS)
    train_pairs = filter_labels(_prepare_pairs(train_ds, cfg), keep)
    val_pairs = filter_labels(_prepare_pairs(val_ds, cfg), keep)
    if not train_pairs:
        raise DataError("no training examples after filtering")

    rng = np.random.default_rng(cfg.seed)
    if args.init_dir:
        model, vocab = _load_dir(args.init_dir, cfg)
        if model.cfg.n_labels != len(EVAL_LABELS):
            log.info("re-initializing %d-way head for %d labels",
                     model.cfg.n_labels, len(EVAL_LABELS))
            model = reinit_head(model, len(EVAL_LABELS), rng)
    else:
        if args.vocab:
            with open(args.vocab, "r", encoding="utf-8") as fh:
                vocab = load_vocab(fh, lowercase=cfg.lowercase)
        else:
            texts = [t for p in train_pairs for t in (p.target_text, p.context_text)]
            vocab = build_vocab(texts, min_freq=cfg.vocab_min_freq,
                                size_cap=cfg.vocab_size_cap, lowercase=cfg.lowercase)
        mc = cfg.model_config(len(vocab))
        model = Model(mc, init_params(mc, rng))

    dist = label_distribution(train_pairs)
    weights = {
        EVAL_LABEL_INDEX[lab]: w
        for lab, w in class_weights({lab: dist[lab] for lab in EVAL_LABELS if lab in dist}).items()
    }
    if args.dry_run:
        log.info("dry run: %d train / %d val examples, vocab %d; config valid",
                 len(train_pairs), len(val_pairs), len(vocab))
        return 0

    train_data = _encode_for_eval(train_pairs, vocab, model.cfg.max_len)
    val_data = _encode_for_eval(val_pairs, vocab, model.cfg.max_len)
    model, metrics = train_classifier(model, train_data, val_data, cfg.train_config(), weights)
    for m in metrics:
        log.info("epoch %d: train_loss %.4f val_micro_f1 %s",
                 m.epoch, m.train_loss,
                 "n/a" if m.val_micro_f1 is None else f"{m.val_micro_f1:.4f}")
    _save_dir(args.out_dir, model, vocab, metrics, args.metrics)
    return 0


def _cmd_eval(args) -> int:
    cfg = _run_config(args)
    model, vocab = _load_dir(args.ckpt_dir, cfg)
    ds = _select_split(_load_corpus(args.data, cfg), args.split, cfg)
    pairs = filter_labels(_prepare_pairs(ds, cfg), set(EVAL_LABELS))
    if not pairs:
        raise DataError("no evaluation examples after filtering")
    data = _encode_for_eval(pairs, vocab, model.cfg.max_len)
    preds = predict_labels(model, data)
    golds = [p.label for p in pairs]
    r = report(confusion([EVAL_LABELS[i] for i in preds], golds))
    text = json.dumps(report_to_dict(r), indent=2) if args.json else render_report(r)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_predict(args) -> int:
    cfg = _run_config(args)
    model, vocab = _load_dir(args.ckpt_dir, cfg)
    ds = _load_corpus(args.data, cfg, require_emotion=False)
    out_dialogues = []
    for d in ds:
        pairs = textprep.prepare_dialogue(
            d, personality_tokens=cfg.personality_tokens, chat_normalize=cfg.chat_normalize
        )
        data = [encode_pair(p, vocab, model.cfg.max_len) for p in pairs]
        preds = predict_labels(model, data)
        out_dialogues.append(
            [
                {"speaker": u.speaker, "utterance": u.text,
                 "emotion": EVAL_LABELS[i].value}
                for u, i in zip(d.utterances, preds)
            ]
        )
    text = json.dumps(out_dialogues, ensure_ascii=False, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


_DISPATCH = {
    "ingest": _cmd_ingest,
    "prep": _cmd_prep,
    "vocab": _cmd_vocab,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
}


def run(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "pretrain":
            handler = _cmd_pretrain_mlm_nsp if args.task == "mlm-nsp" else _cmd_pretrain_tweets
        else:
            handler = _DISPATCH[args.command]
        return handler(args)
    except (DataError, ConfigError, TrainingDiverged) as exc:
        print(f"dialemo: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
