"""Command-line entry point: synth, pretrain, finetune, evaluate, ablate.

Exit codes: 0 success, 1 user error (bad config, missing or mismatched
inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import torch

from . import ablation, evaluation, plotting, reporting
from .checkpoint import CheckpointError, check_resume, load_checkpoint, read_sidecar, save_checkpoint
from .config import ConfigError, RunConfig, output_root
from .corpus import CorpusFormatError, load_corpus, read_manifest
from .downstream.cslr import CSLRModel
from .downstream.islr import ISLRModel
from .downstream.slt import SLTModel
from .model import SignPoseEncoder
from .pretrain import SignTextModel
from .synthetic import build_corpus
from .text import Vocab
from .training import (
    finetune_cslr,
    finetune_islr,
    finetune_slrt,
    finetune_slt,
    fit_input_norm,
    mean_pose,
    pretrain,
)

log = logging.getLogger("slpretrain")

USER_ERRORS = (ConfigError, CorpusFormatError, CheckpointError, FileNotFoundError)


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config(args) -> RunConfig:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set or []:
        rc.set(item)
    return rc


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if args.out else output_root() / default
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------- task data

def task_samples(task: str, samples):
    if task == "islr":
        chosen = [s for s in samples if s.gloss_labels is not None and len(s.gloss_labels) == 1]
    elif task == "cslr":
        chosen = [s for s in samples if s.gloss_labels]
    else:
        chosen = [s for s in samples if s.text is not None]
    if not chosen:
        raise UserError(f"corpus has no samples usable for task {task}")
    return chosen


def num_glosses(samples) -> int:
    return max(max(s.gloss_labels) for s in samples if s.gloss_labels) + 1


def build_task_model(task: str, rc: RunConfig, extra: dict):
    """Empty task model matching a task checkpoint sidecar."""
    if task == "slrt":
        return SignTextModel(rc.model_config(), Vocab.from_json(extra["vocab"]),
                             tau_init=float(rc["loss.tau_init"]))
    enc = SignPoseEncoder(rc.model_config())
    if task == "islr":
        return ISLRModel(enc, int(extra["num_classes"]))
    if task == "cslr":
        return CSLRModel(enc, int(extra["num_glosses"]), int(rc["task.cslr_hidden"]),
                         rc["task.cslr_strides"], int(rc["task.lstm_layers"]))
    if task == "slt":
        return SLTModel(enc, Vocab.from_json(extra["vocab"]), d_model=max(rc.model_config().d1, 32),
                        heads=rc.model_config().heads, blocks=int(rc["task.decoder_blocks"]),
                        dropout=rc.model_config().dropout)
    raise UserError(f"unknown task {task!r}")


def evaluate_model(task: str, model, samples, split: str, rc: RunConfig):
    if task == "islr":
        return evaluation.evaluate_islr(model, samples, split, int(rc["task.num_frames"]))
    if task == "cslr":
        return evaluation.evaluate_cslr(model, samples, split, int(rc["task.beam_width"]))
    if task == "slt":
        return evaluation.evaluate_slt(model, samples, split, int(rc["task.beam_width"]), int(rc["task.max_len"]))
    return evaluation.evaluate_slrt(model, samples, split)


def _write_eval(out: Path, task: str, rc: RunConfig, model, samples, split: str) -> dict:
    rows, preds = evaluate_model(task, model, samples, split, rc)
    settings = {"rouge_beta": 1.2, "bleu_tokenizer": "lowercase word regex", "beam_width": rc["task.beam_width"]}
    report = reporting.make_report(task, rc.hash(), int(rc["seed"]), split, rows, settings)
    reporting.write_json(out / f"{task}_{split}_report.json", report)
    reporting.write_predictions(out / f"{task}_{split}_predictions.jsonl", preds)
    reporting.write_csv(out / f"{task}_{split}_metrics.csv", rows, ["metric", "k", "value", "split", "n_samples"])
    for row in rows:
        k = f"@{row['k']}" if "k" in row else ""
        print(f"{task}\t{split}\t{row['metric']}{k}\t{row['value']:.4f}")
    return report


# --------------------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    rc = _config(args)
    out = _out_dir(args, "corpus")
    manifest = build_corpus(rc.synthesis_config(), int(rc["synth.n_samples"]), out, rc["synth.kind"])
    log.info("wrote %d samples to %s (fingerprint %s)", len(manifest), out, manifest.fingerprint())
    print(f"corpus\t{out}\t{len(manifest)}\t{manifest.fingerprint()}")
    return 0


def cmd_pretrain(args) -> int:
    rc = _config(args)
    out = _out_dir(args, "pretrain")
    manifest = read_manifest(args.corpus)
    samples = load_corpus(manifest)
    ckpt = out / "pretrain.pt"
    start, opt_state, model, vocab = 0, None, None, None
    if args.resume:
        meta = check_resume(args.resume, rc)
        vocab = Vocab.from_json(meta["extra"]["vocab"])
        model = SignTextModel(rc.model_config(), vocab, tau_init=float(rc["loss.tau_init"]))
        load_checkpoint(args.resume, model)
        opt_state = torch.load(args.resume, map_location="cpu", weights_only=True).get("optimizer")
        start = int(meta["epoch"]) + 1
    else:
        vocab = Vocab.build(s.text for s in samples)
    fingerprint = manifest.fingerprint()
    history = []

    def on_epoch(row, m, opt):
        history.append(row)
        print(f"epoch\t{row['epoch']}\tpr={row['pr']:.6f}\tstc={row['stc']:.6f}\ttotal={row['total']:.6f}")
        save_checkpoint(ckpt, m, rc, row["epoch"], fingerprint, "pretrain", {"vocab": vocab.to_json()}, opt)

    torch.set_num_threads(1)
    pretrain(samples, rc, vocab, model, on_epoch, start, opt_state)
    if history:
        reporting.write_csv(out / "pretrain_history.csv", history)
        plotting.plot_loss_curves(history, out / "pretrain_losses.png")
    print(f"checkpoint\t{ckpt}")
    return 0


def _load_pretrained(path) -> tuple[SignTextModel, dict]:
    meta = read_sidecar(path)
    if meta.get("kind") != "pretrain":
        raise UserError(f"{path}: expected a pre-training checkpoint, got {meta.get('kind')!r}")
    prc = RunConfig(meta["config"])
    model = SignTextModel(prc.model_config(), Vocab.from_json(meta["extra"]["vocab"]),
                          tau_init=float(prc["loss.tau_init"]))
    load_checkpoint(path, model)
    return model, meta


def cmd_finetune(args) -> int:
    rc = _config(args)
    rc.update({"task.name": args.task})
    task = args.task
    out = _out_dir(args, f"finetune_{task}")
    train = task_samples(task, load_corpus(args.corpus))
    pretrained, pre_meta = (None, None)
    if args.checkpoint:
        pretrained, pre_meta = _load_pretrained(args.checkpoint)
        # the encoder architecture comes from the checkpoint
        rc.update({k: v for k, v in pre_meta["config"].items()
                   if k.startswith(("model.", "sim.")) or k == "preset"})
    torch.set_num_threads(1)
    extra = {"pretrained_config_hash": pre_meta["config_hash"] if pre_meta else None}
    if task == "slrt":
        base = pretrained
        if base is None:
            base = SignTextModel(rc.model_config(), Vocab.build(s.text for s in train),
                                 tau_init=float(rc["loss.tau_init"]))
            base.decoder.set_mean_pose(mean_pose(train))
            fit_input_norm(base.encoder, train)
        model, hist = finetune_slrt(base, train, rc)
        extra["vocab"] = model.vocab.to_json()
    else:
        if pretrained is not None:
            encoder = pretrained.encoder
        else:
            encoder = SignPoseEncoder(rc.model_config())
            fit_input_norm(encoder, train)
        if task == "islr":
            classes = num_glosses(train) if args.num_classes is None else args.num_classes
            model, hist = finetune_islr(encoder, train, classes, rc)
            extra["num_classes"] = classes
        elif task == "cslr":
            glosses = num_glosses(train)
            model, hist = finetune_cslr(encoder, train, glosses, rc)
            extra["num_glosses"] = glosses
        else:
            vocab = Vocab.build(s.text for s in train)
            model, hist = finetune_slt(encoder, train, vocab, rc)
            extra["vocab"] = vocab.to_json()
    ckpt = save_checkpoint(out / f"{task}.pt", model, rc, len(hist.rows) - 1,
                           read_manifest(args.corpus).fingerprint(), task, extra)
    if hist.rows:
        reporting.write_csv(out / f"{task}_history.csv", hist.rows)
        plotting.plot_task_curve(hist.rows, out / f"{task}_loss.png", f"{task} fine-tuning")
    _write_eval(out, task, rc, model, train, "train")
    if args.eval_corpus:
        _write_eval(out, task, rc, model, task_samples(task, load_corpus(args.eval_corpus)), args.split)
    print(f"checkpoint\t{ckpt}")
    return 0


def cmd_evaluate(args) -> int:
    meta = read_sidecar(args.checkpoint)
    task = meta.get("kind")
    if task not in ("islr", "cslr", "slt", "slrt"):
        raise UserError(f"{args.checkpoint}: not a task checkpoint (kind {task!r})")
    rc = RunConfig(meta["config"])
    model = build_task_model(task, rc, meta["extra"])
    load_checkpoint(args.checkpoint, model)
    samples = task_samples(task, load_corpus(args.corpus))
    if task == "islr":
        bad = [s.id for s in samples if s.gloss_labels[0] >= model.num_classes]
        if bad:
            raise UserError(f"sample {bad[0]} has a label outside the model's {model.num_classes} classes")
    out = _out_dir(args, f"evaluate_{task}")
    torch.set_num_threads(1)
    _write_eval(out, task, rc, model, samples, args.split)
    return 0


def cmd_ablate(args) -> int:
    kw = {}
    if args.seeds:
        kw["seeds"] = tuple(args.seeds)
    if args.epochs:
        kw["pretrain_epochs"] = args.epochs
    protocol = ablation.TrendProtocol(**kw)
    variants = args.variants or list(ablation.VARIANTS)
    unknown = sorted(set(variants) - set(ablation.VARIANTS))
    if unknown:
        raise UserError(f"unknown variants: {', '.join(unknown)}")
    out = _out_dir(args, "ablation")
    torch.set_num_threads(1)
    results = ablation.run_trends(protocol, variants,
                                  lambda r: print(f"run\t{r.variant}\t{r.seed}\tislr={r.islr_top1}\tt2v_r1={r.t2v_r1}"))
    rows = [r.row() for r in results]
    reporting.write_csv(out / "ablation_runs.csv", rows)
    checks = ablation.trend_checks(results)
    summary = {"protocol": asdict(protocol),
               "islr_top1_mean": ablation.seed_means(results, "islr_top1"),
               "t2v_r1_mean": ablation.seed_means(results, "t2v_r1"),
               "checks": {k: {"holds": ok, "detail": d} for k, (ok, d) in checks.items()}}
    reporting.write_json(out / "ablation_summary.json", summary)
    by_isl, by_ret = {}, {}
    for r in results:
        if r.islr_top1 is not None:
            by_isl.setdefault(r.variant, []).append(r.islr_top1)
        by_ret.setdefault(r.variant, []).append(r.t2v_r1)
    if by_isl:
        plotting.plot_ablation(by_isl, out / "ablation_islr.png", "ISLR top-1 (%)")
    plotting.plot_ablation(by_ret, out / "ablation_retrieval.png", "T2V R@1 (%)")
    for name, (ok, detail) in checks.items():
        print(f"check\t{name}\t{'holds' if ok else 'fails'}\t{detail}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slpretrain", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--out", help="output directory (default under $SLPRETRAIN_OUTPUT_ROOT)")

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("pretrain", help="joint masked-pose / contrastive pre-training")
    common(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--resume", help="checkpoint to continue from (config must match)")
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("finetune", help="fine-tune a downstream task")
    common(sp)
    sp.add_argument("--task", required=True, choices=["islr", "cslr", "slt", "slrt"])
    sp.add_argument("--corpus", required=True, help="training corpus")
    sp.add_argument("--checkpoint", help="pre-training checkpoint (random init if omitted)")
    sp.add_argument("--eval-corpus", help="held-out corpus evaluated after training")
    sp.add_argument("--split", default="test", help="split name for --eval-corpus")
    sp.add_argument("--num-classes", type=int, help="ISLR class count (default: from labels)")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("evaluate", help="evaluate a task checkpoint on a corpus")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ablate", help="desk-scale ablation trends on synthetic data")
    sp.add_argument("--out")
    sp.add_argument("--seeds", type=int, nargs="+")
    sp.add_argument("--epochs", type=int, help="pre-training epochs per variant")
    sp.add_argument("--variants", nargs="+")
    sp.set_defaults(func=cmd_ablate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UserError, *USER_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
