"""Optimisation loops for pre-training and the four downstream tasks."""

from __future__ import annotations

import copy
import logging
import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .config import RunConfig
from .data import collate_pretrain, pad_ids, pose_tensor
from .downstream.cslr import CSLRModel, cslr_batch_loss, from_ctc_labels, to_ctc_labels
from .downstream.ctc import ctc_beam_decode
from .downstream.islr import ISLRModel, islr_loss, prepare_islr
from .downstream.retrieval import corpus_similarity, slrt_rank
from .downstream.slt import SLTModel, slt_generate, slt_loss, strip_special
from .model import SignPoseEncoder
from .objectives import stc_loss
from .pose import SignTextSample
from .pretrain import SignTextModel
from .text import Vocab, text_token_ids, tokenize

log = logging.getLogger(__name__)


def set_seed(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def make_optimizer(groups, lr: float, weight_decay: float, momentum: float = 0.9):
    return torch.optim.AdamW(groups, lr=lr, betas=(momentum, 0.999), weight_decay=weight_decay)


def make_scheduler(opt, schedule: str, total_steps: int, warmup: float = 0.0,
                   step_size_steps: int = 1, gamma: float = 0.1):
    """Per-step multiplier: linear warmup over `warmup` of the run, then
    linear decay to zero, cosine decay to zero, step decay or constant."""
    total_steps = max(total_steps, 1)
    warm = int(round(warmup * total_steps))

    def factor(step: int) -> float:
        if warm and step < warm:
            return (step + 1) / warm
        if schedule == "linear":
            return max(0.0, (total_steps - step) / max(1, total_steps - warm))
        if schedule == "cosine":
            prog = (step - warm) / max(1, total_steps - warm)
            return 0.5 * (1.0 + math.cos(math.pi * min(prog, 1.0)))
        if schedule == "steplr":
            return gamma ** (step // max(1, step_size_steps))
        if schedule == "constant":
            return 1.0
        raise ValueError(f"unknown schedule {schedule!r}")

    return torch.optim.lr_scheduler.LambdaLR(opt, factor)


def length_bucketed(lengths: Sequence[int], batch_size: int, rng: np.random.Generator,
                    pool: int = 4) -> list[list[int]]:
    """Shuffle, sort by length within pools of `pool` batches, then shuffle batch order."""
    order = rng.permutation(len(lengths))
    out = []
    for lo in range(0, len(order), batch_size * pool):
        chunk = sorted(order[lo:lo + batch_size * pool], key=lambda i: lengths[i])
        out += [chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size)]
    return [out[i] for i in rng.permutation(len(out))]


def trainable(module: nn.Module):
    return [p for p in module.parameters() if p.requires_grad]


@dataclass
class History:
    rows: list[dict] = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def column(self, key):
        return [r[key] for r in self.rows]


def mean_pose(samples: Sequence[SignTextSample]) -> np.ndarray:
    """Confidence-weighted mean coordinates per joint, [K, 2]."""
    coords = np.concatenate([s.pose.coords for s in samples])
    conf = np.concatenate([s.pose.confidence for s in samples])[..., None]
    return (coords * conf).sum(0) / np.maximum(conf.sum(0), 1e-8)


def input_stats(samples: Sequence[SignTextSample]) -> tuple[np.ndarray, np.ndarray]:
    """Per-(joint, channel) mean and std of (x, y, conf) over all frames, [K, 3] each."""
    x = np.concatenate([s.pose.stacked() for s in samples])
    return x.mean(0), x.std(0)


def fit_input_norm(encoder: SignPoseEncoder, samples: Sequence[SignTextSample]) -> None:
    encoder.input_norm.set_stats(*input_stats(samples))


def build_vocab(samples: Sequence[SignTextSample]) -> Vocab:
    return Vocab.build(s.text for s in samples)


# --------------------------------------------------------------------------- pre-training

def pretrain(samples: Sequence[SignTextSample], rc: RunConfig, vocab: Optional[Vocab] = None,
             model: Optional[SignTextModel] = None,
             on_epoch: Optional[Callable[[dict, SignTextModel, torch.optim.Optimizer], None]] = None,
             start_epoch: int = 0, optimizer_state: Optional[dict] = None,
             ) -> tuple[SignTextModel, History]:
    """Joint masked-pose / contrastive pre-training. `on_epoch(row, model, opt)`
    runs after every epoch; `start_epoch` and `optimizer_state` resume a run."""
    set_seed(int(rc["seed"]) + start_epoch)
    vocab = vocab or build_vocab(samples)
    if model is None:
        model = SignTextModel(rc.model_config(), vocab, tau_init=float(rc["loss.tau_init"]))
        model.decoder.set_mean_pose(mean_pose(samples))
        fit_input_norm(model.encoder, samples)
    rng = np.random.default_rng(int(rc["seed"]) if start_epoch == 0 else [int(rc["seed"]), start_epoch])
    bs = int(rc["train.batch_size"])
    epochs = int(rc["train.epochs"])
    steps_per_epoch = math.ceil(len(samples) / bs)
    opt = make_optimizer(trainable(model), float(rc["optim.base_lr"]), float(rc["optim.weight_decay"]),
                         float(rc["optim.momentum"]))
    sched = make_scheduler(opt, rc["optim.schedule"], epochs * steps_per_epoch, float(rc["optim.warmup"]),
                           int(rc["optim.step_size"]) * steps_per_epoch, float(rc["optim.gamma"]))
    if optimizer_state is not None:
        opt.load_state_dict(optimizer_state)
    with warnings.catch_warnings():
        # fast-forwarding the schedule on resume happens before any optimizer step
        warnings.simplefilter("ignore", UserWarning)
        for _ in range(start_epoch * steps_per_epoch):
            sched.step()
    lam = float(rc["loss.lambda"])
    use_pr = bool(rc["loss.use_pr"])
    ratio = float(rc["mask.ratio"])
    lengths = [s.pose.num_frames for s in samples]
    hist = History()
    for epoch in range(start_epoch, epochs):
        model.train()
        sums = {"total": 0.0, "pr": 0.0, "stc": 0.0}
        n = 0
        for idx in length_bucketed(lengths, bs, rng):
            batch = collate_pretrain([samples[i] for i in idx], vocab, rng, ratio,
                                     rc["mask.level_props"], rc["mask.corruption_probs"],
                                     float(rc["mask.jitter_std"]))
            parts = model(batch, lam=lam, use_pr=use_pr, pr_normalized=bool(rc["loss.mask_normalized"]))
            opt.zero_grad(set_to_none=True)
            parts.total.backward()
            opt.step()
            sched.step()
            for k in sums:
                sums[k] += float(getattr(parts, k).detach()) * len(idx)
            n += len(idx)
        row = {"epoch": epoch, **{k: v / n for k, v in sums.items()},
               "tau": float(model.temperature().detach()), "lr": opt.param_groups[0]["lr"]}
        hist.add(**row)
        log.info("pretrain epoch %d total=%.4f pr=%.4f stc=%.4f", epoch, row["total"], row["pr"], row["stc"])
        if on_epoch:
            on_epoch(row, model, opt)
    return model, hist


# --------------------------------------------------------------------------- fine-tuning helpers

def encoder_param_groups(model: nn.Module, encoder: nn.Module, lr: float, rate: float):
    enc_ids = {id(p) for p in encoder.parameters()}
    rest = [p for p in model.parameters() if p.requires_grad and id(p) not in enc_ids]
    groups = [{"params": rest, "lr": lr}]
    if rate > 0:
        groups.append({"params": [p for p in encoder.parameters() if p.requires_grad], "lr": lr * rate})
    else:
        for p in encoder.parameters():
            p.requires_grad_(False)
    return groups


def fresh_encoder(rc: RunConfig, samples: Optional[Sequence[SignTextSample]] = None) -> SignPoseEncoder:
    """Randomly initialised encoder; input statistics fitted on `samples` if given."""
    enc = SignPoseEncoder(rc.model_config())
    if samples:
        fit_input_norm(enc, samples)
    return enc


def _task_optim(model, encoder, rc: RunConfig, n_samples: int):
    bs = int(rc.task("batch_size"))
    epochs = int(rc.task("epochs"))
    steps = math.ceil(n_samples / bs)
    lr = float(rc.task("base_lr"))
    groups = encoder_param_groups(model, encoder, lr, float(rc["task.finetune_rate"]))
    opt = make_optimizer(groups, lr, float(rc.task("weight_decay")), float(rc["optim.momentum"]))
    sched = make_scheduler(opt, rc.task("schedule"), epochs * steps, float(rc.task("warmup")),
                           int(rc.task("step_size")) * steps, float(rc["optim.gamma"]))
    return opt, sched, bs, epochs


def _step(opt, sched, loss):
    opt.zero_grad(set_to_none=True)
    loss.backward()
    opt.step()
    sched.step()


# --------------------------------------------------------------------------- ISLR

def finetune_islr(encoder: SignPoseEncoder, train: Sequence[SignTextSample], num_classes: int,
                  rc: RunConfig) -> tuple[ISLRModel, History]:
    set_seed(int(rc["seed"]))
    model = ISLRModel(copy.deepcopy(encoder), num_classes)
    opt, sched, bs, epochs = _task_optim(model, model.encoder, rc, len(train))
    rng = np.random.default_rng(int(rc["seed"]) + 1)
    labels = torch.as_tensor([s.gloss_labels[0] for s in train])
    n_frames = int(rc["task.num_frames"])
    smoothing = float(rc["task.label_smoothing"])
    hist = History()
    for epoch in range(epochs):
        model.train()
        total = 0.0
        for idx in length_bucketed([1] * len(train), bs, rng):
            x = prepare_islr([train[i].pose for i in idx], n_frames, "random", rng)
            loss = islr_loss(model(x), labels[idx], smoothing)
            _step(opt, sched, loss)
            total += float(loss.detach()) * len(idx)
        hist.add(epoch=epoch, loss=total / len(train))
    return model, hist


@torch.no_grad()
def predict_islr(model: ISLRModel, samples: Sequence[SignTextSample], n_frames: int = 32,
                 chunk: int = 128) -> np.ndarray:
    model.eval()
    out = []
    for lo in range(0, len(samples), chunk):
        x = prepare_islr([s.pose for s in samples[lo:lo + chunk]], n_frames, "center")
        out.append(model(x).numpy())
    return np.concatenate(out)


# --------------------------------------------------------------------------- CSLR

def finetune_cslr(encoder: SignPoseEncoder, train: Sequence[SignTextSample], num_glosses: int,
                  rc: RunConfig) -> tuple[CSLRModel, History]:
    set_seed(int(rc["seed"]))
    model = CSLRModel(copy.deepcopy(encoder), num_glosses, int(rc["task.cslr_hidden"]),
                      rc["task.cslr_strides"], int(rc["task.lstm_layers"]))
    opt, sched, bs, epochs = _task_optim(model, model.encoder, rc, len(train))
    rng = np.random.default_rng(int(rc["seed"]) + 1)
    lengths = [s.pose.num_frames for s in train]
    hist = History()
    for epoch in range(epochs):
        model.train()
        total, n = 0.0, 0
        for idx in length_bucketed(lengths, bs, rng):
            x, pad = pose_tensor([train[i].pose for i in idx])
            lp, out_lens = model(x, pad)
            loss = cslr_batch_loss(lp, out_lens, [to_ctc_labels(train[i].gloss_labels) for i in idx],
                                   [train[i].id for i in idx])
            if loss is None:
                continue
            _step(opt, sched, loss)
            total += float(loss.detach()) * len(idx)
            n += len(idx)
        hist.add(epoch=epoch, loss=total / max(n, 1))
    return model, hist


@torch.no_grad()
def predict_cslr(model: CSLRModel, samples: Sequence[SignTextSample], beam: int = 4) -> list[list[int]]:
    model.eval()
    out = []
    for s in samples:
        x, pad = pose_tensor([s.pose])
        lp, lens = model(x, pad)
        out.append(from_ctc_labels(ctc_beam_decode(lp[0, : int(lens[0])], beam)))
    return out


# --------------------------------------------------------------------------- SLT

def slt_vocab(samples: Sequence[SignTextSample]) -> Vocab:
    return build_vocab(samples)


def _slt_targets(samples, vocab: Vocab):
    seqs = [[vocab.bos_id] + vocab.encode_words(s.text) + [vocab.eos_id] for s in samples]
    ids, pad = pad_ids(seqs, vocab.pad_id)
    return ids[:, :-1], ids[:, 1:], pad[:, :-1]


def finetune_slt(encoder: SignPoseEncoder, train: Sequence[SignTextSample], vocab: Vocab,
                 rc: RunConfig) -> tuple[SLTModel, History]:
    set_seed(int(rc["seed"]))
    cfg = encoder.cfg
    model = SLTModel(copy.deepcopy(encoder), vocab, d_model=max(cfg.d1, 32), heads=cfg.heads,
                     blocks=int(rc["task.decoder_blocks"]), dropout=cfg.dropout)
    opt, sched, bs, epochs = _task_optim(model, model.encoder, rc, len(train))
    rng = np.random.default_rng(int(rc["seed"]) + 1)
    lengths = [s.pose.num_frames for s in train]
    hist = History()
    for epoch in range(epochs):
        model.train()
        total = 0.0
        for idx in length_bucketed(lengths, bs, rng):
            sub = [train[i] for i in idx]
            x, pad = pose_tensor([s.pose for s in sub])
            tin, tout, tpad = _slt_targets(sub, vocab)
            loss = slt_loss(model(x, pad, tin, tpad), tout, vocab.pad_id)
            _step(opt, sched, loss)
            total += float(loss.detach()) * len(idx)
        hist.add(epoch=epoch, loss=total / len(train))
    return model, hist


@torch.no_grad()
def predict_slt(model: SLTModel, samples: Sequence[SignTextSample], beam: int = 4,
                max_len: int = 30) -> list[list[str]]:
    out = []
    for s in samples:
        x, pad = pose_tensor([s.pose])
        hyp = slt_generate(model, x, pad, beam, max_len)
        out.append(strip_special(hyp.tokens, model.vocab))
    return out


# --------------------------------------------------------------------------- SL-RT

def _text_batch(samples, vocab):
    return pad_ids([text_token_ids(s.text, s.lang, vocab) for s in samples], vocab.pad_id)


def finetune_slrt(model: SignTextModel, train: Sequence[SignTextSample], rc: RunConfig,
                  ) -> tuple[SignTextModel, History]:
    """Contrastive fine-tuning of a SignTextModel copy on paired samples."""
    set_seed(int(rc["seed"]))
    model = copy.deepcopy(model)
    if rc["task.fresh_projectors"]:
        for proj in (model.sign_proj, model.text_proj):
            for m in proj.modules():
                if isinstance(m, nn.Linear):
                    m.reset_parameters()
    opt, sched, bs, epochs = _task_optim(model, model.encoder, rc, len(train))
    rng = np.random.default_rng(int(rc["seed"]) + 1)
    lengths = [s.pose.num_frames for s in train]
    hist = History()
    for epoch in range(epochs):
        model.train()
        total = 0.0
        for idx in length_bucketed(lengths, bs, rng):
            sub = [train[i] for i in idx]
            x, pad = pose_tensor([s.pose for s in sub])
            ids, tpad = _text_batch(sub, model.vocab)
            f_sign, s_pad = model.sign_embeddings(x, pad)
            f_text, t_pad = model.text_embeddings(ids, tpad)
            loss = stc_loss(model.similarity(f_sign, s_pad, f_text, t_pad), model.temperature())
            _step(opt, sched, loss)
            total += float(loss.detach()) * len(idx)
        hist.add(epoch=epoch, loss=total / len(train))
    return model, hist


@torch.no_grad()
def similarity_matrix(model: SignTextModel, samples: Sequence[SignTextSample]) -> torch.Tensor:
    x, pad = pose_tensor([s.pose for s in samples])
    ids, tpad = _text_batch(samples, model.vocab)
    return corpus_similarity(model, x, pad, ids, tpad)


def evaluate_retrieval(model: SignTextModel, samples: Sequence[SignTextSample]):
    return slrt_rank(similarity_matrix(model, samples))


def reference_tokens(s: SignTextSample) -> list[str]:
    return tokenize(s.text)
