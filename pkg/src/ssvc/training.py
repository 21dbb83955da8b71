"""Seeded training loop shared by the train and ablate commands.

Pairs every video with each of its reference captions, holds out a
fraction of the videos for validation, and walks epochs deterministically:
the pair order for epoch e is drawn from a generator seeded with
(seed, e), so a resumed run shuffles exactly like the original.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from . import model as M
from .data import Vocabulary, encode_caption, tokenize
from .metrics import corpus_bleu
from .optim import Adam


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None
    bleu: dict | None
    seconds: float

    def to_log_line(self):
        row = {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "seconds": round(self.seconds, 3),
        }
        if self.bleu is not None:
            row.update({f"bleu{n}": self.bleu[n] for n in sorted(self.bleu)})
        return json.dumps(row, sort_keys=True)


def split_videos(videos, val_fraction, seed):
    """Deterministic train/validation split over whole videos."""
    order = sorted(range(len(videos)), key=lambda i: videos[i].id)
    rng = np.random.default_rng([seed, 0xC0FFEE])
    rng.shuffle(order)
    n_val = int(round(len(videos) * val_fraction))
    val_idx = set(order[:n_val])
    train = [videos[i] for i in range(len(videos)) if i not in val_idx]
    val = [videos[i] for i in range(len(videos)) if i in val_idx]
    return train, val


def make_pairs(videos, captions_by_video, vocab, max_len):
    pairs = []
    for video in videos:
        for caption in captions_by_video[video.id]:
            ids = encode_caption(vocab, tokenize(caption), max_len)
            pairs.append((video, ids))
    return pairs


def evaluate(params, config, vocab, videos, captions_by_video):
    """Validation loss plus corpus BLEU of greedy captions against references."""
    if not videos:
        return None, None
    losses = []
    candidates = []
    references = []
    for video in videos:
        frames = video.frames.astype(np.float64)
        for caption in captions_by_video[video.id]:
            ids = encode_caption(vocab, tokenize(caption), config.max_caption_len)
            losses.append(float(M.caption_loss(params, config, frames, ids).data))
        tokens = [vocab.token_of(i) for i in M.infer(params, config, frames)]
        candidates.append(tokens)
        references.append([tokenize(c) for c in captions_by_video[video.id]])
    report = corpus_bleu(candidates, references)
    return sum(losses) / len(losses), report.bleu


def exact_match_rate(params, config, vocab, videos, captions_by_video):
    """Fraction of videos whose greedy caption equals a reference exactly."""
    if not videos:
        return 0.0
    hits = 0
    for video in videos:
        tokens = [vocab.token_of(i) for i in M.infer(params, config, video.frames.astype(np.float64))]
        refs = [tokenize(c) for c in captions_by_video[video.id]]
        if tokens in refs:
            hits += 1
    return hits / len(videos)


def run_training(config, params, train_videos, val_videos, captions_by_video, vocab,
                 seed=0, epochs=1, lr=1e-3, start_epoch=1, optimizer=None,
                 on_epoch=None, eval_every=1):
    """Train in place; returns (optimizer, [EpochStats])."""
    if optimizer is None:
        optimizer = Adam(params.named_tensors(), lr=lr)
    pairs = make_pairs(train_videos, captions_by_video, vocab, config.max_caption_len)
    if not pairs:
        raise ValueError("no training pairs: dataset is empty")
    history = []
    for epoch in range(start_epoch, epochs + 1):
        started = time.time()
        order = np.random.default_rng([seed, epoch]).permutation(len(pairs))
        total = 0.0
        for idx in order:
            video, ids = pairs[idx]
            total += M.train_step(params, config, video.frames.astype(np.float64), ids, optimizer)
        train_loss = total / len(pairs)
        val_loss, bleu = (None, None)
        if val_videos and epoch % eval_every == 0:
            val_loss, bleu = evaluate(params, config, vocab, val_videos, captions_by_video)
        stats = EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss,
                           bleu=bleu, seconds=time.time() - started)
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    return optimizer, history


def save_optimizer_state(path, optimizer: Adam, epoch: int):
    arrays = {"t": np.array(optimizer.t), "epoch": np.array(epoch)}
    for name, m in optimizer.m.items():
        arrays[f"m::{name}"] = m
    for name, v in optimizer.v.items():
        arrays[f"v::{name}"] = v
    np.savez(path, **arrays)


def load_optimizer_state(path, params, lr):
    blob = np.load(path)
    optimizer = Adam(params.named_tensors(), lr=lr)
    optimizer.t = int(blob["t"])
    for name in optimizer.params:
        optimizer.m[name] = blob[f"m::{name}"]
        optimizer.v[name] = blob[f"v::{name}"]
    return optimizer, int(blob["epoch"])
