"""Command-line entry point for every workflow: dataset synthesis,
training, greedy inference, BLEU / SS-Score evaluation, the ablation
sweep, gradient checking, and the annotation service."""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import socket
import time
from pathlib import Path

import click
import numpy as np

from . import model as M
from .checkpoint import checkpoint_load, checkpoint_save
from .data import (
    FormatError,
    Vocabulary,
    load_embeddings,
    read_captions,
    read_features,
    synth_generate,
    tokenize,
    write_captions,
    write_features,
)
from .metrics import corpus_bleu, read_judgments, ss_aggregate
from .training import (
    evaluate,
    load_optimizer_state,
    run_training,
    save_optimizer_state,
    split_videos,
)

DEFAULT_TRAIN = {"seed": 0, "epochs": 40, "lr": 1e-3, "val_fraction": 0.2}


def friendly_errors(fn):
    """Contract violations exit nonzero with a one-line diagnostic."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, FormatError, OSError, KeyError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group()
def main():
    """Video captioning: train, infer, evaluate, annotate."""


# ------------------------------------------------------------------ gen-synth

@main.command("gen-synth")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-samples", type=int, default=80, show_default=True)
@click.option("--objects", "n_objects", type=int, default=4, show_default=True)
@click.option("--actions", "n_actions", type=int, default=4, show_default=True)
@click.option("--frames", "frames_per_seq", type=int, default=6, show_default=True)
@click.option("--dim", "feature_dim", type=int, default=24, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--force", is_flag=True, help="overwrite existing dataset files")
@friendly_errors
def gen_synth(seed, n_samples, n_objects, n_actions, frames_per_seq, feature_dim, out_dir, force):
    """Write a deterministic synthetic dataset (SVFT features + captions JSON)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    features_path = out_dir / "features.svft"
    captions_path = out_dir / "captions.json"
    for path in (features_path, captions_path):
        if path.exists() and not force:
            raise click.ClickException(f"{path} exists; pass --force to overwrite")
    videos, captions = synth_generate(seed, n_samples, n_objects, n_actions,
                                      frames_per_seq, feature_dim)
    write_features(features_path, videos)
    write_captions(captions_path, captions)
    vocab = Vocabulary.from_captions(captions)
    click.echo(f"wrote {len(videos)} videos of {frames_per_seq}x{feature_dim} features "
               f"to {features_path}")
    click.echo(f"wrote captions to {captions_path}; vocabulary size {len(vocab)}")


# ---------------------------------------------------------------------- train

def _load_run_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    model_cfg = raw.get("model", {})
    train_cfg = {**DEFAULT_TRAIN, **raw.get("train", {})}
    embeddings = raw.get("embeddings") or {}
    return model_cfg, train_cfg, embeddings


def _prepare(features, captions, model_cfg):
    videos = read_features(features)
    captions_by_video = read_captions(captions)
    missing = [v.id for v in videos if v.id not in captions_by_video]
    if missing:
        raise ValueError(f"videos without captions: {missing[:5]}")
    vocab = Vocabulary.from_captions(captions_by_video)
    config = M.SsvcConfig(**{**model_cfg, "vocab_size": len(vocab)})
    for video in videos:
        if video.frames.shape != (config.frames_per_seq, config.feature_dim):
            raise ValueError(
                f"video {video.id!r} has frames {video.frames.shape}, config expects "
                f"({config.frames_per_seq}, {config.feature_dim})"
            )
    return videos, captions_by_video, vocab, config


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--features", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--captions", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--log", "log_path", type=click.Path(path_type=Path), default=None,
              help="metrics JSONL (defaults to <out>.metrics.jsonl)")
@click.option("--epochs", type=int, default=None, help="override the config epoch count")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--resume", is_flag=True, help="continue from <out>.last and its optimizer state")
@friendly_errors
def train(config_path, features, captions, out_path, log_path, epochs, seed, resume):
    """Train a model; logs epoch metrics as JSONL and saves the best checkpoint."""
    model_cfg, train_cfg, embeddings_cfg = _load_run_config(config_path)
    if epochs is not None:
        train_cfg["epochs"] = epochs
    if seed is not None:
        train_cfg["seed"] = seed
    videos, captions_by_video, vocab, config = _prepare(features, captions, model_cfg)
    train_videos, val_videos = split_videos(videos, train_cfg["val_fraction"], train_cfg["seed"])

    last_path = Path(str(out_path) + ".last")
    optim_path = Path(str(out_path) + ".optim.npz")
    start_epoch = 1
    optimizer = None
    if resume:
        _, params, stored_vocab = checkpoint_load(last_path, expected_config=config)
        if stored_vocab != vocab.tokens():
            raise ValueError("resume vocabulary does not match the captions file")
        optimizer, done_epoch = load_optimizer_state(optim_path, params, train_cfg["lr"])
        start_epoch = done_epoch + 1
    else:
        embedding_matrix = None
        if embeddings_cfg.get("path"):
            table, coverage = load_embeddings(
                embeddings_cfg["path"], vocab, config.embed_dim,
                seed=train_cfg["seed"], trainable=embeddings_cfg.get("trainable", True),
            )
            embedding_matrix = table.matrix.data
            click.echo(f"embeddings: {coverage['found']}/{coverage['vocabulary_words']} words covered")
        params = M.SsvcParams(config, rng=np.random.default_rng(train_cfg["seed"]),
                              embedding_matrix=embedding_matrix)

    log_path = log_path or Path(str(out_path) + ".metrics.jsonl")
    best = {"loss": float("inf")}

    def on_epoch(stats):
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(stats.to_log_line() + "\n")
        click.echo(stats.to_log_line())
        selector = stats.val_loss if stats.val_loss is not None else stats.train_loss
        if selector < best["loss"]:
            best["loss"] = selector
            checkpoint_save(out_path, config, params, vocab_tokens=vocab.tokens())

    optimizer, history = run_training(
        config, params, train_videos, val_videos, captions_by_video, vocab,
        seed=train_cfg["seed"], epochs=train_cfg["epochs"], lr=train_cfg["lr"],
        start_epoch=start_epoch, optimizer=optimizer, on_epoch=on_epoch,
    )
    checkpoint_save(last_path, config, params, vocab_tokens=vocab.tokens())
    save_optimizer_state(optim_path, optimizer, epoch=train_cfg["epochs"])
    if not history:
        raise click.ClickException(f"nothing to do: start epoch {start_epoch} is past "
                                   f"--epochs {train_cfg['epochs']}")
    click.echo(f"best checkpoint: {out_path} (selector loss {best['loss']:.4f})")


# ---------------------------------------------------------------------- infer

@main.command("infer")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--features", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@friendly_errors
def infer_cmd(checkpoint_path, features, out_path):
    """Greedy captions for every video; JSON {video_id: caption}."""
    config, params, vocab_tokens = checkpoint_load(checkpoint_path)
    if vocab_tokens is None:
        raise ValueError("checkpoint carries no vocabulary; cannot map tokens to words")
    vocab = Vocabulary(vocab_tokens)
    videos = read_features(features)
    captions = {}
    for video in videos:
        if video.frames.shape != (config.frames_per_seq, config.feature_dim):
            raise ValueError(
                f"video {video.id!r} has frames {video.frames.shape}, checkpoint expects "
                f"({config.frames_per_seq}, {config.feature_dim})"
            )
        ids = M.infer(params, config, video.frames.astype(np.float64))
        captions[video.id] = " ".join(vocab.token_of(i) for i in ids)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(captions, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {len(captions)} captions to {out_path}")


# ------------------------------------------------------------------ eval-bleu

@main.command("eval-bleu")
@click.option("--candidates", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSON {video_id: caption}")
@click.option("--references", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSON {video_id: [caption, ...]}")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@friendly_errors
def eval_bleu(candidates, references, out_path):
    """Corpus BLEU-1..4 of candidate captions against references."""
    with open(candidates, "r", encoding="utf-8") as fh:
        cands = json.load(fh)
    refs = read_captions(references)
    missing = sorted(set(cands) - set(refs))
    if missing:
        raise ValueError(f"candidates without references: {missing}")
    ids = sorted(cands)
    if not ids:
        raise ValueError("empty candidate file")
    report = corpus_bleu(
        [tokenize(cands[i]) for i in ids],
        [[tokenize(r) for r in refs[i]] for i in ids],
    )
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
    click.echo(payload)


# ---------------------------------------------------------------------- score

@main.command("score")
@click.option("--store", "store_path", type=click.Path(exists=True, path_type=Path), required=True,
              help="judgments JSONL file")
@friendly_errors
def score(store_path):
    """Aggregate SS Score over a JSONL judgment store."""
    records = read_judgments(store_path)
    if not records:
        raise click.ClickException(f"no judgments in {store_path}")
    click.echo(json.dumps(ss_aggregate(records).to_dict(), indent=2, sort_keys=True))


# --------------------------------------------------------------------- ablate

def _config_hash(config):
    canonical = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()[:12]


@main.command("ablate")
@click.option("--features", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--captions", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="base run config; the sweep overrides enc_layers/shp_units")
@click.option("--attention-layers", default="1,2,3", show_default=True,
              help="comma-separated stacked-attention depths")
@click.option("--shp-units", default="0,8", show_default=True,
              help="comma-separated spatial-hard-pull widths")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@friendly_errors
def ablate(features, captions, config_path, attention_layers, shp_units, epochs, seed, out_dir):
    """Train every (attention depth x SHP width) variant; emit CSV + JSON."""
    if config_path is not None:
        model_cfg, train_cfg, _ = _load_run_config(config_path)
    else:
        model_cfg, train_cfg = {}, dict(DEFAULT_TRAIN)
    if epochs is not None:
        train_cfg["epochs"] = epochs
    if seed is not None:
        train_cfg["seed"] = seed
    depths = [int(x) for x in attention_layers.split(",") if x.strip()]
    widths = [int(x) for x in shp_units.split(",") if x.strip()]

    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for n_layers in depths:
        for width in widths:
            variant_cfg = {**model_cfg, "enc_layers": n_layers, "shp_units": width}
            videos, captions_by_video, vocab, config = _prepare(features, captions, variant_cfg)
            train_videos, val_videos = split_videos(videos, train_cfg["val_fraction"],
                                                    train_cfg["seed"])
            params = M.SsvcParams(config, rng=np.random.default_rng(train_cfg["seed"]))
            started = time.time()
            _, history = run_training(
                config, params, train_videos, val_videos, captions_by_video, vocab,
                seed=train_cfg["seed"], epochs=train_cfg["epochs"], lr=train_cfg["lr"],
                eval_every=max(1, train_cfg["epochs"]),  # evaluate once, at the end
            )
            elapsed = time.time() - started
            val_loss, bleu = history[-1].val_loss, history[-1].bleu
            if bleu is None:
                val_loss, bleu = evaluate(params, config, vocab, val_videos, captions_by_video)
            row = {
                "config_hash": _config_hash(config),
                "attention_layers": n_layers,
                "shp_units": width,
                "final_train_loss": history[-1].train_loss,
                "val_loss": val_loss,
                "bleu1": bleu[1] if bleu else None,
                "bleu2": bleu[2] if bleu else None,
                "bleu3": bleu[3] if bleu else None,
                "bleu4": bleu[4] if bleu else None,
                "wall_time_s": round(elapsed, 3),
            }
            rows.append(row)
            click.echo(json.dumps(row, sort_keys=True))

    json_path = out_dir / "results.json"
    csv_path = out_dir / "results.csv"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} variants to {csv_path} and {json_path}")


# ------------------------------------------------------------------ gradcheck

@main.command("gradcheck")
@click.option("--seed", type=int, default=0, show_default=True)
@friendly_errors
def gradcheck_cmd(seed):
    """Finite-difference verification of all primitives and a mini end-to-end model."""
    from .gradcheck import run_full_check

    report = run_full_check(seed)
    click.echo(f"{'op':24s} {'max_rel_err':>12s}  pass")
    for op, err in sorted(report["primitives"].items()):
        click.echo(f"{op:24s} {err:12.3e}  {'yes' if err < 1e-4 else 'NO'}")
    e2e = report["end_to_end_max"]
    click.echo(f"{'end-to-end (mini model)':24s} {e2e:12.3e}  {'yes' if e2e < 1e-3 else 'NO'}")
    click.echo(f"elapsed: {report['elapsed_seconds']:.1f}s")
    if not (report["primitives_pass"] and report["end_to_end_pass"]):
        raise click.ClickException("gradient check failed")
    click.echo("all gradient checks passed")


# ---------------------------------------------------------------------- serve

@main.command("serve")
@click.option("--store-dir", type=click.Path(path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--required-annotators", type=int, default=2, show_default=True)
@click.option("--captions", type=click.Path(exists=True, path_type=Path), default=None,
              help="generated captions JSON to import as tasks")
@click.option("--manifest", type=click.Path(exists=True, path_type=Path), default=None,
              help="JSON {video_id: video_url}")
@click.option("--references", type=click.Path(exists=True, path_type=Path), default=None,
              help="optionally expose reference captions to annotators")
@friendly_errors
def serve(store_dir, host, port, required_annotators, captions, manifest, references):
    """Run the annotation service (imports tasks first when captions+manifest given)."""
    from .service import TaskStore, import_tasks, run_service

    store = TaskStore(store_dir, required_annotators=required_annotators)
    if captions or manifest:
        if not (captions and manifest):
            raise click.ClickException("--captions and --manifest must be given together")
        count = import_tasks(captions, manifest, store, references_path=references)
        click.echo(f"imported {count} tasks")
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()
    run_service(store_dir, host=host, port=port, required_annotators=required_annotators)


if __name__ == "__main__":
    main()
