"""Feature ingestion, caption tokenization and vocabulary, pretrained
embedding loading, and the deterministic synthetic dataset generator.

The model consumes precomputed per-frame feature vectors; no CNN runs
here. Feature files travel either in the binary "SVFT" container or, for
small fixtures, as JSON lines of {"id": ..., "frames": [[...], ...]}.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass

import numpy as np

PAD, START, END, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<start>", "<end>", "<unk>")

SVFT_MAGIC = b"SVFT"
SVFT_VERSION = 1

_TOKEN_CLEANER = re.compile(r"[^a-z0-9'\s]")

OBJECT_WORDS = ["cat", "dog", "car", "bird", "boat", "horse", "train", "monkey",
                "ball", "plane", "baby", "panda"]
ACTION_WORDS = ["running", "jumping", "spinning", "rolling", "flying", "swimming",
                "dancing", "climbing", "falling", "turning", "eating", "sliding"]


class FormatError(ValueError):
    """Raised when a feature or checkpoint container violates its format."""


def tokenize(text: str):
    """Lowercase, drop everything outside [a-z0-9'], split on whitespace."""
    return _TOKEN_CLEANER.sub("", text.lower()).split()


class Vocabulary:
    """token <-> index maps with fixed reserved markers pad/start/end/unk."""

    def __init__(self, tokens=()):
        ordered = []
        seen = set(RESERVED_TOKENS)
        for tok in tokens:
            if tok not in seen:
                seen.add(tok)
                ordered.append(tok)
        self._index_to_token = list(RESERVED_TOKENS) + ordered
        self._token_to_index = {t: i for i, t in enumerate(self._index_to_token)}

    @classmethod
    def from_captions(cls, captions_by_video):
        """Build from {video_id: [caption strings]} with a sorted, stable token order."""
        words = set()
        for refs in captions_by_video.values():
            for caption in refs:
                words.update(tokenize(caption))
        return cls(sorted(words))

    def __len__(self):
        return len(self._index_to_token)

    def __contains__(self, token):
        return token in self._token_to_index

    def index_of(self, token):
        return self._token_to_index.get(token, UNK)

    def token_of(self, index):
        if not 0 <= index < len(self._index_to_token):
            raise IndexError(f"index {index} out of vocabulary range {len(self._index_to_token)}")
        return self._index_to_token[index]

    def tokens(self):
        """Non-reserved tokens in index order (for serialization)."""
        return list(self._index_to_token[len(RESERVED_TOKENS):])


def encode_caption(vocab: Vocabulary, tokens, max_len: int):
    """[start] + token indices (+unk for OOV) + [end], padded to max_len."""
    tokens = list(tokens)
    if len(tokens) > max_len - 2:
        raise ValueError(
            f"caption of {len(tokens)} tokens does not fit in max_len {max_len} with markers"
        )
    ids = [START] + [vocab.index_of(t) for t in tokens] + [END]
    ids.extend([PAD] * (max_len - len(ids)))
    return ids


def decode_caption(vocab: Vocabulary, ids):
    """Indices back to tokens, with pad/start/end/unk markers stripped."""
    return [vocab.token_of(i) for i in ids if i not in (PAD, START, END, UNK)]


def load_embeddings(path, vocab: Vocabulary, embed_dim: int, seed=0, trainable=True):
    """Read a word-per-line "word v1 v2 ..." text file into an EmbeddingTable.

    Vocabulary words found in the file get their file vectors; missing
    words and the reserved markers get seeded uniform [-0.05, 0.05] rows.
    Returns (table, coverage) where coverage reports found/missing words.
    """
    from .layers import EmbeddingTable

    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.05, 0.05, size=(len(vocab), embed_dim))
    wanted = {tok: vocab.index_of(tok) for tok in vocab.tokens()}
    found = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts[0] == "":
                continue
            word = parts[0]
            if word not in wanted:
                continue
            values = parts[1:]
            if len(values) != embed_dim:
                raise ValueError(
                    f"line {lineno}: expected {embed_dim} values for {word!r}, found {len(values)}"
                )
            try:
                row = np.array([float(v) for v in values])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-numeric embedding value ({exc})") from None
            matrix[wanted[word]] = row
            found.add(word)
    missing = sorted(set(wanted) - found)
    coverage = {
        "vocabulary_words": len(wanted),
        "found": len(found),
        "missing": len(missing),
        "missing_tokens": missing,
    }
    table = EmbeddingTable(len(vocab), embed_dim, matrix=matrix, trainable=trainable)
    return table, coverage


@dataclass
class VideoSequence:
    id: str
    frames: np.ndarray  # (T, feature_dim) float32

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise ValueError(f"non-finite value in frames of video {self.id!r}")


def write_features(path, videos):
    """Binary SVFT container: magic, version, count, then per-video blocks."""
    with open(path, "wb") as fh:
        fh.write(SVFT_MAGIC)
        fh.write(struct.pack("<I", SVFT_VERSION))
        fh.write(struct.pack("<I", len(videos)))
        for video in videos:
            vid = video.id.encode("utf-8")
            t_len, dim = video.frames.shape
            fh.write(struct.pack("<I", len(vid)))
            fh.write(vid)
            fh.write(struct.pack("<II", t_len, dim))
            fh.write(video.frames.astype("<f4").tobytes())


def write_features_jsonl(path, videos):
    """JSON-lines alternative for small fixtures."""
    with open(path, "w", encoding="utf-8") as fh:
        for video in videos:
            fh.write(json.dumps({"id": video.id, "frames": video.frames.tolist()}) + "\n")


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.blob):
            raise FormatError(f"truncated file: needed {n} bytes for {what} at byte {self.pos}")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def read_features(path):
    """Read an SVFT binary file, or the JSONL fixture format.

    JSONL is recognized by its leading '{'; anything else must carry the
    SVFT magic, so a corrupted magic is always rejected.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:1] == b"{":
        return _read_features_jsonl(path, blob)
    return _read_features_binary(blob)


def _read_features_binary(blob):
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != SVFT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SVFT_MAGIC!r}")
    version = r.u32("version")
    if version != SVFT_VERSION:
        raise FormatError(f"unsupported feature format version {version}")
    count = r.u32("video count")
    videos = []
    for _ in range(count):
        id_len = r.u32("id length")
        vid = r.take(id_len, "video id").decode("utf-8")
        t_len = r.u32("frame count")
        dim = r.u32("feature dim")
        raw = r.take(t_len * dim * 4, f"frames of {vid!r}")
        frames = np.frombuffer(raw, dtype="<f4").reshape(t_len, dim)
        if not np.isfinite(frames).all():
            raise FormatError(f"non-finite value in frames of video {vid!r}")
        videos.append(VideoSequence(id=vid, frames=frames.copy()))
    if r.pos != len(blob):
        raise FormatError(f"trailing garbage after byte {r.pos}")
    return videos


def _read_features_jsonl(path, blob):
    videos = []
    for lineno, line in enumerate(blob.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {lineno} is not valid JSON ({exc})") from None
        if "id" not in rec or "frames" not in rec:
            raise FormatError(f"{path}: line {lineno} lacks id/frames")
        frames = np.asarray(rec["frames"], dtype=np.float64)
        if not np.isfinite(frames).all():
            raise FormatError(f"non-finite value in frames of video {rec['id']!r}")
        videos.append(VideoSequence(id=rec["id"], frames=frames))
    return videos


def read_captions(path):
    """Captions file: JSON {video_id: [caption strings]} (a bare string is accepted)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    captions = {}
    for vid, refs in raw.items():
        if isinstance(refs, str):
            refs = [refs]
        if not refs:
            raise ValueError(f"video {vid!r} has no reference captions")
        captions[vid] = [str(r) for r in refs]
    return captions


def write_captions(path, captions_by_video):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(captions_by_video, fh, indent=2, sort_keys=True)
        fh.write("\n")


def synth_generate(seed, n_samples, n_objects, n_actions, frames_per_seq, feature_dim):
    """Deterministic synthetic (video, caption) pairs whose captions are
    perfectly predictable from the features.

    Each sample picks an object o and an action a. All frames carry a
    constant block signature on dimension o; dimension n_objects + a
    carries a temporal ramp whose slope is distinct per action; everything
    is dusted with seeded noise of amplitude 0.05. The caption is
    "a <object> is <action> now".
    """
    if feature_dim < n_objects + n_actions:
        raise ValueError(
            f"feature_dim {feature_dim} too small for {n_objects} objects + {n_actions} actions"
        )
    if n_objects > len(OBJECT_WORDS) or n_actions > len(ACTION_WORDS):
        raise ValueError(
            f"at most {len(OBJECT_WORDS)} objects and {len(ACTION_WORDS)} actions are nameable"
        )
    rng = np.random.default_rng(seed)
    videos = []
    captions = {}
    ramp = (np.arange(frames_per_seq) + 1.0) / frames_per_seq
    for idx in range(n_samples):
        o = int(rng.integers(n_objects))
        a = int(rng.integers(n_actions))
        frames = rng.uniform(-0.05, 0.05, size=(frames_per_seq, feature_dim))
        frames[:, o] += 1.0
        frames[:, n_objects + a] += ramp * (a + 1.0) / n_actions
        vid = f"synth{idx:04d}"
        videos.append(VideoSequence(id=vid, frames=frames))
        captions[vid] = [f"a {OBJECT_WORDS[o]} is {ACTION_WORDS[a]} now"]
    return videos, captions
