"""Caption evaluation: corpus BLEU and the human-judged SS Score.

Corpus BLEU aggregates clipped n-gram matches over the whole corpus, with
the brevity penalty computed from per-sentence closest reference lengths.
No smoothing: a zero n-gram precision zeroes every BLEU order that
includes it.

The SS Score combines, per annotator and caption: a grammar gate, object
(element) recall/precision averaged over per-object booleans, and action
recall/precision booleans. Empty element lists score 1.0 (an annotator
who marks "no prominent objects" asserts nothing false and misses
nothing); the annotation guide documents this convention.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, asdict

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- corpus BLEU

@dataclass
class BleuReport:
    bleu: dict                      # {1: ..., 2: ..., 3: ..., 4: ...}
    precisions: dict                # modified n-gram precision per order
    brevity_penalty: float
    candidate_length: int
    effective_reference_length: int

    def to_dict(self):
        return {
            **{f"bleu{n}": self.bleu[n] for n in sorted(self.bleu)},
            "precisions": {str(n): self.precisions[n] for n in sorted(self.precisions)},
            "brevity_penalty": self.brevity_penalty,
            "candidate_length": self.candidate_length,
            "effective_reference_length": self.effective_reference_length,
        }


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(cand_len, ref_lens):
    # ties broken toward the shorter reference
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def corpus_bleu(candidates, references, max_n=4) -> BleuReport:
    """Corpus-level BLEU-1..max_n over token sequences.

    candidates: list of token lists; references: one list of token lists
    per candidate, each non-empty.
    """
    if not candidates:
        raise ValueError("empty candidate list")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates but {len(references)} reference lists")
    for i, refs in enumerate(references):
        if not refs:
            raise ValueError(f"candidate {i} has no references")

    clipped = {n: 0 for n in range(1, max_n + 1)}
    total = {n: 0 for n in range(1, max_n + 1)}
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        cand = list(cand)
        cand_len += len(cand)
        ref_len += _closest_ref_length(len(cand), [len(r) for r in refs])
        for n in range(1, max_n + 1):
            counts = _ngram_counts(cand, n)
            if not counts:
                continue
            max_ref = Counter()
            for ref in refs:
                for gram, cnt in _ngram_counts(list(ref), n).items():
                    if cnt > max_ref[gram]:
                        max_ref[gram] = cnt
            clipped[n] += sum(min(cnt, max_ref[gram]) for gram, cnt in counts.items())
            total[n] += sum(counts.values())

    precisions = {n: (clipped[n] / total[n] if total[n] else 0.0) for n in range(1, max_n + 1)}
    if cand_len == 0:
        bp = 0.0
    elif cand_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / cand_len)

    bleu = {}
    for k in range(1, max_n + 1):
        if any(precisions[n] == 0.0 for n in range(1, k + 1)):
            bleu[k] = 0.0
        else:
            bleu[k] = bp * math.exp(sum(math.log(precisions[n]) for n in range(1, k + 1)) / k)
    return BleuReport(
        bleu=bleu,
        precisions=precisions,
        brevity_penalty=bp,
        candidate_length=cand_len,
        effective_reference_length=ref_len,
    )


# ------------------------------------------------------------------- SS Score

@dataclass
class JudgmentRecord:
    """One annotator's boolean judgments for one (video, caption) pair."""

    video_id: str
    caption: str
    annotator_id: str
    s_grammar: bool
    element_recall: list        # one boolean per prominent object in the video
    element_precision: list     # one boolean per object named in the caption
    action_recall: bool
    action_precision: bool
    timestamp: str | None = None
    element_recall_labels: list = field(default_factory=list)     # audit only
    element_precision_labels: list = field(default_factory=list)  # audit only

    def __post_init__(self):
        for name in ("element_recall", "element_precision"):
            values = getattr(self, name)
            if not all(isinstance(v, bool) for v in values):
                raise ValueError(f"{name} must contain only booleans")
        for name in ("s_grammar", "action_recall", "action_precision"):
            if not isinstance(getattr(self, name), bool):
                raise ValueError(f"{name} must be a boolean")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown judgment field(s): {sorted(unknown)}")
        return cls(**d)


def _mean_or_one(bools):
    # 0/0 convention: an empty list asserts nothing false and misses nothing
    if not bools:
        return 1.0
    return sum(1.0 for b in bools if b) / len(bools)


def _single_annotator_score(rec: JudgmentRecord) -> float:
    if not rec.s_grammar:
        return 0.0
    s_element = (_mean_or_one(rec.element_recall) + _mean_or_one(rec.element_precision)) / 2.0
    s_action = (float(rec.action_recall) + float(rec.action_precision)) / 2.0
    return (s_element + s_action) / 2.0


def ss_caption_score(records) -> float:
    """Score one (video, caption) pair: per-annotator scores averaged."""
    records = list(records)
    if not records:
        raise ValueError("no judgment records for this caption")
    keys = {(r.video_id, r.caption) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records span multiple (video, caption) pairs: {sorted(keys)}")
    if len(records) < 2:
        log.warning(
            "caption for video %r scored by only %d annotator(s); the protocol recommends >= 2",
            records[0].video_id, len(records),
        )
    # fsum keeps the mean identical under any annotator ordering
    return math.fsum(_single_annotator_score(r) for r in records) / len(records)


@dataclass
class SsReport:
    ss_score: float
    N: int
    per_caption: list  # {video_id, caption, score, annotators}

    def to_dict(self):
        return asdict(self)


def ss_aggregate(records) -> SsReport:
    """Mean per-caption score over every judged (video, caption) pair."""
    records = list(records)
    if not records:
        raise ValueError("no judgment records to aggregate")
    groups = {}
    for rec in records:
        groups.setdefault((rec.video_id, rec.caption), []).append(rec)
    per_caption = []
    for (vid, caption), recs in sorted(groups.items()):
        per_caption.append({
            "video_id": vid,
            "caption": caption,
            "score": ss_caption_score(recs),
            "annotators": sorted(r.annotator_id for r in recs),
        })
    mean = math.fsum(c["score"] for c in per_caption) / len(per_caption)
    return SsReport(ss_score=mean, N=len(per_caption), per_caption=per_caption)


# ------------------------------------------------------------- JSONL storage

def append_judgment(path, record: JudgmentRecord):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        fh.flush()


def read_judgments(path):
    """Load a JSONL judgment store.

    A crash can leave one truncated trailing line; that line is skipped
    with a warning. Corruption anywhere else raises.
    """
    records = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except FileNotFoundError:
        return records
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(JudgmentRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            if lineno == len(lines):
                log.warning("skipping truncated trailing line %d of %s", lineno, path)
                continue
            raise ValueError(f"{path}: corrupt judgment on line {lineno} ({exc})") from None
    return records
