import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssvc.data import (
    END,
    PAD,
    START,
    UNK,
    FormatError,
    VideoSequence,
    Vocabulary,
    decode_caption,
    encode_caption,
    load_embeddings,
    read_captions,
    read_features,
    synth_generate,
    tokenize,
    write_features,
    write_features_jsonl,
)


def test_tokenize_normalizes():
    assert tokenize("A man is playing Guitar.") == ["a", "man", "is", "playing", "guitar"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_keeps_apostrophe_and_digits():
    assert tokenize("It's 2 dogs!") == ["it's", "2", "dogs"]


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=60))
def test_tokenize_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


def test_vocabulary_reserved_indices():
    vocab = Vocabulary(["cat", "dog"])
    assert vocab.index_of("<pad>") == PAD == 0
    assert vocab.index_of("<start>") == START == 1
    assert vocab.index_of("<end>") == END == 2
    assert vocab.index_of("<unk>") == UNK == 3
    assert len(vocab) == 6


def test_vocabulary_bijection():
    vocab = Vocabulary(sorted(["walks", "cat", "dog", "a"]))
    for idx in range(len(vocab)):
        assert vocab.index_of(vocab.token_of(idx)) == idx


def test_vocabulary_unknown_maps_to_unk():
    vocab = Vocabulary(["cat"])
    assert vocab.index_of("zebra") == UNK


def test_encode_caption_layout():
    vocab = Vocabulary(["a", "man"])
    ids = encode_caption(vocab, ["a", "man"], max_len=6)
    assert ids == [START, vocab.index_of("a"), vocab.index_of("man"), END, PAD, PAD]


def test_encode_decode_round_trip():
    vocab = Vocabulary(["a", "dog", "runs"])
    tokens = ["a", "dog", "runs"]
    assert decode_caption(vocab, encode_caption(vocab, tokens, 8)) == tokens


def test_encode_caption_oov_becomes_unk():
    vocab = Vocabulary(["a"])
    ids = encode_caption(vocab, ["a", "zebra"], max_len=5)
    assert ids[2] == UNK


def test_encode_caption_too_long_rejected():
    vocab = Vocabulary(["a"])
    with pytest.raises(ValueError):
        encode_caption(vocab, ["a"] * 5, max_len=6)


def test_no_pad_between_start_and_end():
    vocab = Vocabulary(["a", "b", "c"])
    for tokens in ([], ["a"], ["a", "b"], ["a", "b", "c"]):
        ids = encode_caption(vocab, tokens, max_len=6)
        end_pos = ids.index(END)
        assert PAD not in ids[:end_pos]
        assert all(i == PAD for i in ids[end_pos + 1:])


def test_load_embeddings_parses_rows(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\nhouse 1.0 2.0\n")
    vocab = Vocabulary(["cat", "dog"])
    table, coverage = load_embeddings(path, vocab, embed_dim=2, seed=0)
    assert np.allclose(table.matrix.data[vocab.index_of("cat")], [0.1, 0.2])
    assert coverage["found"] == 1
    assert coverage["missing_tokens"] == ["dog"]


def test_load_embeddings_missing_word_gets_seeded_row(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\n")
    vocab = Vocabulary(["cat", "dog"])
    t1, _ = load_embeddings(path, vocab, embed_dim=2, seed=7)
    t2, _ = load_embeddings(path, vocab, embed_dim=2, seed=7)
    row = t1.matrix.data[vocab.index_of("dog")]
    assert np.array_equal(row, t2.matrix.data[vocab.index_of("dog")])
    assert np.all(np.abs(row) <= 0.05)


def test_load_embeddings_dim_mismatch_names_counts(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2 0.3\n")
    vocab = Vocabulary(["cat"])
    with pytest.raises(ValueError, match="expected 2.*found 3"):
        load_embeddings(path, vocab, embed_dim=2)


def test_load_embeddings_malformed_line_reports_number(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("dog 1.0 2.0\ncat 0.1 oops\n")
    vocab = Vocabulary(["cat", "dog"])
    with pytest.raises(ValueError, match="line 2"):
        load_embeddings(path, vocab, embed_dim=2)


def test_feature_round_trip_binary(tmp_path):
    rng = np.random.default_rng(0)
    videos = [
        VideoSequence(id="vid0", frames=rng.normal(size=(3, 4)).astype(np.float32)),
        VideoSequence(id="vid1", frames=rng.normal(size=(3, 4)).astype(np.float32)),
    ]
    path = tmp_path / "features.svft"
    write_features(path, videos)
    loaded = read_features(path)
    assert [v.id for v in loaded] == ["vid0", "vid1"]
    for orig, back in zip(videos, loaded):
        assert np.array_equal(orig.frames, back.frames)


def test_feature_file_reader_rejects_every_magic_mutation(tmp_path):
    videos = [VideoSequence(id="v", frames=np.zeros((2, 2), dtype=np.float32))]
    path = tmp_path / "features.svft"
    write_features(path, videos)
    blob = path.read_bytes()
    for i in range(4):
        for bit in range(8):
            mutated = bytearray(blob)
            mutated[i] ^= 1 << bit
            bad = tmp_path / f"bad{i}_{bit}.svft"
            bad.write_bytes(bytes(mutated))
            with pytest.raises(FormatError):
                read_features(bad)


def test_feature_truncation_reports_offset(tmp_path):
    videos = [VideoSequence(id="video0", frames=np.ones((4, 8), dtype=np.float32))]
    path = tmp_path / "features.svft"
    write_features(path, videos)
    blob = path.read_bytes()
    cut = tmp_path / "cut.svft"
    cut.write_bytes(blob[:-10])
    with pytest.raises(FormatError, match="byte"):
        read_features(cut)


def test_feature_nan_rejected(tmp_path):
    frames = np.ones((2, 2), dtype=np.float32)
    videos = [VideoSequence(id="v", frames=frames)]
    path = tmp_path / "features.svft"
    write_features(path, videos)
    blob = bytearray(path.read_bytes())
    # overwrite one float with NaN (payload starts after header + id block)
    import struct

    nan = struct.pack("<f", float("nan"))
    blob[-4:] = nan
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="non-finite"):
        read_features(path)


def test_feature_jsonl_fixture_round_trip(tmp_path):
    videos = [VideoSequence(id="v0", frames=np.array([[1.5, 2.5]], dtype=np.float32))]
    path = tmp_path / "features.jsonl"
    write_features_jsonl(path, videos)
    loaded = read_features(path)
    assert loaded[0].id == "v0"
    assert np.allclose(loaded[0].frames, [[1.5, 2.5]])


def test_video_sequence_rejects_non_finite():
    with pytest.raises(ValueError):
        VideoSequence(id="v", frames=np.array([[np.nan, 1.0]]))


def test_synth_deterministic():
    a_videos, a_caps = synth_generate(seed=3, n_samples=5, n_objects=3, n_actions=3,
                                      frames_per_seq=4, feature_dim=10)
    b_videos, b_caps = synth_generate(seed=3, n_samples=5, n_objects=3, n_actions=3,
                                      frames_per_seq=4, feature_dim=10)
    assert a_caps == b_caps
    for a, b in zip(a_videos, b_videos):
        assert a.id == b.id
        assert np.array_equal(a.frames, b.frames)


def test_synth_vocab_size_formula():
    _, captions = synth_generate(seed=0, n_samples=200, n_objects=4, n_actions=5,
                                 frames_per_seq=3, feature_dim=12)
    vocab = Vocabulary.from_captions(captions)
    assert len(vocab) == 4 + 5 + 3 + 4  # objects + actions + ordinary + reserved


def test_synth_same_object_differs_only_in_action_block():
    n_obj, n_act = 3, 3
    videos, captions = synth_generate(seed=1, n_samples=60, n_objects=n_obj, n_actions=n_act,
                                      frames_per_seq=5, feature_dim=10)
    by_pair = {}
    for v in videos:
        words = captions[v.id][0].split()
        by_pair.setdefault((words[1], words[3]), v)
    pairs = list(by_pair)
    same_obj = [
        (by_pair[p], by_pair[q]) for p in pairs for q in pairs
        if p[0] == q[0] and p[1] != q[1]
    ]
    assert same_obj, "generator never produced same object with different actions"
    noise_bound = 4 * 0.05  # two noise draws per sample, amplitude 0.05 each
    for a, b in same_obj:
        object_block = np.abs(a.frames[:, :n_obj] - b.frames[:, :n_obj])
        assert object_block.max() <= noise_bound
        action_block = np.abs(a.frames[:, n_obj:n_obj + n_act] - b.frames[:, n_obj:n_obj + n_act])
        assert action_block.max() > noise_bound


def test_synth_dim_too_small():
    with pytest.raises(ValueError):
        synth_generate(seed=0, n_samples=1, n_objects=4, n_actions=4,
                       frames_per_seq=3, feature_dim=7)


def test_read_captions_accepts_string_or_list(tmp_path):
    path = tmp_path / "captions.json"
    path.write_text(json.dumps({"v0": "a cat", "v1": ["a dog", "the dog"]}))
    caps = read_captions(path)
    assert caps == {"v0": ["a cat"], "v1": ["a dog", "the dog"]}
