import json

import numpy as np
import pytest

from sentgate import corpus
from sentgate.corpus import (
    BOS,
    EOS,
    PAD,
    UNK,
    DialogueSample,
    TranscriptUtterance,
    Utterance,
    Vocabulary,
    build_vocab,
    encode_batch,
    split_dataset,
    window_split,
)
from sentgate.errors import ContractError, DatasetError


def tutt(n_words, topic="t1", act="Inform", speaker="A"):
    return TranscriptUtterance(
        speaker=speaker, words=tuple(f"w{i}" for i in range(n_words)), dialogue_act=act, topic=topic
    )


def make_sample(sent_words, summary="the summary"):
    utts = tuple(
        Utterance(speaker="A", words=tuple(ws.split()), dialogue_act="Inform")
        for ws in sent_words
    )
    return DialogueSample(utterances=utts, summary=tuple(summary.split()))


# -- windowing ---------------------------------------------------------------


def test_window_split_hand_trace():
    utts = [tutt(4), tutt(5), tutt(3), tutt(6)]
    groups = window_split(utts, window_words=10)
    assert [len(g.utterances) for g in groups] == [3, 1]
    assert sum(len(u.words) for u in groups[0].utterances) == 12


def test_window_split_never_cuts_an_utterance():
    groups = window_split([tutt(80)], window_words=50)
    assert len(groups) == 1
    assert len(groups[0].utterances[0].words) == 80


def test_window_split_concatenates_changed_topics_in_order():
    utts = [tutt(20, topic="t1"), tutt(20, topic="t1"), tutt(20, topic="t2")]
    groups = window_split(utts, window_words=100)
    assert groups[0].summary == ("t1", "t2")


def test_window_split_empty_transcript():
    assert window_split([], window_words=50) == []


def test_window_roundtrip_property_100_random_transcripts():
    rng = np.random.default_rng(31337)
    for _ in range(100):
        n = int(rng.integers(1, 40))
        utts = [
            tutt(int(rng.integers(1, 15)), topic=f"t{rng.integers(1, 4)}")
            for _ in range(n)
        ]
        w = int(rng.integers(1, 60))
        groups = window_split(utts, window_words=w)
        rebuilt = [u.words for g in groups for u in g.utterances]
        assert rebuilt == [u.words for u in utts]
        for g in groups[:-1]:
            assert sum(len(u.words) for u in g.utterances) >= w


# -- vocabulary --------------------------------------------------------------


def test_build_vocab_counts_reserved_ids_and_unk():
    sample = DialogueSample(
        utterances=(Utterance("A", ("a", "b"), "Inform"),), summary=("c",)
    )
    vocab = build_vocab([sample], prepend_speaker=False)
    assert len(vocab) == 4 + 3
    assert vocab.n_content_tokens == 3
    assert [vocab.id_to_token[i] for i in range(4)] == ["<pad>", "<unk>", "<bos>", "<eos>"]
    assert vocab.encode_token("never-seen") == UNK


def test_build_vocab_speaker_tokens_and_labels():
    sample = DialogueSample(
        utterances=(
            Utterance("A", ("hi",), "Inform"),
            Utterance("B", ("ok",), "Assess"),
        ),
        summary=("hello",),
    )
    vocab = build_vocab([sample])
    assert "<spk_a>" in vocab.token_to_id
    assert vocab.id_to_label == ["Assess", "Inform"]
    with pytest.raises(ContractError):
        vocab.encode_label("Nope")


def test_build_vocab_empty_raises():
    with pytest.raises(ContractError):
        build_vocab([])


def test_vocab_save_load_roundtrip(tmp_path):
    sample = make_sample(["a b b", "c"], summary="d a")
    vocab = build_vocab([sample], prepend_speaker=True)
    vocab.save(tmp_path / "vocab.tsv", tmp_path / "labels.tsv")
    back = Vocabulary.load(tmp_path / "vocab.tsv", tmp_path / "labels.tsv")
    assert back.id_to_token == vocab.id_to_token
    assert back.id_to_label == vocab.id_to_label
    assert back.counts == vocab.counts


# -- encoding ----------------------------------------------------------------


def test_encode_single_sentence_mask_all_true():
    sample = make_sample(["a b c"])
    vocab = build_vocab([sample], prepend_speaker=False)
    batch = encode_batch([sample], vocab, prepend_speaker=False)
    assert batch.sent_mask.tolist() == [[1.0]]
    assert batch.word_mask[0, 0].tolist() == [1.0, 1.0, 1.0]


def test_encode_summary_gets_eos_and_padding():
    sample = make_sample(["a b"], summary="look and usability")
    vocab = build_vocab([sample], prepend_speaker=False)
    batch = encode_batch([sample], vocab, prepend_speaker=False, max_summary_len=8)
    ids = [vocab.encode_token(w) for w in ("look", "and", "usability")]
    assert batch.dec_target[0].tolist() == ids + [EOS]
    assert batch.dec_in[0].tolist() == [BOS] + ids
    assert batch.dec_mask[0].tolist() == [1.0, 1.0, 1.0, 1.0]


def test_encode_pads_sentence_dimension_and_masks_da_loss():
    s2 = make_sample(["a b", "c d"])
    s3 = make_sample(["a", "b", "c"])
    vocab = build_vocab([s2, s3], prepend_speaker=False)
    batch = encode_batch([s2, s3], vocab, prepend_speaker=False)
    assert batch.word_ids.shape[1] == 3
    assert batch.sent_mask.tolist() == [[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]]
    assert batch.last_sent.tolist() == [1, 2]
    assert batch.word_ids[0, 2].tolist() == [PAD, PAD]


def test_encode_decode_identity_for_known_tokens():
    sample = make_sample(["alpha beta", "gamma"], summary="delta")
    vocab = build_vocab([sample], prepend_speaker=False)
    batch = encode_batch([sample], vocab, prepend_speaker=False)
    ids = batch.word_ids[0, 0][batch.word_mask[0, 0] == 1.0]
    assert vocab.decode(ids) == ["alpha", "beta"]


def test_encode_truncates_long_sentences_with_warning(caplog):
    sample = make_sample(["a b c d e f"])
    vocab = build_vocab([sample], prepend_speaker=False)
    with caplog.at_level("WARNING"):
        batch = encode_batch([sample], vocab, prepend_speaker=False, max_sentence_len=3)
    assert batch.word_ids.shape[2] == 3
    assert "truncating" in caplog.text


# -- splits ------------------------------------------------------------------


def test_split_dataset_deterministic_and_disjoint():
    samples = [make_sample([f"w{i}"]) for i in range(10)]
    a = split_dataset(samples, (8, 1, 1), seed=13)
    b = split_dataset(samples, (8, 1, 1), seed=13)
    assert a["train"] == b["train"] and a["dev"] == b["dev"] and a["test"] == b["test"]
    ids = [id(s) for part in a.values() for s in part]
    assert len(set(ids)) == 10


def test_split_dataset_oversubscription_raises():
    samples = [make_sample(["x"])] * 5
    with pytest.raises(ContractError):
        split_dataset(samples, (4, 1, 1), seed=0)


# -- file I/O ----------------------------------------------------------------


def test_sample_file_roundtrip(tmp_path):
    samples = [make_sample(["a b", "c"], summary="s t"), make_sample(["d"], summary="u")]
    path = tmp_path / "data.jsonl"
    corpus.write_samples(samples, path)
    back = corpus.read_samples(path)
    assert back == samples


def test_read_samples_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps(corpus.sample_to_record(make_sample(["a"])))
    path.write_text(good + "\n{not json\n", encoding="utf-8")
    with pytest.raises(DatasetError) as err:
        corpus.read_samples(path)
    assert "line 2" in str(err.value)


def test_read_samples_missing_field_reports_location(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"sentences": [{"speaker": "A", "words": ["hi"]}], "summary": "s"}\n')
    with pytest.raises(DatasetError) as err:
        corpus.read_samples(path)
    assert "line 1" in str(err.value) and "dialogue_act" in str(err.value)


def test_read_transcripts_lowercases_and_validates_topic(tmp_path):
    path = tmp_path / "meetings.jsonl"
    rec = {
        "utterances": [
            {"speaker": "A", "words": "Hello THERE", "dialogue_act": "Inform", "topic": "Budget Talk"}
        ]
    }
    path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
    meetings = corpus.read_transcripts(path)
    assert meetings[0][0].words == ("hello", "there")
    assert meetings[0][0].topic == "budget talk"
    bad = {"utterances": [{"speaker": "A", "words": "hi", "dialogue_act": "Inform", "topic": " "}]}
    path.write_text(json.dumps(bad) + "\n", encoding="utf-8")
    with pytest.raises(DatasetError):
        corpus.read_transcripts(path)


def test_stats_report_fields(tmp_path):
    samples = [make_sample(["a b c"], summary="x y"), make_sample(["d e"], summary="z")]
    vocab = build_vocab(samples)
    stats = corpus.dataset_stats({"train": samples, "dev": [], "test": []}, vocab)
    assert stats["min_summary_length"] == 1
    assert stats["max_summary_length"] == 2
    assert stats["train_size"] == 2 and stats["dev_size"] == 0
    corpus.write_stats(stats, tmp_path / "stats.json", tmp_path / "stats.txt")
    assert json.loads((tmp_path / "stats.json").read_text()) == stats
