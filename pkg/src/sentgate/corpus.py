"""Dataset model, transcript windowing, vocabulary, and batch encoding.

Dataset files are UTF-8 JSON lines, one dialogue per line:

    {"sentences": [{"speaker": "A", "words": [...], "dialogue_act": "Inform"}, ...],
     "summary": "look and usability"}

Transcript files (input to preprocessing) are JSON lines, one meeting
per line, each utterance carrying a ``topic`` annotation:

    {"utterances": [{"speaker": "A", "words": [...],
                     "dialogue_act": "Inform", "topic": "project kickoff"}, ...]}

Text is treated as pre-tokenized: ``words`` may be a token list or a
whitespace-separated string; everything is lowercased on load.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DatasetError

log = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")

DEFAULT_MAX_SENTENCE_LEN = 60
DEFAULT_MAX_SUMMARY_LEN = 26


@dataclass(frozen=True)
class Utterance:
    speaker: str
    words: tuple
    dialogue_act: str

    def __post_init__(self):
        if len(self.words) == 0:
            raise ContractError("utterance must contain at least one word")


@dataclass(frozen=True)
class TranscriptUtterance(Utterance):
    topic: str = ""

    def __post_init__(self):
        super().__post_init__()
        if not self.topic.strip():
            raise ContractError("transcript utterance is missing a topic annotation")


@dataclass(frozen=True)
class DialogueSample:
    utterances: tuple
    summary: tuple  # summary tokens; empty only for prediction-only inputs

    def __post_init__(self):
        if len(self.utterances) == 0:
            raise ContractError("dialogue must contain at least one utterance")


def speaker_token(speaker):
    return f"<spk_{speaker.lower()}>"


def effective_words(utt, prepend_speaker=True):
    """Token sequence fed to the model for one utterance."""
    if prepend_speaker:
        return (speaker_token(utt.speaker),) + tuple(utt.words)
    return tuple(utt.words)


class Vocabulary:
    """Token and dialogue-act label maps with fixed reserved ids 0-3."""

    def __init__(self, tokens, counts, labels, label_counts=None):
        self.id_to_token = list(RESERVED_TOKENS) + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ContractError("duplicate tokens in vocabulary")
        self.counts = dict(counts)
        self.id_to_label = list(labels)
        self.label_to_id = {l: i for i, l in enumerate(self.id_to_label)}
        self.label_counts = dict(label_counts or {})

    def __len__(self):
        return len(self.id_to_token)

    @property
    def n_content_tokens(self):
        return len(self.id_to_token) - len(RESERVED_TOKENS)

    @property
    def n_labels(self):
        return len(self.id_to_label)

    def encode_token(self, token):
        return self.token_to_id.get(token, UNK)

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]

    def encode_label(self, label):
        if label not in self.label_to_id:
            raise ContractError(f"unknown dialogue act label: {label!r}")
        return self.label_to_id[label]

    def save(self, vocab_path, labels_path):
        with open(vocab_path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\t{self.counts.get(tok, 0)}\n")
        with open(labels_path, "w", encoding="utf-8") as fh:
            for i, lab in enumerate(self.id_to_label):
                fh.write(f"{lab}\t{i}\t{self.label_counts.get(lab, 0)}\n")

    @classmethod
    def load(cls, vocab_path, labels_path):
        tokens, counts = [], {}
        for line in open(vocab_path, encoding="utf-8"):
            tok, idx, count = line.rstrip("\n").split("\t")
            if int(idx) >= len(RESERVED_TOKENS):
                tokens.append(tok)
                counts[tok] = int(count)
        labels, label_counts = [], {}
        for line in open(labels_path, encoding="utf-8"):
            lab, _, count = line.rstrip("\n").split("\t")
            labels.append(lab)
            label_counts[lab] = int(count)
        return cls(tokens, counts, labels, label_counts)


def build_vocab(samples, prepend_speaker=True):
    """Vocabulary over every token in training utterances and summaries.

    No minimum-frequency cut. Tokens are ordered by descending count and
    then lexicographically, which makes builds deterministic.
    """
    if not samples:
        raise ContractError("cannot build a vocabulary from an empty training set")
    counts, label_counts = {}, {}
    for sample in samples:
        for utt in sample.utterances:
            for w in effective_words(utt, prepend_speaker):
                counts[w] = counts.get(w, 0) + 1
            label_counts[utt.dialogue_act] = label_counts.get(utt.dialogue_act, 0) + 1
        for w in sample.summary:
            counts[w] = counts.get(w, 0) + 1
    tokens = sorted(counts, key=lambda t: (-counts[t], t))
    labels = sorted(label_counts)
    return Vocabulary(tokens, counts, labels, label_counts)


def window_split(utterances, window_words=50):
    """Split an annotated transcript into dialogue samples.

    Whole utterances are appended until the running word count reaches
    ``window_words``, so no utterance is ever cut; the final window may
    fall short. A window's summary is the concatenation of its topic
    descriptions in appearing order with adjacent duplicates merged.
    """
    if window_words < 1:
        raise ContractError(f"window_words must be >= 1, got {window_words}")
    samples = []
    group, words = [], 0
    for utt in utterances:
        group.append(utt)
        words += len(utt.words)
        if words >= window_words:
            samples.append(_finish_window(group))
            group, words = [], 0
    if group:
        samples.append(_finish_window(group))
    return samples


def _finish_window(group):
    topics = []
    for utt in group:
        if not topics or utt.topic != topics[-1]:
            topics.append(utt.topic)
    summary = tuple(" ".join(topics).split())
    plain = tuple(Utterance(u.speaker, u.words, u.dialogue_act) for u in group)
    return DialogueSample(utterances=plain, summary=summary)


def split_dataset(samples, sizes, seed=0):
    """Deterministic disjoint train/dev/test partition with given counts."""
    n_train, n_dev, n_test = sizes
    if n_train + n_dev + n_test > len(samples):
        raise ContractError(
            f"requested split sizes {sizes} exceed corpus size {len(samples)}"
        )
    order = np.random.default_rng(seed).permutation(len(samples))
    picked = [samples[i] for i in order]
    return {
        "train": picked[:n_train],
        "dev": picked[n_train : n_train + n_dev],
        "test": picked[n_train + n_dev : n_train + n_dev + n_test],
    }


@dataclass
class EncodedBatch:
    """Padded id arrays plus masks; masks are 1.0 on real positions."""

    word_ids: np.ndarray  # (B, K, T) int
    word_mask: np.ndarray  # (B, K, T) float
    sent_mask: np.ndarray  # (B, K) float
    last_sent: np.ndarray  # (B,) index of each sample's final sentence
    da_ids: np.ndarray  # (B, K) int
    dec_in: np.ndarray = None  # (B, S) int, BOS-prefixed
    dec_target: np.ndarray = None  # (B, S) int, EOS-terminated
    dec_mask: np.ndarray = None  # (B, S) float

    @property
    def batch_size(self):
        return self.word_ids.shape[0]


def encode_batch(
    samples,
    vocab,
    max_sentence_len=DEFAULT_MAX_SENTENCE_LEN,
    max_summary_len=DEFAULT_MAX_SUMMARY_LEN,
    prepend_speaker=True,
    with_summary=True,
):
    """Encode samples into padded id tensors and masks.

    Sentences longer than ``max_sentence_len`` are truncated with a
    logged warning. Summaries are EOS-terminated; ``max_summary_len``
    should be at least the longest training summary plus one.
    """
    if not samples:
        raise ContractError("cannot encode an empty batch")
    sents = [
        [effective_words(u, prepend_speaker) for u in s.utterances] for s in samples
    ]
    truncated = sum(1 for ws in sents for w in ws if len(w) > max_sentence_len)
    if truncated:
        log.warning("truncating %d sentences longer than %d tokens", truncated, max_sentence_len)
    sents = [[w[:max_sentence_len] for w in ws] for ws in sents]

    B = len(samples)
    K = max(len(ws) for ws in sents)
    T = max(len(w) for ws in sents for w in ws)
    word_ids = np.full((B, K, T), PAD, dtype=np.int64)
    word_mask = np.zeros((B, K, T))
    sent_mask = np.zeros((B, K))
    da_ids = np.full((B, K), 0, dtype=np.int64)
    for b, sample in enumerate(samples):
        for k, words in enumerate(sents[b]):
            for t, w in enumerate(words):
                word_ids[b, k, t] = vocab.encode_token(w)
            word_mask[b, k, : len(words)] = 1.0
            sent_mask[b, k] = 1.0
            da_ids[b, k] = vocab.encode_label(sample.utterances[k].dialogue_act)
    last_sent = np.array([len(ws) - 1 for ws in sents], dtype=np.int64)
    batch = EncodedBatch(word_ids, word_mask, sent_mask, last_sent, da_ids)

    if with_summary:
        targets = []
        for sample in samples:
            toks = list(sample.summary)
            if len(toks) + 1 > max_summary_len:
                log.warning(
                    "truncating summary of %d tokens to max_summary_len=%d",
                    len(toks),
                    max_summary_len,
                )
                toks = toks[: max_summary_len - 1]
            targets.append([vocab.encode_token(w) for w in toks] + [EOS])
        S = max(len(t) for t in targets)
        dec_in = np.full((B, S), PAD, dtype=np.int64)
        dec_target = np.full((B, S), PAD, dtype=np.int64)
        dec_mask = np.zeros((B, S))
        for b, tgt in enumerate(targets):
            dec_in[b, 0] = BOS
            dec_in[b, 1 : len(tgt)] = tgt[:-1]
            dec_target[b, : len(tgt)] = tgt
            dec_mask[b, : len(tgt)] = 1.0
        batch.dec_in, batch.dec_target, batch.dec_mask = dec_in, dec_target, dec_mask
    return batch


# ---------------------------------------------------------------------------
# file I/O


def _tokens(value, where):
    if isinstance(value, str):
        toks = value.lower().split()
    elif isinstance(value, (list, tuple)):
        toks = [str(w).lower() for w in value]
    else:
        raise DatasetError(f"{where}: words must be a string or a token list")
    return tuple(toks)


def sample_from_record(record, where="record", require_summary=True):
    try:
        raw_sents = record["sentences"]
    except (KeyError, TypeError):
        raise DatasetError(f"{where}: missing 'sentences' field") from None
    if not raw_sents:
        raise DatasetError(f"{where}: empty sentence list")
    utts = []
    for j, s in enumerate(raw_sents):
        try:
            utts.append(
                Utterance(
                    speaker=str(s["speaker"]),
                    words=_tokens(s["words"], f"{where} sentence {j}"),
                    dialogue_act=str(s["dialogue_act"]),
                )
            )
        except KeyError as e:
            raise DatasetError(f"{where} sentence {j}: missing field {e}") from None
        except ContractError as e:
            raise DatasetError(f"{where} sentence {j}: {e}") from None
    summary = _tokens(record.get("summary", ""), where)
    if require_summary and not summary:
        raise DatasetError(f"{where}: missing or empty summary")
    return DialogueSample(utterances=tuple(utts), summary=summary)


def sample_to_record(sample):
    return {
        "sentences": [
            {"speaker": u.speaker, "words": list(u.words), "dialogue_act": u.dialogue_act}
            for u in sample.utterances
        ],
        "summary": " ".join(sample.summary),
    }


def read_samples(path, require_summary=True):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path} line {i}: invalid JSON ({e.msg})") from None
            samples.append(
                sample_from_record(record, where=f"{path} line {i}", require_summary=require_summary)
            )
    return samples


def write_samples(samples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_record(s)) + "\n")


def read_transcripts(path):
    """Read meeting transcripts; yields one utterance list per meeting."""
    meetings = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path} line {i}: invalid JSON ({e.msg})") from None
            try:
                raw = record["utterances"]
            except (KeyError, TypeError):
                raise DatasetError(f"{path} line {i}: missing 'utterances' field") from None
            utts = []
            for j, u in enumerate(raw):
                try:
                    utts.append(
                        TranscriptUtterance(
                            speaker=str(u["speaker"]),
                            words=_tokens(u["words"], f"{path} line {i} utterance {j}"),
                            dialogue_act=str(u["dialogue_act"]),
                            topic=str(u["topic"]).lower(),
                        )
                    )
                except KeyError as e:
                    raise DatasetError(
                        f"{path} line {i} utterance {j}: missing field {e}"
                    ) from None
                except ContractError as e:
                    raise DatasetError(f"{path} line {i} utterance {j}: {e}") from None
            meetings.append(utts)
    return meetings


def dataset_stats(splits, vocab):
    """Corpus statistics over the final splits."""
    lengths = [len(s.summary) for split in splits.values() for s in split]
    return {
        "vocabulary_size": vocab.n_content_tokens,
        "n_dialogue_acts": vocab.n_labels,
        "min_summary_length": min(lengths) if lengths else 0,
        "max_summary_length": max(lengths) if lengths else 0,
        "train_size": len(splits["train"]),
        "dev_size": len(splits["dev"]),
        "test_size": len(splits["test"]),
    }


def write_stats(stats, json_path, text_path):
    Path(json_path).write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    lines = [f"{k}: {v}" for k, v in stats.items()]
    Path(text_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
