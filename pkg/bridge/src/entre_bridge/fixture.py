"""Deterministic toy checkpoints for protocol tests and offline demos.

These are real BERT checkpoints (saved and reloaded through the normal
``from_pretrained`` path) that are tiny and *pinned*: every consequential
weight is set by hand, so the models' outputs are stable across runs and
machines with no download required.

The NER fixture uses zero encoder layers, which reduces the forward pass
to ``classifier(LayerNorm(word_embedding))`` per token: words from the
built-in person list always tag I-PER, organization words I-ORG, and
everything else (including [UNK]) O.  The relation fixture is a constant
classifier that always answers ``no_relation`` - enough surface for
protocol conformance, which cares about ids and label sets, not accuracy.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
from tokenizers.processors import TemplateProcessing
from transformers import (
    BertConfig,
    BertForSequenceClassification,
    BertForTokenClassification,
    PreTrainedTokenizerFast,
)

SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
PERSON_WORDS = ("Alice", "Johnson", "Braun", "Bob")
ORG_WORDS = ("Acme", "Corp", "Initech")
OTHER_WORDS = ("visited", "hired", "works", "for", "the", "office", ".")

NER_LABELS = {0: "O", 1: "I-PER", 2: "I-ORG"}
NER_LABEL_MAP = {"PER": "PERSON", "ORG": "ORGANIZATION"}
RELATION_LABELS = {0: "no_relation", 1: "per:employee_of", 2: "org:founded_by"}

_HIDDEN = 16


def _build_tokenizer(words: tuple[str, ...]) -> PreTrainedTokenizerFast:
    vocab = {word: i for i, word in enumerate(words)}
    wordpiece = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    wordpiece.normalizer = normalizers.BertNormalizer(lowercase=False)
    wordpiece.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    wordpiece.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=wordpiece,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


def _zero_layer_config(vocab_size: int, **kwargs) -> BertConfig:
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=_HIDDEN,
        num_hidden_layers=0,
        num_attention_heads=1,
        intermediate_size=_HIDDEN,
        max_position_embeddings=64,
        **kwargs,
    )


def _pattern(index: int) -> torch.Tensor:
    vec = torch.zeros(_HIDDEN)
    vec[index] = 1.0
    return vec


def build_ner_fixture(path: str | Path) -> Path:
    """Write the pinned token-classification checkpoint to ``path``."""
    path = Path(path)
    words = SPECIALS + PERSON_WORDS + ORG_WORDS + OTHER_WORDS
    tokenizer = _build_tokenizer(words)
    config = _zero_layer_config(
        len(words),
        num_labels=len(NER_LABELS),
        id2label=NER_LABELS,
        label2id={v: k for k, v in NER_LABELS.items()},
    )
    torch.manual_seed(0)
    model = BertForTokenClassification(config).eval()
    class_patterns = {0: _pattern(0), 1: _pattern(1), 2: _pattern(2)}
    with torch.no_grad():
        emb = model.bert.embeddings
        emb.position_embeddings.weight.zero_()
        emb.token_type_embeddings.weight.zero_()
        for i, word in enumerate(words):
            if word in PERSON_WORDS:
                emb.word_embeddings.weight[i] = class_patterns[1]
            elif word in ORG_WORDS:
                emb.word_embeddings.weight[i] = class_patterns[2]
            else:
                emb.word_embeddings.weight[i] = class_patterns[0]
        # The classifier dots the layer-normed embedding against each
        # class's own normed pattern; 10x scaling makes margins huge.
        for label_id, pattern in class_patterns.items():
            normed = emb.LayerNorm(pattern.unsqueeze(0)).squeeze(0)
            model.classifier.weight[label_id] = 10.0 * normed
        model.classifier.bias.zero_()
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    (path / "label_map.json").write_text(json.dumps(NER_LABEL_MAP, indent=2))
    return path


def build_relation_fixture(path: str | Path) -> Path:
    """Write the pinned sequence-classification checkpoint to ``path``."""
    path = Path(path)
    words = SPECIALS + PERSON_WORDS + ORG_WORDS + OTHER_WORDS
    tokenizer = _build_tokenizer(words)
    config = _zero_layer_config(
        len(words),
        num_labels=len(RELATION_LABELS),
        id2label=RELATION_LABELS,
        label2id={v: k for k, v in RELATION_LABELS.items()},
    )
    torch.manual_seed(0)
    model = BertForSequenceClassification(config).eval()
    with torch.no_grad():
        model.classifier.weight.zero_()
        model.classifier.bias.copy_(torch.tensor([2.0, 0.0, -2.0]))
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="directory for the checkpoints")
    args = parser.parse_args(argv)
    out = Path(args.out)
    ner = build_ner_fixture(out / "tiny-ner")
    rel = build_relation_fixture(out / "tiny-relation")
    print(f"wrote {ner} and {rel}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
