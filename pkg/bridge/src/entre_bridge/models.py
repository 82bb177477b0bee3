"""Adapters turning transformers checkpoints into wire-protocol handlers.

Relation task: entity positions are conveyed with typed marker tokens
wrapped around each span before tokenization, i.e.

    [SUBJ-PERSON] John Smith [/SUBJ-PERSON] works at
    [OBJ-ORGANIZATION] Acme [/OBJ-ORGANIZATION]

which is the marker convention the served checkpoint is expected to
have been trained with (or to tolerate).  Masked-context inputs pass
through verbatim; the mask token is already part of ``tokens``.

NER task: requests are whitespace-joined, the token classifier runs
over wordpieces, B-/I-/bare labels are decoded to character spans, and
those are mapped back to token-index spans (a token belongs to a span
iff their character ranges overlap).
"""

from __future__ import annotations

import torch
from transformers import (
    AutoModelForSequenceClassification,
    AutoModelForTokenClassification,
    AutoTokenizer,
)

from .config import BridgeConfig


def join_tokens(tokens: list[str]) -> tuple[str, list[tuple[int, int]]]:
    """Space-join tokens, returning the text and per-token char ranges."""
    spans = []
    pos = 0
    for tok in tokens:
        spans.append((pos, pos + len(tok)))
        pos += len(tok) + 1
    return " ".join(tokens), spans


def _required(payload: dict, fields: tuple[str, ...]) -> None:
    missing = [f for f in fields if f not in payload]
    if missing:
        raise ValueError(f"request missing fields: {', '.join(missing)}")


class RelationModel:
    """Sequence classifier answering relation requests."""

    FIELDS = (
        "id", "tokens", "subj_start", "subj_end", "obj_start", "obj_end",
        "subj_type", "obj_type",
    )

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.device = torch.device(config.device)
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = (
            AutoModelForSequenceClassification.from_pretrained(config.model)
            .eval()
            .to(self.device)
        )
        self._label_map = config.load_label_map()
        self.id2label = {
            int(i): lab for i, lab in self.model.config.id2label.items()
        }
        self.labels = sorted(
            {self._label_map.get(lab, lab) for lab in self.id2label.values()}
        )
        self.max_length = min(
            config.max_length,
            getattr(self.model.config, "max_position_embeddings", config.max_length),
        )
        self.identity = f"bridge:relation:{config.model}"

    def _marked_text(self, payload: dict) -> str:
        tokens = list(payload["tokens"])
        edits = sorted(
            [
                (payload["subj_start"], payload["subj_end"],
                 f"[SUBJ-{payload['subj_type']}]", f"[/SUBJ-{payload['subj_type']}]"),
                (payload["obj_start"], payload["obj_end"],
                 f"[OBJ-{payload['obj_type']}]", f"[/OBJ-{payload['obj_type']}]"),
            ],
            reverse=True,
        )
        for start, end, open_marker, close_marker in edits:
            tokens[end:end] = [close_marker]
            tokens[start:start] = [open_marker]
        return " ".join(tokens)

    def handle(self, payloads: list[dict]) -> list[dict]:
        for payload in payloads:
            _required(payload, self.FIELDS)
        texts = [self._marked_text(p) for p in payloads]
        responses = []
        for offset in range(0, len(texts), self.config.batch_size):
            chunk = texts[offset : offset + self.config.batch_size]
            enc = self.tokenizer(
                chunk,
                padding=True,
                truncation=True,
                max_length=self.max_length,
                return_tensors="pt",
            ).to(self.device)
            with torch.inference_mode():
                logits = self.model(**enc).logits
            probs = torch.softmax(logits, dim=-1).cpu()
            for row, payload in zip(probs, payloads[offset : offset + len(chunk)]):
                scores: dict[str, float] = {}
                for i, prob in enumerate(row.tolist()):
                    label = self._label_map.get(self.id2label[i], self.id2label[i])
                    scores[label] = scores.get(label, 0.0) + prob
                best = max(scores, key=lambda lab: (scores[lab], lab))
                responses.append(
                    {"id": payload["id"], "label": best, "scores": scores}
                )
        return responses


def decode_label_spans(
    labels: list[str], offsets: list[tuple[int, int]]
) -> list[tuple[str, int, int]]:
    """Decode per-wordpiece labels to (base type, char start, char end).

    Accepts B-/I- prefixed schemes and bare labels (treated as
    continuations); "O" and empty labels close the current span.
    """
    spans: list[tuple[str, int, int]] = []
    current: list | None = None
    for label, (start, end) in zip(labels, offsets):
        if start == end:  # special token
            continue
        prefix, _, base = label.partition("-")
        if not base:
            prefix, base = "", prefix
        if base in ("O", ""):
            current = None
            continue
        starts_new = prefix == "B" or current is None or current[0] != base
        if starts_new:
            current = [base, start, end]
            spans.append(current)  # mutated in place as the span grows
        else:
            current[2] = end
    return [tuple(s) for s in spans]


class NerModel:
    """Token classifier answering entity-tagging requests."""

    FIELDS = ("id", "tokens")

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.device = torch.device(config.device)
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = (
            AutoModelForTokenClassification.from_pretrained(config.model)
            .eval()
            .to(self.device)
        )
        self._label_map = config.load_label_map()
        self.id2label = {int(i): lab for i, lab in self.model.config.id2label.items()}
        bases = set()
        for label in self.id2label.values():
            prefix, _, base = label.partition("-")
            base = base or prefix
            if base != "O":
                bases.add(self._label_map.get(base, base))
        self.labels = sorted(bases)
        self.max_length = min(
            config.max_length,
            getattr(self.model.config, "max_position_embeddings", config.max_length),
        )
        self.identity = f"bridge:ner:{config.model}"

    def _token_spans(
        self,
        char_spans: list[tuple[str, int, int]],
        token_ranges: list[tuple[int, int]],
    ) -> list[dict]:
        out = []
        last_end = 0
        for base, start, end in sorted(char_spans, key=lambda s: (s[1], s[2])):
            covered = [
                i for i, (ts, te) in enumerate(token_ranges) if ts < end and te > start
            ]
            if not covered:
                continue
            tok_start, tok_end = covered[0], covered[-1] + 1
            if tok_start < last_end:  # keep spans non-overlapping after mapping
                continue
            out.append(
                {
                    "start": tok_start,
                    "end": tok_end,
                    "type": self._label_map.get(base, base),
                }
            )
            last_end = tok_end
        return out

    def handle(self, payloads: list[dict]) -> list[dict]:
        for payload in payloads:
            _required(payload, self.FIELDS)
        responses = []
        for offset in range(0, len(payloads), self.config.batch_size):
            chunk = payloads[offset : offset + self.config.batch_size]
            joined = [join_tokens(list(p["tokens"])) for p in chunk]
            enc = self.tokenizer(
                [text for text, _ in joined],
                padding=True,
                truncation=True,
                max_length=self.max_length,
                return_offsets_mapping=True,
                return_tensors="pt",
            )
            offsets = enc.pop("offset_mapping")
            enc = enc.to(self.device)
            with torch.inference_mode():
                logits = self.model(**enc).logits
            pred_ids = logits.argmax(-1).cpu()
            for row in range(len(chunk)):
                n = int(enc["attention_mask"][row].sum())
                labels = [self.id2label[int(i)] for i in pred_ids[row][:n]]
                wp_offsets = [tuple(o) for o in offsets[row][:n].tolist()]
                char_spans = decode_label_spans(labels, wp_offsets)
                spans = self._token_spans(char_spans, joined[row][1])
                responses.append({"id": chunk[row]["id"], "spans": spans})
        return responses


def load_model(config: BridgeConfig):
    if config.task == "relation":
        return RelationModel(config)
    return NerModel(config)
