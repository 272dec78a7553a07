#!/usr/bin/env python3
"""Writes tests/data/metrics_oracle.json: metric cases scored by a plain
Python implementation that shares no code with the C++ library."""

import json
import random
import string
from collections import Counter
from pathlib import Path

LABELS = ["positive", "negative", "neutral"]
WORDS = ["the", "room", "Room", "was", "clean", "quiet", "staff", "very", "a", "an",
         "noisy", "walls", "thin", "food", "don't", "U.S.", "x-ray"]
PUNCT = [",", ".", "!", "?", "(", ")", "\"", "'", ";", "--"]


def normalize(text):
    out = []
    for chunk in text.split():
        core = chunk.strip(string.punctuation)
        if core:
            out.append(core.lower())
    return out


def token_f1(pred, gold):
    p, g = normalize(pred), normalize(gold)
    exact = 1 if p == g else 0
    if not p and not g:
        return 1.0, exact
    if not p or not g:
        return 0.0, exact
    overlap = sum((Counter(p) & Counter(g)).values())
    if overlap == 0:
        return 0.0, exact
    prec, rec = overlap / len(p), overlap / len(g)
    return 2 * prec * rec / (prec + rec), exact


def prf(correct, n_pred, n_gold):
    p = correct / n_pred if n_pred else 0.0
    r = correct / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def span_prf(pred_sentences, gold_sentences):
    correct = n_pred = n_gold = 0
    for pred, gold in zip(pred_sentences, gold_sentences):
        gold_set = {tuple(s) for s in gold}
        correct += sum(1 for s in pred if tuple(s) in gold_set)
        n_pred += len(pred)
        n_gold += len(gold)
    return prf(correct, n_pred, n_gold)


def cls_scores(pred, gold):
    acc = sum(1 for a, b in zip(pred, gold) if a == b) / len(gold)
    f1s = []
    for c in LABELS:
        tp = sum(1 for a, b in zip(pred, gold) if a == c and b == c)
        fp = sum(1 for a, b in zip(pred, gold) if a == c and b != c)
        fn = sum(1 for a, b in zip(pred, gold) if a != c and b == c)
        f1s.append(prf(tp, tp + fp, tp + fn)[2])
    return acc, sum(f1s) / 3.0


def random_text(rng):
    parts = []
    for _ in range(rng.randint(0, 6)):
        w = rng.choice(WORDS)
        if rng.random() < 0.25:
            w = rng.choice(PUNCT) + w
        if rng.random() < 0.25:
            w = w + rng.choice(PUNCT)
        parts.append(w)
        if rng.random() < 0.1:
            parts.append(rng.choice(PUNCT))
    sep = rng.choice([" ", "  ", "\t"])
    return sep.join(parts)


def random_spans(rng, n_tokens):
    spans, i = [], 0
    while i < n_tokens:
        if rng.random() < 0.3:
            j = min(n_tokens - 1, i + rng.randint(0, 2))
            spans.append([i, j])
            i = j + 2
        else:
            i += 1
    return spans


def main():
    rng = random.Random(20240611)
    qa = []
    fixed = [("a b c", "b c d"), ("The room.", "the room"), ("", "clean"), ("", ""),
             ("clean clean", "clean"), ("...", "")]
    for pred, gold in fixed:
        f1, exact = token_f1(pred, gold)
        qa.append({"prediction": pred, "gold": gold, "f1": f1, "exact": exact})
    while len(qa) < 40:
        gold = random_text(rng)
        pred = gold if rng.random() < 0.2 else random_text(rng)
        f1, exact = token_f1(pred, gold)
        qa.append({"prediction": pred, "gold": gold, "f1": f1, "exact": exact})

    spans = []
    for _ in range(30):
        n_sent = rng.randint(1, 4)
        pred_s, gold_s = [], []
        for _ in range(n_sent):
            n = rng.randint(1, 12)
            gold = random_spans(rng, n)
            pred = [s for s in gold if rng.random() < 0.6] + [s for s in random_spans(rng, n) if s not in gold]
            pred_s.append(sorted({tuple(s) for s in pred}))
            gold_s.append(gold)
        p, r, f = span_prf(pred_s, gold_s)
        spans.append({"predicted": [[list(s) for s in ps] for ps in pred_s], "gold": gold_s,
                      "precision": p, "recall": r, "f1": f})

    cls = []
    for k in range(30):
        n = rng.randint(1, 15)
        labels = LABELS if k % 3 else LABELS[:2]
        gold = [rng.choice(labels) for _ in range(n)]
        pred = [g if rng.random() < 0.5 else rng.choice(LABELS) for g in gold]
        acc, mf1 = cls_scores(pred, gold)
        cls.append({"predicted": pred, "gold": gold, "accuracy": acc, "macro_f1": mf1})

    out = Path(__file__).resolve().parent.parent / "data" / "metrics_oracle.json"
    out.write_text(json.dumps({"token_f1": qa, "span_prf": spans, "cls": cls}, indent=1) + "\n")


if __name__ == "__main__":
    main()
