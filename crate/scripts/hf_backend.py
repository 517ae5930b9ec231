#!/usr/bin/env python3
"""External training backend wrapping a Hugging Face cross-lingual encoder.

Invoked by the `external:` backend as `hf_backend.py <op>`, with one JSON
request on stdin and JSON-line events on stdout. Requires torch and
transformers.

    hatemix train --backend "external:python3 scripts/hf_backend.py" ...
"""

import json
import math
import os
import random
import sys


def emit(event, **fields):
    fields["event"] = event
    print(json.dumps(fields), flush=True)


def seed_everything(seed):
    import numpy as np
    import torch

    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def split_held_out(texts, seed, share=0.1):
    idx = list(range(len(texts)))
    random.Random(seed).shuffle(idx)
    held = max(1, int(len(texts) * share))
    train = idx[held:] or idx[:held]
    return [texts[i] for i in train], [texts[i] for i in idx[:held]]


def batches(items, size, rng):
    order = list(range(len(items)))
    rng.shuffle(order)
    for start in range(0, len(order), size):
        yield [items[i] for i in order[start:start + size]]


def retrain_mlm(req):
    import torch
    from transformers import AutoModelForMaskedLM, AutoTokenizer, DataCollatorForLanguageModeling

    cfg = req["config"]
    seed_everything(cfg["seed"])
    device = "cuda" if torch.cuda.is_available() else "cpu"
    tok = AutoTokenizer.from_pretrained(req["model"])
    model = AutoModelForMaskedLM.from_pretrained(req["model"]).to(device)
    collator = DataCollatorForLanguageModeling(tok, mlm_probability=cfg["mask_probability"])
    opt = torch.optim.AdamW(model.parameters(), lr=cfg["learning_rate"])
    train, held = split_held_out(req["texts"], cfg["seed"])
    rng = random.Random(cfg["seed"])

    def encode(texts):
        enc = tok(texts, truncation=True, max_length=cfg["max_seq_len"])
        return collator([{"input_ids": ids} for ids in enc["input_ids"]])

    def evaluate():
        model.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            for chunk in range(0, len(held), cfg["batch_size"]):
                b = {k: v.to(device) for k, v in encode(held[chunk:chunk + cfg["batch_size"]]).items()}
                total += model(**b).loss.item()
                count += 1
        model.train()
        return total / max(count, 1)

    step = 0
    model.train()
    for _ in range(cfg["epochs"]):
        epoch = list(batches(train, cfg["batch_size"], rng))
        for i, texts in enumerate(epoch):
            step += 1
            b = {k: v.to(device) for k, v in encode(texts).items()}
            loss = model(**b).loss
            loss.backward()
            opt.step()
            opt.zero_grad()
            if step % cfg["eval_every_steps"] == 0 or i + 1 == len(epoch):
                path = os.path.join(req["artifacts"], "mlm-step-%08d" % step)
                model.save_pretrained(path)
                tok.save_pretrained(path)
                emit("checkpoint", step=step, eval_loss=evaluate(), artifact_uri=os.path.abspath(path))


def finetune_classifier(req):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    cfg = req["config"]
    seed_everything(cfg["seed"])
    labels = req["labels"]
    index = {l: i for i, l in enumerate(labels)}
    device = "cuda" if torch.cuda.is_available() else "cpu"
    tok = AutoTokenizer.from_pretrained(req["model"])
    model = AutoModelForSequenceClassification.from_pretrained(
        req["model"],
        num_labels=len(labels),
        id2label=dict(enumerate(labels)),
        label2id=index,
    ).to(device)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg["learning_rate"], weight_decay=cfg["weight_decay"])
    rng = random.Random(cfg["seed"])

    def encode(rows):
        enc = tok([r["text"] for r in rows], truncation=True, max_length=cfg["max_seq_len"],
                  padding=True, return_tensors="pt")
        enc["labels"] = torch.tensor([index[r["label"]] for r in rows])
        return {k: v.to(device) for k, v in enc.items()}

    def evaluate():
        model.eval()
        total, n = 0.0, 0
        with torch.no_grad():
            for chunk in range(0, len(req["validation"]), cfg["batch_size"]):
                rows = req["validation"][chunk:chunk + cfg["batch_size"]]
                total += model(**encode(rows)).loss.item() * len(rows)
                n += len(rows)
        model.train()
        return total / n if n else 0.0

    step = 0
    model.train()
    for _ in range(cfg["epochs"]):
        epoch = list(batches(req["train"], cfg["batch_size"], rng))
        for i, rows in enumerate(epoch):
            step += 1
            loss = model(**encode(rows)).loss
            loss.backward()
            opt.step()
            opt.zero_grad()
            if step % cfg["eval_every_steps"] == 0 or i + 1 == len(epoch):
                path = os.path.join(req["artifacts"], "classifier-step-%08d" % step)
                model.save_pretrained(path)
                tok.save_pretrained(path)
                loss = evaluate()
                emit("checkpoint", step=step, eval_loss=loss if math.isfinite(loss) else 1e9,
                     artifact_uri=os.path.abspath(path))


def predict(req):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    device = "cuda" if torch.cuda.is_available() else "cpu"
    tok = AutoTokenizer.from_pretrained(req["model"])
    model = AutoModelForSequenceClassification.from_pretrained(req["model"]).to(device).eval()
    out = []
    with torch.no_grad():
        for chunk in range(0, len(req["texts"]), 32):
            enc = tok(req["texts"][chunk:chunk + 32], truncation=True, max_length=512,
                      padding=True, return_tensors="pt").to(device)
            out.extend(model(**enc).logits.argmax(-1).tolist())
    emit("predictions", labels=[req["labels"][i] for i in out])


OPS = {"retrain_mlm": retrain_mlm, "finetune_classifier": finetune_classifier, "predict": predict}


def main():
    if len(sys.argv) < 2 or sys.argv[-1] not in OPS:
        sys.stderr.write("usage: hf_backend.py {%s}\n" % "|".join(OPS))
        return 2
    OPS[sys.argv[-1]](json.load(sys.stdin))
    return 0


if __name__ == "__main__":
    sys.exit(main())
