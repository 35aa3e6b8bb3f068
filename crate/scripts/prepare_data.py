#!/usr/bin/env python3
"""Rebuild the vendored files under data/ from their upstream packages.

Upstream sources (fetch with `npm pack` / `pip download` and unpack):

  sentiment-5.0.2.tgz              test/fixtures/imdb.json  (UCI sentiment labelled sentences)
  wink-embeddings-sg-100d-1.1.0    wink-embeddings-sg-100d.json  (GloVe 6B 100d)
  wordnet-db-3.1.14.tgz            dict/data.{noun,verb,adj,adv}
  afinn-0.1.tar.gz                 afinn/data/AFINN-111.txt

Usage:
  prepare_data.py --imdb imdb.json --wink wink.json --wordnet dict/ --afinn AFINN-111.txt --out data/
"""

import argparse
import collections
import json
import os
import random
import re
import shutil

TOKEN = re.compile(r"[a-z0-9']+")


def tokens(text):
    return TOKEN.findall(text.lower())


def split_reviews(path, out, seed):
    rows = [r for r in json.load(open(path)) if r.get("class") in (0, 1)]
    by_class = collections.defaultdict(list)
    for r in rows:
        text = " ".join(r["text"].split())
        by_class["pos" if r["class"] == 1 else "neg"].append(text)
    rng = random.Random(seed)
    train, heldout = [], []
    for label in sorted(by_class):
        texts = by_class[label]
        rng.shuffle(texts)
        half = len(texts) // 2
        train += [(label, t) for t in texts[:half]]
        heldout += [(label, t) for t in texts[half:]]
    rng.shuffle(train)
    rng.shuffle(heldout)
    for name, part in (("reviews-train.tsv", train), ("reviews-heldout.tsv", heldout)):
        with open(os.path.join(out, name), "w") as f:
            for label, text in part:
                f.write(f"{label}\t{text}\n")
    vocab = set()
    for _, text in train + heldout:
        vocab.update(tokens(text))
    return vocab


def subset_vectors(path, out, corpus_vocab, top_n):
    wink = json.load(open(path))
    dims = wink["dimensions"]
    keep = []
    alpha = re.compile(r"^[a-z][a-z']*$")
    for w in wink["words"]:
        if len(keep) >= top_n:
            break
        if alpha.match(w):
            keep.append(w)
    seen = set(keep)
    for w in sorted(corpus_vocab):
        if w not in seen and w in wink["vectors"]:
            keep.append(w)
            seen.add(w)
    with open(os.path.join(out, "glove-6b-100d-subset.txt"), "w") as f:
        for w in keep:
            vec = wink["vectors"][w][:dims]
            f.write(w + " " + " ".join(f"{x:.5f}" for x in vec) + "\n")
    return seen


def wordnet_synonyms(dict_dir, out, words, max_syn):
    syn = collections.defaultdict(list)
    for pos in ("noun", "verb", "adj", "adv"):
        with open(os.path.join(dict_dir, f"data.{pos}"), encoding="latin-1") as f:
            for line in f:
                if line.startswith(" "):
                    continue
                fields = line.split()
                count = int(fields[3], 16)
                lemmas = []
                for i in range(count):
                    lemma = fields[4 + 2 * i].lower()
                    lemma = re.sub(r"\(.*\)$", "", lemma)
                    if "_" in lemma or "-" in lemma or not lemma.isalpha():
                        continue
                    lemmas.append(lemma)
                for w in lemmas:
                    if w not in words:
                        continue
                    for s in lemmas:
                        if s != w and s not in syn[w] and len(syn[w]) < max_syn:
                            syn[w].append(s)
    with open(os.path.join(out, "synonyms-wordnet.tsv"), "w") as f:
        for w in sorted(syn):
            if syn[w]:
                f.write(w + "\t" + ",".join(syn[w]) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--imdb", required=True)
    ap.add_argument("--wink", required=True)
    ap.add_argument("--wordnet", required=True)
    ap.add_argument("--afinn", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=2013)
    ap.add_argument("--top-n", type=int, default=6000)
    args = ap.parse_args()

    corpus_vocab = split_reviews(args.imdb, args.out, args.seed)
    vector_vocab = subset_vectors(args.wink, args.out, corpus_vocab, args.top_n)
    wordnet_synonyms(args.wordnet, args.out, corpus_vocab, 8)
    shutil.copyfile(args.afinn, os.path.join(args.out, "afinn-111.tsv"))
    print(f"corpus vocab {len(corpus_vocab)}, vectors {len(vector_vocab)}")


if __name__ == "__main__":
    main()
