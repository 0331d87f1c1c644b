#!/usr/bin/env python3
"""Step-by-step reference traces for the small trace fixture.

Every stage is executed with plain loops straight from the definitions:
BM25 from raw token counts, exhaustive inner products over float32 vectors,
min-max interpolation over the candidate union, and a Rocchio update over the
top-k feedback passages. Output is written as JSON with round-trippable floats.

usage: trace_oracle.py FIXTURE_DIR OUT_JSON
"""

import json
import math
import sys
from pathlib import Path

import numpy as np


def f32(x):
    return float(np.float32(x))


def tokenize(text):
    tokens, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            tokens.append("".join(cur))
            cur = []
    if cur:
        tokens.append("".join(cur))
    return tokens


def load(fixture):
    corpus = [json.loads(l) for l in (fixture / "corpus.jsonl").read_text().splitlines() if l.strip()]
    queries = [l.split("\t", 1) for l in (fixture / "queries.tsv").read_text().splitlines() if l.strip()]

    def vectors(name):
        out = {}
        for line in (fixture / name).read_text().splitlines():
            if line.strip():
                parts = line.split()
                out[parts[0]] = [f32(v) for v in parts[1:]]
        return out

    return corpus, queries, vectors("doc_vectors.txt"), vectors("query_vectors.txt")


def rank(scores):
    """score descending, id ascending"""
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def bm25(corpus, query, k1, b):
    docs = {p["id"]: tokenize(p["contents"]) for p in corpus}
    n = len(docs)
    avgdl = sum(len(t) for t in docs.values()) / n
    seen, terms = set(), []
    for t in tokenize(query):
        if t not in seen:
            seen.add(t)
            terms.append(t)
    scores = {}
    for doc_id, toks in docs.items():
        score = None
        for t in terms:
            df = sum(1 for d in docs.values() if t in d)
            if df == 0:
                continue
            tf = toks.count(t)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = k1 * (1.0 - b + b * len(toks) / avgdl)
            w = idf * tf / (tf + norm)
            score = w if score is None else score + w
        if score is not None and score > 0.0:
            scores[doc_id] = score
    return rank(scores)


def dense(doc_vectors, q):
    scores = {}
    for doc_id, v in doc_vectors.items():
        acc = 0.0
        for a, b in zip(q, v):
            acc += a * b
        scores[doc_id] = f32(acc)
    return rank(scores)


def minmax(ranked):
    if not ranked:
        return {}
    hi, lo = ranked[0][1], ranked[-1][1]
    if hi - lo > 0.0:
        return {d: (s - lo) / (hi - lo) for d, s in ranked}
    return {d: 1.0 for d, _ in ranked}


def fuse(sparse, dense_list, fusion):
    lam = fusion["lambda"]
    if fusion["normalization"] == "minmax":
        s, d = minmax(sparse), minmax(dense_list)
        s_missing = d_missing = 0.0
    else:
        s, d = dict(sparse), dict(dense_list)
        s_missing = sparse[-1][1] if sparse else 0.0
        d_missing = dense_list[-1][1] if dense_list else 0.0
    out = {}
    for doc_id in set(s) | set(d):
        if fusion["missing"] == "skip" and (doc_id not in s or doc_id not in d):
            continue
        out[doc_id] = lam * s.get(doc_id, s_missing) + (1.0 - lam) * d.get(doc_id, d_missing)
    return rank(out)


def rocchio(q, feedback, alpha, beta):
    out = []
    for i in range(len(q)):
        total = 0.0
        for f in feedback:
            total += f[i]
        out.append(f32(alpha * q[i] + beta * (total / len(feedback))))
    return out


def trace(corpus, doc_vectors, qid, text, qvec, cfg):
    stage, fusion, prf = cfg["stage"], cfg["fusion"], cfg["prf"]
    sparse = bm25(corpus, text, 0.9, 0.4)
    dense1 = dense(doc_vectors, qvec)
    t = {"sparse": sparse, "dense1": dense1}
    source = dense1
    if stage in ("pre", "both"):
        fused1 = fuse(sparse, dense1, fusion)
        t["fused1"] = fused1
        source = fused1
    feedback = [d for d, _ in source[: prf["depth_k"]]]
    revised = rocchio(qvec, [doc_vectors[d] for d in feedback], prf["alpha"], prf["beta"])
    dense2 = dense(doc_vectors, revised)
    t.update(feedback=feedback, prf_query=revised, dense2=dense2)
    t["final"] = fuse(sparse, dense2, fusion) if stage in ("post", "both") else dense2
    return t


CONFIGS = {
    "defaults": {
        "fusion": {"lambda": 0.5, "normalization": "minmax", "missing": "min"},
        "prf": {"alpha": 0.4, "beta": 0.6, "depth_k": 3},
    },
    "raw-scores-k2": {
        "fusion": {"lambda": 0.3, "normalization": "none", "missing": "min"},
        "prf": {"alpha": 0.5, "beta": 0.5, "depth_k": 2},
    },
}


def main():
    fixture, out = Path(sys.argv[1]), Path(sys.argv[2])
    corpus, queries, doc_vectors, query_vectors = load(fixture)
    cases = []
    for name, base in CONFIGS.items():
        for stage in ("post", "pre", "both"):
            cfg = {"stage": stage, "use_prf": True, **base}
            traces = {
                qid: trace(corpus, doc_vectors, qid, text, query_vectors[qid], cfg)
                for qid, text in queries
            }
            cases.append({"name": f"{name}/{stage}", "config": cfg, "queries": traces})
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main()
