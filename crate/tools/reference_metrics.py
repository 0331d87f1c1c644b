#!/usr/bin/env python3
"""Reference MAP, nDCG@10 and Recall@1000 for committed fixture runs,
computed with pytrec_eval (trec_eval bindings).

MAP and recall use relevance_level=2, so grade 1 counts as not relevant;
nDCG@10 uses the raw grades as gains. trec_eval orders a run by score, so
each run is handed over with strictly decreasing scores derived from its
rank field, which keeps tied or rounded scores from being reordered.

usage: reference_metrics.py OUT_JSON (QRELS RUN...)...  with groups separated by `--`
"""

import json
import sys
from pathlib import Path

import pytrec_eval


def read_qrels(path):
    qrels = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            q, _, d, g = line.split()
            qrels.setdefault(q, {})[d] = int(g)
    return qrels


def read_run(path):
    run = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            q, _, d, rank, _score, _tag = line.split()
            run.setdefault(q, {})[d] = -float(rank)
    return run


def evaluate(qrels, run):
    binary = pytrec_eval.RelevanceEvaluator(qrels, {"map", "recall_1000"}, relevance_level=2)
    graded = pytrec_eval.RelevanceEvaluator(qrels, {"ndcg_cut_10"})
    b, g = binary.evaluate(run), graded.evaluate(run)
    out = {}
    for name, source, key in (("map", b, "map"), ("ndcg@10", g, "ndcg_cut_10"), ("recall@1000", b, "recall_1000")):
        per_query = {q: v[key] for q, v in sorted(source.items())}
        out[name] = {"per_query": per_query, "mean": sum(per_query.values()) / len(per_query)}
    return out


def main():
    out = Path(sys.argv[1])
    groups, cur = [], []
    for arg in sys.argv[2:] + ["--"]:
        if arg == "--":
            if cur:
                groups.append(cur)
            cur = []
        else:
            cur.append(arg)
    result = {}
    for qrels_path, *runs in groups:
        qrels = read_qrels(qrels_path)
        for run_path in runs:
            result[run_path] = {"qrels": qrels_path, "metrics": evaluate(qrels, read_run(run_path))}
    out.write_text(json.dumps(result, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
