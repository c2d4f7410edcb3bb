"""Compare the compiled and pure-Python kernel backends.

Runs each hot kernel on identical inputs with both backends, checks that the
results agree exactly and prints wall-clock times and the speedup.

    python3 benchmarks/bench_kernels.py [--pairs 2000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from graphcbr import _pykernels
from graphcbr.similarity import SimilarityConfig
from graphcbr.similarity.encode import GraphBatch
from graphcbr.synthetic import planted_corpus, planted_ranking_set

try:
    from graphcbr import _ckernels
except ImportError:
    _ckernels = None


def best_time(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def similarity_case(n_pairs, seed):
    cases = planted_corpus(seed, n_questions=max(2, n_pairs // 30 + 1)).cases
    answers = [c.answer for c in cases]
    batch = GraphBatch(answers)
    rng = np.random.default_rng(seed)
    ia = rng.integers(0, len(answers), n_pairs).astype(np.int64)
    ib = rng.integers(0, len(answers), n_pairs).astype(np.int64)
    params = SimilarityConfig().kernel_params()

    def run(module):
        out = np.empty(n_pairs)
        module.pair_values(batch, batch, ia, ib, params, out)
        return out
    return run


def assignment_case(n_matrices, seed):
    rng = np.random.default_rng(seed)
    mats = [rng.random((int(rng.integers(3, 9)), 10)) for _ in range(n_matrices)]

    def run(module):
        return [np.asarray(module.assign_min(m)).tolist() for m in mats]
    return run


def ranking_case(seed):
    items = planted_ranking_set(seed, n_questions=100)
    groups = {}
    for it in items:
        groups.setdefault(it.question_id, []).append(it)
    labels, ptr, cidrank, scores = [], [0], [], []
    for q in sorted(groups):
        for r, it in enumerate(sorted(groups[q], key=lambda it: it.candidate_id)):
            labels.append(int(it.gold_label))
            cidrank.append(r)
            scores.append(round(it.features["cbr_best_sim"], 1))
        ptr.append(len(labels))
    labels = np.array(labels, dtype=np.int8)
    ptr = np.array(ptr, dtype=np.int64)
    cidrank = np.array(cidrank, dtype=np.int64)
    scores = np.array(scores)
    order = np.argsort(scores, kind="stable").astype(np.int64)
    cand = np.arange(5, len(order) - 5, max(1, len(order) // 32), dtype=np.int64)
    aff = np.arange(len(ptr) - 1, dtype=np.int64)

    def run(module):
        rr = np.asarray(module.question_rr(labels, ptr, cidrank, scores))
        gain, pos = module.scan_split(order, cand, labels, ptr, cidrank, scores, aff, rr)
        return rr.tolist(), gain, pos
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--matrices", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install --no-build-isolation -e .` first")

    cases = [
        (f"integrated similarity, {args.pairs} pairs", similarity_case(args.pairs, args.seed)),
        (f"assignment, {args.matrices} matrices", assignment_case(args.matrices, args.seed)),
        ("rank metric + split scan, 100 questions", ranking_case(args.seed)),
    ]
    print(f"{'kernel':<42}{'python s':>10}{'cython s':>10}{'speedup':>9}  same")
    for name, run in cases:
        t_py, r_py = best_time(lambda: run(_pykernels), args.repeat)
        t_cy, r_cy = best_time(lambda: run(_ckernels), args.repeat)
        same = np.array_equal(r_py, r_cy) if isinstance(r_py, np.ndarray) else r_py == r_cy
        print(f"{name:<42}{t_py:>10.3f}{t_cy:>10.4f}{t_py / t_cy:>8.1f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
