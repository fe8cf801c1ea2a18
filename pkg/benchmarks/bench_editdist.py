"""Benchmark the compiled edit-distance kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_editdist.py [--pairs N] [--max-len L]
"""

import argparse
import random
import time

from alspeech.kernels import BACKEND, edit_counts_ids
from alspeech.kernels.editdist_py import edit_counts_ids as py_edit_counts_ids


def make_pairs(n, max_len, vocab, seed=0):
    rng = random.Random(seed)
    pairs = []
    for _ in range(n):
        hyp = [rng.randrange(vocab) for _ in range(rng.randint(0, max_len))]
        ref = [rng.randrange(vocab) for _ in range(rng.randint(0, max_len))]
        pairs.append((hyp, ref))
    return pairs


def bench(fn, pairs, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for hyp, ref in pairs:
            fn(hyp, ref)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=5000)
    ap.add_argument("--max-len", type=int, default=40)
    ap.add_argument("--vocab", type=int, default=50)
    args = ap.parse_args()

    pairs = make_pairs(args.pairs, args.max_len, args.vocab)

    for hyp, ref in pairs[:200]:
        assert edit_counts_ids(hyp, ref) == py_edit_counts_ids(hyp, ref)

    t_active = bench(edit_counts_ids, pairs)
    t_python = bench(py_edit_counts_ids, pairs)

    print(f"active backend: {BACKEND}")
    print(f"{args.pairs} pairs, tokens up to {args.max_len}")
    print(f"  active ({BACKEND}): {t_active:.3f} s "
          f"({args.pairs / t_active:,.0f} pairs/s)")
    print(f"  python fallback:  {t_python:.3f} s "
          f"({args.pairs / t_python:,.0f} pairs/s)")
    if BACKEND == "cython":
        print(f"  speedup: {t_python / t_active:.1f}x")


if __name__ == "__main__":
    main()
