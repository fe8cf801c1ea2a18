"""Alignment kernel selection: compiled extension if built, else pure Python.

``BACKEND`` reports which implementation is active ("cython" or "python").
``benchmarks/bench_editdist.py`` compares the two directly.
"""

try:
    from alspeech.kernels._editdist import edit_counts_ids

    BACKEND = "cython"
except ImportError:  # extension not built; pure-Python fallback
    from alspeech.kernels.editdist_py import edit_counts_ids

    BACKEND = "python"

__all__ = ["edit_counts_ids", "BACKEND"]
