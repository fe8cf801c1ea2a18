# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled Levenshtein alignment kernel.

Same contract as kernels/editdist_py.py: unit-cost alignment of a
hypothesis token-id sequence to a reference, backtrace priority
diagonal > up (deletion) > left (insertion).
"""

from libc.stdlib cimport malloc, free


def edit_counts_ids(hyp, ref):
    """Return (substitutions, deletions, insertions) aligning hyp to ref."""
    cdef Py_ssize_t n = len(ref)
    cdef Py_ssize_t m = len(hyp)
    if n == 0:
        return 0, 0, m
    if m == 0:
        return 0, n, 0

    cdef Py_ssize_t width = m + 1
    cdef long *r = <long *> malloc(n * sizeof(long))
    cdef long *h = <long *> malloc(m * sizeof(long))
    cdef int *cost = <int *> malloc((n + 1) * width * sizeof(int))
    cdef char *move = <char *> malloc((n + 1) * width * sizeof(char))
    if r == NULL or h == NULL or cost == NULL or move == NULL:
        free(r); free(h); free(cost); free(move)
        raise MemoryError()

    cdef Py_ssize_t i, j, row, prev
    cdef int diag, up, left
    cdef long ri
    try:
        for i in range(n):
            r[i] = ref[i]
        for j in range(m):
            h[j] = hyp[j]

        cost[0] = 0
        move[0] = 0
        for j in range(1, width):
            cost[j] = <int> j
            move[j] = 2
        for i in range(1, n + 1):
            cost[i * width] = <int> i
            move[i * width] = 1

        for i in range(1, n + 1):
            ri = r[i - 1]
            row = i * width
            prev = row - width
            for j in range(1, width):
                diag = cost[prev + j - 1] + (0 if h[j - 1] == ri else 1)
                up = cost[prev + j] + 1
                left = cost[row + j - 1] + 1
                if diag <= up and diag <= left:
                    cost[row + j] = diag
                    move[row + j] = 0
                elif up <= left:
                    cost[row + j] = up
                    move[row + j] = 1
                else:
                    cost[row + j] = left
                    move[row + j] = 2

        subs = 0
        dels = 0
        ins = 0
        i = n
        j = m
        while i > 0 or j > 0:
            mv = move[i * width + j]
            if mv == 0:
                if r[i - 1] != h[j - 1]:
                    subs += 1
                i -= 1
                j -= 1
            elif mv == 1:
                dels += 1
                i -= 1
            else:
                ins += 1
                j -= 1
        return subs, dels, ins
    finally:
        free(r)
        free(h)
        free(cost)
        free(move)
