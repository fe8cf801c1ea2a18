"""Pure-Python Levenshtein alignment kernel.

Fallback used when the compiled extension is unavailable. Must stay
behaviourally identical to ``_editdist.pyx``: minimal unit-cost alignment
with the backtrace preferring diagonal, then up (deletion), then left
(insertion), so substitution/deletion/insertion counts are deterministic.
"""


def edit_counts_ids(hyp, ref):
    """Align ``hyp`` to ``ref`` (sequences of hashable token ids).

    Returns (substitutions, deletions, insertions). Deletions are reference
    tokens missing from the hypothesis; insertions are extra hypothesis
    tokens.
    """
    n = len(ref)
    m = len(hyp)
    if n == 0:
        return 0, 0, m
    if m == 0:
        return 0, n, 0

    width = m + 1
    # cost matrix and move matrix, flattened; moves: 0=diag, 1=up, 2=left
    cost = [0] * ((n + 1) * width)
    move = [0] * ((n + 1) * width)
    for j in range(1, width):
        cost[j] = j
        move[j] = 2
    for i in range(1, n + 1):
        cost[i * width] = i
        move[i * width] = 1

    for i in range(1, n + 1):
        ri = ref[i - 1]
        row = i * width
        prev = row - width
        for j in range(1, width):
            diag = cost[prev + j - 1] + (0 if hyp[j - 1] == ri else 1)
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

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        mv = move[i * width + j]
        if mv == 0:
            if ref[i - 1] != hyp[j - 1]:
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
