"""Independent reference implementations used as test oracles."""


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def mismatch(x, y):
    return 0 if x == y else 1


def absdiff(x, y):
    return abs(int(x) - int(y))


def brute_force_dtw(a, b, cost=mismatch):
    """Minimum cost over every monotone warping path from (0,0) to the far corner."""
    n, m = len(a), len(b)
    best = None

    def walk(i, j, acc):
        nonlocal best
        acc += cost(a[i], b[j])
        if best is not None and acc >= best:
            return
        if i == n - 1 and j == m - 1:
            best = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0)
    return best


def all_path_costs(a, b, cost=mismatch):
    """Every path's cost with no pruning; small inputs only."""
    n, m = len(a), len(b)
    out = []

    def walk(i, j, acc):
        acc += cost(a[i], b[j])
        if i == n - 1 and j == m - 1:
            out.append(acc)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, acc)

    walk(0, 0, 0)
    return out
