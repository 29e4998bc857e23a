"""Independent reference implementations used as test oracles.

They share no code with the package beyond the category order, favour
clarity over speed, and use exact arithmetic where it matters.
"""

import math
from collections import Counter
from fractions import Fraction

from footprint.categories import CATEGORIES

TIE = 1e-12


# -- propagation -----------------------------------------------------------

def dense_cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    return dot / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))


def brute_force_subspan(counts, labels):
    """counts: account -> {hashtag: n} for one subspan; labels: labeled accounts.

    Returns account -> (category, score) for every active unlabeled account,
    comparing it with every active labeled account over a dense vocabulary.
    """
    active = {a: c for a, c in counts.items() if any(v > 0 for v in c.values())}
    vocab = sorted({h for c in active.values() for h, n in c.items() if n > 0})
    dense = {a: [c.get(h, 0) for h in vocab] for a, c in active.items()}
    labeled = [a for a in active if a in labels]
    out = {}
    if not labeled:
        return None
    for u in active:
        if u in labels:
            continue
        sims = [(dense_cosine(dense[u], dense[v]), labels[v]) for v in labeled]
        best = max(s for s, _ in sims)
        cats = {c for s, c in sims if s >= best - TIE}
        out[u] = (min(cats, key=CATEGORIES.index), best)
    return out


def brute_force_mode(entries):
    """entries: list of (category, score)."""
    freq = Counter(c for c, _ in entries)
    top = max(freq.values())
    tied = [c for c in CATEGORIES if freq.get(c) == top]
    sums = {c: math.fsum(s for cc, s in entries if cc == c) for c in tied}
    best = max(sums.values())
    winner = [c for c in tied if sums[c] >= best - TIE][0]
    return winner, top / len(entries)


# -- trees -----------------------------------------------------------------

def exact_gini(labels):
    n = len(labels)
    return 1 - sum(Fraction(c, n) ** 2 for c in Counter(labels).values())


def exhaustive_tree(rows, labels, n_classes, max_depth=None, min_samples_split=2, depth=0):
    """Recursive CART over every feature and every midpoint, exact Gini.

    Returns nested tuples: ("leaf", counts) or ("split", f, thr, left, right).
    Ties go to the lowest feature index, then the lowest threshold.
    """
    counts = tuple(float(sum(1 for y in labels if y == c)) for c in range(n_classes))
    if (len(set(labels)) <= 1 or (max_depth is not None and depth >= max_depth)
            or len(labels) < min_samples_split):
        return ("leaf", counts)
    best = None
    n = len(labels)
    for f in range(len(rows[0])):
        values = sorted({r[f] for r in rows})
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            if not thr < b:
                thr = a
            left = [y for r, y in zip(rows, labels) if r[f] <= thr]
            right = [y for r, y in zip(rows, labels) if r[f] > thr]
            imp = Fraction(len(left), n) * exact_gini(left) + Fraction(len(right), n) * exact_gini(right)
            if best is None or imp < best[0]:
                best = (imp, f, thr)
    if best is None:
        return ("leaf", counts)
    _, f, thr = best
    L = [(r, y) for r, y in zip(rows, labels) if r[f] <= thr]
    R = [(r, y) for r, y in zip(rows, labels) if r[f] > thr]
    return ("split", f, thr,
            exhaustive_tree([r for r, _ in L], [y for _, y in L], n_classes, max_depth, min_samples_split,
                            depth + 1),
            exhaustive_tree([r for r, _ in R], [y for _, y in R], n_classes, max_depth, min_samples_split,
                            depth + 1))


def tree_as_tuples(node):
    """Convert a package Leaf/Split structure to the oracle's tuple form."""
    if hasattr(node, "counts"):
        return ("leaf", tuple(float(c) for c in node.counts))
    return ("split", node.feature, node.threshold, tree_as_tuples(node.left), tree_as_tuples(node.right))


# -- statistics ------------------------------------------------------------

def exact_pearson(xs, ys):
    """Two-pass Pearson r in exact rational arithmetic (None for a constant input)."""
    xs = [Fraction(x) for x in xs]
    ys = [Fraction(y) for y in ys]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    return float(sxy) / math.sqrt(float(sxx) * float(syy))


def confusion_metrics(matrix):
    """Per-class (precision, recall, f1) and accuracy from a square count matrix, exact."""
    k = len(matrix)
    total = sum(sum(r) for r in matrix)
    out = []
    for c in range(k):
        tp = matrix[c][c]
        fp = sum(matrix[r][c] for r in range(k)) - tp
        fn = sum(matrix[c]) - tp
        p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        out.append((p, r, f))
    acc = Fraction(sum(matrix[c][c] for c in range(k)), total) if total else Fraction(0)
    return out, acc


# -- random propagation fixtures ------------------------------------------

def random_propagation_fixture(rng, max_accounts=10, max_tags=8, max_subspans=3):
    """Tweets for a handful of accounts spread over at most ``max_subspans``
    six-month windows starting 2016-01-01, plus seed labels for some of them.

    Returns (rows, labels, expected) where expected maps each unlabeled account
    with activity to the brute-force (category, confidence, {subspan: (cat, score)}).
    """
    n_acc = rng.randint(2, max_accounts)
    n_tags = rng.randint(1, max_tags)
    n_sub = rng.randint(1, max_subspans)
    tags = [f"h{i}" for i in range(n_tags)]
    accounts = [f"acc{i:02d}" for i in range(n_acc)]
    n_lab = rng.randint(1, n_acc - 1)
    labels = {a: rng.choice(CATEGORIES) for a in accounts[:n_lab]}
    rows = [{"account_id": accounts[0], "timestamp": "2016-01-01T00:00:00Z", "text": "anchor"}]
    counts = [dict() for _ in range(n_sub)]
    for a in accounts:
        for s in range(n_sub):
            if rng.random() < 0.3:
                continue
            for _ in range(rng.randint(1, 4)):
                chosen = rng.sample(tags, rng.randint(1, min(3, n_tags)))
                month = s * 6 + rng.randint(0, 5)
                ts = f"{2016 + month // 12}-{month % 12 + 1:02d}-15T12:00:00Z"
                rows.append({"account_id": a, "timestamp": ts, "text": " ".join("#" + t for t in chosen)})
                bucket = counts[s].setdefault(a, {})
                for t in chosen:
                    bucket[t] = bucket.get(t, 0) + 1
    trails = {}
    for s in range(n_sub):
        res = brute_force_subspan(counts[s], labels)
        if res is None:
            continue
        for a, (cat, score) in res.items():
            trails.setdefault(a, {})[s] = (cat, score)
    expected = {}
    for a, trail in trails.items():
        cat, conf = brute_force_mode(list(trail.values()))
        expected[a] = (cat, conf, trail)
    return rows, labels, expected


def random_tree_fixture(rng, max_samples=12, max_features=3, n_classes=4):
    """Small integer-valued samples (lots of ties) with labels over ``n_classes``."""
    n = rng.randint(2, max_samples)
    d = rng.randint(1, max_features)
    hi = rng.choice([2, 4, 9])
    rows = [tuple(float(rng.randint(0, hi)) for _ in range(d)) for _ in range(n)]
    labels = [rng.randrange(n_classes) for _ in range(n)]
    return rows, labels
