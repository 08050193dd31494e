"""Separable 3-class blobs with an explicit margin certificate."""
import numpy as np

CENTERS = np.array([[0.0, 0.0], [6.0, 0.0], [3.0, 5.2]])


def blobs(seed, per_class=200, radius=1.5):
    rng = np.random.default_rng(seed)
    pts, ys = [], []
    for c, center in enumerate(CENTERS):
        r = radius * np.sqrt(rng.uniform(size=per_class))
        a = rng.uniform(0, 2 * np.pi, size=per_class)
        pts.append(center + np.c_[r * np.cos(a), r * np.sin(a)])
        ys.append(np.full(per_class, c))
    return np.vstack(pts), np.concatenate(ys)


def margin_certificate(X, y):
    """Smallest gap over all pairwise and one-vs-rest splits, measured along
    the direction joining the class center to the other center(s)."""
    gaps = []
    classes = np.unique(y)
    splits = [([a], [b]) for a in classes for b in classes if a < b]
    splits += [([c], [o for o in classes if o != c]) for c in classes]
    for pos, neg in splits:
        P, N = X[np.isin(y, pos)], X[np.isin(y, neg)]
        u = P.mean(axis=0) - N.mean(axis=0)
        u /= np.linalg.norm(u)
        gaps.append((P @ u).min() - (N @ u).max())
    return min(gaps)
