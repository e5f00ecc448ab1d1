"""Feature-domain clustering (FDC) for pilot selection.

Images are mapped to HSV-derived features, clustered per client with Lloyd
iterations (farthest-point seeding), and the member closest to each
centroid becomes a pilot image.
"""

from dataclasses import dataclass, field

import numpy as np

from .scenario import ClientDataset, pilot_size

__all__ = [
    "ClusterState",
    "PilotSet",
    "rgb_to_hsv",
    "hsv_cone",
    "rgb_to_hsv_features",
    "hsv_histogram_features",
    "FEATURE_MODES",
    "extract_features",
    "cluster_objective",
    "cluster",
    "select_representatives",
    "fdc_sample",
    "random_sample",
    "uniform_sample",
]

MAX_ROUNDS = 300


@dataclass
class ClusterState:
    centroids: np.ndarray  # (m, d)
    labels: np.ndarray  # (n,)
    objective_history: list = field(default_factory=list)
    rounds: int = 0
    converged: bool = False

    def clusters(self) -> list:
        return [np.flatnonzero(self.labels == j) for j in range(len(self.centroids))]


@dataclass
class PilotSet:
    indices: np.ndarray
    centroids: np.ndarray
    assignment: np.ndarray

    def __len__(self):
        return len(self.indices)


def rgb_to_hsv(img) -> np.ndarray:
    """Per-pixel RGB -> HSV with hue scaled to [0, 1); same shape as input."""
    rgb = np.asarray(img, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta > 0, delta, 1.0)
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    # Priority r, g, b when several channels share the maximum.
    h = np.where(
        r == maxc,
        (g - b) / safe,
        np.where(g == maxc, 2.0 + (b - r) / safe, 4.0 + (r - g) / safe),
    )
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, maxc], axis=-1)


def hsv_cone(img) -> np.ndarray:
    """HSV mapped onto the colour cone: ``(s v cos 2 pi h, s v sin 2 pi h, v)``.

    Unlike raw ``(h, s, v)`` this has no jump where hue wraps around and no
    unstable hue for nearly grey pixels.
    """
    hsv = rgb_to_hsv(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    ang = 2.0 * np.pi * h
    return np.stack([s * v * np.cos(ang), s * v * np.sin(ang), v], axis=-1)


def rgb_to_hsv_features(img) -> np.ndarray:
    """Flattened per-pixel ``(h, s, v)`` triples."""
    return rgb_to_hsv(img).reshape(-1)


def hsv_histogram_features(img, bins: int = 16) -> np.ndarray:
    """Normalized per-channel HSV histograms (``3 * bins`` values)."""
    hsv = rgb_to_hsv(img).reshape(-1, 3)
    parts = [np.histogram(hsv[:, c], bins=bins, range=(0.0, 1.0))[0] for c in range(3)]
    return np.concatenate(parts) / hsv.shape[0]


FEATURE_MODES = ("pixels", "hsv", "histogram")


def extract_features(images, mode: str = "pixels") -> np.ndarray:
    """Feature matrix, one row per image.

    ``"pixels"``: per-pixel HSV cone coordinates (see :func:`hsv_cone`);
    ``"hsv"``: raw per-pixel ``(h, s, v)``; ``"histogram"``: per-channel HSV
    histograms.
    """
    if mode == "pixels":
        return np.stack([hsv_cone(im).reshape(-1) for im in images])
    if mode == "hsv":
        return np.stack([rgb_to_hsv_features(im) for im in images])
    if mode == "histogram":
        return np.stack([hsv_histogram_features(im) for im in images])
    raise ValueError(f"unknown feature mode {mode!r}")


def _sq_dists(Y, C):
    out = np.empty((len(Y), len(C)))
    for j, c in enumerate(C):
        out[:, j] = ((Y - c) ** 2).sum(axis=1)
    return out


def cluster_objective(features, centroids, labels) -> float:
    Y = np.asarray(features, dtype=float)
    return float(((Y - centroids[labels]) ** 2).sum())


def _seed_centroids(Y, m, rng, seeding="farthest"):
    """Random first centre, then ``m - 1`` more chosen from distances to the set.

    ``"farthest"`` takes the point farthest from the chosen centres (lowest
    index on ties); ``"dsquared"`` draws with probability proportional to the
    squared distance, as in k-means++.
    """
    if seeding not in ("farthest", "dsquared"):
        raise ValueError(f"unknown seeding {seeding!r}")
    n = len(Y)
    chosen = [int(rng.integers(n))]
    d2 = ((Y - Y[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total <= 0:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        elif seeding == "farthest":
            nxt = int(np.argmax(d2))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((Y - Y[nxt]) ** 2).sum(axis=1))
    return Y[chosen].copy()


def _repair_empty(Y, C, labels, m):
    """Move the farthest point of a multi-member cluster into each empty one."""
    counts = np.bincount(labels, minlength=m)
    for j in np.flatnonzero(counts == 0):
        dist = ((Y - C[labels]) ** 2).sum(axis=1)
        movable = counts[labels] > 1
        dist = np.where(movable, dist, -1.0)
        i = int(np.argmax(dist))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        C[j] = Y[i]
    return labels


def _lloyd(Y, m, rng, max_rounds, seeding):
    C = _seed_centroids(Y, m, rng, seeding)
    labels = None
    history = []
    converged = False
    for _ in range(max_rounds):
        new = np.argmin(_sq_dists(Y, C), axis=1)
        new = _repair_empty(Y, C, new, m)
        if labels is not None and np.array_equal(new, labels):
            converged = True
            break
        labels = new
        for j in range(m):
            C[j] = Y[labels == j].mean(axis=0)
        history.append(cluster_objective(Y, C, labels))
    return ClusterState(C, labels, history, len(history), converged)


def cluster(features, m: int, rng: np.random.Generator, max_rounds: int = MAX_ROUNDS,
            n_init: int = 1, seeding: str = "farthest") -> ClusterState:
    """Lloyd alternation between nearest-centroid assignment and mean update.

    Every cluster stays nonempty. Each run stops once assignments repeat or
    after ``max_rounds``; ``objective_history`` holds the within-cluster sum
    of squares after each round. With ``n_init > 1`` the seeding is repeated
    and the run with the lowest final objective is kept. ``seeding`` picks
    the initial centres (see :func:`_seed_centroids`).
    """
    Y = np.asarray(features, dtype=float)
    n = len(Y)
    if n == 0:
        raise ValueError("cannot cluster an empty feature set")
    if not 1 <= m <= n:
        raise ValueError(f"cluster count must lie in [1, {n}], got {m}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    best = None
    for _ in range(n_init):
        state = _lloyd(Y, m, rng, max_rounds, seeding)
        if best is None or state.objective_history[-1] < best.objective_history[-1]:
            best = state
    return best


def select_representatives(state: ClusterState, features) -> PilotSet:
    """Per cluster, the member nearest the centroid (lowest index on ties)."""
    Y = np.asarray(features, dtype=float)
    C, labels = state.centroids, state.labels
    d = ((Y - C[labels]) ** 2).sum(axis=1)
    picked = []
    for j in range(len(C)):
        members = np.flatnonzero(labels == j)
        if len(members):
            dj = ((Y[members] - C[j]) ** 2).sum(axis=1)
            picked.append(int(members[np.argmin(dj)]))
        else:
            free = np.setdiff1d(np.arange(len(Y)), picked)
            picked.append(int(free[np.argmax(d[free])]))
    return PilotSet(np.asarray(picked, dtype=int), C.copy(), labels.copy())


def fdc_sample(dataset: ClientDataset, rho_k: float, rng: np.random.Generator,
               feature_mode: str = "pixels", n_init: int = 1) -> PilotSet:
    if not 0.0 < rho_k < 1.0:
        raise ValueError("rho_k must lie in (0, 1)")
    m = pilot_size(rho_k, len(dataset))
    Y = extract_features(dataset.images, feature_mode)
    state = cluster(Y, m, rng, n_init=n_init)
    return select_representatives(state, Y)


def random_sample(dataset: ClientDataset, rho_k: float, rng: np.random.Generator) -> np.ndarray:
    m = pilot_size(rho_k, len(dataset))
    return np.sort(rng.choice(len(dataset), size=m, replace=False))


def uniform_sample(dataset: ClientDataset, rho_k: float) -> np.ndarray:
    """Equal-interval sampling in capture order."""
    n = len(dataset)
    m = pilot_size(rho_k, n)
    return np.floor(np.arange(m) * n / m).astype(int)
