"""Gradient-boosted regression trees on pre-binned features.

One engine with two presets:

* ``hist-first-order`` grows trees leaf-wise (best gain first) up to
  ``max_leaves`` with no L2 term, so each leaf takes the mean residual.
* ``newton`` grows every splittable node down to ``max_depth`` and scores
  splits with the regularised second-order gain
  ``GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)``; leaves get ``-G/(H+lam)``.

For squared error the hessian is identically 1, so H is a row count. Features
are binned once, from the training data, into at most ``max_bins``
equal-frequency bins; a split at bin ``b`` sends ``x <= edge[b]`` left.
Gain ties go to the lower feature index, then the lower threshold.
"""
from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgument
from .base import Regressor, register

MODES = ("hist-first-order", "newton")


@dataclass
class GbdtConfig:
    mode: str = "hist-first-order"
    iterations: int = 100
    learning_rate: float | None = None
    max_leaves: int | None = None
    max_depth: int | None = None
    max_bins: int = 255
    min_samples_leaf: int = 20
    l2_reg: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown GBDT mode '{self.mode}'; valid: {', '.join(MODES)}")
        hist = self.mode == "hist-first-order"
        if self.learning_rate is None:
            self.learning_rate = 0.1 if hist else 0.3
        if self.l2_reg is None:
            self.l2_reg = 0.0 if hist else 1.0
        if hist and self.max_leaves is None:
            self.max_leaves = 31
        if not hist and self.max_depth is None:
            self.max_depth = 6
        if self.iterations < 0:
            raise InvalidArgument("iterations must be >= 0")
        if self.learning_rate <= 0 or self.min_samples_leaf < 1 or self.l2_reg < 0:
            raise InvalidArgument("learning_rate, min_samples_leaf must be positive and l2_reg >= 0")
        if not 2 <= self.max_bins <= 255:
            raise InvalidArgument("max_bins must be in 2..255")
        for name in ("max_leaves", "max_depth"):
            v = getattr(self, name)
            if v is not None and v < 1 + (name == "max_leaves"):
                raise InvalidArgument(f"{name} too small")


def bin_edges(column: np.ndarray, max_bins: int) -> np.ndarray:
    """Thresholds separating up to ``max_bins`` equal-frequency bins."""
    uniq = np.unique(column)
    if uniq.size <= max_bins:
        return (uniq[:-1] + uniq[1:]) / 2.0
    pct = np.linspace(0, 100, max_bins + 1)[1:-1]
    return np.unique(np.percentile(column, pct, method="midpoint"))


def apply_bins(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, X[:, j], side="left")
    return out


@dataclass
class Split:
    gain: float
    feature: int
    bin: int


def best_split(Xb: np.ndarray, rows: np.ndarray, g: np.ndarray, h: np.ndarray, n_bins: list[int],
               min_samples_leaf: int, lam: float) -> Split | None:
    """Highest-gain (feature, bin) split of ``rows``, or None if no split gains."""
    gs, hs = g[rows], h[rows]
    G, H, n = gs.sum(), hs.sum(), rows.size
    parent = G * G / (H + lam)
    best = None
    for j, nb in enumerate(n_bins):
        if nb < 2:
            continue
        b = Xb[rows, j]
        GL = np.cumsum(np.bincount(b, weights=gs, minlength=nb))[:-1]
        HL = np.cumsum(np.bincount(b, weights=hs, minlength=nb))[:-1]
        CL = np.cumsum(np.bincount(b, minlength=nb))[:-1]
        valid = (CL >= min_samples_leaf) & (n - CL >= min_samples_leaf)
        if not valid.any():
            continue
        GR, HR = G - GL, H - HL
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent
        gain = np.where(valid, gain, -np.inf)
        t = int(np.argmax(gain))
        if gain[t] > 0 and (best is None or gain[t] > best.gain):
            best = Split(float(gain[t]), j, t)
    return best


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=np.float64))


def grow_tree(Xb, g, h, edges, cfg: GbdtConfig) -> tuple[Tree, np.ndarray]:
    """Grow one tree best-first; returns it with the per-row leaf values."""
    lam = cfg.l2_reg
    n_bins = [e.size + 1 for e in edges]
    feature, threshold, left, right, value = [], [], [], [], []
    leaf_rows: dict[int, np.ndarray] = {}

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(-g[rows].sum() / (h[rows].sum() + lam)))
        leaf_rows[len(feature) - 1] = rows
        return len(feature) - 1

    def splittable(rows, depth):
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            return None
        if rows.size < 2 * cfg.min_samples_leaf:
            return None
        return best_split(Xb, rows, g, h, n_bins, cfg.min_samples_leaf, lam)

    heap = []
    root = new_node(np.arange(Xb.shape[0]))
    s = splittable(leaf_rows[root], 0)
    if s is not None:
        heap.append((-s.gain, root, 0, s))
    n_leaves = 1
    while heap and (cfg.max_leaves is None or n_leaves < cfg.max_leaves):
        _, nid, depth, s = heapq.heappop(heap)
        rows = leaf_rows.pop(nid)
        mask = Xb[rows, s.feature] <= s.bin
        li, ri = new_node(rows[mask]), new_node(rows[~mask])
        feature[nid], threshold[nid] = s.feature, float(edges[s.feature][s.bin])
        left[nid], right[nid] = li, ri
        n_leaves += 1
        for child in (li, ri):
            cs = splittable(leaf_rows[child], depth + 1)
            if cs is not None:
                heapq.heappush(heap, (-cs.gain, child, depth + 1, cs))
    row_values = np.empty(Xb.shape[0])
    for nid, rows in leaf_rows.items():
        row_values[rows] = value[nid]
    tree = Tree(np.asarray(feature, dtype=np.int64), np.asarray(threshold), np.asarray(left, dtype=np.int64),
                np.asarray(right, dtype=np.int64), np.asarray(value))
    return tree, row_values


class _GBDT(Regressor):
    mode = ""

    def __init__(self, config: GbdtConfig | None = None, **overrides):
        super().__init__()
        if config is None:
            config = GbdtConfig(mode=self.mode, **overrides)
        elif overrides:
            raise InvalidArgument("pass either a config or keyword overrides")
        self.config = config
        self.trees: list[Tree] = []
        self.base = 0.0
        self.train_loss: list[float] = []

    def _fit(self, X, y, seed):
        cfg = self.config
        self.edges = [bin_edges(X[:, j], cfg.max_bins) for j in range(X.shape[1])]
        Xb = apply_bins(X, self.edges)
        self.base = float(np.mean(y))
        pred = np.full(y.shape, self.base)
        h = np.ones_like(y)
        self.trees = []
        self.train_loss = [float(np.mean((pred - y) ** 2))]
        for _ in range(cfg.iterations):
            tree, row_values = grow_tree(Xb, pred - y, h, self.edges, cfg)
            tree.value *= cfg.learning_rate
            pred = pred + cfg.learning_rate * row_values
            self.trees.append(tree)
            self.train_loss.append(float(np.mean((pred - y) ** 2)))

    def _predict(self, X):
        pred = np.full(X.shape[0], self.base)
        for tree in self.trees:
            pred = pred + tree.predict(X)
        return pred

    def parameter_count(self) -> int:
        # split nodes carry (feature, threshold); leaves carry a value
        return 1 + sum(int((t.feature >= 0).sum()) * 2 + int((t.feature < 0).sum()) for t in self.trees)

    def _state(self):
        return {"config": asdict(self.config), "base": self.base,
                "edges": [e.tolist() for e in self.edges], "trees": [t.to_json() for t in self.trees]}

    def _load_state(self, state):
        self.config = GbdtConfig(**state["config"])
        self.base = float(state["base"])
        self.edges = [np.asarray(e, dtype=np.float64) for e in state["edges"]]
        self.trees = [Tree.from_json(t) for t in state["trees"]]
        self.train_loss = []


@register
class HistGBDT(_GBDT):
    algorithm = "hist-gbdt"
    mode = "hist-first-order"


@register
class NewtonGBDT(_GBDT):
    algorithm = "newton-gbdt"
    mode = "newton"


def gbdt_fit(X, y, config: GbdtConfig | None = None, seed: int = 0) -> _GBDT:
    config = config or GbdtConfig()
    cls = HistGBDT if config.mode == "hist-first-order" else NewtonGBDT
    return cls(config).fit(X, y, seed)
