"""The four front-end classifiers operating on raw preprocessed windows.

Kinds and their pinned parameters:
  knn: five neighbors, euclidean distance, distance weights
  rf : 50 trees, Gini impurity, sqrt(d) features per split, bootstrap
  mlp: one hidden layer of 100 relu units, adam lr 0.001, batch 200,
       200 epochs, no regularization
  svm: RBF kernel, C = 1, sequential minimal optimization, tol 1e-3,
       kernel width from the 1/(d * Var) heuristic

Features are the raw window values; no extra standardization is applied.
All fits are deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import APNEIC, NON_APNEIC, Window, labels_of, windows_to_matrix
from .nn import OptimizerState, optimizer_step

KINDS = ("knn", "rf", "mlp", "svm")

DEFAULT_PARAMS = {
    "knn": {"n_neighbors": 5, "metric": "euclidean", "weights": "distance"},
    "rf": {
        "n_trees": 50,
        "criterion": "gini",
        "max_features": "sqrt",
        "max_depth": None,
        "min_samples_split": 2,
        "bootstrap": True,
    },
    "mlp": {
        "hidden_units": 100,
        "activation": "relu",
        "optimizer": "adam",
        "learning_rate": 0.001,
        "batch_size": 200,
        "epochs": 200,
    },
    "svm": {"kernel": "rbf", "c": 1.0, "gamma": "scale", "tol": 1e-3, "max_passes": 5},
}


@dataclass
class ClassifierSpec:
    """Classifier kind plus parameter overrides and a seed."""

    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")

    def resolved(self) -> dict:
        return {**DEFAULT_PARAMS[self.kind], **self.params}


def default_classifier_set(seed: int = 0) -> list[ClassifierSpec]:
    return [ClassifierSpec(kind, seed=seed) for kind in KINDS]


def _as_xy(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    x = windows_to_matrix(windows)
    y = np.array([1.0 if l == APNEIC else 0.0 for l in labels_of(windows)])
    return x, y


def _check_training_set(y: np.ndarray) -> None:
    if len(np.unique(y)) < 2:
        raise ValueError("training set holds a single class")


def fit(spec: ClassifierSpec, windows: list[Window]):
    """Train one classifier; returns an object with predict/predict_score."""
    x, y = _as_xy(windows)
    _check_training_set(y)
    params = spec.resolved()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed])))
    if spec.kind == "knn":
        return KnnClassifier(x, y, params)
    if spec.kind == "rf":
        return ForestClassifier(x, y, params, rng)
    if spec.kind == "mlp":
        return MlpClassifier(x, y, params, rng)
    return SvmClassifier(x, y, params, rng)


def predict(clf, windows: list[Window]) -> list[str]:
    x = windows_to_matrix(windows)
    if x.shape[1] != clf.n_features:
        raise ValueError(
            f"window length {x.shape[1]} does not match trained length {clf.n_features}")
    return [APNEIC if p else NON_APNEIC for p in clf.predict_mask(x)]


def predict_score(clf, windows: list[Window]) -> np.ndarray:
    """Real-valued apneic score per window (used for AUROC)."""
    x = windows_to_matrix(windows)
    if x.shape[1] != clf.n_features:
        raise ValueError(
            f"window length {x.shape[1]} does not match trained length {clf.n_features}")
    return clf.score(x)


def evaluate(clf, windows: list[Window]):
    """Confusion matrix of the classifier against the windows' labels."""
    from .metrics import ConfusionMatrix

    preds = predict(clf, windows)
    truth = labels_of(windows)
    tp = sum(1 for p, t in zip(preds, truth) if p == APNEIC and t == APNEIC)
    tn = sum(1 for p, t in zip(preds, truth) if p == NON_APNEIC and t == NON_APNEIC)
    fp = sum(1 for p, t in zip(preds, truth) if p == APNEIC and t == NON_APNEIC)
    fn = sum(1 for p, t in zip(preds, truth) if p == NON_APNEIC and t == APNEIC)
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def _sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d2, 0.0)


class KnnClassifier:
    """Lazy learner: stores the training set, votes by inverse distance.

    A zero-distance neighbor short-circuits to its own label; vote ties fall
    back to the nearest neighbor's label.
    """

    kind = "knn"

    def __init__(self, x: np.ndarray, y: np.ndarray, params: dict):
        self.x = x
        self.y = y
        self.k = params["n_neighbors"]
        self.params = params

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def effective_params(self) -> dict:
        return dict(self.params)

    def _vote(self, dist_row: np.ndarray) -> tuple[bool, float]:
        order = np.argsort(dist_row, kind="stable")[: self.k]
        d = dist_row[order]
        if d[0] == 0.0:
            lbl = self.y[order[0]]
            return bool(lbl), float(lbl)
        w = 1.0 / d
        pos = w[self.y[order] == 1.0].sum()
        neg = w[self.y[order] == 0.0].sum()
        if pos == neg:
            return bool(self.y[order[0]]), pos / (pos + neg)
        return pos > neg, pos / (pos + neg)

    def predict_mask(self, x: np.ndarray) -> np.ndarray:
        dist = np.sqrt(_sq_distances(x, self.x))
        return np.array([self._vote(row)[0] for row in dist])

    def score(self, x: np.ndarray) -> np.ndarray:
        dist = np.sqrt(_sq_distances(x, self.x))
        return np.array([self._vote(row)[1] for row in dist])


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, label=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.label = label


def _gini_best_split(x, y, feature_idx):
    """Best (feature, threshold, impurity decrease) over candidate features."""
    n = len(y)
    total_pos = y.sum()
    parent_gini = 1.0 - (total_pos / n) ** 2 - ((n - total_pos) / n) ** 2
    best = (None, 0.0, 0.0)
    for f in feature_idx:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        pos_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        cut = xs[:-1] < xs[1:]  # split only between distinct values
        if not cut.any():
            continue
        n_right = n - n_left
        pos_right = total_pos - pos_left
        gini_left = 1.0 - (pos_left / n_left) ** 2 - ((n_left - pos_left) / n_left) ** 2
        gini_right = (
            1.0 - (pos_right / n_right) ** 2 - ((n_right - pos_right) / n_right) ** 2
        )
        weighted = (n_left * gini_left + n_right * gini_right) / n
        weighted[~cut] = np.inf
        k = int(np.argmin(weighted))
        gain = parent_gini - weighted[k]
        if gain > best[2]:
            best = (f, (xs[k] + xs[k + 1]) / 2.0, gain)
    return best


def _build_tree(x, y, params, rng, depth=0):
    n, d = x.shape
    n_pos = y.sum()
    # majority label; exact tie breaks to non-apneic
    majority = n_pos > n - n_pos
    max_depth = params["max_depth"]
    if (
        n_pos == 0
        or n_pos == n
        or n < params["min_samples_split"]
        or (max_depth is not None and depth >= max_depth)
    ):
        return _TreeNode(label=bool(majority))
    m = max(1, int(np.sqrt(d)))
    feature_idx = rng.choice(d, size=m, replace=False)
    f, thr, gain = _gini_best_split(x, y, feature_idx)
    if f is None or gain <= 0.0:
        return _TreeNode(label=bool(majority))
    mask = x[:, f] <= thr
    left = _build_tree(x[mask], y[mask], params, rng, depth + 1)
    right = _build_tree(x[~mask], y[~mask], params, rng, depth + 1)
    return _TreeNode(feature=f, threshold=thr, left=left, right=right)


def _tree_predict(node: _TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.zeros(len(x), dtype=bool)
    stack = [(node, np.arange(len(x)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd.label is not None:
            out[idx] = nd.label
            continue
        mask = x[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


class ForestClassifier:
    """Bagged Gini trees; prediction is the majority vote of the trees."""

    kind = "rf"

    def __init__(self, x: np.ndarray, y: np.ndarray, params: dict, rng):
        self.params = params
        self.n_features = x.shape[1]
        self.trees = []
        n = len(x)
        for _ in range(params["n_trees"]):
            if params["bootstrap"]:
                idx = rng.integers(0, n, size=n)
                self.trees.append(_build_tree(x[idx], y[idx], params, rng))
            else:
                self.trees.append(_build_tree(x, y, params, rng))

    def effective_params(self) -> dict:
        return dict(self.params)

    def tree_votes(self, x: np.ndarray) -> np.ndarray:
        """(n_trees, n_samples) boolean apneic votes."""
        return np.stack([_tree_predict(t, x) for t in self.trees])

    def predict_mask(self, x: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(x).sum(axis=0)
        # strict majority: a tied vote predicts the non-apneic majority class
        return votes > len(self.trees) - votes

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.tree_votes(x).mean(axis=0)


class MlpClassifier:
    """One hidden relu layer, sigmoid output, adam on minibatch cross-entropy."""

    kind = "mlp"

    def __init__(self, x: np.ndarray, y: np.ndarray, params: dict, rng):
        self.params = params
        self.n_features = x.shape[1]
        hidden = params["hidden_units"]
        limit1 = np.sqrt(6.0 / (x.shape[1] + hidden))
        limit2 = np.sqrt(6.0 / (hidden + 1))
        self.w1 = Tensor(rng.uniform(-limit1, limit1, (x.shape[1], hidden)),
                         requires_grad=True)
        self.b1 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w2 = Tensor(rng.uniform(-limit2, limit2, (hidden, 1)), requires_grad=True)
        self.b2 = Tensor(np.zeros(1), requires_grad=True)
        self.loss_history: list[float] = []
        self._train(x, y, rng)

    def _forward(self, x: np.ndarray) -> Tensor:
        h = ad.relu(ad.add(ad.matmul(Tensor(x), self.w1), self.b1))
        return ad.sigmoid(ad.add(ad.matmul(h, self.w2), self.b2))

    def _train(self, x: np.ndarray, y: np.ndarray, rng):
        opt = OptimizerState("adam", self.params["learning_rate"])
        tensors = [self.w1, self.b1, self.w2, self.b2]
        batch = min(self.params["batch_size"], len(x))
        for _ in range(self.params["epochs"]):
            order = rng.permutation(len(x))
            total = 0.0
            count = 0
            for start in range(0, len(x) - batch + 1, batch):
                idx = order[start : start + batch]
                out = self._forward(x[idx])
                loss = ad.mean(ad.bce(out, y[idx].reshape(-1, 1)))
                for p in tensors:
                    p.zero_grad()
                loss.backward()
                optimizer_step(opt, tensors)
                total += float(loss.data)
                count += 1
            self.loss_history.append(total / count)

    def effective_params(self) -> dict:
        return dict(self.params)

    def score(self, x: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            return self._forward(x).data.ravel()

    def predict_mask(self, x: np.ndarray) -> np.ndarray:
        return self.score(x) >= 0.5


class SvmClassifier:
    """RBF-kernel SVM trained by simplified sequential minimal optimization.

    Kernel width follows the 1/(d * Var) heuristic on the training matrix.
    Optimization sweeps all points, updating a random partner alpha per KKT
    violator, and stops after max_passes consecutive sweeps with no change.
    """

    kind = "svm"
    MAX_SWEEPS = 500  # hard stop against pathological non-convergence

    def __init__(self, x: np.ndarray, y01: np.ndarray, params: dict, rng):
        self.params = params
        self.x = x
        self.y = np.where(y01 == 1.0, 1.0, -1.0)
        self.n_features = x.shape[1]
        var = x.var()
        self.gamma = 1.0 / (x.shape[1] * var) if var > 0 else 1.0
        self._smo(params["c"], params["tol"], params["max_passes"], rng)

    def _kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.exp(-self.gamma * _sq_distances(a, b))

    def _smo(self, c: float, tol: float, max_passes: int, rng):
        n = len(self.x)
        k = self._kernel(self.x, self.x)
        alpha = np.zeros(n)
        self._state = {"k": k, "alpha": alpha, "b": 0.0, "f": np.zeros(n), "c": c}
        passes = 0
        sweeps = 0
        while passes < max_passes and sweeps < self.MAX_SWEEPS:
            changed = 0
            sweeps += 1
            for i in range(n):
                st = self._state
                e_i = st["f"][i] + st["b"] - self.y[i]
                r_i = e_i * self.y[i]
                if not ((r_i < -tol and alpha[i] < c) or (r_i > tol and alpha[i] > 0)):
                    continue
                # random partner first, then a full seeded scan if it stalls
                j = int(rng.integers(0, n - 1))
                if j >= i:
                    j += 1
                if self._try_pair(i, j):
                    changed += 1
                    continue
                for j in rng.permutation(n):
                    if j != i and self._try_pair(i, int(j)):
                        changed += 1
                        break
            passes = passes + 1 if changed == 0 else 0
        self.b = self._state["b"]
        del self._state
        self.alpha = alpha
        support = alpha > 1e-12
        self.support_x = self.x[support]
        self.support_coef = (alpha * self.y)[support]

    def _try_pair(self, i: int, j: int) -> bool:
        """One SMO pair update; returns whether the alphas moved."""
        st = self._state
        k, alpha, c = st["k"], st["alpha"], st["c"]
        e_i = st["f"][i] + st["b"] - self.y[i]
        e_j = st["f"][j] + st["b"] - self.y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if self.y[i] == self.y[j]:
            lo, hi = max(0.0, ai_old + aj_old - c), min(c, ai_old + aj_old)
        else:
            lo, hi = max(0.0, aj_old - ai_old), min(c, c + aj_old - ai_old)
        if lo == hi:
            return False
        eta = 2.0 * k[i, j] - k[i, i] - k[j, j]
        if eta >= 0:
            return False
        aj = aj_old - self.y[j] * (e_i - e_j) / eta
        aj = min(hi, max(lo, aj))
        if abs(aj - aj_old) < 1e-5:
            return False
        ai = ai_old + self.y[i] * self.y[j] * (aj_old - aj)
        alpha[i], alpha[j] = ai, aj
        st["f"] += (ai - ai_old) * self.y[i] * k[i] + (aj - aj_old) * self.y[j] * k[j]
        b1 = st["b"] - e_i - self.y[i] * (ai - ai_old) * k[i, i] \
            - self.y[j] * (aj - aj_old) * k[i, j]
        b2 = st["b"] - e_j - self.y[i] * (ai - ai_old) * k[i, j] \
            - self.y[j] * (aj - aj_old) * k[j, j]
        if 0 < ai < c:
            st["b"] = b1
        elif 0 < aj < c:
            st["b"] = b2
        else:
            st["b"] = (b1 + b2) / 2.0
        return True

    def effective_params(self) -> dict:
        return {**self.params, "gamma_value": self.gamma}

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        if len(self.support_x) == 0:
            return np.full(len(x), self.b)
        return self._kernel(x, self.support_x) @ self.support_coef + self.b

    def kkt_fraction(self, tol: float | None = None) -> float:
        """Fraction of training points satisfying the KKT conditions."""
        tol = self.params["tol"] if tol is None else tol
        c = self.params["c"]
        margins = self.y * self.decision_function(self.x)
        ok = np.zeros(len(self.x), dtype=bool)
        free = (self.alpha > 1e-8) & (self.alpha < c - 1e-8)
        ok[self.alpha <= 1e-8] = margins[self.alpha <= 1e-8] >= 1.0 - tol
        ok[free] = np.abs(margins[free] - 1.0) <= tol
        ok[self.alpha >= c - 1e-8] = margins[self.alpha >= c - 1e-8] <= 1.0 + tol
        return float(ok.mean())

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.decision_function(x)

    def predict_mask(self, x: np.ndarray) -> np.ndarray:
        return self.decision_function(x) >= 0.0


def _tree_to_doc(node: _TreeNode):
    if node.label is not None:
        return {"label": bool(node.label)}
    return {
        "feature": int(node.feature),
        "threshold": float(node.threshold),
        "left": _tree_to_doc(node.left),
        "right": _tree_to_doc(node.right),
    }


def _tree_from_doc(doc) -> _TreeNode:
    if "label" in doc:
        return _TreeNode(label=doc["label"])
    return _TreeNode(
        feature=doc["feature"],
        threshold=doc["threshold"],
        left=_tree_from_doc(doc["left"]),
        right=_tree_from_doc(doc["right"]),
    )


def classifier_to_doc(clf) -> dict:
    """Serialize a trained classifier (kind tag plus learned state)."""
    doc = {"kind": clf.kind, "params": clf.effective_params()}
    if clf.kind == "knn":
        doc["x"] = clf.x.tolist()
        doc["y"] = clf.y.tolist()
    elif clf.kind == "rf":
        doc["n_features"] = clf.n_features
        doc["trees"] = [_tree_to_doc(t) for t in clf.trees]
    elif clf.kind == "mlp":
        doc["w1"] = clf.w1.data.tolist()
        doc["b1"] = clf.b1.data.tolist()
        doc["w2"] = clf.w2.data.tolist()
        doc["b2"] = clf.b2.data.tolist()
    else:
        doc["support_x"] = clf.support_x.tolist()
        doc["support_coef"] = clf.support_coef.tolist()
        doc["bias"] = clf.b
        doc["gamma"] = clf.gamma
        doc["n_features"] = clf.n_features
    return doc


def classifier_from_doc(doc: dict):
    """Rebuild a trained classifier from its serialized state."""
    kind = doc["kind"]
    if kind == "knn":
        return KnnClassifier(
            np.asarray(doc["x"]), np.asarray(doc["y"]),
            {k: v for k, v in doc["params"].items()})
    if kind == "rf":
        clf = ForestClassifier.__new__(ForestClassifier)
        clf.params = {k: v for k, v in doc["params"].items()}
        clf.n_features = doc["n_features"]
        clf.trees = [_tree_from_doc(t) for t in doc["trees"]]
        return clf
    if kind == "mlp":
        clf = MlpClassifier.__new__(MlpClassifier)
        clf.params = {k: v for k, v in doc["params"].items()}
        clf.w1 = Tensor(np.asarray(doc["w1"]), requires_grad=True)
        clf.b1 = Tensor(np.asarray(doc["b1"]), requires_grad=True)
        clf.w2 = Tensor(np.asarray(doc["w2"]), requires_grad=True)
        clf.b2 = Tensor(np.asarray(doc["b2"]), requires_grad=True)
        clf.n_features = clf.w1.data.shape[0]
        clf.loss_history = []
        return clf
    if kind == "svm":
        clf = SvmClassifier.__new__(SvmClassifier)
        params = {k: v for k, v in doc["params"].items()}
        params.pop("gamma_value", None)
        clf.params = params
        clf.support_x = np.asarray(doc["support_x"])
        clf.support_coef = np.asarray(doc["support_coef"])
        clf.b = doc["bias"]
        clf.gamma = doc["gamma"]
        clf.n_features = doc["n_features"]
        clf.alpha = np.abs(clf.support_coef)
        clf.x = clf.support_x
        clf.y = np.sign(clf.support_coef) if len(clf.support_coef) else np.array([])
        return clf
    raise ValueError(f"unknown classifier kind {kind!r}")
