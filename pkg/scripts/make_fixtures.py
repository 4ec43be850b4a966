#!/usr/bin/env python3
"""Regenerate the shipped RedWine-style fixture pack.

Writes into ``src/bespoke_approx/data/redwine/``:

  redwine.csv        synthetic wine-quality table (1599 rows, 11 features)
  mlp_c.json         MLP classifier, topology (11, 2, 6)
  mlp_r.json         MLP regressor, topology (11, 2, 1)
  svm_c.json         linear 1-vs-1 SVM classifier, 15 classifiers
  svm_r.json         linear SVM regressor

The UCI wine tables are not redistributed; the rows are drawn from a seeded
generative model with the same column names, value ranges and label histogram.

Each model file records the split and the quantized train/test accuracy
computed here by a standalone numpy fixed-point evaluator (it does not import
the package's quantizer or golden evaluator).

Requires scikit-learn. Usage:  python scripts/make_fixtures.py
"""

import json
import random
import sys
from pathlib import Path

import numpy as np
from sklearn.neural_network import MLPClassifier, MLPRegressor
from sklearn.svm import LinearSVC, LinearSVR

OUT = Path(__file__).resolve().parents[1] / "src" / "bespoke_approx" / "data" / "redwine"
SEED = 2021
SPLIT = {"ratio": 0.7, "seed": 7}
SPEC = {"u": 4, "c": 8, "h": 8}
CLASSES = [3, 4, 5, 6, 7, 8]
COUNTS = [10, 53, 681, 638, 199, 18]

COLUMNS = [
    # name, mean, std, low, decimals, log-normal
    ("fixed acidity", 8.32, 1.74, 4.6, 1, False),
    ("volatile acidity", 0.53, 0.18, 0.12, 3, False),
    ("citric acid", 0.27, 0.19, 0.0, 2, False),
    ("residual sugar", 2.54, 1.41, 0.9, 1, True),
    ("chlorides", 0.087, 0.047, 0.012, 3, True),
    ("free sulfur dioxide", 15.9, 10.5, 1.0, 0, True),
    ("total sulfur dioxide", 46.5, 32.9, 6.0, 0, True),
    ("density", 0.99675, 0.00189, 0.990, 5, False),
    ("pH", 3.31, 0.154, 2.74, 2, False),
    ("sulphates", 0.66, 0.17, 0.33, 2, True),
    ("alcohol", 10.42, 1.07, 8.4, 1, False),
]


def make_table(rng):
    n = sum(COUNTS)
    d = len(COLUMNS)
    mix = np.eye(d)
    # loosely mimic the acid/density/pH and SO2 couplings of real wine data
    mix[0, 7], mix[0, 8], mix[0, 2] = 0.6, -0.6, 0.6
    mix[5, 6] = 0.65
    mix[10, 7] = -0.45
    mix[1, 2] = -0.5
    z = rng.standard_normal((n, d)) @ mix
    z = (z - z.mean(0)) / z.std(0)
    X = np.empty((n, d))
    for k, (_, mean, std, low, dec, lognormal) in enumerate(COLUMNS):
        if lognormal:
            sigma = np.sqrt(np.log1p((std / mean) ** 2))
            col = np.exp(np.log(mean) - sigma ** 2 / 2 + sigma * z[:, k])
        else:
            col = mean + std * z[:, k]
        X[:, k] = np.round(np.maximum(col, low), dec)
    latent = (0.55 * z[:, 10] - 0.40 * z[:, 1] + 0.30 * z[:, 9] - 0.15 * z[:, 6]
              + 0.10 * z[:, 2] - 0.10 * z[:, 4] + 0.75 * rng.standard_normal(n))
    order = np.argsort(latent, kind="stable")
    y = np.empty(n, dtype=int)
    start = 0
    for label, count in zip(CLASSES, COUNTS):
        y[order[start:start + count]] = label
        start += count
    return X, y


def write_csv(path, X, y):
    names = [c[0] for c in COLUMNS]
    decs = [c[4] for c in COLUMNS]
    lines = [",".join(f'"{c}"' for c in names + ["quality"])]
    for row, label in zip(X, y):
        lines.append(",".join(f"{v:.{dd}f}" for v, dd in zip(row, decs)) + f",{label}")
    path.write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------- split (seeded Fisher-Yates)

def split(n, ratio, seed):
    rng = random.Random(seed)
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    cut = int(round(ratio * n))
    return np.array(idx[:cut]), np.array(idx[cut:])


def normalize(Xtr, Xte):
    lo, hi = Xtr.min(0), Xtr.max(0)
    span = np.where(hi > lo, hi - lo, 1.0)
    f = lambda X: np.clip(np.where(hi > lo, (X - lo) / span, 0.0), 0.0, 1.0)
    return f(Xtr), f(Xte)


# ----------------------------------------------------------------- standalone fixed-point evaluator

def rnd(x):
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def qweights(W, per_row, c):
    top = 2 ** (c - 1) - 1
    W = np.atleast_2d(W)
    if per_row:
        m = np.abs(W).max(axis=1)
    else:
        m = np.full(W.shape[0], np.abs(W).max())
    s = np.where(m > 0, top / np.where(m > 0, m, 1), 1.0)
    return np.clip(rnd(W * s[:, None]), -top - 1, top), s


def evaluate(model, Xn, y):
    """Quantize ``model`` from scratch and return its accuracy on normalized inputs."""
    u, c, h = SPEC["u"], SPEC["c"], SPEC["h"]
    sx = 2 ** u - 1
    Xq = rnd(Xn * sx)
    kind = model["kind"]
    if kind.startswith("SVM"):
        W = np.array([cl["weights"] for cl in model["classifiers"]])
        b = np.array([cl["intercept"] for cl in model["classifiers"]])
        Wq, s = qweights(W, True, c)
        S = Xq @ Wq.T + rnd(b * s * sx)
        if kind == "SVM-R":
            pred = rnd(S[:, 0] / (s[0] * sx))
            return float(np.mean(pred == y))
        votes = np.zeros((len(Xq), model["n_classes"]), dtype=int)
        for k, cl in enumerate(model["classifiers"]):
            i, j = cl["classes"]
            votes[:, i] += S[:, k] >= 0
            votes[:, j] += S[:, k] < 0
        return float(np.mean(votes.argmax(1) == y))
    L1, L2 = model["layers"]
    W1, b1 = np.array(L1["weights"]), np.array(L1["intercepts"])
    W1q, s1 = qweights(W1, True, c)
    b1q = rnd(b1 * s1 * sx)
    peak = max(0, int((np.maximum(W1q, 0).sum(1) * sx + b1q).max()))
    shift = 0
    while peak >> shift > 2 ** h - 1:
        shift += 1
    H = np.minimum(np.maximum(Xq @ W1q.T + b1q, 0) >> shift, 2 ** h - 1)
    W2 = np.array(L2["weights"]) * 2.0 ** shift / (s1 * sx)
    b2 = np.array(L2["intercepts"])
    W2q, s2 = qweights(W2, kind == "MLP-R", c)
    S = H @ W2q.T + rnd(b2 * s2)
    if kind == "MLP-R":
        return float(np.mean(rnd(S[:, 0] / s2[0]) == y))
    return float(np.mean(S.argmax(1) == y))


# ----------------------------------------------------------------- training

def fit_alive(make, X, y, tries=50):
    """First seed whose hidden ReLUs all keep non-negligible weights and fire on some sample."""
    for rs in range(tries):
        m = make(rs).fit(X, y)
        W, b = m.coefs_[0], m.intercepts_[0]
        if np.abs(W).max(axis=0).min() > 0.05 and (np.maximum(X @ W + b, 0) > 0).any(axis=0).all():
            return m
    raise RuntimeError("no seed produced a network without dead hidden units")


def train_models(Xtr, ytr_raw):
    yc = np.searchsorted(CLASSES, ytr_raw)
    k = len(CLASSES)
    models = {}

    mlp = fit_alive(lambda rs: MLPClassifier(hidden_layer_sizes=(2,), activation="relu", max_iter=3000,
                                             random_state=rs, learning_rate_init=0.01), Xtr, yc)
    models["mlp_c"] = {"kind": "MLP-C", "n_features": Xtr.shape[1], "n_classes": k, "layers": [
        {"weights": mlp.coefs_[0].T.tolist(), "intercepts": mlp.intercepts_[0].tolist(), "activation": "relu"},
        {"weights": mlp.coefs_[1].T.tolist(), "intercepts": mlp.intercepts_[1].tolist(), "activation": "none"},
    ]}

    reg = fit_alive(lambda rs: MLPRegressor(hidden_layer_sizes=(2,), activation="relu", max_iter=3000,
                                            random_state=rs, learning_rate_init=0.01), Xtr, ytr_raw)
    models["mlp_r"] = {"kind": "MLP-R", "n_features": Xtr.shape[1], "n_classes": 1, "layers": [
        {"weights": reg.coefs_[0].T.tolist(), "intercepts": reg.intercepts_[0].tolist(), "activation": "relu"},
        {"weights": reg.coefs_[1].T.tolist(), "intercepts": reg.intercepts_[1].tolist(), "activation": "none"},
    ]}

    classifiers = []
    for i in range(k):
        for j in range(i + 1, k):
            m = (yc == i) | (yc == j)
            svc = LinearSVC(C=1.0, max_iter=20000, random_state=0)
            svc.fit(Xtr[m], (yc[m] == i).astype(int))
            classifiers.append({"weights": svc.coef_[0].tolist(), "intercept": float(svc.intercept_[0]),
                                "classes": [i, j]})
    models["svm_c"] = {"kind": "SVM-C", "n_features": Xtr.shape[1], "n_classes": k, "classifiers": classifiers}

    svr = LinearSVR(C=1.0, epsilon=0.0, max_iter=50000, random_state=0, dual="auto")
    svr.fit(Xtr, ytr_raw)
    models["svm_r"] = {"kind": "SVM-R", "n_features": Xtr.shape[1], "n_classes": 1,
                       "classifiers": [{"weights": svr.coef_.tolist(), "intercept": float(svr.intercept_[0])}]}
    return models


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    X, y = make_table(rng)
    write_csv(OUT / "redwine.csv", X, y)

    # re-read what was written so training sees exactly the shipped values
    raw = np.loadtxt(OUT / "redwine.csv", delimiter=",", skiprows=1)
    X, y = raw[:, :-1], raw[:, -1].astype(int)
    tr, te = split(len(X), SPLIT["ratio"], SPLIT["seed"])
    Xtr, Xte = normalize(X[tr], X[te])
    models = train_models(Xtr, y[tr])
    for name, m in models.items():
        classify = m["kind"].endswith("-C")
        schema = {"label": "quality", "task": "classification" if classify else "regression"}
        if classify:
            schema["classes"] = CLASSES
        yt = np.searchsorted(CLASSES, y) if classify else y
        m["meta"] = {
            "dataset": "redwine.csv",
            "schema": schema,
            "split": SPLIT,
            "spec": SPEC,
            "reference": {
                "train_accuracy": evaluate(m, Xtr, yt[tr]),
                "test_accuracy": evaluate(m, Xte, yt[te]),
                "tolerance": 0.0,
                "evaluator": "scripts/make_fixtures.py",
            },
        }
        (OUT / f"{name}.json").write_text(json.dumps(m, indent=1) + "\n")
        print(f"{name}: {m['meta']['reference']}", file=sys.stderr)


if __name__ == "__main__":
    main()
