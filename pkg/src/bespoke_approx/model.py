"""Datasets, real-valued models, fixed-point quantization and the golden evaluator.

Quantization scheme
-------------------
* Inputs in ``[0, 1]`` map to ``round(v * (2**u - 1))``.
* Each weighted sum gets a symmetric scale ``s = (2**(c-1) - 1) / max|w|``;
  weights become ``round(w * s)`` and the intercept is stored at the
  accumulator scale ``s * input_scale``.
* Hidden ReLU activations are requantized by one right shift per layer, chosen as
  the smallest shift that maps the largest reachable accumulator value into
  ``h`` unsigned bits, then saturated. The per-neuron hidden scales are folded
  into the real output-layer weights before those are quantized.
* The output layer of an ``MLP-C`` shares one scale across neurons so that the
  argmax compares like with like.

All rounding is to nearest with halves away from zero.
"""

from __future__ import annotations

import csv
import json
import math
import random
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("MLP-C", "MLP-R", "SVM-C", "SVM-R")


class DatasetError(ValueError):
    pass


class ModelError(ValueError):
    pass


def round_half_away(x):
    """Round to nearest, halves away from zero. Works on scalars and arrays."""
    if isinstance(x, np.ndarray):
        return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


# --------------------------------------------------------------------------- data


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    task: str = "classification"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if len(self.labels) != len(self.features):
            raise DatasetError(f"{len(self.labels)} labels for {len(self.features)} samples")
        if len(self.feature_names) != self.features.shape[1]:
            raise DatasetError("feature_names does not match the feature count")
        if np.isnan(self.features).any():
            raise DatasetError("features contain missing values")

    def __len__(self):
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], labels=self.labels[idx])


def load_dataset(path, schema: dict) -> Dataset:
    """Read a delimiter-separated numeric table.

    ``schema`` keys: ``label`` (column name, or index when there is no header),
    ``delimiter`` (default ``,``), ``header`` (default ``True``), ``task``
    (``classification`` or ``regression``), ``classes`` (raw label values mapped to
    ``0..k-1`` in the listed order) and ``features`` (optional subset of columns).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if "label" not in schema:
        raise DatasetError("schema must name the label column")
    delim = schema.get("delimiter", ",")
    has_header = schema.get("header", True)
    task = schema.get("task", "classification")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delim) if r and any(c.strip() for c in r)]
    if has_header:
        if not rows:
            raise DatasetError(f"{path}: empty file")
        header = [h.strip().strip('"') for h in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        width = len(rows[0]) if rows else 0
        header = [str(i) for i in range(width)]
        first_line = 1
    label = str(schema["label"])
    if label not in header:
        raise DatasetError(f"{path}: label column {label!r} not in {header}")
    feat_cols = [str(f) for f in schema.get("features", [h for h in header if h != label])]
    for f in feat_cols:
        if f not in header:
            raise DatasetError(f"{path}: feature column {f!r} not found")
    li = header.index(label)
    fi = [header.index(f) for f in feat_cols]
    X = np.empty((len(rows), len(fi)))
    y = np.empty(len(rows))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r} (line {r + first_line}) has {len(row)} fields, expected {len(header)}")
        try:
            X[r] = [float(row[i]) for i in fi]
            y[r] = float(row[li])
        except ValueError:
            bad = next(c for c in row if not _is_number(c))
            raise DatasetError(f"{path}: row {r} (line {r + first_line}) has non-numeric field {bad.strip()!r}") from None
    if np.isnan(X).any() or np.isnan(y).any():
        raise DatasetError(f"{path}: missing values")
    classes = schema.get("classes")
    if classes is not None:
        lut = {float(c): i for i, c in enumerate(classes)}
        try:
            y = np.array([lut[v] for v in y], dtype=np.int64)
        except KeyError as exc:
            raise DatasetError(f"{path}: label {exc.args[0]} not among declared classes") from None
    elif task == "classification":
        if not np.all(y == np.round(y)) or y.min() < 0:
            raise DatasetError(f"{path}: classification labels must be integers in [0, k)")
        y = y.astype(np.int64)
    return Dataset(X, y, tuple(feat_cols), task)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class Normalizer:
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (X - self.mins) / safe, 0.0)
        return np.clip(out, 0.0, 1.0)


def shuffled_indices(n: int, seed: int) -> list[int]:
    """Seeded Fisher-Yates permutation of ``range(n)``."""
    rng = random.Random(seed)
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def split_normalize(d: Dataset, ratio: float = 0.7, seed: int = 0):
    """Shuffle, split into train/test, min-max normalize with train statistics."""
    if len(d) == 0:
        raise DatasetError("cannot split an empty dataset")
    if not 0 < ratio < 1:
        raise DatasetError(f"split ratio must be in (0, 1), got {ratio}")
    idx = np.array(shuffled_indices(len(d), seed))
    n_train = int(round(ratio * len(d)))
    n_train = min(max(n_train, 1), len(d) - 1) if len(d) > 1 else len(d)
    train, test = d.subset(idx[:n_train]), d.subset(idx[n_train:])
    mins, maxs = train.features.min(axis=0), train.features.max(axis=0)
    for k in np.flatnonzero(maxs == mins):
        warnings.warn(f"feature {d.feature_names[k]!r} is constant on the training split; normalized to 0")
    norm = Normalizer(mins, maxs)
    return (replace(train, features=norm.apply(train.features)),
            replace(test, features=norm.apply(test.features)), norm)


def quantize_inputs(d: Dataset | np.ndarray, u: int) -> np.ndarray:
    X = d.features if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    return round_half_away(X * ((1 << u) - 1))


# --------------------------------------------------------------------------- models


@dataclass(frozen=True)
class FixedPointSpec:
    u: int = 4
    c: int = 8
    h: int = 8

    def __post_init__(self):
        if self.u < 1 or self.c < 2 or self.h < 1:
            raise ModelError(f"invalid fixed-point spec {self}")

    @property
    def wmax(self) -> int:
        return (1 << (self.c - 1)) - 1

    @property
    def wmin(self) -> int:
        return -(1 << (self.c - 1))


@dataclass(frozen=True)
class RealLayer:
    weights: np.ndarray  # (n_out, n_in)
    intercepts: np.ndarray
    activation: str = "none"


@dataclass(frozen=True)
class RealModel:
    kind: str
    n_features: int
    n_classes: int
    layers: tuple[RealLayer, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_real_model(self)


def check_real_model(m: RealModel) -> None:
    if m.kind not in KINDS:
        raise ModelError(f"unknown model kind {m.kind!r}")
    if not m.layers:
        raise ModelError("model has no layers")
    width = m.n_features
    for i, layer in enumerate(m.layers):
        w = np.asarray(layer.weights)
        if w.ndim != 2 or w.shape[1] != width:
            raise ModelError(f"layer {i}: weight shape {w.shape} does not accept {width} inputs")
        if len(layer.intercepts) != w.shape[0]:
            raise ModelError(f"layer {i}: {len(layer.intercepts)} intercepts for {w.shape[0]} outputs")
        if layer.activation not in ("relu", "none"):
            raise ModelError(f"layer {i}: unknown activation {layer.activation!r}")
        width = w.shape[0]
    if m.layers[-1].activation != "none":
        raise ModelError("last layer must have activation 'none'")
    if m.kind.startswith("MLP"):
        if len(m.layers) > 2:
            raise ModelError("only MLPs with at most one hidden layer are supported")
        if m.kind == "MLP-C" and width != m.n_classes:
            raise ModelError(f"MLP-C output width {width} != n_classes {m.n_classes}")
        if m.kind == "MLP-R" and width != 1:
            raise ModelError("MLP-R must have a single output")
    else:
        if len(m.layers) != 1 or m.layers[0].activation != "none":
            raise ModelError("SVM models are a single linear layer")
        if m.kind == "SVM-C":
            k = m.n_classes
            if width != k * (k - 1) // 2 or len(m.pairs) != width:
                raise ModelError(f"SVM-C with {k} classes needs {k * (k - 1) // 2} 1-vs-1 classifiers, got {width}")
            for i, j in m.pairs:
                if not (0 <= i < k and 0 <= j < k and i != j):
                    raise ModelError(f"bad class pair {(i, j)}")
        elif width != 1:
            raise ModelError("SVM-R must have a single classifier")


@dataclass(frozen=True)
class QuantLayer:
    weights: tuple[tuple[int, ...], ...]
    intercepts: tuple[int, ...]
    activation: str = "none"
    shift: int = 0

    @property
    def n_out(self) -> int:
        return len(self.weights)

    @property
    def n_in(self) -> int:
        return len(self.weights[0]) if self.weights else 0


@dataclass(frozen=True)
class QuantizedModel:
    kind: str
    spec: FixedPointSpec
    n_features: int
    n_classes: int
    layers: tuple[QuantLayer, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    out_scales: tuple[float, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for li, layer in enumerate(self.layers):
            for row in layer.weights:
                for w in row:
                    if not self.spec.wmin <= w <= self.spec.wmax:
                        raise ModelError(f"layer {li}: weight {w} outside signed {self.spec.c}-bit range")
            if layer.shift < 0:
                raise ModelError(f"layer {li}: negative shift")

    @property
    def is_classifier(self) -> bool:
        return self.kind.endswith("-C")

    def layer_input_bits(self, li: int) -> int:
        return self.spec.u if li == 0 else self.spec.h

    def weighted_sums(self):
        """Yield ``(layer_index, neuron_index, weights)`` for every weighted sum."""
        for li, layer in enumerate(self.layers):
            for j, row in enumerate(layer.weights):
                yield li, j, row


def _sym_scale(w: np.ndarray, c: int) -> float:
    m = float(np.max(np.abs(w))) if w.size else 0.0
    return ((1 << (c - 1)) - 1) / m if m > 0 else 1.0


# intercepts beyond this cannot come from a sane model and would overflow int64 batches
_INTERCEPT_LIMIT = 1 << 40


def _qint(b: float, scale: float) -> int:
    v = b * scale
    if not math.isfinite(v) or abs(v) >= _INTERCEPT_LIMIT:
        raise ModelError(f"intercept {b!r} at scale {scale!r} is not representable; "
                         "the weighted sum has (near-)zero weights")
    return round_half_away(v)


def _qweights(w: np.ndarray, s: float, spec: FixedPointSpec) -> tuple[int, ...]:
    return tuple(int(v) for v in np.clip(round_half_away(np.asarray(w, dtype=float) * s), spec.wmin, spec.wmax))


def quantize_model(m: RealModel, spec: FixedPointSpec = FixedPointSpec()) -> QuantizedModel:
    sx = (1 << spec.u) - 1
    first = m.layers[0]
    W1 = np.asarray(first.weights, dtype=float)
    b1 = np.asarray(first.intercepts, dtype=float)
    if m.kind.startswith("SVM") or len(m.layers) == 1:
        # one weighted sum per classifier; single-layer MLPs share the output scale for argmax
        if m.kind == "MLP-C":
            scales = [_sym_scale(W1, spec.c)] * W1.shape[0]
        else:
            scales = [_sym_scale(row, spec.c) for row in W1]
        rows = tuple(_qweights(row, s, spec) for row, s in zip(W1, scales))
        ints = tuple(_qint(b, s * sx) for b, s in zip(b1, scales))
        layer = QuantLayer(rows, ints, "none", 0)
        return QuantizedModel(m.kind, spec, m.n_features, m.n_classes, (layer,), tuple(m.pairs),
                              tuple(s * sx for s in scales))

    # MLP with one hidden layer
    s1 = [_sym_scale(row, spec.c) for row in W1]
    rows1 = tuple(_qweights(row, s, spec) for row, s in zip(W1, s1))
    ints1 = tuple(_qint(b, s * sx) for b, s in zip(b1, s1))
    peak = max(max(0, sum(max(w, 0) for w in row) * sx + b) for row, b in zip(rows1, ints1))
    hmax = (1 << spec.h) - 1
    shift = 0
    while (peak >> shift) > hmax:
        shift += 1
    hidden = QuantLayer(rows1, ints1, first.activation, shift)

    out = m.layers[1]
    W2 = np.asarray(out.weights, dtype=float) * (2.0 ** shift) / (np.array(s1) * sx)
    b2 = np.asarray(out.intercepts, dtype=float)
    if m.kind == "MLP-C":
        scales = [_sym_scale(W2, spec.c)] * W2.shape[0]
    else:
        scales = [_sym_scale(row, spec.c) for row in W2]
    rows2 = tuple(_qweights(row, s, spec) for row, s in zip(W2, scales))
    ints2 = tuple(_qint(b, s) for b, s in zip(b2, scales))
    outl = QuantLayer(rows2, ints2, "none", 0)
    return QuantizedModel(m.kind, spec, m.n_features, m.n_classes, (hidden, outl), (), tuple(scales))


# --------------------------------------------------------------------------- golden


@dataclass(frozen=True)
class GoldenResult:
    raw: tuple[int, ...]
    argmax_inputs: tuple[int, ...]
    decision: int


def _argmax(vals: Sequence[int]) -> int:
    best = 0
    for i in range(1, len(vals)):
        if vals[i] > vals[best]:
            best = i
    return best


def golden_infer(q: QuantizedModel, x: Sequence[int]) -> GoldenResult:
    """Exact integer inference for one input vector (plain Python integers)."""
    if len(x) != q.n_features:
        raise ModelError(f"input arity {len(x)} != model arity {q.n_features}")
    umax = (1 << q.spec.u) - 1
    vals = [int(v) for v in x]
    for v in vals:
        if not 0 <= v <= umax:
            raise ModelError(f"input {v} does not fit {q.spec.u} unsigned bits")
    hmax = (1 << q.spec.h) - 1
    for layer in q.layers:
        sums = [sum(w * v for w, v in zip(row, vals)) + b for row, b in zip(layer.weights, layer.intercepts)]
        if layer.activation == "relu":
            vals = [min(max(s, 0) >> layer.shift, hmax) for s in sums]
        else:
            vals = sums
    raw = tuple(vals)
    if q.kind == "SVM-C":
        votes = [0] * q.n_classes
        for (i, j), s in zip(q.pairs, raw):
            votes[i if s >= 0 else j] += 1
        return GoldenResult(raw, tuple(votes), _argmax(votes))
    if q.kind == "MLP-C":
        return GoldenResult(raw, raw, _argmax(raw))
    return GoldenResult(raw, (), raw[0])


def golden_batch(q: QuantizedModel, X: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised integer inference over rows of ``X``.

    Returns ``raw`` (n, outputs), ``argmax_inputs`` (n, k) for classifiers and
    ``decision`` (n,).
    """
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != q.n_features:
        raise ModelError(f"input arity {X.shape[-1]} != model arity {q.n_features}")
    hmax = (1 << q.spec.h) - 1
    vals = X
    for layer in q.layers:
        W = np.array(layer.weights, dtype=np.int64)
        b = np.array(layer.intercepts, dtype=np.int64)
        sums = vals @ W.T + b
        if layer.activation == "relu":
            vals = np.minimum(np.maximum(sums, 0) >> layer.shift, hmax)
        else:
            vals = sums
    out = {"raw": vals}
    if q.kind == "SVM-C":
        votes = np.zeros((len(X), q.n_classes), dtype=np.int64)
        for c, (i, j) in enumerate(q.pairs):
            pos = vals[:, c] >= 0
            votes[:, i] += pos
            votes[:, j] += ~pos
        out["argmax_inputs"] = votes
        out["decision"] = np.argmax(votes, axis=1)
    elif q.kind == "MLP-C":
        out["argmax_inputs"] = vals
        out["decision"] = np.argmax(vals, axis=1)
    else:
        out["decision"] = vals[:, 0]
    return out


def predictions(q: QuantizedModel, decision: np.ndarray) -> np.ndarray:
    """Class index for classifiers; dequantized value rounded to an integer label for regressors."""
    decision = np.asarray(decision)
    if q.is_classifier:
        return decision
    return round_half_away(decision.astype(float) / q.out_scales[0])


def accuracy(q: QuantizedModel, decision: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    return float(np.mean(predictions(q, decision) == np.round(labels).astype(np.int64)))


# --------------------------------------------------------------------------- files


def real_model_from_dict(d: dict) -> RealModel:
    try:
        kind = d["kind"]
        if kind not in KINDS:
            raise ModelError(f"field 'kind': unknown model kind {kind!r}")
        n_classes = int(d.get("n_classes", 1))
        if kind.startswith("MLP"):
            layers = tuple(RealLayer(np.array(L["weights"], dtype=float), np.array(L["intercepts"], dtype=float),
                                     L.get("activation", "none")) for L in d["layers"])
            pairs = ()
        else:
            cl = d["classifiers"]
            W = np.array([c["weights"] for c in cl], dtype=float)
            b = np.array([c["intercept"] for c in cl], dtype=float)
            layers = (RealLayer(W, b, "none"),)
            pairs = tuple(tuple(int(v) for v in c["classes"]) for c in cl) if kind == "SVM-C" else ()
        n_features = int(d.get("n_features", layers[0].weights.shape[1]))
    except KeyError as exc:
        raise ModelError(f"model file is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"model file has a malformed field ({exc})") from None
    return RealModel(kind, n_features, n_classes, layers, pairs, dict(d.get("meta", {})))


def real_model_to_dict(m: RealModel) -> dict:
    d = {"kind": m.kind, "n_features": m.n_features, "n_classes": m.n_classes, "meta": m.meta}
    if m.kind.startswith("MLP"):
        d["layers"] = [{"weights": np.asarray(L.weights).tolist(), "intercepts": np.asarray(L.intercepts).tolist(),
                        "activation": L.activation} for L in m.layers]
    else:
        L = m.layers[0]
        d["classifiers"] = []
        for i, (row, b) in enumerate(zip(np.asarray(L.weights).tolist(), np.asarray(L.intercepts).tolist())):
            c = {"weights": row, "intercept": b}
            if m.kind == "SVM-C":
                c["classes"] = list(m.pairs[i])
            d["classifiers"].append(c)
    return d


def load_model(path) -> RealModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return real_model_from_dict(d)


def quantized_to_dict(q: QuantizedModel) -> dict:
    return {
        "format": "bespoke-quantized",
        "kind": q.kind,
        "spec": {"u": q.spec.u, "c": q.spec.c, "h": q.spec.h},
        "n_features": q.n_features,
        "n_classes": q.n_classes,
        "layers": [{"weights": [list(r) for r in L.weights], "intercepts": list(L.intercepts),
                    "activation": L.activation, "shift": L.shift} for L in q.layers],
        "pairs": [list(p) for p in q.pairs],
        "out_scales": list(q.out_scales),
        "provenance": q.provenance,
    }


def quantized_from_dict(d: dict) -> QuantizedModel:
    try:
        spec = FixedPointSpec(**{k: int(v) for k, v in d["spec"].items()})
        layers = tuple(QuantLayer(tuple(tuple(int(w) for w in r) for r in L["weights"]),
                                  tuple(int(b) for b in L["intercepts"]), L["activation"], int(L["shift"]))
                       for L in d["layers"])
        return QuantizedModel(d["kind"], spec, int(d["n_features"]), int(d["n_classes"]), layers,
                              tuple(tuple(int(v) for v in p) for p in d.get("pairs", [])),
                              tuple(float(s) for s in d.get("out_scales", [])), dict(d.get("provenance", {})))
    except KeyError as exc:
        raise ModelError(f"quantized model is missing field {exc.args[0]!r}") from None


def dumps_quantized(q: QuantizedModel) -> str:
    return json.dumps(quantized_to_dict(q), sort_keys=True, indent=1) + "\n"


def save_quantized(q: QuantizedModel, path) -> None:
    Path(path).write_text(dumps_quantized(q))


def load_quantized(path) -> QuantizedModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return quantized_from_dict(d)
