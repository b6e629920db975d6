"""Conv + bidirectional-recurrent fusion classifier, trained from scratch.

One small convolutional stack feeds two parallel branches: the flattened
final feature map, and a bidirectional peephole LSTM that reads the map
row by row.  The recurrent branch emits a "visual memory" vector: the
projected hidden states of the last ``memory_depth`` steps of each
direction, concatenated.  Both branches (optionally dropped out) are
concatenated and classified by a small dense + softmax head.  Training
is plain mini-batch SGD on cross-entropy with analytic gradients
throughout, deterministic for a fixed seed.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import as_rng
from .eho import (
    Continuous,
    Discrete,
    EhoConfig,
    ElephantHerdingOptimizer,
    SearchSpace,
    accuracy_fitness,
)
from .exceptions import DivergenceError
from .layers import (
    ACTIVATIONS,
    POOL_KINDS,
    activation_backward,
    activation_forward,
    conv_backward,
    conv_forward,
    dropout_backward,
    dropout_forward,
    pool_backward,
    pool_forward,
    softmax,
    softmax_cross_entropy,
    uniform_init,
)
from .recurrent import (
    GATE_WEIGHTS,
    init_lstm_params,
    lstm_sequence_backward,
    lstm_sequence_forward,
)

CONV_KERNELS = (3, 5, 7)
CONV_CHANNEL_RANGE = (32, 256)
POOL_SIZES = (2, 3)
MAX_CONV_LAYERS = 5
MAX_HEAD_LAYERS = 2


def bidirectional_memory(xs, params_forward, params_backward, projection, depth):
    """Visual-memory vector from a row sequence.

    Runs the cell over ``xs`` (steps, batch, input_dim) in both
    directions and concatenates the projected hidden states of each
    direction's last ``depth`` steps, most recent first.  Returns
    (memory, ms_forward, ms_backward, caches_forward, caches_backward).
    """
    steps = xs.shape[0]
    if steps < depth:
        raise ValueError(
            f"sequence of {steps} steps is shorter than memory depth {depth}"
        )
    ms_f, caches_f = lstm_sequence_forward(xs, params_forward)
    ms_b, caches_b = lstm_sequence_forward(xs[::-1], params_backward)
    chunks = [ms_f[steps - 1 - k] @ projection.T for k in range(depth)]
    chunks += [ms_b[steps - 1 - k] @ projection.T for k in range(depth)]
    return np.concatenate(chunks, axis=1), ms_f, ms_b, caches_f, caches_b


def fuse_and_classify(conv_features, memory_features, head_weights, head_bias):
    """Concatenate both branches and softmax the linear head."""
    conv_features = np.atleast_2d(conv_features)
    memory_features = np.atleast_2d(memory_features)
    fused = np.concatenate([conv_features, memory_features], axis=1)
    if fused.shape[1] != head_weights.shape[1]:
        raise ValueError(
            f"fused feature length {fused.shape[1]} does not match head input "
            f"dimension {head_weights.shape[1]}"
        )
    return softmax(fused @ head_weights.T + head_bias)


@dataclass
class _Plan:
    """Shapes resolved once per fit from the input size and hyperparameters."""

    conv_shapes: list
    channels: int
    final_h: int
    final_w: int
    t_f_dim: int
    lstm_input_dim: int
    memory_dim: int
    fused_dim: int


class ConvRecurrentClassifier(BaseEstimator, ClassifierMixin):
    """Small conv + bidirectional recurrent classifier with a fused head.

    ``fit`` expects images of identical shape, (n, h, w) float64, and
    arbitrary hashable labels.  Structural hyperparameters are validated
    against the supported ranges: kernels {3,5,7}, channels 32-256,
    pooling {2,3} max/average, at most 5 conv and 2 extra head layers.
    """

    def __init__(
        self,
        conv_layers=1,
        conv_kernel=3,
        conv_channels=32,
        pool_size=2,
        pool_kind="max",
        activation="relu",
        lstm_hidden=24,
        memory_depth=3,
        head_layers=0,
        fcl_neurons=128,
        conv_dropout=0.0,
        lstm_dropout=0.0,
        learning_rate=0.05,
        batch_size=16,
        epochs=30,
        seed=0,
    ):
        self.conv_layers = conv_layers
        self.conv_kernel = conv_kernel
        self.conv_channels = conv_channels
        self.pool_size = pool_size
        self.pool_kind = pool_kind
        self.activation = activation
        self.lstm_hidden = lstm_hidden
        self.memory_depth = memory_depth
        self.head_layers = head_layers
        self.fcl_neurons = fcl_neurons
        self.conv_dropout = conv_dropout
        self.lstm_dropout = lstm_dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    # ---------------------------------------------------------------- setup

    def _check_hyperparams(self):
        p = self
        if not isinstance(p.conv_layers, int) or not 1 <= p.conv_layers <= MAX_CONV_LAYERS:
            raise ValueError(f"conv_layers must be 1..{MAX_CONV_LAYERS}, got {p.conv_layers!r}")
        if p.conv_kernel not in CONV_KERNELS:
            raise ValueError(f"conv_kernel must be one of {CONV_KERNELS}, got {p.conv_kernel!r}")
        lo, hi = CONV_CHANNEL_RANGE
        if not isinstance(p.conv_channels, int) or not lo <= p.conv_channels <= hi:
            raise ValueError(f"conv_channels must be {lo}..{hi}, got {p.conv_channels!r}")
        if p.pool_size not in POOL_SIZES:
            raise ValueError(f"pool_size must be one of {POOL_SIZES}, got {p.pool_size!r}")
        if p.pool_kind not in POOL_KINDS:
            raise ValueError(f"pool_kind must be one of {POOL_KINDS}, got {p.pool_kind!r}")
        if p.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {p.activation!r}")
        if not isinstance(p.lstm_hidden, int) or p.lstm_hidden < 1:
            raise ValueError(f"lstm_hidden must be a positive integer, got {p.lstm_hidden!r}")
        if not isinstance(p.memory_depth, int) or p.memory_depth < 1:
            raise ValueError(f"memory_depth must be a positive integer, got {p.memory_depth!r}")
        if not isinstance(p.head_layers, int) or not 0 <= p.head_layers <= MAX_HEAD_LAYERS:
            raise ValueError(f"head_layers must be 0..{MAX_HEAD_LAYERS}, got {p.head_layers!r}")
        if not isinstance(p.fcl_neurons, int) or p.fcl_neurons < 1:
            raise ValueError(f"fcl_neurons must be a positive integer, got {p.fcl_neurons!r}")
        for name in ("conv_dropout", "lstm_dropout"):
            value = getattr(p, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if not (np.isfinite(p.learning_rate) and p.learning_rate >= 0.0):
            raise ValueError(f"learning_rate must be >= 0, got {p.learning_rate!r}")
        if not isinstance(p.batch_size, int) or p.batch_size < 1:
            raise ValueError(f"batch_size must be a positive integer, got {p.batch_size!r}")
        if not isinstance(p.epochs, int) or p.epochs < 0:
            raise ValueError(f"epochs must be a non-negative integer, got {p.epochs!r}")

    def _plan(self, height, width):
        h, w = height, width
        shapes = []
        for layer in range(self.conv_layers):
            if h < self.conv_kernel or w < self.conv_kernel:
                raise ValueError(
                    f"conv layer {layer}: input {h}x{w} is smaller than the "
                    f"{self.conv_kernel}x{self.conv_kernel} kernel"
                )
            h, w = h - self.conv_kernel + 1, w - self.conv_kernel + 1
            if h < self.pool_size or w < self.pool_size:
                raise ValueError(
                    f"conv layer {layer}: map {h}x{w} is smaller than the "
                    f"{self.pool_size}x{self.pool_size} pool window"
                )
            h, w = h // self.pool_size, w // self.pool_size
            shapes.append((h, w))
        if h < self.memory_depth:
            raise ValueError(
                f"final feature map has {h} rows, fewer than memory_depth "
                f"{self.memory_depth}; use fewer conv layers or smaller pooling"
            )
        c = self.conv_channels
        return _Plan(
            conv_shapes=shapes,
            channels=c,
            final_h=h,
            final_w=w,
            t_f_dim=c * h * w,
            lstm_input_dim=c * w,
            memory_dim=2 * self.memory_depth * self.lstm_hidden,
            fused_dim=c * h * w + 2 * self.memory_depth * self.lstm_hidden,
        )

    def _init_params(self, rng, plan, n_classes):
        k, c = self.conv_kernel, self.conv_channels
        params = {}
        in_channels = 1
        for layer in range(self.conv_layers):
            fan_in = in_channels * k * k
            params[f"conv{layer}/w"] = uniform_init(rng, (c, in_channels, k, k), fan_in)
            params[f"conv{layer}/b"] = np.zeros(c)
            in_channels = c
        for direction in ("f", "b"):
            for key, value in init_lstm_params(
                rng, plan.lstm_input_dim, self.lstm_hidden
            ).items():
                params[f"lstm_{direction}/{key}"] = value
        params["proj/w"] = np.eye(self.lstm_hidden)
        width = plan.fused_dim
        for layer in range(self.head_layers):
            params[f"head{layer}/w"] = uniform_init(rng, (self.fcl_neurons, width), width)
            params[f"head{layer}/b"] = np.zeros(self.fcl_neurons)
            width = self.fcl_neurons
        params["out/w"] = uniform_init(rng, (n_classes, width), width)
        params["out/b"] = np.zeros(n_classes)
        return params

    def _lstm_view(self, direction):
        return {k: self.params_[f"lstm_{direction}/{k}"] for k in GATE_WEIGHTS}

    # -------------------------------------------------------------- forward

    def _forward(self, x, training, rng):
        """Full forward pass; returns (logits, cache)."""
        params = self.params_
        maps = x
        conv_caches = []
        for layer in range(self.conv_layers):
            pre, conv_cache = conv_forward(
                maps, params[f"conv{layer}/w"], params[f"conv{layer}/b"]
            )
            act = activation_forward(self.activation, pre)
            pooled, pool_cache = pool_forward(act, self.pool_size, self.pool_kind)
            conv_caches.append((conv_cache, pre, pool_cache))
            maps = pooled

        batch, channels, final_h, final_w = maps.shape
        t_f = maps.reshape(batch, channels * final_h * final_w)
        xs = maps.transpose(2, 0, 1, 3).reshape(final_h, batch, channels * final_w)
        memory, ms_f, ms_b, caches_f, caches_b = bidirectional_memory(
            xs,
            self._lstm_view("f"),
            self._lstm_view("b"),
            params["proj/w"],
            self.memory_depth,
        )

        t_f_drop, t_f_mask = dropout_forward(t_f, self.conv_dropout, rng, training)
        memory_drop, memory_mask = dropout_forward(
            memory, self.lstm_dropout, rng, training
        )
        fused = np.concatenate([t_f_drop, memory_drop], axis=1)

        z = fused
        head_caches = []
        for layer in range(self.head_layers):
            pre = z @ params[f"head{layer}/w"].T + params[f"head{layer}/b"]
            head_caches.append((z, pre))
            z = activation_forward("relu", pre)
        logits = z @ params["out/w"].T + params["out/b"]

        cache = {
            "conv_caches": conv_caches,
            "map_shape": maps.shape,
            "ms_f": ms_f,
            "ms_b": ms_b,
            "caches_f": caches_f,
            "caches_b": caches_b,
            "t_f_mask": t_f_mask,
            "memory_mask": memory_mask,
            "head_caches": head_caches,
            "head_input": z,
        }
        return logits, cache

    def _backward(self, dlogits, cache):
        params = self.params_
        grads = {}
        z = cache["head_input"]
        grads["out/w"] = dlogits.T @ z
        grads["out/b"] = dlogits.sum(axis=0)
        dz = dlogits @ params["out/w"]
        for layer in range(self.head_layers - 1, -1, -1):
            z_in, pre = cache["head_caches"][layer]
            da = activation_backward("relu", pre, dz)
            grads[f"head{layer}/w"] = da.T @ z_in
            grads[f"head{layer}/b"] = da.sum(axis=0)
            dz = da @ params[f"head{layer}/w"]

        batch, channels, final_h, final_w = cache["map_shape"]
        t_f_dim = channels * final_h * final_w
        d_t_f = dropout_backward(dz[:, :t_f_dim], cache["t_f_mask"])
        d_memory = dropout_backward(dz[:, t_f_dim:], cache["memory_mask"])

        proj = params["proj/w"]
        hidden = self.lstm_hidden
        depth = self.memory_depth
        d_proj = np.zeros_like(proj)
        dms_f = np.zeros((final_h, batch, hidden))
        dms_b = np.zeros((final_h, batch, hidden))
        for k in range(depth):
            chunk = d_memory[:, k * hidden : (k + 1) * hidden]
            d_proj += chunk.T @ cache["ms_f"][final_h - 1 - k]
            dms_f[final_h - 1 - k] += chunk @ proj
        for k in range(depth):
            chunk = d_memory[:, (depth + k) * hidden : (depth + k + 1) * hidden]
            d_proj += chunk.T @ cache["ms_b"][final_h - 1 - k]
            dms_b[final_h - 1 - k] += chunk @ proj
        grads["proj/w"] = d_proj

        grads_f, dxs_f = lstm_sequence_backward(
            dms_f, cache["caches_f"], self._lstm_view("f")
        )
        grads_b, dxs_b = lstm_sequence_backward(
            dms_b, cache["caches_b"], self._lstm_view("b")
        )
        for key in GATE_WEIGHTS:
            grads[f"lstm_f/{key}"] = grads_f[key]
            grads[f"lstm_b/{key}"] = grads_b[key]

        # the backward direction read the rows reversed, so its input
        # gradients flip back before joining the forward ones
        dxs = dxs_f + dxs_b[::-1]
        d_map = dxs.reshape(final_h, batch, channels, final_w).transpose(1, 2, 0, 3)
        d_map = d_map + d_t_f.reshape(batch, channels, final_h, final_w)

        g = d_map
        for layer in range(self.conv_layers - 1, -1, -1):
            conv_cache, pre, pool_cache = cache["conv_caches"][layer]
            g = pool_backward(g, pool_cache)
            g = activation_backward(self.activation, pre, g)
            g, dw, db = conv_backward(g, conv_cache, params[f"conv{layer}/w"])
            grads[f"conv{layer}/w"] = dw
            grads[f"conv{layer}/b"] = db
        return grads

    # ------------------------------------------------------------- training

    @staticmethod
    def _check_images(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[np.newaxis]
        if X.ndim == 3:
            X = X[:, np.newaxis, :, :]
        if X.ndim != 4 or X.shape[1] != 1:
            raise ValueError(
                f"expected (n, h, w) grayscale images, got shape {np.asarray(X).shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("images must be finite")
        return X

    def fit(self, X, y):
        self._check_hyperparams()
        X = self._check_images(X)
        y = np.asarray(y)
        if len(y) != X.shape[0]:
            raise ValueError(f"{X.shape[0]} images but {len(y)} labels")
        classes, y_idx = np.unique(y, return_inverse=True)
        if classes.size < 2:
            raise ValueError("need at least 2 classes to fit")
        counts = np.bincount(y_idx)
        if counts.min() < 2:
            raise ValueError("need at least 2 examples per class")

        n, _, height, width = X.shape
        plan = self._plan(height, width)
        rng = as_rng(self.seed)
        self.classes_ = classes
        self.input_shape_ = (height, width)
        self.plan_ = plan
        self.params_ = self._init_params(rng, plan, classes.size)
        self.history_ = []

        step = 0
        batch_size = min(self.batch_size, n)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_hits = 0
            for start in range(0, n, batch_size):
                batch_idx = order[start : start + batch_size]
                xb, yb = X[batch_idx], y_idx[batch_idx]
                logits, cache = self._forward(xb, training=True, rng=rng)
                loss, probs, dlogits = softmax_cross_entropy(logits, yb)
                step += 1
                if not np.isfinite(loss):
                    raise DivergenceError(step)
                grads = self._backward(dlogits, cache)
                for key, grad in grads.items():
                    self.params_[key] -= self.learning_rate * grad
                epoch_hits += int((probs.argmax(axis=1) == yb).sum())
            self.history_.append(epoch_hits / n)
        return self

    # ------------------------------------------------------------ inference

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise ValueError("classifier is not fitted; call fit or load a checkpoint")

    def predict_proba(self, X):
        self._require_fitted()
        X = self._check_images(X)
        if X.shape[2:] != self.input_shape_:
            raise ValueError(
                f"images are {X.shape[2]}x{X.shape[3]} but the model was fitted "
                f"on {self.input_shape_[0]}x{self.input_shape_[1]}"
            )
        logits, _ = self._forward(X, training=False, rng=None)
        return softmax(logits)

    def predict(self, X):
        self._require_fitted()
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


# ------------------------------------------------------------------- tuning


def stratified_split(y, train_fraction, rng):
    """Per-class shuffled index split; returns (train_idx, test_idx)."""
    y = np.asarray(y)
    rng = as_rng(rng)
    train_idx, test_idx = [], []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(members.size)]
        cut = max(1, min(members.size - 1, int(round(train_fraction * members.size))))
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(test_idx))


def default_search_space():
    """Tunable hyperparameters with their allowed ranges."""
    names = (
        "conv_kernel",
        "conv_channels",
        "pool_size",
        "pool_kind",
        "activation",
        "fcl_neurons",
        "conv_dropout",
        "head_layers",
        "lstm_hidden",
        "learning_rate",
        "lstm_dropout",
        "batch_size",
    )
    dims = (
        Discrete((3, 5, 7)),
        Discrete((32, 64, 96, 128, 160, 192, 224, 256)),
        Discrete((2, 3)),
        Discrete(("max", "average")),
        Discrete(("relu", "leaky_relu", "elu")),
        Discrete((128, 256, 512)),
        Discrete((0.3, 0.4, 0.5)),
        Discrete((0, 1, 2)),
        Discrete(tuple(range(20, 201))),
        Continuous(0.005, 0.2),
        Continuous(0.0, 1.0),
        Discrete(tuple(range(1, 513))),
    )
    return SearchSpace(dims, names=names)


@dataclass(frozen=True)
class TuneResult:
    best_params: dict
    best_fitness: float
    model: ConvRecurrentClassifier
    optimize_result: object


def tune_hyperparameters(
    X, y, space=None, eho_config=None, base_params=None, train_fraction=0.7
):
    """Search hyperparameters by validation accuracy and retrain the best.

    The dataset is split per class (``train_fraction`` to the training
    side); each candidate trains on the training side and is scored on
    the held-out side.  The best decoded assignment is then retrained on
    the full dataset.  Candidates whose configuration cannot train
    (for example a sequence shorter than the memory depth) simply score
    -inf inside the optimizer.
    """
    space = space or default_search_space()
    cfg = eho_config or EhoConfig()
    base_params = dict(base_params or {})
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    train_idx, val_idx = stratified_split(y, train_fraction, cfg.seed)

    if space.names is None:
        raise ValueError("tuning needs a named search space")

    def build(decoded):
        kwargs = dict(base_params)
        kwargs.update(zip(space.names, decoded))
        kwargs.setdefault("seed", cfg.seed)
        return ConvRecurrentClassifier(**kwargs)

    def objective(decoded):
        model = build(decoded)
        model.fit(X[train_idx], y[train_idx])
        predicted = model.predict(X[val_idx])
        hits = (predicted == y[val_idx]).astype(float)
        return accuracy_fitness(hits, np.ones_like(hits))

    result = ElephantHerdingOptimizer(space, cfg).optimize(objective)
    best = build(result.best_decoded)
    best.fit(X, y)
    return TuneResult(
        best_params=dict(zip(space.names, result.best_decoded)),
        best_fitness=result.best_fitness,
        model=best,
        optimize_result=result,
    )
