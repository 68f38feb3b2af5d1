"""Sequence classifier: temporal convolutions, a recurrent encoder,
multi-head self-attention, and a dense softmax head.

The default configuration stacks two conv layers (ReLU), a
bidirectional LSTM, and four attention heads whose concatenated output
is mean-pooled over time before the classifier.  Ablated variants
(plain LSTM, plain tanh RNN, attention off) reuse the same forward
path.  A flattened k-nearest-neighbour classifier serves as the
non-sequential baseline.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, UsageError, ValidationError
from .rng import SplitMix64
from .tensor import (
    Tensor,
    bias_add,
    channel_affine,
    concat,
    conv1d,
    matmul,
    mul,
    add,
    relu,
    scale,
    sigmoid,
    softmax,
    swap_last_axes,
    tanh,
    time_mean,
    time_slice,
    time_stack,
)

RECURRENT_KINDS = ("bilstm", "lstm", "rnn")
_GATES = ("f", "i", "c", "o")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture settings.

    steps and input_channels pin the sequence shape the model consumes;
    conv_layers is a tuple of (filters, kernel) pairs.  When attention
    is enabled, attention_heads * attention_dim must equal the
    recurrent feature width (2 * lstm_hidden for the bidirectional
    encoder, lstm_hidden otherwise).  input_shift/input_scale, when
    nonempty, standardize each input channel before the conv stack;
    see standardize_inputs.
    """

    steps: int
    input_channels: int
    conv_layers: tuple = ((32, 3), (32, 3))
    lstm_hidden: int = 64
    attention_heads: int = 4
    attention_dim: int = 32
    classes: int = 3
    conv_padding: str = "valid"
    recurrent: str = "bilstm"
    attention: bool = True
    input_shift: tuple = ()
    input_scale: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "conv_layers", tuple((int(f), int(k)) for f, k in self.conv_layers)
        )
        object.__setattr__(self, "input_shift", tuple(float(v) for v in self.input_shift))
        object.__setattr__(self, "input_scale", tuple(float(v) for v in self.input_scale))
        if len(self.input_shift) != len(self.input_scale):
            raise ValidationError("input_shift and input_scale must have equal length")
        if self.input_shift and len(self.input_shift) != self.input_channels:
            raise ValidationError(
                f"input standardization needs {self.input_channels} entries,"
                f" got {len(self.input_shift)}"
            )
        if any(v == 0.0 for v in self.input_scale):
            raise ValidationError("input_scale entries must be nonzero")
        if self.steps < 1:
            raise ValidationError(f"steps must be positive, got {self.steps}")
        if self.input_channels < 1:
            raise ValidationError(f"input_channels must be positive, got {self.input_channels}")
        if self.lstm_hidden < 1:
            raise ValidationError(f"lstm_hidden must be positive, got {self.lstm_hidden}")
        if self.classes != 3:
            raise ValidationError(f"the classifier is three-class, got classes={self.classes}")
        if self.conv_padding not in ("valid", "same"):
            raise ValidationError(f"conv_padding must be 'valid' or 'same', got {self.conv_padding!r}")
        if self.recurrent not in RECURRENT_KINDS:
            raise ValidationError(f"recurrent must be one of {RECURRENT_KINDS}, got {self.recurrent!r}")
        for i, (filters, kernel) in enumerate(self.conv_layers):
            if filters < 1 or kernel < 1:
                raise ValidationError(f"conv layer {i} needs positive filters and kernel, got {(filters, kernel)}")
        # walk the conv stack so an impossible kernel fails at construction
        self.conv_steps()
        if self.attention:
            if self.attention_heads < 1 or self.attention_dim < 1:
                raise ValidationError("attention_heads and attention_dim must be positive")
            width = self.feature_width
            if self.attention_heads * self.attention_dim != width:
                raise ValidationError(
                    f"attention_heads * attention_dim must equal the recurrent width"
                    f" ({self.attention_heads} * {self.attention_dim} != {width})"
                )

    @property
    def feature_width(self):
        """Channel count coming out of the recurrent encoder."""
        return 2 * self.lstm_hidden if self.recurrent == "bilstm" else self.lstm_hidden

    def conv_steps(self):
        """Time steps surviving the conv stack; raises if a kernel is too long."""
        t = self.steps
        for i, (_, kernel) in enumerate(self.conv_layers):
            if self.conv_padding == "valid":
                if kernel > t:
                    raise DimensionError(
                        f"conv layer {i} kernel {kernel} exceeds its {t} input steps"
                    )
                t = t - kernel + 1
        return t


def _conv_in_channels(config, layer):
    return config.input_channels if layer == 0 else config.conv_layers[layer - 1][0]


def standardize_inputs(config: ModelConfig, samples) -> ModelConfig:
    """Bake per-channel standardization from a training set into the
    config.

    Channels spanning very different magnitudes (counts vs pressure)
    otherwise saturate the recurrent gates.  Shift is the channel mean
    over all samples and steps, scale its standard deviation (constant
    channels get scale 1).  No-op when the config already standardizes.
    """
    if config.input_shift:
        return config
    if len(samples) == 0:
        raise UsageError("standardize_inputs needs a nonempty sample set")
    stacked = np.stack([_sample_matrix(s) for s in samples])
    mean = stacked.mean(axis=(0, 1))
    std = stacked.std(axis=(0, 1))
    std[std == 0.0] = 1.0
    return replace(config, input_shift=tuple(mean), input_scale=tuple(std))


def expected_param_names(config: ModelConfig):
    """Parameter names in initialization order."""
    return list(expected_param_shapes(config))


def expected_param_shapes(config: ModelConfig):
    """Name -> shape map in initialization order."""
    shapes = {}
    for i, (filters, kernel) in enumerate(config.conv_layers):
        d_in = _conv_in_channels(config, i)
        shapes[f"conv{i}_w"] = (kernel, d_in, filters)
        shapes[f"conv{i}_b"] = (filters,)
    d_rec = config.conv_layers[-1][0] if config.conv_layers else config.input_channels
    hidden = config.lstm_hidden
    if config.recurrent == "rnn":
        shapes["rnn_w"] = (hidden + d_rec, hidden)
        shapes["rnn_b"] = (hidden,)
    else:
        directions = ("fwd", "bwd") if config.recurrent == "bilstm" else ("fwd",)
        for d in directions:
            for g in _GATES:
                shapes[f"lstm_{d}_w{g}"] = (hidden + d_rec, hidden)
            for g in _GATES:
                shapes[f"lstm_{d}_b{g}"] = (hidden,)
    width = config.feature_width
    if config.attention:
        for j in range(config.attention_heads):
            for part in ("wq", "wk", "wv"):
                shapes[f"attn_h{j}_{part}"] = (width, config.attention_dim)
        shapes["attn_wo"] = (config.attention_heads * config.attention_dim, width)
    shapes["out_w"] = (width, config.classes)
    shapes["out_b"] = (config.classes,)
    return shapes


def init_params(config: ModelConfig):
    """Fresh parameter dict keyed by name.

    Weights are Glorot-uniform on [-a, a] with a = sqrt(6 / (fan_in +
    fan_out)), drawn from SplitMix64(config.seed) in initialization
    order, row-major within each tensor.  Biases start at zero except
    the LSTM forget-gate bias, which starts at one.
    """
    rng = SplitMix64(config.seed)

    def glorot(shape, fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        size = int(np.prod(shape))
        vals = (rng.uniform_block(size) * 2.0 - 1.0) * limit
        return Tensor(vals.reshape(shape))

    params = {}
    for i, (filters, kernel) in enumerate(config.conv_layers):
        d_in = _conv_in_channels(config, i)
        params[f"conv{i}_w"] = glorot((kernel, d_in, filters), kernel * d_in, kernel * filters)
        params[f"conv{i}_b"] = Tensor(np.zeros(filters))
    d_rec = config.conv_layers[-1][0] if config.conv_layers else config.input_channels
    hidden = config.lstm_hidden
    if config.recurrent == "rnn":
        params["rnn_w"] = glorot((hidden + d_rec, hidden), hidden + d_rec, hidden)
        params["rnn_b"] = Tensor(np.zeros(hidden))
    else:
        directions = ("fwd", "bwd") if config.recurrent == "bilstm" else ("fwd",)
        for d in directions:
            for g in _GATES:
                params[f"lstm_{d}_w{g}"] = glorot((hidden + d_rec, hidden), hidden + d_rec, hidden)
            for g in _GATES:
                start = np.ones(hidden) if g == "f" else np.zeros(hidden)
                params[f"lstm_{d}_b{g}"] = Tensor(start)
    width = config.feature_width
    if config.attention:
        for j in range(config.attention_heads):
            for part in ("wq", "wk", "wv"):
                params[f"attn_h{j}_{part}"] = glorot((width, config.attention_dim), width, config.attention_dim)
        inner = config.attention_heads * config.attention_dim
        params["attn_wo"] = glorot((inner, width), inner, width)
    params["out_w"] = glorot((width, config.classes), width, config.classes)
    params["out_b"] = Tensor(np.zeros(config.classes))
    return params


def lstm_cell(x_t, h_prev, c_prev, gates):
    """One LSTM step.

    gates maps {"wf","wi","wc","wo","bf","bi","bc","bo"} to tensors;
    each weight is ((hidden + input), hidden) applied to the
    concatenation [h_prev, x_t].  Returns (h, c).
    """
    z = concat([h_prev, x_t])
    f = sigmoid(bias_add(matmul(z, gates["wf"]), gates["bf"]))
    i = sigmoid(bias_add(matmul(z, gates["wi"]), gates["bi"]))
    g = tanh(bias_add(matmul(z, gates["wc"]), gates["bc"]))
    o = sigmoid(bias_add(matmul(z, gates["wo"]), gates["bo"]))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def _gate_view(params, direction):
    return {f"{kind}{g}": params[f"lstm_{direction}_{kind}{g}"] for kind in ("w", "b") for g in _GATES}


def _lstm_scan(x, params, direction, reverse):
    batch, steps, _ = x.shape
    if steps == 0:
        raise UsageError("recurrent forward needs at least one time step")
    hidden = params[f"lstm_{direction}_wf"].shape[1]
    gates = _gate_view(params, direction)
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    outputs = [None] * steps
    for t in order:
        h, c = lstm_cell(time_slice(x, t), h, c, gates)
        outputs[t] = h
    return outputs


def lstm_forward(x, params):
    """Unidirectional LSTM over (B, T, D); returns (B, T, hidden)."""
    return time_stack(_lstm_scan(x, params, "fwd", reverse=False))


def bilstm_forward(x, params):
    """Bidirectional LSTM over (B, T, D); returns (B, T, 2 * hidden).

    The backward pass reads the sequence right to left; its step-t
    output is concatenated after the forward step-t output, so row t
    summarizes both the prefix and the suffix around t.
    """
    fwd = _lstm_scan(x, params, "fwd", reverse=False)
    bwd = _lstm_scan(x, params, "bwd", reverse=True)
    return time_stack([concat([f, b]) for f, b in zip(fwd, bwd)])


def rnn_forward(x, params):
    """Plain tanh RNN over (B, T, D); returns (B, T, hidden)."""
    batch, steps, _ = x.shape
    if steps == 0:
        raise UsageError("recurrent forward needs at least one time step")
    hidden = params["rnn_w"].shape[1]
    h = Tensor(np.zeros((batch, hidden)))
    outputs = []
    for t in range(steps):
        z = concat([h, time_slice(x, t)])
        h = tanh(bias_add(matmul(z, params["rnn_w"]), params["rnn_b"]))
        outputs.append(h)
    return time_stack(outputs)


def scaled_dot_attention(q, k, v):
    """softmax(q k^T / sqrt(d_k)) v over the time axis.

    q, k, v are (..., T, d); q and k must share their last dimension
    and k and v their time dimension.
    """
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query width {q.shape[-1]} does not match key width {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"key steps {k.shape[-2]} do not match value steps {v.shape[-2]}")
    scores = scale(matmul(q, swap_last_axes(k)), 1.0 / math.sqrt(q.shape[-1]))
    return matmul(softmax(scores), v)


def multi_head_attention(x, params, heads):
    """Multi-head self-attention on (B, T, M); returns (B, T, M).

    Head j projects x with its own query/key/value matrices; head
    outputs are concatenated and mixed by the shared output matrix.
    """
    if heads < 1:
        raise UsageError(f"heads must be positive, got {heads}")
    outs = []
    for j in range(heads):
        q = matmul(x, params[f"attn_h{j}_wq"])
        k = matmul(x, params[f"attn_h{j}_wk"])
        v = matmul(x, params[f"attn_h{j}_wv"])
        outs.append(scaled_dot_attention(q, k, v))
    return matmul(concat(outs), params["attn_wo"])


def forward_batch(x, params, config: ModelConfig):
    """Forward pass on a (B, T, D) tensor; returns (B, 3) probabilities.

    This is the graph-recording path the trainer differentiates; the
    convenience wrappers below feed it single samples.
    """
    if x.ndim != 3:
        raise DimensionError(f"forward_batch expects (batch, steps, channels), got {x.shape}")
    if x.shape[2] != config.input_channels:
        raise DimensionError(
            f"input has {x.shape[2]} channels, model expects {config.input_channels}"
        )
    h = x
    if config.input_shift:
        h = channel_affine(h, config.input_shift, config.input_scale)
    for i in range(len(config.conv_layers)):
        try:
            h = conv1d(h, params[f"conv{i}_w"], params[f"conv{i}_b"], padding=config.conv_padding)
        except DimensionError as exc:
            raise DimensionError(f"conv layer {i}: {exc}") from None
        h = relu(h)
    if config.recurrent == "bilstm":
        h = bilstm_forward(h, params)
    elif config.recurrent == "lstm":
        h = lstm_forward(h, params)
    else:
        h = rnn_forward(h, params)
    if config.attention:
        h = multi_head_attention(h, params, config.attention_heads)
    pooled = time_mean(h)
    logits = bias_add(matmul(pooled, params["out_w"]), params["out_b"])
    return softmax(logits)


def _sample_matrix(sample):
    # FeatureSequence carries an ndarray under .data; note a bare
    # ndarray also has .data, but that one is a memoryview
    data = getattr(sample, "data", None)
    if isinstance(data, np.ndarray):
        return data
    return np.asarray(sample, dtype=np.float64)


def forward(sample, params, config: ModelConfig):
    """Class probabilities (3,) for one sample (FeatureSequence or
    (T, D) array)."""
    data = _sample_matrix(sample)
    if data.ndim != 2:
        raise DimensionError(f"forward expects a (steps, channels) sample, got {data.shape}")
    probs = forward_batch(Tensor(data[np.newaxis]), params, config)
    return probs.array[0].copy()


def predict_class(probs):
    """Index of the largest probability; ties go to the smallest index."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (3,):
        raise UsageError(f"predict_class expects three probabilities, got shape {probs.shape}")
    if not np.isfinite(probs).all():
        raise UsageError("predict_class got non-finite probabilities")
    return int(np.argmax(probs))


def predict(sample, params, config: ModelConfig):
    """Predicted label for one sample."""
    return predict_class(forward(sample, params, config))


class KNNClassifier:
    """k-nearest-neighbour baseline on flattened, standardized sequences.

    fit() learns per-column mean and standard deviation from the
    training set (constant columns get scale 1); predict() votes among
    the k nearest training samples by Euclidean distance.  Distance
    ties resolve toward the earlier training sample, vote ties toward
    the smaller label.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise UsageError(f"k must be positive, got {k}")
        self.k = k
        self._x = None
        self._labels = None
        self._mean = None
        self._scale = None

    def fit(self, samples):
        if len(samples) == 0:
            raise UsageError("KNNClassifier.fit needs a nonempty training set")
        if self.k > len(samples):
            raise UsageError(f"k={self.k} exceeds the {len(samples)} training samples")
        shapes = {s.data.shape for s in samples}
        if len(shapes) != 1:
            raise DimensionError(f"training samples disagree on shape: {sorted(shapes)}")
        x = np.stack([s.data.ravel() for s in samples])
        self._mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0.0] = 1.0
        self._scale = std
        self._x = (x - self._mean) / self._scale
        self._labels = np.array([s.label for s in samples], dtype=np.int64)
        return self

    def predict(self, sample):
        if self._x is None:
            raise UsageError("KNNClassifier.predict called before fit")
        flat = _sample_matrix(sample).ravel()
        if flat.shape[0] != self._x.shape[1]:
            raise DimensionError(
                f"query has {flat.shape[0]} features, training set has {self._x.shape[1]}"
            )
        q = (flat - self._mean) / self._scale
        dists = np.sqrt(((self._x - q) ** 2).sum(axis=1))
        nearest = np.argsort(dists, kind="stable")[: self.k]
        votes = np.bincount(self._labels[nearest], minlength=3)
        return int(np.argmax(votes))


def knn_predict(train_samples, query, k: int = 5):
    """One-shot k-nearest-neighbour prediction for a single query."""
    return KNNClassifier(k=k).fit(train_samples).predict(query)
