"""Span-locator network and its analytic gradients.

Architecture, per branch: 1-D convolution along the sequence axis (zero
padding keeps the output length), max-pool over the sequence, then a shared
affine projection. The two projected vectors, their cosine similarity, and
the normalized meeting length are concatenated and fed to a one-hidden-layer
LeakyReLU MLP whose absolute-valued output is the raw (start, end) pair.

Everything runs in float64. Backpropagation is hand-written: Abs uses
subgradient 0 at 0, LeakyReLU uses the left value (the slope) at 0, and
max-pool routes the gradient to the lowest-index argmax on ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateVectorError, EmptyInputError
from .ingest import GoldSpan

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class LocatorConfig:
    """Hyperparameters; ``length_norm`` defaults to the longest training meeting."""

    out_channels: int = 64
    proj_dim: int = 64
    hidden_dim: int = 128
    kernel_size: int = 3
    leaky_slope: float = 0.01
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    length_norm: int | None = None
    share_conv: bool = True

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ContractError("kernel_size must be odd and >= 1")
        if min(self.out_channels, self.proj_dim, self.hidden_dim) < 1:
            raise ContractError("dimensions must be positive")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ContractError("leaky_slope must be in (0, 1)")


@dataclass
class LocatorParams:
    """All learnable tensors. ``conv_kernel_q`` is set only when the query
    branch uses its own (unshared) convolution."""

    conv_kernel: np.ndarray  # (c, k, d)
    conv_bias: np.ndarray  # (c,)
    w1: np.ndarray  # (e, c)
    b1: np.ndarray  # (e,)
    w2: np.ndarray  # (h, 2e + 2)
    b2: np.ndarray  # (h,)
    w3: np.ndarray  # (2, h)
    b3: np.ndarray  # (2,)
    leaky_slope: float = 0.01
    conv_kernel_q: np.ndarray | None = None
    conv_bias_q: np.ndarray | None = None

    def tensors(self):
        """(name, array) pairs in declared order; optional tensors last."""
        pairs = [
            ("conv_kernel", self.conv_kernel),
            ("conv_bias", self.conv_bias),
            ("w1", self.w1),
            ("b1", self.b1),
            ("w2", self.w2),
            ("b2", self.b2),
            ("w3", self.w3),
            ("b3", self.b3),
        ]
        if self.conv_kernel_q is not None:
            pairs.append(("conv_kernel_q", self.conv_kernel_q))
            pairs.append(("conv_bias_q", self.conv_bias_q))
        return pairs

    def copy(self) -> "LocatorParams":
        return LocatorParams(
            **{name: arr.copy() for name, arr in self.tensors()},
            leaky_slope=self.leaky_slope,
        )

    def tobytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in self.tensors())

    @property
    def embed_dim(self) -> int:
        return self.conv_kernel.shape[2]

    @property
    def out_channels(self) -> int:
        return self.conv_kernel.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.conv_kernel.shape[1]

    @property
    def proj_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w2.shape[0]


@dataclass(frozen=True)
class SpanPrediction:
    """Raw, non-negative real-valued (start, end) turn indices."""

    start_raw: float
    end_raw: float


@dataclass
class BranchTrace:
    inputs: np.ndarray  # (n, d)
    conv: np.ndarray  # (n, c), pre-pool
    argmax: np.ndarray  # (c,), pooled row index per channel
    pooled: np.ndarray  # (c,)
    projected: np.ndarray  # (e,)


@dataclass
class ForwardTrace:
    """Every intermediate of one forward pass (the instrumentation hook)."""

    transcript: BranchTrace
    query: BranchTrace
    sim: float
    degenerate_sim: bool
    features: np.ndarray  # (2e + 2,)
    pre_activation: np.ndarray  # (h,)
    hidden: np.ndarray  # (h,)
    output_raw: np.ndarray  # (2,), pre-Abs
    prediction: SpanPrediction


@dataclass(frozen=True)
class TrainingSample:
    transcript: np.ndarray  # (length, d) utterance matrix
    query: np.ndarray  # (n_tokens, d) token matrix
    gold_spans: tuple[GoldSpan, ...]
    length: int


def _conv_forward(matrix: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    n, d = matrix.shape
    c, k, dk = kernel.shape
    if dk != d:
        raise ContractError(f"kernel feature dim {dk} != input dim {d}")
    if bias.shape != (c,):
        raise ContractError(f"bias shape {bias.shape} != ({c},)")
    pad = (k - 1) // 2
    padded = np.zeros((n + k - 1, d))
    padded[pad : pad + n] = matrix
    conv = np.tile(bias, (n, 1))
    for j in range(k):
        conv += padded[j : j + n] @ kernel[:, j, :].T
    return conv


def conv_maxpool(matrix: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Zero-padded 1-D convolution along the rows, then per-channel max."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise EmptyInputError("convolution input must have at least one row")
    return _conv_forward(matrix, kernel, bias).max(axis=0)


def _branch(matrix: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
            w1: np.ndarray, b1: np.ndarray) -> BranchTrace:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise EmptyInputError("branch input must have at least one row")
    conv = _conv_forward(matrix, kernel, bias)
    argmax = conv.argmax(axis=0)  # lowest index wins ties
    pooled = conv[argmax, np.arange(conv.shape[1])]
    return BranchTrace(
        inputs=matrix,
        conv=conv,
        argmax=argmax,
        pooled=pooled,
        projected=project(pooled, w1, b1),
    )


def project(vector: np.ndarray, w1: np.ndarray, b1: np.ndarray) -> np.ndarray:
    """Affine projection shared between the transcript and query branches."""
    vector = np.asarray(vector, dtype=np.float64)
    if w1.ndim != 2 or vector.shape != (w1.shape[1],) or b1.shape != (w1.shape[0],):
        raise ContractError(
            f"projection shapes disagree: v{vector.shape}, w{w1.shape}, b{b1.shape}"
        )
    return w1 @ vector + b1


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"cosine needs equal-length vectors, got {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a < DEGENERATE_NORM or norm_b < DEGENERATE_NORM:
        raise DegenerateVectorError("cosine of a (near-)zero vector is undefined")
    return float(a @ b / (norm_a * norm_b))


def _cosine_or_zero(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    # Zero rows occur for pure-noise turns; treat them as similarity 0
    # with zero gradient rather than failing the forward pass.
    try:
        return cosine_similarity(a, b), False
    except DegenerateVectorError:
        return 0.0, True


def assemble_features(
    e_t: np.ndarray, e_q: np.ndarray, sim: float, length: int, length_norm: float
) -> np.ndarray:
    """Concatenate [E_T, E_Q, sim, length/length_norm] in exactly this order."""
    if length < 1:
        raise ContractError("meeting length must be >= 1")
    return np.concatenate([e_t, e_q, [sim], [length / length_norm]])


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0.0, x, slope * x)


def mlp_forward(
    features: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    w3: np.ndarray,
    b3: np.ndarray,
    slope: float,
) -> SpanPrediction:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (w2.shape[1],) or b2.shape != (w2.shape[0],):
        raise ContractError(f"hidden layer shapes disagree: f{features.shape}, w{w2.shape}")
    if w3.shape != (2, w2.shape[0]) or b3.shape != (2,):
        raise ContractError(f"output layer shapes disagree: w{w3.shape}, b{b3.shape}")
    hidden = leaky_relu(w2 @ features + b2, slope)
    output = np.abs(w3 @ hidden + b3)
    return SpanPrediction(start_raw=float(output[0]), end_raw=float(output[1]))


def forward_trace(
    params: LocatorParams,
    transcript: np.ndarray,
    query: np.ndarray,
    length: int,
    length_norm: float,
) -> ForwardTrace:
    """Full forward pass keeping every intermediate for inspection/backprop."""
    kernel_q = params.conv_kernel if params.conv_kernel_q is None else params.conv_kernel_q
    bias_q = params.conv_bias if params.conv_bias_q is None else params.conv_bias_q
    t_branch = _branch(transcript, params.conv_kernel, params.conv_bias, params.w1, params.b1)
    q_branch = _branch(query, kernel_q, bias_q, params.w1, params.b1)
    sim, degenerate = _cosine_or_zero(t_branch.projected, q_branch.projected)
    features = assemble_features(
        t_branch.projected, q_branch.projected, sim, length, length_norm
    )
    pre_activation = params.w2 @ features + params.b2
    hidden = leaky_relu(pre_activation, params.leaky_slope)
    output_raw = params.w3 @ hidden + params.b3
    prediction = SpanPrediction(
        start_raw=float(abs(output_raw[0])), end_raw=float(abs(output_raw[1]))
    )
    return ForwardTrace(
        transcript=t_branch,
        query=q_branch,
        sim=sim,
        degenerate_sim=degenerate,
        features=features,
        pre_activation=pre_activation,
        hidden=hidden,
        output_raw=output_raw,
        prediction=prediction,
    )


def locator_forward(
    params: LocatorParams,
    transcript: np.ndarray,
    query: np.ndarray,
    length: int,
    length_norm: float,
) -> SpanPrediction:
    return forward_trace(params, transcript, query, length, length_norm).prediction


def _span_loss(pred: SpanPrediction, span: GoldSpan, length_norm: float) -> float:
    ds = (pred.start_raw - span.start) / length_norm
    de = (pred.end_raw - span.end) / length_norm
    return 0.5 * (ds * ds + de * de)


def loss(
    pred: SpanPrediction,
    gold: GoldSpan | tuple[GoldSpan, ...] | list[GoldSpan],
    length_norm: float,
) -> float:
    """Mean squared error on ``length_norm``-normalized indices.

    Queries annotated with several gold spans are scored against the closest
    one: loss is the minimum over the spans.
    """
    spans = (gold,) if isinstance(gold, GoldSpan) else tuple(gold)
    if not spans:
        raise ContractError("loss needs at least one gold span")
    return min(_span_loss(pred, s, length_norm) for s in spans)


def zero_gradients(params: LocatorParams) -> LocatorParams:
    return LocatorParams(
        **{name: np.zeros_like(arr) for name, arr in params.tensors()},
        leaky_slope=params.leaky_slope,
    )


def _conv_backward(
    branch: BranchTrace,
    d_pooled: np.ndarray,
    grad_kernel: np.ndarray,
    grad_bias: np.ndarray,
) -> None:
    # Max-pool routes each channel's gradient to its single argmax row.
    n = branch.inputs.shape[0]
    c, k, _ = grad_kernel.shape
    pad = (k - 1) // 2
    grad_bias += d_pooled
    channels = np.arange(c)
    for j in range(k):
        rows = branch.argmax - pad + j
        valid = (rows >= 0) & (rows < n)
        if not valid.any():
            continue
        grad_kernel[channels[valid], j, :] += (
            d_pooled[valid, None] * branch.inputs[rows[valid]]
        )


def _backward(
    params: LocatorParams,
    trace: ForwardTrace,
    gold_spans: tuple[GoldSpan, ...],
    length_norm: float,
    grads: LocatorParams,
) -> float:
    pred = trace.prediction
    if not gold_spans:
        raise ContractError("sample has no gold spans")
    losses = [_span_loss(pred, s, length_norm) for s in gold_spans]
    best = min(range(len(losses)), key=lambda i: losses[i])
    target = gold_spans[best]

    d_pred = np.array(
        [pred.start_raw - target.start, pred.end_raw - target.end]
    ) / (length_norm * length_norm)
    d_out = d_pred * np.sign(trace.output_raw)  # Abs: subgradient 0 at 0

    grads.w3 += np.outer(d_out, trace.hidden)
    grads.b3 += d_out
    d_hidden = params.w3.T @ d_out
    # LeakyReLU derivative: 1 above 0, slope below; left value (slope) at 0.
    d_z = d_hidden * np.where(trace.pre_activation > 0.0, 1.0, params.leaky_slope)
    grads.w2 += np.outer(d_z, trace.features)
    grads.b2 += d_z
    d_features = params.w2.T @ d_z

    e = params.proj_dim
    d_e_t = d_features[:e].copy()
    d_e_q = d_features[e : 2 * e].copy()
    d_sim = d_features[2 * e]
    # The length feature is a constant input; its gradient is discarded.

    if not trace.degenerate_sim:
        a = trace.transcript.projected
        b = trace.query.projected
        norm_a = np.linalg.norm(a)
        norm_b = np.linalg.norm(b)
        d_e_t += d_sim * (b / (norm_a * norm_b) - trace.sim * a / (norm_a * norm_a))
        d_e_q += d_sim * (a / (norm_a * norm_b) - trace.sim * b / (norm_b * norm_b))

    grads.w1 += np.outer(d_e_t, trace.transcript.pooled) + np.outer(d_e_q, trace.query.pooled)
    grads.b1 += d_e_t + d_e_q
    d_pooled_t = params.w1.T @ d_e_t
    d_pooled_q = params.w1.T @ d_e_q

    _conv_backward(trace.transcript, d_pooled_t, grads.conv_kernel, grads.conv_bias)
    if params.conv_kernel_q is None:
        _conv_backward(trace.query, d_pooled_q, grads.conv_kernel, grads.conv_bias)
    else:
        _conv_backward(trace.query, d_pooled_q, grads.conv_kernel_q, grads.conv_bias_q)
    return losses[best]


def locator_gradients(
    params: LocatorParams,
    batch: list[TrainingSample] | tuple[TrainingSample, ...],
    length_norm: float,
) -> tuple[LocatorParams, float]:
    """Mean analytic gradients over a batch, plus the mean loss."""
    if not batch:
        raise ContractError("gradient batch is empty")
    grads = zero_gradients(params)
    total = 0.0
    for sample in batch:
        trace = forward_trace(
            params, sample.transcript, sample.query, sample.length, length_norm
        )
        total += _backward(params, trace, sample.gold_spans, length_norm, grads)
    scale = 1.0 / len(batch)
    for _, arr in grads.tensors():
        arr *= scale
    return grads, total * scale


def batch_loss(
    params: LocatorParams,
    batch: list[TrainingSample] | tuple[TrainingSample, ...],
    length_norm: float,
) -> float:
    """Mean loss over a batch, forward passes only."""
    if not batch:
        raise ContractError("loss batch is empty")
    return float(
        np.mean(
            [
                loss(
                    locator_forward(
                        params, s.transcript, s.query, s.length, length_norm
                    ),
                    s.gold_spans,
                    length_norm,
                )
                for s in batch
            ]
        )
    )
