from __future__ import annotations

import numpy as np
import pytest

from locsum.ingest import GoldSpan
from locsum.locator import (
    LocatorConfig,
    LocatorParams,
    TrainingSample,
    batch_loss,
    forward_trace,
    locator_gradients,
    zero_gradients,
)
from locsum.training import init_params

from oracles import finite_difference_grads, relative_gradient_error

SMALL = dict(d=8, c=4, e=6, h=16, k=3)


def make_batch(seed: int, d: int, size: int, max_len: int = 9) -> list[TrainingSample]:
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(size):
        length = int(rng.integers(2, max_len))
        n_query = int(rng.integers(1, 5))
        start = int(rng.integers(0, length))
        end = int(rng.integers(start, length))
        spans = [GoldSpan(start, end)]
        if rng.random() < 0.5:
            s2 = int(rng.integers(0, length))
            spans.append(GoldSpan(s2, int(rng.integers(s2, length))))
        batch.append(
            TrainingSample(
                transcript=rng.normal(size=(length, d)),
                query=rng.normal(size=(n_query, d)),
                gold_spans=tuple(spans),
                length=length,
            )
        )
    return batch


def make_params(seed: int, share_conv: bool = True) -> LocatorParams:
    config = LocatorConfig(
        out_channels=SMALL["c"],
        proj_dim=SMALL["e"],
        hidden_dim=SMALL["h"],
        kernel_size=SMALL["k"],
        seed=seed,
        share_conv=share_conv,
    )
    return init_params(config, embed_dim=SMALL["d"])


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4, 5])
def test_gradients_match_finite_differences(seed):
    params = make_params(seed)
    batch = make_batch(seed + 100, SMALL["d"], size=3)
    grads, _ = locator_gradients(params, batch, length_norm=10.0)
    numeric = finite_difference_grads(params, batch, length_norm=10.0)
    analytic = dict(grads.tensors())
    assert relative_gradient_error(analytic, numeric) < 1e-4


def test_gradients_match_finite_differences_unshared_conv():
    params = make_params(7, share_conv=False)
    batch = make_batch(77, SMALL["d"], size=2)
    grads, _ = locator_gradients(params, batch, length_norm=10.0)
    numeric = finite_difference_grads(params, batch, length_norm=10.0)
    assert relative_gradient_error(dict(grads.tensors()), numeric) < 1e-4


def test_zero_loss_batch_has_zero_gradients():
    # all-zero weights with b3 equal to the gold span: prediction is exact
    params = make_params(0)
    for _, tensor in params.tensors():
        tensor[...] = 0.0
    params.b3 = np.array([2.0, 5.0])
    rng = np.random.default_rng(3)
    batch = [
        TrainingSample(
            transcript=rng.normal(size=(7, SMALL["d"])),
            query=rng.normal(size=(2, SMALL["d"])),
            gold_spans=(GoldSpan(2, 5),),
            length=7,
        )
    ]
    grads, mean_loss = locator_gradients(params, batch, length_norm=10.0)
    assert mean_loss == 0.0
    for _, tensor in grads.tensors():
        assert np.all(tensor == 0.0)


def test_duplicated_batch_leaves_mean_gradient_unchanged():
    params = make_params(4)
    batch = make_batch(44, SMALL["d"], size=2)
    grads_once, loss_once = locator_gradients(params, batch, length_norm=10.0)
    grads_twice, loss_twice = locator_gradients(params, batch + batch, length_norm=10.0)
    assert abs(loss_once - loss_twice) < 1e-12
    for (_, a), (_, b) in zip(grads_once.tensors(), grads_twice.tensors()):
        assert np.max(np.abs(a - b)) < 1e-12


def test_maxpool_tie_routes_to_lowest_index():
    # k=1, single channel summing both features: rows (2,0) and (0,2)
    # convolve to the same value, so the gradient must flow to row 0.
    d, c = 2, 1
    params = LocatorParams(
        conv_kernel=np.ones((c, 1, d)),
        conv_bias=np.zeros(c),
        w1=np.ones((1, c)),
        b1=np.zeros(1),
        w2=np.ones((1, 4)),
        b2=np.zeros(1),
        w3=np.ones((2, 1)),
        b3=np.zeros(2),
    )
    sample = TrainingSample(
        transcript=np.array([[2.0, 0.0], [0.0, 2.0]]),
        query=np.array([[1.0, 1.0]]),
        gold_spans=(GoldSpan(0, 0),),
        length=2,
    )
    grads, _ = locator_gradients(params, [sample], length_norm=4.0)
    trace = forward_trace(params, sample.transcript, sample.query, 2, 4.0)
    assert trace.transcript.argmax[0] == 0
    # kernel gradient from the transcript branch must be proportional to
    # row 0 = (2, 0) plus the query contribution (1, 1); no (0, 2) component.
    t_contribution = grads.conv_kernel[0, 0] - grads.conv_kernel[0, 0][1] * np.array([1.0, 1.0])
    assert t_contribution[1] == 0.0


def test_degenerate_similarity_contributes_no_gradient():
    # Zero projections make cosine undefined; the convention is sim = 0 with
    # zero gradient. A naive cosine backward would divide by zero norms, so
    # the gradients must stay finite; tensors downstream of the similarity
    # (the MLP) remain smooth and still pass finite differences.
    params = make_params(9)
    params.w1[...] = 0.0
    params.b1[...] = 0.0
    batch = make_batch(99, SMALL["d"], size=1)
    trace = forward_trace(
        params, batch[0].transcript, batch[0].query, batch[0].length, 10.0
    )
    assert trace.degenerate_sim
    grads, _ = locator_gradients(params, batch, length_norm=10.0)
    for _, tensor in grads.tensors():
        assert np.all(np.isfinite(tensor))
    numeric = finite_difference_grads(params, batch, length_norm=10.0)
    analytic = dict(grads.tensors())
    mlp_only = {k: analytic[k] for k in ("w2", "b2", "w3", "b3")}
    mlp_numeric = {k: numeric[k] for k in mlp_only}
    assert relative_gradient_error(mlp_only, mlp_numeric) < 1e-4


def test_batch_loss_agrees_with_gradient_loss():
    params = make_params(6)
    batch = make_batch(66, SMALL["d"], size=4)
    _, mean_loss = locator_gradients(params, batch, length_norm=10.0)
    assert abs(mean_loss - batch_loss(params, batch, 10.0)) < 1e-12


def test_zero_gradients_shapes_match():
    params = make_params(1, share_conv=False)
    grads = zero_gradients(params)
    for (name_a, a), (name_b, b) in zip(params.tensors(), grads.tensors()):
        assert name_a == name_b
        assert a.shape == b.shape
        assert np.all(b == 0.0)
