"""Wide-precision gradient verification suite.

Checks every differentiable operation, the encoder paths, and the composed
training loss on a small random model against central finite differences.
Shared by the `gradcheck` CLI subcommand and the acceptance tests.
"""

from __future__ import annotations

import numpy as np

from .attention import attend, attention_weights, encode_item, init_attention_params, init_projection_params
from .config import ModelConfig
from .encoders import (
    adapt_features,
    encode_text,
    init_recurrent_params,
    init_toy_backbone,
    lookup_embeddings,
    toy_visual_backbone,
)
from .losses import (
    BatchEmbeddings,
    LossConfig,
    diversity_loss,
    similarity_matrix,
    total_loss,
    triplet_hard_negative_loss,
)
from .model import init_model
from .tensor import (
    cosine,
    frobenius_sq,
    grad_check,
    l2_normalize,
    matmul,
    normalize_rows,
    relu,
    softmax_rows,
    tanh_act,
    tensor,
    wide_precision,
)

TOLERANCE = 1e-4
FD_STEP = 1e-5


def _nudge_off_kinks(x, margin=1e-3):
    x = np.asarray(x)
    x[np.abs(x) < margin] += 2 * margin
    return x


def _op_checks(rng):
    a = tensor(_nudge_off_kinks(rng.normal(size=(3, 4))), requires_grad=True)
    b = tensor(rng.normal(size=(4, 2)), requires_grad=True)
    v = tensor(rng.normal(size=5) + 2.0, requires_grad=True)
    u = tensor(rng.normal(size=5) + 1.0, requires_grad=True)
    sims = tensor(rng.uniform(-1, 1, size=(4, 4)), requires_grad=True)
    m_attn = tensor(rng.dirichlet(np.ones(6), size=3), requires_grad=True)
    q_attn = tensor(rng.dirichlet(np.ones(5), size=3), requires_grad=True)
    cv = rng.normal(size=5)

    yield "matmul", lambda: grad_check(
        lambda a, b: frobenius_sq(matmul(a, b)), [a, b], FD_STEP)
    yield "softmax_rows", lambda: grad_check(
        lambda a: frobenius_sq(softmax_rows(a)), [a], FD_STEP)
    yield "relu", lambda: grad_check(lambda a: frobenius_sq(relu(a)), [a], FD_STEP)
    yield "tanh", lambda: grad_check(lambda a: frobenius_sq(tanh_act(a)), [a], FD_STEP)
    yield "l2_normalize", lambda: grad_check(
        lambda v: (l2_normalize(v) * cv).sum(), [v], FD_STEP)
    yield "normalize_rows", lambda: grad_check(
        lambda a: frobenius_sq(normalize_rows(a)), [a], FD_STEP)
    yield "cosine", lambda: grad_check(lambda u, v: cosine(u, v), [u, v], FD_STEP)
    yield "frobenius_sq", lambda: grad_check(lambda a: frobenius_sq(a), [a], FD_STEP)
    yield "triplet_loss", lambda: grad_check(
        lambda s: triplet_hard_negative_loss(s, 0.2), [sims], FD_STEP)
    yield "diversity_loss", lambda: grad_check(
        lambda m, q: diversity_loss(m, q), [m_attn, q_attn], FD_STEP)
    yield "similarity_matrix", lambda: grad_check(
        lambda x, y: frobenius_sq(similarity_matrix(x, y)),
        [tensor(rng.normal(size=(3, 4)), requires_grad=True),
         tensor(rng.normal(size=(3, 4)), requires_grad=True)], FD_STEP)


def _encoder_checks(rng):
    adapter_w = tensor(rng.normal(size=(4, 6)), requires_grad=True)
    adapter_b = tensor(rng.normal(size=6), requires_grad=True)
    raw = tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    yield "adapt_features", lambda: grad_check(
        lambda raw, w, b: frobenius_sq(adapt_features(raw, w, b)),
        [raw, adapter_w, adapter_b], FD_STEP)

    table = tensor(rng.normal(size=(7, 4)), requires_grad=True)
    coef = rng.normal(size=(3, 4))
    yield "lookup_embeddings", lambda: grad_check(
        lambda table: (lookup_embeddings([1, 4, 4], table) * coef).sum(), [table], FD_STEP)

    text_params = init_recurrent_params(rng, 4, 5, layer_count=2, dropout=0.0)
    seq = tensor(rng.normal(size=(3, 4)), requires_grad=True)
    text_weights = [p for _, p in text_params.parameters()]
    yield "encode_text", lambda: grad_check(
        lambda seq, *w: frobenius_sq(encode_text(seq, text_params)),
        [seq] + text_weights, FD_STEP)

    backbone = init_toy_backbone(rng, stride=2, in_channels=1, mid_channels=3, out_channels=2)
    image = tensor(_nudge_off_kinks(rng.normal(size=(4, 4, 1))), requires_grad=True)
    backbone_weights = [p for _, p in backbone.parameters()]
    yield "toy_visual_backbone", lambda: grad_check(
        lambda image, *w: frobenius_sq(toy_visual_backbone(image, backbone)),
        [image] + backbone_weights, FD_STEP)

    attn = init_attention_params(rng, d=5, d_attn=3, heads=2, drop=0.0)
    proj = init_projection_params(rng, d=5, heads=2, d_joint=4, drop=0.0)
    feats = tensor(rng.normal(size=(4, 5)), requires_grad=True)
    coef2 = rng.normal(size=4)
    yield "attention_weights", lambda: grad_check(
        lambda f, wh, wa: frobenius_sq(attention_weights(f, attn)),
        [feats, attn.w_hidden, attn.w_heads], FD_STEP)
    yield "attend", lambda: grad_check(
        lambda f, wh, wa: frobenius_sq(attend(attention_weights(f, attn), f)),
        [feats, attn.w_hidden, attn.w_heads], FD_STEP)
    yield "encode_item", lambda: grad_check(
        lambda f, *w: (encode_item(f, attn, proj)[0] * coef2).sum(),
        [feats, attn.w_hidden, attn.w_heads, proj.weight, proj.bias], FD_STEP)


def _composed_check(rng):
    """Full training loss on the toy model: d=16, d_a=8, r=3, l=9, n=5, N=4."""
    cfg = ModelConfig(d=16, d_attn=8, heads=3, d_joint=16, word_dim=6, text_layers=2,
                      vocab_size=12, channels=5)
    model = init_model(cfg, seed=int(rng.integers(1 << 16)), dtype=np.float64)
    features = [tensor(rng.normal(size=(3, 3, 5))) for _ in range(4)]
    captions = [[int(t) for t in rng.integers(0, 12, size=5)] for _ in range(4)]
    loss_cfg = LossConfig(margin=0.2, diversity_weight=0.1)
    params = [p for _, p in model.parameters()]

    def f(*weights):
        image_vecs, image_attn, text_vecs, text_attn = [], [], [], []
        for feat, caption in zip(features, captions):
            vec, m = model.encode_image(feat)
            image_vecs.append(vec)
            image_attn.append(m)
            cvec, q = model.encode_caption(caption)
            text_vecs.append(cvec)
            text_attn.append(q)
        from .tensor import stack_rows

        batch = BatchEmbeddings(stack_rows(image_vecs), stack_rows(text_vecs),
                                image_attn, text_attn)
        return total_loss(batch, loss_cfg)[0]

    return grad_check(f, params, FD_STEP)


def run_gradient_suite(seed=12345, report=print):
    """Run every check in wide precision; returns list of (name, max rel error).

    All errors must come in under 1e-4 for the suite to pass.
    """
    results = []
    with wide_precision():
        rng = np.random.default_rng(seed)
        for name, check in _op_checks(rng):
            results.append((name, check()))
        for name, check in _encoder_checks(rng):
            results.append((name, check()))
        results.append(("composed_total_loss", _composed_check(rng)))
    if report is not None:
        for name, err in results:
            status = "ok" if err < TOLERANCE else "FAIL"
            report(f"{status:4s} {name:24s} max relative error {err:.3e}")
    return results


def suite_passes(results):
    return all(err < TOLERANCE for _, err in results)
