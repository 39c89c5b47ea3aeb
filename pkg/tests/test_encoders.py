import numpy as np
import pytest

from vsembed.encoders import (
    adapt_features,
    encode_text,
    flatten_spatial,
    init_recurrent_params,
    init_toy_backbone,
    lookup_embeddings,
    toy_visual_backbone,
    unflatten_spatial,
)
from vsembed.errors import ContractError, ShapeError, VocabularyError
from vsembed.tensor import frobenius_sq, grad_check, gradients, tensor, wide_precision


def w64(data, requires_grad=False):
    return tensor(data, requires_grad=requires_grad, dtype=np.float64)


class TestAdaptFeatures:
    def test_identity_adapter(self):
        rng = np.random.default_rng(0)
        raw = tensor(rng.normal(size=(2, 3, 4)))
        out = adapt_features(raw, tensor(np.eye(4)))
        assert np.allclose(out.data, raw.data)

    def test_constant_map_stays_constant(self):
        rng = np.random.default_rng(1)
        cell = rng.normal(size=5)
        raw = tensor(np.broadcast_to(cell, (3, 2, 5)).copy())
        out = adapt_features(raw, tensor(rng.normal(size=(5, 7))), tensor(rng.normal(size=7)))
        assert np.allclose(out.data, out.data[0, 0])

    def test_matches_per_cell_matmul_oracle(self):
        rng = np.random.default_rng(2)
        raw = rng.normal(size=(2, 2, 3))
        weight = rng.normal(size=(3, 5))
        bias = rng.normal(size=5)
        out = adapt_features(w64(raw), w64(weight), w64(bias)).data
        for y in range(2):
            for x in range(2):
                expected = raw[y, x] @ weight + bias
                assert np.allclose(out[y, x], expected, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            adapt_features(tensor(np.zeros((2, 2, 3))), tensor(np.zeros((4, 5))))

    def test_commutes_with_flatten(self):
        rng = np.random.default_rng(3)
        raw = w64(rng.normal(size=(3, 4, 6)))
        weight = w64(rng.normal(size=(6, 5)))
        bias = w64(rng.normal(size=5))
        lhs = flatten_spatial(adapt_features(raw, weight, bias)).data
        flat = flatten_spatial(raw).data
        rhs = flat @ weight.data + bias.data
        assert np.array_equal(lhs, rhs)


class TestFlattenSpatial:
    def test_single_cell(self):
        v = tensor(np.arange(4.0).reshape(1, 1, 4))
        out = flatten_spatial(v)
        assert out.shape == (1, 4)
        assert np.array_equal(out.data[0], v.data[0, 0])

    def test_row_major_order(self):
        # grid rows [[a, b], [c, d]] flatten to rows a, b, c, d
        v = tensor(np.array([[[1.0], [2.0]], [[3.0], [4.0]]]))
        assert np.array_equal(flatten_spatial(v).data[:, 0], [1.0, 2.0, 3.0, 4.0])

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        v = tensor(rng.normal(size=(3, 5, 2)))
        back = unflatten_spatial(flatten_spatial(v), w=5, h=3)
        assert np.array_equal(back.data, v.data)

    def test_cell_recovery_by_index(self):
        rng = np.random.default_rng(5)
        h, w = 4, 3
        v = rng.normal(size=(h, w, 2))
        flat = flatten_spatial(tensor(v)).data
        for y in range(h):
            for x in range(w):
                assert np.array_equal(flat[y * w + x], v[y, x].astype(np.float32))

    def test_unflatten_wrong_length(self):
        with pytest.raises(ShapeError):
            unflatten_spatial(tensor(np.zeros((5, 2))), w=2, h=2)


class TestLookupEmbeddings:
    def test_first_row(self):
        table = tensor(np.arange(12.0).reshape(3, 4))
        out = lookup_embeddings([0], table)
        assert np.array_equal(out.data, table.data[:1])

    def test_repeated_token_identical_rows(self):
        table = tensor(np.arange(12.0).reshape(3, 4))
        out = lookup_embeddings([2, 2, 2], table)
        assert np.array_equal(out.data[0], out.data[1])
        assert np.array_equal(out.data[1], out.data[2])

    def test_out_of_range_names_index_and_position(self):
        table = tensor(np.zeros((3, 4)))
        with pytest.raises(VocabularyError, match="index 7 at position 1"):
            lookup_embeddings([0, 7], table)

    def test_gradient_counts_token_occurrences(self):
        table = w64(np.random.default_rng(6).normal(size=(5, 3)), requires_grad=True)
        tokens = [1, 3, 1, 1]
        (g,) = gradients(lookup_embeddings(tokens, table).sum(), [table])
        counts = np.zeros(5)
        for t in tokens:
            counts[t] += 1
        assert np.array_equal(g, np.outer(counts, np.ones(3)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        with wide_precision():
            table = tensor(rng.normal(size=(4, 3)), requires_grad=True)
            coef = rng.normal(size=(3, 3))

            def f(table):
                return (lookup_embeddings([0, 2, 2], table) * coef).sum()

            assert grad_check(f, [table]) < 1e-6


class TestEncodeText:
    def test_single_step_equals_one_cell(self):
        rng = np.random.default_rng(8)
        params = init_recurrent_params(rng, input_dim=3, hidden_dim=4, layer_count=1,
                                       dropout=0.0, dtype=np.float64)
        x = rng.normal(size=(1, 3))
        out = encode_text(w64(x), params).data
        cell = params.layers[0]
        expected = np.tanh(x @ cell.w_in.data + cell.bias.data)
        assert np.allclose(out, expected, atol=1e-12)

    def test_zero_weights_give_zero_states(self):
        rng = np.random.default_rng(9)
        params = init_recurrent_params(rng, 3, 4, layer_count=2, dropout=0.0)
        for _, p in params.parameters():
            p.data[...] = 0.0
        out = encode_text(tensor(rng.normal(size=(5, 3))), params).data
        assert np.all(out == 0.0)

    def test_matches_step_by_step_oracle(self):
        rng = np.random.default_rng(10)
        params = init_recurrent_params(rng, 3, 4, layer_count=2, dropout=0.0, dtype=np.float64)
        x = rng.normal(size=(3, 3))
        out = encode_text(w64(x), params).data

        seq = x
        for cell in params.layers:
            h = np.zeros(4)
            states = []
            for i in range(seq.shape[0]):
                h = np.tanh(seq[i] @ cell.w_in.data + h @ cell.w_hidden.data + cell.bias.data)
                states.append(h)
            seq = np.stack(states)
        assert np.allclose(out, seq, atol=1e-10)

    def test_returns_all_n_states(self):
        rng = np.random.default_rng(11)
        params = init_recurrent_params(rng, 2, 3, layer_count=2, dropout=0.0)
        for n in (1, 2, 5, 9):
            out = encode_text(tensor(rng.normal(size=(n, 2))), params)
            assert out.shape == (n, 3)

    def test_causality_prefix(self):
        rng = np.random.default_rng(12)
        params = init_recurrent_params(rng, 2, 3, layer_count=3, dropout=0.0, dtype=np.float64)
        x = rng.normal(size=(6, 2))
        full = encode_text(w64(x), params).data
        for m in (1, 3, 5):
            prefix = encode_text(w64(x[:m]), params).data
            assert np.array_equal(prefix, full[:m])

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(13)
        params = init_recurrent_params(rng, 2, 3, layer_count=1)
        with pytest.raises(ContractError):
            encode_text(tensor(np.zeros((0, 2))), params)

    def test_deterministic_without_dropout_rng(self):
        rng = np.random.default_rng(14)
        params = init_recurrent_params(rng, 2, 3, layer_count=2, dropout=0.5)
        x = tensor(rng.normal(size=(4, 2)))
        a = encode_text(x, params).data
        b = encode_text(x, params).data
        assert np.array_equal(a, b)

    def test_gradient_check(self):
        rng = np.random.default_rng(15)
        with wide_precision():
            params = init_recurrent_params(rng, 2, 3, layer_count=2, dropout=0.0)
            x = tensor(rng.normal(size=(3, 2)), requires_grad=True)

            def f(x, *weights):
                return frobenius_sq(encode_text(x, params))

            weights = [p for _, p in params.parameters()]
            assert grad_check(f, [x] + weights) < 1e-4

    def test_bidirectional_shape_smoke(self):
        rng = np.random.default_rng(16)
        params = init_recurrent_params(rng, 2, 3, layer_count=2, dropout=0.0,
                                       bidirectional=True)
        out = encode_text(tensor(rng.normal(size=(4, 2))), params)
        assert out.shape == (4, 3)


class TestToyBackbone:
    def test_stride_shape(self):
        rng = np.random.default_rng(17)
        params = init_toy_backbone(rng, stride=4, in_channels=1, mid_channels=6, out_channels=3)
        out = toy_visual_backbone(tensor(rng.normal(size=(8, 8, 1))), params)
        assert out.shape == (2, 2, 3)

    def test_indivisible_dims_rejected(self):
        rng = np.random.default_rng(18)
        params = init_toy_backbone(rng, stride=4, in_channels=1, mid_channels=6, out_channels=3)
        with pytest.raises(ShapeError):
            toy_visual_backbone(tensor(np.zeros((9, 8, 1))), params)

    def test_constant_image_zero_sum_filters_give_zero_map(self):
        rng = np.random.default_rng(19)
        params = init_toy_backbone(rng, stride=2, in_channels=2, mid_channels=4, out_channels=3)
        w = params.w_patch.data
        w -= w.mean(axis=0, keepdims=True)  # every filter now sums to zero
        image = tensor(np.full((6, 6, 2), 3.7, dtype=np.float32))
        out = toy_visual_backbone(image, params).data
        assert np.allclose(out, 0.0, atol=1e-5)

    def test_matches_patch_loop_oracle(self):
        rng = np.random.default_rng(20)
        params = init_toy_backbone(rng, stride=2, in_channels=2, mid_channels=4,
                                   out_channels=3, dtype=np.float64)
        image = rng.normal(size=(4, 6, 2))
        out = toy_visual_backbone(w64(image), params).data
        for y in range(2):
            for x in range(3):
                patch = image[2 * y:2 * y + 2, 2 * x:2 * x + 2, :].reshape(-1)
                hidden = np.maximum(0.0, patch @ params.w_patch.data + params.b_patch.data)
                expected = hidden @ params.w_mix.data + params.b_mix.data
                assert np.allclose(out[y, x], expected, atol=1e-12)

    def test_gradient_check(self):
        rng = np.random.default_rng(21)
        with wide_precision():
            params = init_toy_backbone(rng, stride=2, in_channels=1, mid_channels=3,
                                       out_channels=2)
            image = tensor(rng.normal(size=(4, 4, 1)) + 0.1, requires_grad=True)

            def f(image, *weights):
                return frobenius_sq(toy_visual_backbone(image, params))

            weights = [p for _, p in params.parameters()]
            assert grad_check(f, [image] + weights) < 1e-4
