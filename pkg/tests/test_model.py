import math

import numpy as np
import pytest

from polyclass.errors import CheckpointError, EmptySequenceError, SequenceTooLongError
from polyclass.model import (
    AdamHyper,
    ModelConfig,
    adam_step,
    count_flops,
    cross_entropy,
    forward,
    init_adam_state,
    init_buffers,
    init_params,
    load_checkpoint,
    loss_and_backward,
    make_batch,
    num_parameters,
    positional_encoding,
    save_checkpoint,
    self_attention,
)

TINY = ModelConfig(
    num_classes=3, d_model=8, num_heads=2, conv_channels=(4, 4, 4, 4, 4),
    kernel_size=3, dropout_rate=0.0, max_len=64,
)

DEFAULT = ModelConfig(num_classes=10)


def tiny_setup(seed=7, dtype=np.float64):
    rng = np.random.default_rng(seed)
    params = init_params(TINY, rng, dtype=dtype)
    buffers = init_buffers(TINY, dtype=dtype)
    batch = make_batch([rng.random((5, 2)), rng.random((3, 2))], [1, 2], dtype=dtype)
    return params, buffers, batch


class TestPositionalEncoding:
    def test_position_zero(self):
        pe = positional_encoding(4, 8)
        assert np.allclose(pe[0, 0::2], 0.0)
        assert np.allclose(pe[0, 1::2], 1.0)

    def test_bounded(self):
        pe = positional_encoding(64, 32)
        assert pe.min() >= -1.0 and pe.max() <= 1.0

    def test_pe_1_0(self):
        pe = positional_encoding(2, 8)
        assert pe[1, 0] == pytest.approx(math.sin(1.0), abs=1e-9)
        assert pe[1, 0] == pytest.approx(0.841471, abs=1e-6)

    def test_column_period(self):
        # column 2i is sin(pos / 10000^(2i/d)) with period 2*pi*10000^(2i/d)
        d, i = 8, 2
        freq = 10000 ** (2 * i / d)
        pe = positional_encoding(512, d)
        pos = np.arange(512)
        assert np.allclose(pe[:, 2 * i], np.sin(pos / freq))
        period = 2 * math.pi * freq
        assert np.allclose(np.sin(pos / freq), np.sin((pos + period) / freq), atol=1e-9)

    def test_too_long(self):
        with pytest.raises(SequenceTooLongError):
            positional_encoding(100, 8, max_len=64)


class TestSelfAttention:
    def test_single_token(self):
        params, _, _ = tiny_setup()
        x = np.random.default_rng(0).normal(size=(1, 8))
        out = self_attention(x, params, TINY)
        v = x @ params["attn_wv"] + params["attn_bv"]
        expected = v @ params["attn_wo"] + params["attn_bo"]
        assert np.allclose(out, expected, atol=1e-12)

    def test_identical_tokens_uniform_weights(self):
        params, _, _ = tiny_setup()
        row = np.random.default_rng(1).normal(size=8)
        x = np.tile(row, (5, 1))
        out = self_attention(x, params, TINY)
        # all outputs equal; and equal to the single-token result
        assert np.allclose(out, out[0], atol=1e-12)
        single = self_attention(row[None], params, TINY)
        assert np.allclose(out[0], single[0], atol=1e-12)

    def test_matches_naive_oracle(self):
        cfg = ModelConfig(num_classes=2, d_model=4, num_heads=1, conv_channels=(4,))
        params = init_params(cfg, np.random.default_rng(3), dtype=np.float64)
        x = np.random.default_rng(5).normal(size=(3, 4))
        out = self_attention(x, params, cfg)
        q = x @ params["attn_wq"] + params["attn_bq"]
        k = x @ params["attn_wk"] + params["attn_bk"]
        v = x @ params["attn_wv"] + params["attn_bv"]
        naive = np.zeros((3, 4))
        for i in range(3):
            scores = np.array([q[i] @ k[j] / 2.0 for j in range(3)])
            w = np.exp(scores - scores.max())
            w /= w.sum()
            naive[i] = sum(w[j] * v[j] for j in range(3))
        naive = naive @ params["attn_wo"] + params["attn_bo"]
        assert np.abs(out - naive).max() < 1e-6

    def test_all_masked_rejected(self):
        params, _, _ = tiny_setup()
        x = np.zeros((2, 8))
        with pytest.raises(EmptySequenceError):
            self_attention(x, params, TINY, mask=np.zeros(2))

    def test_softmax_rows_sum_to_one(self):
        params, buffers, batch = tiny_setup()
        cache = {}
        forward(batch, params, buffers, TINY, mode="eval", cache=cache)
        attn = cache["attn"]  # (B, H, N, N)
        mask = batch.mask
        sums = attn.sum(axis=-1)
        for b in range(attn.shape[0]):
            n_real = int(mask[b].sum())
            assert np.allclose(sums[b, :, :n_real], 1.0, atol=1e-6)


class TestConv:
    def test_identity_kernel(self):
        from polyclass.model import _conv1d

        x = np.random.default_rng(2).normal(size=(2, 6, 4))
        w = np.zeros((3, 4, 4))
        w[1] = np.eye(4)  # center tap, identity channel map
        out, _ = _conv1d(x, w)
        assert np.allclose(out, x, atol=1e-12)

    def test_zero_kernel(self):
        from polyclass.model import _conv1d

        x = np.random.default_rng(2).normal(size=(1, 5, 3))
        out, _ = _conv1d(x, np.zeros((3, 3, 2)))
        assert np.all(out == 0.0)

    def test_block_identity_bn_is_relu(self):
        from polyclass.model import conv_block

        x = np.random.default_rng(6).normal(size=(2, 5, 4))
        w = np.zeros((3, 4, 4))
        w[1] = np.eye(4)
        out = conv_block(x, w, np.ones(4), np.zeros(4), np.zeros(4), np.ones(4) - 1e-5)
        assert np.allclose(out, np.maximum(x, 0.0), atol=1e-12)

    def test_block_zero_weights(self):
        from polyclass.model import conv_block

        x = np.random.default_rng(6).normal(size=(1, 4, 3))
        out = conv_block(x, np.zeros((3, 3, 2)), np.ones(2), np.zeros(2),
                         np.zeros(2), np.ones(2))
        assert np.all(out == 0.0)

    def test_block_chain_matches_forward_stack(self):
        from polyclass.model import conv_block

        params, buffers, batch = tiny_setup()
        cache = {}
        forward(batch, params, buffers, TINY, mode="eval", cache=cache)
        x = (cache["x0"] + (cache["merged"] @ params["attn_wo"] + params["attn_bo"])
             * batch.mask[:, :, None]) * batch.mask[:, :, None]
        for i in range(len(TINY.conv_channels)):
            x = conv_block(
                x, params[f"conv{i}_w"], params[f"bn{i}_gamma"], params[f"bn{i}_beta"],
                buffers[f"bn{i}_mean"], buffers[f"bn{i}_var"], mask=batch.mask,
            )
        pooled = x.sum(axis=1) / batch.mask.sum(axis=1)[:, None]
        logits = pooled @ params["head_w"] + params["head_b"]
        direct = forward(batch, params, buffers, TINY, mode="eval")
        assert np.allclose(logits, direct, atol=1e-12)

    def test_matches_sliding_window_oracle(self):
        from polyclass.model import _conv1d

        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 7, 3))
        w = rng.normal(size=(5, 3, 4))
        out, _ = _conv1d(x, w)
        pad = 2
        xp = np.zeros((2, 7 + 2 * pad, 3))
        xp[:, pad:-pad] = x
        naive = np.zeros((2, 7, 4))
        for b in range(2):
            for j in range(7):
                for t in range(5):
                    naive[b, j] += xp[b, j + t] @ w[t]
        assert np.abs(out - naive).max() < 1e-6


class TestForward:
    def test_shapes_and_finite(self):
        params, buffers, batch = tiny_setup()
        logits = forward(batch, params, buffers, TINY, mode="eval")
        assert logits.shape == (2, 3)
        assert np.all(np.isfinite(logits))

    def test_duplicate_sample_identical_logits(self):
        params, buffers, _ = tiny_setup()
        rng = np.random.default_rng(9)
        seq = rng.random((6, 2))
        batch = make_batch([seq, rng.random((4, 2)), seq], dtype=np.float64)
        logits = forward(batch, params, buffers, TINY, mode="eval")
        assert np.allclose(logits[0], logits[2], atol=1e-12)

    def test_padding_invariance(self):
        params, buffers, _ = tiny_setup()
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(3, 12))
            seq = rng.random((n, 2))
            short = make_batch([seq], dtype=np.float64)
            padded = make_batch([seq, rng.random((n + 7, 2))], dtype=np.float64)
            a = forward(short, params, buffers, TINY, mode="eval")[0]
            b = forward(padded, params, buffers, TINY, mode="eval")[0]
            assert np.abs(a - b).max() < 1e-5

    def test_too_long_rejected(self):
        params, buffers, _ = tiny_setup()
        batch = make_batch([np.zeros((65, 2))], dtype=np.float64)
        with pytest.raises(SequenceTooLongError):
            forward(batch, params, buffers, TINY, mode="eval")

    def test_train_updates_running_stats(self):
        params, buffers, batch = tiny_setup()
        before = buffers["bn0_mean"].copy()
        forward(batch, params, buffers, TINY, mode="train")
        assert not np.allclose(before, buffers["bn0_mean"])

    def test_eval_ignores_batch_statistics(self):
        params, buffers, batch = tiny_setup()
        a = forward(batch, params, buffers, TINY, mode="eval")
        b = forward(batch, params, buffers, TINY, mode="eval")
        assert np.array_equal(a, b)


class TestLossAndBackward:
    def test_uniform_logits_loss_ln_k(self):
        params, buffers, batch = tiny_setup()
        params["head_w"][:] = 0.0
        params["head_b"][:] = 0.0
        loss, _ = loss_and_backward(batch, params, buffers, TINY, update_stats=False)
        assert loss == pytest.approx(math.log(3), abs=1e-12)

    def test_gradients_match_finite_differences(self):
        params, buffers, batch = tiny_setup()
        _, grads = loss_and_backward(batch, params, buffers, TINY, update_stats=False)

        def loss_at():
            value, _ = loss_and_backward(batch, params, buffers, TINY, update_stats=False)
            return value

        h = 1e-4
        for name in sorted(params):
            p = params[name]
            g = grads[name]
            it = np.nditer(p, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + h
                lp = loss_at()
                p[idx] = orig - h
                lm = loss_at()
                p[idx] = orig
                fd = (lp - lm) / (2 * h)
                rel = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8)
                assert rel <= 1e-3, f"{name}[{idx}] rel err {rel:.2e}"
                it.iternext()

    def test_gradcheck_deterministic(self):
        params1, buffers1, batch1 = tiny_setup()
        params2, buffers2, batch2 = tiny_setup()
        l1, g1 = loss_and_backward(batch1, params1, buffers1, TINY, update_stats=False)
        l2, g2 = loss_and_backward(batch2, params2, buffers2, TINY, update_stats=False)
        assert l1 == l2
        for name in g1:
            assert np.array_equal(g1[name], g2[name])

    def test_head_bias_gradient_is_mean_prob_shift(self):
        params, buffers, batch = tiny_setup()
        cache = {}
        logits = forward(batch, params, buffers, TINY, mode="train", cache=cache,
                         update_stats=False)
        _, grads = loss_and_backward(batch, params, buffers, TINY, update_stats=False)
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        onehot = np.zeros_like(probs)
        onehot[np.arange(len(batch.labels)), batch.labels] = 1.0
        expected = (probs - onehot).mean(axis=0)
        assert np.allclose(grads["head_b"], expected, atol=1e-12)
        # classes absent from the batch still get their mean softmax mass
        absent = 0
        assert batch.labels.tolist().count(absent) == 0
        assert grads["head_b"][absent] == pytest.approx(probs[:, absent].mean(), abs=1e-12)

    def test_labels_required(self):
        params, buffers, _ = tiny_setup()
        batch = make_batch([np.zeros((4, 2))], dtype=np.float64)
        with pytest.raises(ValueError):
            loss_and_backward(batch, params, buffers, TINY)


class TestAdam:
    def test_zero_gradient_no_motion(self):
        params, _, _ = tiny_setup()
        snapshot = {k: v.copy() for k, v in params.items()}
        state = init_adam_state(params)
        grads = {k: np.zeros_like(v) for k, v in params.items()}
        adam_step(params, grads, state, AdamHyper(weight_decay=0.0))
        for k in params:
            assert np.array_equal(params[k], snapshot[k])

    def test_first_step_closed_form(self):
        params = {"w": np.array([2.0])}
        state = init_adam_state(params)
        adam_step(params, {"w": np.array([1.0])}, state, AdamHyper(lr=1e-5, weight_decay=0.0))
        assert params["w"][0] == pytest.approx(2.0 - 1e-5, abs=1e-10)

    def test_hundred_steps_match_reference(self):
        rng = np.random.default_rng(0)
        params = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
        ref = {k: v.copy() for k, v in params.items()}
        state = init_adam_state(params)
        hyper = AdamHyper(lr=1e-3, weight_decay=1e-2)
        # independent reference implementation
        m = {k: np.zeros_like(v) for k, v in ref.items()}
        v_ = {k: np.zeros_like(v) for k, v in ref.items()}
        for t in range(1, 101):
            grads = {k: rng.normal(size=val.shape) for k, val in params.items()}
            adam_step(params, grads, state, hyper)
            for k in ref:
                ref[k] = ref[k] * (1 - hyper.lr * hyper.weight_decay)
                m[k] = hyper.beta1 * m[k] + (1 - hyper.beta1) * grads[k]
                v_[k] = hyper.beta2 * v_[k] + (1 - hyper.beta2) * grads[k] ** 2
                m_hat = m[k] / (1 - hyper.beta1**t)
                v_hat = v_[k] / (1 - hyper.beta2**t)
                ref[k] = ref[k] - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        for k in ref:
            assert np.abs(params[k] - ref[k]).max() < 1e-10


class TestFlops:
    def test_degenerate_head_only(self):
        cfg = ModelConfig(num_classes=10, d_model=0, num_heads=1, conv_channels=())
        assert count_flops(cfg, 7) == 2 * 1024 * 10

    def test_scaling_structure(self):
        cfg = DEFAULT
        d = cfg.d_model

        def attn_quadratic(n):
            return 2 * 2 * n * n * d

        def conv_term(n):
            c_in = d
            total = 0
            for c_out in cfg.conv_channels:
                total += 2 * n * cfg.kernel_size * c_in * c_out
                c_in = c_out
            return total

        def linear_rest(n):
            return count_flops(cfg, n) - attn_quadratic(n)

        for n in (10, 33):
            # conv (and every other linear term) doubles exactly with N; the
            # attention N^2 term quadruples exactly
            assert conv_term(2 * n) == 2 * conv_term(n)
            assert attn_quadratic(2 * n) == 4 * attn_quadratic(n)
            head = 2 * 1024 * cfg.num_classes
            assert linear_rest(2 * n) - head == 2 * (linear_rest(n) - head)

    def test_default_config_n60_hand_value(self):
        # hand arithmetic: proj 15,360 + attention 2,887,680 + convs
        # 252,149,760 + bn/relu 476,160 + pool 122,880 + head 20,480
        assert count_flops(DEFAULT, 60) == 255_672_320

    def test_monotone_in_n(self):
        values = [count_flops(DEFAULT, n) for n in range(1, 200)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            count_flops(DEFAULT, 0)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        params, buffers, _ = tiny_setup()
        state = init_adam_state(params)
        path = tmp_path / "model.ckpt"
        meta = {"class_names": ["a", "b", "c"], "representation": "contours-none"}
        save_checkpoint(path, TINY, params, buffers, meta=meta, opt_state=state)
        cfg, p2, b2, meta2, opt2 = load_checkpoint(path)
        assert cfg == TINY
        assert meta2 == meta
        assert opt2["t"] == 0
        for k in params:
            assert np.array_equal(params[k], p2[k])
        for k in buffers:
            assert np.array_equal(buffers[k], b2[k])

    def test_deterministic_bytes(self, tmp_path):
        params, buffers, _ = tiny_setup()
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, TINY, params, buffers)
        save_checkpoint(b, TINY, params, buffers)
        assert a.read_bytes() == b.read_bytes()

    def test_float32_dtype_preserved(self, tmp_path):
        params, buffers, _ = tiny_setup(dtype=np.float32)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, TINY, params, buffers)
        _, p2, _, _, _ = load_checkpoint(path)
        assert p2["proj_w"].dtype == np.float32
        assert np.array_equal(p2["proj_w"], params["proj_w"])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 100)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        params, buffers, _ = tiny_setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, TINY, params, buffers)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 50])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


def test_default_parameter_count_pinned():
    rng = np.random.default_rng(0)
    params = init_params(DEFAULT, rng)
    assert num_parameters(params) == 2_132_426


def test_cross_entropy_gradient_shape():
    logits = np.array([[2.0, 1.0, 0.5], [0.0, 0.0, 0.0]])
    loss, d = cross_entropy(logits, np.array([0, 2]))
    assert d.shape == logits.shape
    assert loss > 0
