import dataclasses

import numpy as np
import pytest
import torch

from vimo.errors import (
    CheckpointMismatch,
    ConfigError,
    LengthMismatch,
    OutOfRange,
    ShapeMismatch,
)
from vimo.model import (
    ConditionEncoding,
    DenoiserNet,
    ModelConfig,
    frame_position_encoding,
    load_checkpoint,
    save_checkpoint,
    timestep_embedding,
)


def random_pose_batch(batch, num_frames, rng):
    frames = rng.normal(size=(batch, num_frames, 17, 3))
    frames[..., 2] = 1.0
    return torch.tensor(frames, dtype=torch.float32)


class TestModelConfig:
    def test_head_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            ModelConfig(hidden_dim=30, num_heads=4)

    def test_blocks_positive(self):
        with pytest.raises(ConfigError):
            ModelConfig(num_blocks=0)


class TestTimestepEmbedding:
    def test_t0_first_pair(self):
        emb = timestep_embedding(torch.tensor([0]), 16)
        assert emb[0, 0] == 0.0 and emb[0, 1] == 1.0

    def test_repeated_calls_identical(self):
        a = timestep_embedding(torch.tensor([123]), 32)
        b = timestep_embedding(torch.tensor([123]), 32)
        assert torch.equal(a, b)

    def test_nearby_steps_closer_than_distant(self):
        # direct computation over the sinusoid bank
        e100 = timestep_embedding(torch.tensor([100]), 64)
        e101 = timestep_embedding(torch.tensor([101]), 64)
        e500 = timestep_embedding(torch.tensor([500]), 64)
        assert torch.norm(e100 - e101) < torch.norm(e100 - e500)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            timestep_embedding(torch.tensor([-1]), 16)
        with pytest.raises(OutOfRange):
            timestep_embedding(torch.tensor([1001]), 16, max_timestep=1000)


class TestConditionEncoder:
    def test_confidence_zero_masks_coordinates(self, tiny_model):
        rng = np.random.default_rng(0)
        a = random_pose_batch(1, 20, rng)
        b = a.clone()
        a[0, 5, 3, 2] = 0.0
        b[0, 5, 3, 2] = 0.0
        b[0, 5, 3, 0:2] = 999.0  # coordinates of a confidence-0 joint differ
        enc_a = tiny_model.encode_condition(a)
        enc_b = tiny_model.encode_condition(b)
        assert torch.equal(enc_a.tokens, enc_b.tokens)
        assert torch.equal(enc_a.pooled, enc_b.pooled)

    def test_zero_length_rejected(self, tiny_model):
        with pytest.raises(LengthMismatch):
            tiny_model.encode_condition(torch.zeros(1, 0, 17, 3))

    def test_too_long_rejected(self, tiny_model):
        with pytest.raises(LengthMismatch):
            tiny_model.encode_condition(torch.zeros(1, 161, 17, 3))

    def test_permuted_frames_match_recompute_oracle(self, tiny_model):
        rng = np.random.default_rng(1)
        pose = random_pose_batch(1, 12, rng)
        perm = torch.tensor(np.random.default_rng(2).permutation(12))
        tokens = tiny_model.encode_condition(pose).tokens[0]
        tokens_perm = tiny_model.encode_condition(pose[:, perm]).tokens[0]
        # oracle: permuting frames permutes tokens except the position encodings
        pe = frame_position_encoding(12, tiny_model.config.cond_dim).to(tokens.dtype)
        expected = tokens[perm] - pe[perm] + pe
        assert torch.allclose(tokens_perm, expected, atol=1e-6)


class TestDenoise:
    @pytest.mark.parametrize("num_frames", [10, 150])
    def test_shape_preserved(self, tiny_model, num_frames):
        x = torch.randn(2, num_frames, 151)
        cond = tiny_model.encode_condition(
            random_pose_batch(2, num_frames, np.random.default_rng(0)))
        out = tiny_model.denoise(x, 7, cond)
        assert out.shape == x.shape

    def test_unbatched_shape(self, tiny_model):
        x = torch.randn(10, 151)
        assert tiny_model.denoise(x, 0, None).shape == x.shape

    def test_null_condition_deterministic(self, tiny_model):
        tiny_model.eval()
        x = torch.randn(1, 20, 151)
        a = tiny_model.denoise(x, 3, None)
        b = tiny_model.denoise(x, 3, None)
        assert torch.equal(a, b)

    def test_null_condition_equals_null_encoding_path(self, tiny_model):
        tiny_model.eval()
        x = torch.randn(1, 20, 151)
        explicit = tiny_model.denoise(x, 3, tiny_model.null_encoding(1, 20))
        assert torch.equal(tiny_model.denoise(x, 3, None), explicit)

    def test_fresh_model_zero_input_bounded(self):
        torch.manual_seed(123)
        model = DenoiserNet(ModelConfig(hidden_dim=32, num_blocks=2, num_heads=2, cond_dim=32))
        with torch.no_grad():
            out = model.denoise(torch.zeros(1, 30, 151), 0, None)
        assert torch.isfinite(out).all()
        # fresh linear heads keep outputs near the init scale
        assert float(out.abs().max()) < 10.0

    def test_bad_shapes_rejected(self, tiny_model):
        with pytest.raises(ShapeMismatch):
            tiny_model.denoise(torch.randn(1, 10, 150), 0, None)
        with pytest.raises(OutOfRange):
            tiny_model.denoise(torch.randn(1, 10, 151), 5000, None)


class TestFiLM:
    def test_identity_film_stage(self, tiny_model):
        # with gamma=1, beta=0 the FiLM stage must be exactly the identity:
        # replicate the block omitting FiLM and compare
        block = tiny_model.blocks[0]
        with torch.no_grad():
            block.film.weight.zero_()
            d = tiny_model.config.hidden_dim
            block.film.bias[:d] = 1.0
            block.film.bias[d:] = 0.0
        h = torch.randn(1, 9, d)
        cond = torch.randn(1, 9, tiny_model.config.cond_dim)
        signal = torch.randn(1, d)
        block.eval()
        with torch.no_grad():
            out = block(h, cond, signal)
            x = block.norm_self(h)
            manual = h + block.self_attn(x, x, x, need_weights=False)[0]
            manual = manual + block.cross_attn(block.norm_cross(manual), cond, cond,
                                               need_weights=False)[0]
            manual = manual + block.mlp(block.norm_mlp(manual))
        assert torch.allclose(out, manual, atol=1e-7)

    def test_film_scales_and_shifts(self, tiny_model):
        block = tiny_model.blocks[0]
        d = tiny_model.config.hidden_dim
        with torch.no_grad():
            block.film.weight.zero_()
            block.film.bias[:d] = 3.0
            block.film.bias[d:] = -1.0
        gamma, beta = block.film(torch.zeros(1, d)).chunk(2, dim=-1)
        assert torch.all(gamma == 3.0) and torch.all(beta == -1.0)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tiny_model, tmp_path):
        path = tmp_path / "model.ckpt"
        tiny_model.eval()
        x = torch.randn(1, 15, 151)
        before = tiny_model.denoise(x, 9, None)
        save_checkpoint(tiny_model, path, step=42, extra={"note": 1})
        loaded, meta = load_checkpoint(path)
        loaded.eval()
        assert torch.equal(loaded.denoise(x, 9, None), before)
        assert meta["step"] == 42 and meta["extra"] == {"note": 1}

    def test_config_mismatch_refused(self, tiny_model, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_model, path)
        other = dataclasses.replace(tiny_model.config, hidden_dim=64, cond_dim=64)
        with pytest.raises(CheckpointMismatch):
            load_checkpoint(path, expect_config=other)

    def test_garbage_file_refused(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointMismatch):
            load_checkpoint(path)
