import numpy as np
import pytest
import torch

from conftest import random_motion_frames
from vimo.diffusion import SamplerConfig, ddim_sample, make_schedule
from vimo.editing import (
    EditRequest,
    MaskSpec,
    build_inbetween_mask,
    build_infill_mask,
    complete,
)
from vimo.errors import BadRange, ShapeMismatch
from vimo.skeleton import MOTION_DIM, Motion


class TestMasks:
    def test_inbetween_counts(self):
        mask = build_inbetween_mask(150, 10, 10)
        assert mask.mask.sum() == 20 * MOTION_DIM
        assert np.all(mask.mask[:10] == 1) and np.all(mask.mask[-10:] == 1)
        assert np.all(mask.mask[10:140] == 0)

    def test_inbetween_zero_is_pure_generation(self):
        mask = build_inbetween_mask(150, 0, 0)
        assert mask.mask.sum() == 0

    def test_inbetween_full_range_rejected(self):
        with pytest.raises(BadRange):
            build_inbetween_mask(150, 100, 50)

    def test_infill_counts(self):
        mask = build_infill_mask(150, (50, 100))
        assert mask.mask.sum() == 100 * MOTION_DIM

    def test_infill_edges(self):
        assert build_infill_mask(150, (0, 0)).mask.sum() == 150 * MOTION_DIM
        assert build_infill_mask(150, (0, 150)).mask.sum() == 0

    def test_infill_bad_range(self):
        with pytest.raises(BadRange):
            build_infill_mask(150, (-1, 10))
        with pytest.raises(BadRange):
            build_infill_mask(150, (10, 200))

    def test_mask_spec_binary_only(self):
        bad = np.full((4, MOTION_DIM), 0.5)
        with pytest.raises(BadRange):
            MaskSpec(mask=bad)

    def test_request_length_check(self):
        ref = Motion(frames=np.zeros((20, MOTION_DIM)))
        with pytest.raises(ShapeMismatch):
            EditRequest(reference=ref, mask=build_inbetween_mask(30, 2, 2))


class TestComplete:
    @pytest.fixture
    def setup(self, tiny_model):
        schedule = make_schedule("cosine", 60)
        reference = Motion(frames=random_motion_frames(24, np.random.default_rng(0)))
        return tiny_model, schedule, reference

    def test_all_ones_mask_returns_reference_exactly(self, setup):
        model, schedule, reference = setup
        mask = MaskSpec(mask=np.ones((24, MOTION_DIM)))
        request = EditRequest(reference=reference, mask=mask,
                              sampler=SamplerConfig(ddim_steps=6, seed=4,
                                                    guidance_weight=0.0))
        out = complete(request, model, schedule)
        assert np.array_equal(out.frames, reference.frames)

    def test_all_zeros_mask_matches_plain_sampling_bitwise(self, setup):
        model, schedule, reference = setup
        scfg = SamplerConfig(ddim_steps=6, seed=9, guidance_weight=0.0)
        mask = MaskSpec(mask=np.zeros((24, MOTION_DIM)))
        request = EditRequest(reference=reference, mask=mask, sampler=scfg)
        completed = complete(request, model, schedule)
        plain = ddim_sample(model, None, schedule, scfg, num_frames=24)
        assert np.array_equal(completed.frames, plain.frames)

    def test_constrained_entries_match_reference(self, setup):
        model, schedule, reference = setup
        mask = build_inbetween_mask(24, 4, 4)
        request = EditRequest(reference=reference, mask=mask,
                              sampler=SamplerConfig(ddim_steps=6, seed=2,
                                                    guidance_weight=0.0))
        out = complete(request, model, schedule)
        constrained = mask.mask.astype(bool)
        assert np.array_equal(out.frames[constrained], reference.frames[constrained])
        # unmasked region is model-generated, not the reference
        assert not np.allclose(out.frames[~constrained], reference.frames[~constrained])

    def test_union_mask_constrains_union(self, setup):
        model, schedule, reference = setup
        m1 = build_inbetween_mask(24, 4, 0).mask
        m2 = build_infill_mask(24, (0, 20)).mask
        union = MaskSpec(mask=np.maximum(m1, m2))
        request = EditRequest(reference=reference, mask=union,
                              sampler=SamplerConfig(ddim_steps=6, seed=2,
                                                    guidance_weight=0.0))
        out = complete(request, model, schedule)
        constrained = union.mask.astype(bool)
        assert np.array_equal(out.frames[constrained], reference.frames[constrained])

    def test_per_channel_mask_keeps_root_only(self, setup):
        model, schedule, reference = setup
        mask = np.zeros((24, MOTION_DIM))
        mask[:, -3:] = 1.0  # hold the root trajectory, regenerate the rest
        request = EditRequest(reference=reference, mask=MaskSpec(mask=mask),
                              sampler=SamplerConfig(ddim_steps=6, seed=5,
                                                    guidance_weight=0.0))
        out = complete(request, model, schedule)
        assert np.array_equal(out.frames[:, -3:], reference.frames[:, -3:])
        assert not np.allclose(out.frames[:, :144], reference.frames[:, :144])

    def test_deterministic(self, setup):
        model, schedule, reference = setup
        mask = build_inbetween_mask(24, 3, 3)
        request = EditRequest(reference=reference, mask=mask,
                              sampler=SamplerConfig(ddim_steps=6, seed=8,
                                                    guidance_weight=0.0))
        a = complete(request, model, schedule)
        b = complete(request, model, schedule)
        assert np.array_equal(a.frames, b.frames)
