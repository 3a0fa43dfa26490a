"""End-to-end shapes and structural behavior of both networks."""

import numpy as np
import pytest

from compse.errors import ContractError, ShapeError
from compse.models import (Discriminator, DiscriminatorConfig, Generator,
                           GeneratorConfig, count_parameters)


def test_generator_preserves_waveform_shape():
    gen = Generator(GeneratorConfig.tiny_scale(), rng=np.random.default_rng(0))
    for batch, length in ((1, 60), (3, 127), (2, 300)):
        x = np.random.default_rng(1).standard_normal((batch, length))
        assert gen.forward(x).data.shape == (batch, length)


def test_generator_starts_as_passthrough_in_crm_mode():
    # the mask head begins at the identity, so an untrained network
    # must return its input up to analysis/synthesis round-trip error
    gen = Generator(GeneratorConfig.tiny_scale(mask_mode="crm"),
                    rng=np.random.default_rng(2))
    x = np.random.default_rng(3).standard_normal((2, 90))
    out = gen.forward(x).data
    assert np.max(np.abs(out - x)) < 1e-9


@pytest.mark.parametrize("kind", ["lstm", "clstm", "cblstm"])
def test_all_recurrent_kinds_forward(kind):
    gen = Generator(GeneratorConfig.tiny_scale(recurrent_kind=kind),
                    rng=np.random.default_rng(4))
    x = np.random.default_rng(5).standard_normal((2, 60))
    out = gen.forward(x)
    assert out.data.shape == (2, 60)
    assert np.all(np.isfinite(out.data))


@pytest.mark.parametrize("mode", ["crm", "polar", "real"])
def test_all_mask_modes_forward(mode):
    gen = Generator(GeneratorConfig.tiny_scale(mask_mode=mode),
                    rng=np.random.default_rng(6))
    x = np.random.default_rng(7).standard_normal((1, 60))
    assert np.all(np.isfinite(gen.forward(x).data))


def test_generator_rejects_bad_inputs():
    gen = Generator(GeneratorConfig.tiny_scale(), rng=np.random.default_rng(8))
    with pytest.raises(ShapeError):
        gen.forward(np.zeros(60))  # missing batch axis
    with pytest.raises(ContractError):
        gen.forward(np.zeros((1, 4)))  # shorter than one analysis window


def test_generator_rejects_indivisible_bin_count():
    with pytest.raises(ContractError):
        GeneratorConfig.tiny_scale(encoder_channels=(2, 4, 8))  # 4 bins, 3 halvings


def test_unknown_recurrent_kind_rejected():
    with pytest.raises(ContractError):
        GeneratorConfig(recurrent_kind="gru")


def test_discriminator_scores_one_scalar_per_item():
    cfg = DiscriminatorConfig.tiny_scale()
    disc = Discriminator(cfg, rng=np.random.default_rng(9))
    rng = np.random.default_rng(10)
    out = disc.forward(rng.standard_normal((3, cfg.slice_len)),
                       rng.standard_normal((3, cfg.slice_len)))
    assert out.data.shape == (3, 1)
    assert np.all(np.isfinite(out.data))


def test_discriminator_final_length_matches_stride_chain():
    cfg = DiscriminatorConfig.tiny_scale()  # 64 samples, two stride-2 layers
    disc = Discriminator(cfg, rng=np.random.default_rng(11))
    assert disc.final_len == 16


def test_discriminator_depends_on_condition_channel():
    cfg = DiscriminatorConfig.tiny_scale()
    disc = Discriminator(cfg, rng=np.random.default_rng(12))
    rng = np.random.default_rng(13)
    cand = rng.standard_normal((1, cfg.slice_len))
    s1 = disc.forward(cand, rng.standard_normal((1, cfg.slice_len))).data
    s2 = disc.forward(cand, rng.standard_normal((1, cfg.slice_len))).data
    assert not np.allclose(s1, s2)


def test_discriminator_rejects_shape_mismatch():
    cfg = DiscriminatorConfig.tiny_scale()
    disc = Discriminator(cfg, rng=np.random.default_rng(14))
    with pytest.raises(ShapeError):
        disc.forward(np.zeros((1, cfg.slice_len)), np.zeros((1, cfg.slice_len - 1)))


def test_parameter_counts_positive_and_seed_dependent():
    cfg = GeneratorConfig.tiny_scale()
    a = Generator(cfg, rng=np.random.default_rng(0))
    b = Generator(cfg, rng=np.random.default_rng(1))
    assert count_parameters(a) > 0
    assert count_parameters(a) == count_parameters(b)
    diff = any(not np.array_equal(pa.data, pb.data)
               for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()))
    assert diff
