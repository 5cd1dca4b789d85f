import pytest
import torch

import groupdance as gd
from groupdance.config import ModelConfig
from groupdance.errors import InvalidConfig, ShapeMismatch
from groupdance.model import (ConditionBundle, FusionProjection, GroupDanceDenoiser,
                              MultiHeadAttention, dpe_add, film_modulate,
                              timestep_embedding)


def t64(x):
    return torch.as_tensor(x, dtype=torch.float64)


def rand(shape, seed=0):
    return torch.randn(*shape, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(seed))


class TestDpeAdd:
    def test_zero_offsets_identity(self):
        x = rand((2, 5, 8))
        assert torch.equal(dpe_add(x, torch.zeros(2, dtype=torch.float64)), x)

    def test_broadcast_per_dancer(self):
        x = torch.zeros(2, 4, 3, dtype=torch.float64)
        out = dpe_add(x, t64([1.0, 2.0]))
        assert (out[0] == 1.0).all() and (out[1] == 2.0).all()

    def test_single_dancer(self):
        x = torch.ones(1, 3, 2, dtype=torch.float64)
        assert (dpe_add(x, t64([-0.5])) == 0.5).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dpe_add(rand((2, 5, 8)), torch.zeros(3, dtype=torch.float64))

    def test_additivity(self):
        x, y = rand((3, 4, 6), 1), rand((3, 4, 6), 2)
        dpe = t64([0.1, -0.2, 0.4])
        lhs = dpe_add(x + y, dpe)
        rhs = dpe_add(x, dpe) + dpe_add(y, dpe) - dpe_add(torch.zeros_like(x), dpe)
        assert torch.allclose(lhs, rhs, atol=1e-12)


class TestTimestepEmbedding:
    def test_zero_step_layout(self):
        emb = timestep_embedding(torch.tensor([0]), 8)
        assert torch.equal(emb[0, :4], torch.zeros(4, dtype=torch.float64))
        assert torch.equal(emb[0, 4:], torch.ones(4, dtype=torch.float64))

    def test_distinct_steps_distinct_embeddings(self):
        emb = timestep_embedding(torch.tensor([0, 1, 2, 7]), 16)
        for i in range(3):
            assert not torch.allclose(emb[i], emb[i + 1])


class TestFusionProjection:
    def test_shape_contract(self):
        fusion = FusionProjection(dancers=3, width=8)
        out = fusion(rand((1, 3, 10, 8)))
        assert out.shape == (1, 3, 10, 8)

    def test_zero_params_zero_output(self):
        fusion = FusionProjection(2, 4)
        with torch.no_grad():
            for p in fusion.parameters():
                p.zero_()
        out = fusion(rand((1, 2, 6, 4)))
        assert torch.equal(out, torch.zeros_like(out))

    def test_breaks_identical_dancer_ambiguity(self):
        # hand-built weights: layer 1 reads dancer 0's channels, layer 3 writes
        # slot 0 with identity and slot 1 doubled, so equal inputs map to
        # slot outputs (1,1) and (2,2).
        fusion = FusionProjection(2, 2)
        with torch.no_grad():
            for p in fusion.parameters():
                p.zero_()
            fusion.lin1.weight.copy_(t64([[1, 0, 0, 0], [0, 1, 0, 0]]))
            fusion.lin2.weight.copy_(torch.eye(2, dtype=torch.float64))
            fusion.lin3.weight.copy_(t64([[1, 0], [0, 1], [2, 0], [0, 2]]))
        x = torch.ones(1, 2, 1, 2, dtype=torch.float64)
        out = fusion(x)
        assert torch.equal(out[0, 0, 0], t64([1.0, 1.0]))
        assert torch.equal(out[0, 1, 0], t64([2.0, 2.0]))
        assert not torch.equal(out[0, 0], out[0, 1])

    def test_rejects_wrong_dancer_count(self):
        fusion = FusionProjection(2, 4)
        with pytest.raises(ShapeMismatch):
            fusion(rand((1, 3, 5, 4)))

    def test_linear_region_superposition(self):
        # large positive biases keep every rectifier active, making the stack affine
        fusion = FusionProjection(2, 3)
        g = torch.Generator().manual_seed(5)
        with torch.no_grad():
            for name, p in fusion.named_parameters():
                if name.endswith("bias"):
                    p.fill_(10.0)
                else:
                    p.uniform_(-0.3, 0.3, generator=g)
        x, y = 0.1 * rand((1, 2, 4, 3), 6), 0.1 * rand((1, 2, 4, 3), 7)
        zero = torch.zeros_like(x)
        lhs = fusion(x + y) - fusion(zero)
        rhs = (fusion(x) - fusion(zero)) + (fusion(y) - fusion(zero))
        assert torch.allclose(lhs, rhs, atol=1e-10)


class TestFilm:
    def test_identity_modulation(self):
        x = rand((2, 5, 4))
        out = film_modulate(x, torch.ones(4, dtype=torch.float64),
                            torch.zeros(4, dtype=torch.float64))
        assert torch.equal(out, x)

    def test_zero_scale_returns_shift(self):
        x = rand((2, 5, 4))
        shift = t64([1.0, 2.0, 3.0, 4.0])
        out = film_modulate(x, torch.zeros(4, dtype=torch.float64), shift)
        assert torch.equal(out, shift.expand_as(x))

    def test_affine_example(self):
        x = torch.ones(3, 4, dtype=torch.float64)
        out = film_modulate(x, torch.full((4,), 2.0, dtype=torch.float64),
                            torch.full((4,), -1.0, dtype=torch.float64))
        assert (out == 1.0).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            film_modulate(rand((2, 4)), torch.ones(3, dtype=torch.float64),
                          torch.zeros(3, dtype=torch.float64))


class TestAttention:
    def test_rows_are_convex_combinations(self):
        attn = MultiHeadAttention(8, 2)
        g = torch.Generator().manual_seed(8)
        with torch.no_grad():
            for p in attn.parameters():
                p.uniform_(-0.5, 0.5, generator=g)
        _, weights = attn(rand((2, 7, 8), 9), need_weights=True)
        assert (weights >= 0).all()
        assert torch.allclose(weights.sum(-1), torch.ones_like(weights.sum(-1)),
                              atol=1e-12)

    def test_cross_attention_uses_context_length(self):
        attn = MultiHeadAttention(8, 2)
        out, weights = attn(rand((1, 5, 8)), context=rand((1, 11, 8), 1),
                            need_weights=True)
        assert out.shape == (1, 5, 8)
        assert weights.shape[-2:] == (5, 11)

    def test_head_count_must_divide_width(self):
        with pytest.raises(InvalidConfig):
            MultiHeadAttention(10, 3)


def small_model(width=8, layers=1, dancers=2, heads=4):
    return GroupDanceDenoiser(dancers=dancers, width=width, layers=layers, heads=heads)


class TestConditioning:
    def _music(self, frames=6):
        track = gd.synth_music(gd.ChoreographyRecipe(dancers=2, frames=30,
                                                     pattern="line", seed=1))
        return track.channels[:frames]

    def test_music_zeros_leaves_bias(self):
        model = small_model()
        music = torch.zeros(6, 35, dtype=torch.float64)
        cond = model.build_conditioning(0, music, gd.SwapMode.identity(2), 6, 1)
        assert torch.allclose(cond.music, model.music_proj.bias.expand(1, 6, -1))

    def test_deterministic(self):
        model = small_model()
        music = self._music()
        a = model.build_conditioning(3, music, gd.SwapMode.identity(2), 6, 1)
        b = model.build_conditioning(3, music, gd.SwapMode.identity(2), 6, 1)
        for x, y in ((a.timestep, b.timestep), (a.music, b.music), (a.swap, b.swap)):
            assert torch.equal(x, y)

    def test_swap_orders_change_embedding(self):
        model = small_model()
        g = torch.Generator().manual_seed(0)
        with torch.no_grad():
            model.swap_proj.weight.uniform_(-1, 1, generator=g)
        music = self._music()
        a = model.build_conditioning(0, music, gd.SwapMode((0, 1)), 6, 1)
        b = model.build_conditioning(0, music, gd.SwapMode((1, 0)), 6, 1)
        assert not torch.allclose(a.swap, b.swap)

    def test_music_length_mismatch(self):
        model = small_model()
        with pytest.raises(ShapeMismatch):
            model.build_conditioning(0, self._music(5), gd.SwapMode.identity(2), 6, 1)

    def test_film_vector_width(self):
        model = small_model(width=8)
        cond = model.build_conditioning(2, self._music(), gd.SwapMode.identity(2), 6, 1)
        assert cond.film_vector().shape == (1, 24)

    def test_swap_mode_validation(self):
        with pytest.raises(InvalidConfig):
            gd.SwapMode((0, 0))


class TestDenoiseForward:
    def _inputs(self, frames=6, batch=None):
        music = gd.synth_music(gd.ChoreographyRecipe(dancers=2, frames=30,
                                                     pattern="line", seed=2))
        music = music.channels[:frames]
        shape = (2, frames, 151) if batch is None else (batch, 2, frames, 151)
        x = rand(shape, 3)
        return x, music

    def test_constant_network(self):
        model = small_model()
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
            model.output_proj.bias.uniform_(-1, 1, generator=torch.Generator().manual_seed(4))
        x, music = self._inputs()
        out = model(x, 2, music, gd.SwapMode.identity(2))
        assert torch.allclose(out, model.output_proj.bias.expand_as(out), atol=1e-12)

    def test_shape_contract(self):
        model = GroupDanceDenoiser(dancers=2, width=16, layers=2, heads=4)
        music = gd.synth_music(gd.ChoreographyRecipe(dancers=2, frames=30,
                                                     pattern="line", seed=5))
        x = rand((2, 30, 151), 6)
        out = model(x, 1, music, gd.SwapMode.identity(2))
        assert out.shape == (2, 30, 151)
        assert torch.isfinite(out).all()

    def test_purity(self):
        model = small_model()
        x, music = self._inputs()
        a = model(x, 3, music, gd.SwapMode.identity(2))
        b = model(x, 3, music, gd.SwapMode.identity(2))
        assert torch.equal(a, b)

    def test_batched_matches_loop(self):
        model = small_model()
        x, music = self._inputs(batch=3)
        t = torch.tensor([1, 4, 2])
        swap = torch.stack([torch.tensor([0, 1]), torch.tensor([1, 0]),
                            torch.tensor([0, 1])])
        batched = model(x, t, music.unsqueeze(0).expand(3, -1, -1), swap)
        for i in range(3):
            single = model(x[i], int(t[i]), music, tuple(int(v) for v in swap[i]))
            assert torch.allclose(batched[i], single, atol=1e-12)

    def test_rejects_wrong_dancers(self):
        model = small_model()
        x, music = self._inputs()
        with pytest.raises(ShapeMismatch):
            model(rand((3, 6, 151)), 0, music, gd.SwapMode.identity(3))


class TestInitialization:
    def test_film_starts_as_identity(self):
        config = ModelConfig(dancers=2, width=8, layers=2, heads=4, fa_hidden=8)
        gdd, _ = gd.init_params(config, seed=1)
        cond_vec = rand((1, 24), 7)
        for block in gdd.blocks:
            scale, shift = block.film_scale_shift(cond_vec)
            x = rand((1, 5, 8), 8)
            assert (film_modulate(x, scale, shift) - x).abs().max() <= 1e-6

    def test_dpe_starts_at_zero(self):
        config = ModelConfig(dancers=3, width=8, layers=1, heads=4, fa_hidden=8)
        gdd, _ = gd.init_params(config, seed=2)
        assert torch.equal(gdd.dpe, torch.zeros(3, dtype=torch.float64))
