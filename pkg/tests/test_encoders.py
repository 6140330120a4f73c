import math
from pathlib import Path

import numpy as np
import pytest
import torch

from oapr.encoders import (
    AttributeContextPrompt,
    BodyPromptBank,
    TinyEncoderConfig,
    TinyTextEncoder,
    TinyVisionEncoder,
    build_prompt_mask,
    encode_attributes,
    encode_image,
    encoder_parameter_checksum,
    export_reference_encoder,
    load_dual_encoder,
    load_templates,
    prompt_ensemble_text,
)
from oapr.encoders.tiny import GROUND_DIM, hash_tokenize
from oapr.errors import ContextOverflow, DegenerateEnsemble, ShapeMismatch, TemplateError

from oracles import masked_softmax_loop

FIXTURE = Path(__file__).parent / "fixtures" / "tiny_zero_image.npz"

CFG64 = TinyEncoderConfig()


def vision64():
    return TinyVisionEncoder(CFG64, dtype=torch.float64)


def text64():
    return TinyTextEncoder(CFG64, dtype=torch.float64)


def vision_forward_loop(encoder: TinyVisionEncoder, image: np.ndarray, prompts: np.ndarray):
    """Loop-level reimplementation of the tiny vision forward pass."""
    cfg = encoder.config
    a = {k: np.asarray(v, dtype=np.float64) for k, v in encoder._arrays.items()}
    p = cfg.patch_size
    side = cfg.resolution // p
    patches = []
    for gy in range(side):
        for gx in range(side):
            patch = image[gy * p : (gy + 1) * p, gx * p : (gx + 1) * p, :]
            patches.append(patch.reshape(-1))
    patches = np.stack(patches)
    x = patches @ a["patch_proj"]
    for i in range(len(patches)):
        mean_rgb = patches[i].reshape(-1, 3).mean(axis=0)
        x[i, :GROUND_DIM] += (2 * mean_rgb - 1) * cfg.color_ground_scale
    tokens = np.vstack([a["class_embedding"][None, :], x]) + a["positional"][: len(x) + 1]
    tokens = np.vstack([tokens, prompts])
    n_pre = len(x) + 1
    t = len(tokens)
    mask = np.ones((t, t), dtype=bool)
    mask[:n_pre, n_pre:] = False

    def ln(v, g, b):
        mean = v.mean(axis=-1, keepdims=True)
        var = v.var(axis=-1, keepdims=True)
        return (v - mean) / np.sqrt(var + 1e-5) * g + b

    def gelu(v):
        # torch's exact (erf-based) gelu
        from scipy.special import erf

        return v * 0.5 * (1.0 + erf(v / math.sqrt(2.0)))

    vv_from = cfg.vision_blocks - cfg.vision_vv_blocks
    for bi in range(cfg.vision_blocks):
        blk = {k.split("/")[1]: a[k] for k in a if k.startswith(f"block{bi}/")}
        h = ln(tokens, blk["ln1_g"], blk["ln1_b"])
        v_full = h @ blk["w_v"]
        use_vv = bi >= vv_from
        q_full = v_full if use_vv else h @ blk["w_q"]
        k_full = v_full if use_vv else h @ blk["w_k"]
        d_k = cfg.width // cfg.heads
        merged = np.zeros_like(h)
        for head in range(cfg.heads):
            sl = slice(head * d_k, (head + 1) * d_k)
            logits = np.zeros((t, t))
            for i in range(t):
                for j in range(t):
                    logits[i][j] = float(np.dot(q_full[i, sl], k_full[j, sl])) / math.sqrt(d_k)
            attn = masked_softmax_loop(logits, mask)
            for i in range(t):
                for j in range(t):
                    merged[i, sl] += attn[i][j] * v_full[j, sl]
        tokens = tokens + merged @ blk["w_o"]
        h = ln(tokens, blk["ln2_g"], blk["ln2_b"])
        tokens = tokens + gelu(h @ blk["mlp_w1"] + blk["mlp_b1"]) @ blk["mlp_w2"] + blk["mlp_b2"]

    out = ln(tokens, a["ln_post_g"], a["ln_post_b"]) @ a["proj"]
    n_prompts = len(prompts)
    return out[0], out[1 : t - n_prompts], out[t - n_prompts :]


class TestTinyVisionEncoder:
    def test_shape_contract(self):
        encoder = vision64()
        prompts = BodyPromptBank(4, CFG64.width, seed=3, dtype=torch.float64)
        out = encode_image(torch.zeros((32, 32, 3), dtype=torch.float64), prompts, encoder)
        assert out.f_cls.shape == (32,)
        assert out.f_img.shape == (16, 32)
        assert out.f_img_body.shape == (4, 32)

    def test_zero_image_matches_loop_oracle_and_golden_fixture(self):
        encoder = vision64()
        prompts = BodyPromptBank(4, CFG64.width, seed=3, dtype=torch.float64)
        image = np.zeros((32, 32, 3))
        f_cls, f_img, f_body = encoder(
            torch.zeros((1, 32, 32, 3), dtype=torch.float64), prompts.tokens
        )
        o_cls, o_img, o_body = vision_forward_loop(encoder, image, prompts.tokens.detach().numpy())
        assert np.allclose(f_cls[0].detach(), o_cls, atol=1e-6)
        assert np.allclose(f_img[0].detach(), o_img, atol=1e-6)
        assert np.allclose(f_body[0].detach(), o_body, atol=1e-6)
        golden = np.load(FIXTURE)
        assert np.allclose(f_cls[0].detach(), golden["f_cls"], atol=1e-9)
        assert np.allclose(f_img[0].detach(), golden["f_img"], atol=1e-9)
        assert np.allclose(f_body[0].detach(), golden["f_img_body"], atol=1e-9)

    def test_random_image_matches_loop_oracle(self):
        encoder = vision64()
        rng = np.random.default_rng(5)
        image = rng.random((32, 32, 3))
        prompts = rng.normal(size=(4, CFG64.width)) * 0.02
        f_cls, f_img, f_body = encoder(
            torch.as_tensor(image[None]), torch.as_tensor(prompts)
        )
        o_cls, o_img, o_body = vision_forward_loop(encoder, image, prompts)
        assert np.allclose(f_cls[0], o_cls, atol=1e-6)
        assert np.allclose(f_img[0], o_img, atol=1e-6)
        assert np.allclose(f_body[0], o_body, atol=1e-6)

    def test_masking_makes_cls_and_patches_invariant_to_prompts(self):
        encoder = TinyVisionEncoder(CFG64)
        rng = np.random.default_rng(7)
        image = torch.as_tensor(rng.random((2, 32, 32, 3)), dtype=torch.float32)
        zero = torch.zeros((4, CFG64.width))
        rand = torch.as_tensor(rng.normal(size=(4, CFG64.width)), dtype=torch.float32)
        cls_a, img_a, _ = encoder(image, zero)
        cls_b, img_b, _ = encoder(image, rand)
        assert torch.equal(cls_a, cls_b)
        assert torch.equal(img_a, img_b)

    def test_wrong_resolution(self):
        with pytest.raises(ShapeMismatch):
            TinyVisionEncoder(CFG64)(torch.zeros((1, 16, 16, 3)), None)

    def test_prompt_mask_structure(self):
        mask = build_prompt_mask(5, 2)
        assert bool(mask[:5, :5].all())
        assert not bool(mask[:5, 5:].any())
        assert bool(mask[5:, :].all())

    def test_deterministic_construction(self):
        a = TinyVisionEncoder(CFG64)
        b = TinyVisionEncoder(CFG64)
        assert a.fingerprint == b.fingerprint
        assert encoder_parameter_checksum(a) == encoder_parameter_checksum(b)


class TestTinyTextEncoder:
    def test_tokenizer_stability(self):
        ids = hash_tokenize("Wearing a red hat", 512)
        assert ids == hash_tokenize("wearing a RED hat!", 512)

    def test_encode_text_deterministic(self):
        encoder = text64()
        a = encoder.encode_text("Carrying a handbag")
        b = encoder.encode_text("Carrying a handbag")
        assert torch.equal(a, b)

    def test_context_overflow(self):
        encoder = text64()
        with pytest.raises(ContextOverflow):
            encoder.forward_embeddings(torch.zeros((CFG64.context_limit + 1, CFG64.width),
                                                   dtype=torch.float64))


class TestPromptEnsemble:
    def test_body_classes_unit_rows(self):
        rows = prompt_ensemble_text(
            ["person", "head", "upper body", "lower body"], load_templates(), text64()
        )
        assert rows.shape == (4, 32)
        assert torch.allclose(rows.norm(dim=-1), torch.ones(4, dtype=rows.dtype), atol=1e-6)

    def test_single_template_equals_direct_encoding(self):
        encoder = text64()
        rows = prompt_ensemble_text(["person"], ["a photo of a {}."], encoder)
        direct = encoder.encode_text("a photo of a person.")
        direct = direct / direct.norm()
        assert torch.allclose(rows[0], direct, atol=1e-9)

    def test_template_placeholder_required(self):
        with pytest.raises(TemplateError):
            prompt_ensemble_text(["person"], ["a photo of a person."], text64())

    def test_degenerate_ensemble(self):
        class OppositeStub:
            def encode_text(self, text):
                v = torch.tensor([1.0, 0.0], dtype=torch.float64)
                return v if text.startswith("a") else -v

        with pytest.raises(DegenerateEnsemble):
            prompt_ensemble_text(["x"], ["a {}", "b {}"], OppositeStub())


class TestEncodeAttributes:
    def test_shape_and_norms(self):
        ctx = AttributeContextPrompt(66, CFG64.width, seed=1, dtype=torch.float64)
        rows = encode_attributes(ctx, ["Carrying a handbag", "Wearing a hat"], text64())
        assert rows.shape == (2, 32)
        assert torch.allclose(rows.norm(dim=-1), torch.ones(2, dtype=rows.dtype), atol=1e-6)

    def test_deterministic(self):
        ctx = AttributeContextPrompt(66, CFG64.width, seed=1, dtype=torch.float64)
        encoder = text64()
        a = encode_attributes(ctx, ["Carrying a handbag"], encoder)
        b = encode_attributes(ctx, ["Carrying a handbag"], encoder)
        assert torch.equal(a, b)

    def test_context_change_moves_every_row(self):
        encoder = text64()
        ctx_a = AttributeContextPrompt(8, CFG64.width, seed=1, dtype=torch.float64)
        ctx_b = AttributeContextPrompt(8, CFG64.width, seed=1, dtype=torch.float64)
        with torch.no_grad():
            # single-channel bump: a uniform all-channel shift would be
            # cancelled by pre-LN layer norm and never reach the readout
            ctx_b.tokens[3, 5] += 0.5
        phrases = ["Carrying a handbag", "Wearing a hat", "A female pedestrian"]
        rows_a = encode_attributes(ctx_a, phrases, encoder)
        rows_b = encode_attributes(ctx_b, phrases, encoder)
        for i in range(len(phrases)):
            assert not torch.allclose(rows_a[i], rows_b[i], atol=1e-9)

    def test_overflow(self):
        ctx = AttributeContextPrompt(75, CFG64.width, seed=1, dtype=torch.float64)
        with pytest.raises(ContextOverflow):
            encode_attributes(ctx, ["one two three four five"], text64())

    def test_novel_phrase_path(self):
        # phrases never seen anywhere still encode to finite unit rows
        ctx = AttributeContextPrompt(66, CFG64.width, seed=1, dtype=torch.float64)
        rows = encode_attributes(ctx, ["pushing a stroller"], text64()).detach()
        assert bool(torch.isfinite(rows).all())
        assert float(rows.norm(dim=-1)) == pytest.approx(1.0, abs=1e-9)


class TestAdapterParity:
    def test_round_trip_preserves_contracts(self, tmp_path):
        path = tmp_path / "dual.npz"
        config = TinyEncoderConfig(seed=99)
        export_reference_encoder(path, config)
        vision, text = load_dual_encoder(path, dtype=torch.float64)
        reference = TinyVisionEncoder(config, dtype=torch.float64)
        assert vision.fingerprint == reference.fingerprint

        rng = np.random.default_rng(0)
        image = torch.as_tensor(rng.random((1, 32, 32, 3)))
        prompts = torch.as_tensor(rng.normal(size=(4, config.width)) * 0.02)
        f_cls, f_img, f_body = vision(image, prompts)
        assert f_cls.shape == (1, 32) and f_img.shape == (1, 16, 32) and f_body.shape == (1, 4, 32)
        # same mask invariance as the reference encoder
        cls_a, img_a, _ = vision(image, torch.zeros_like(prompts))
        assert torch.equal(cls_a, f_cls) and torch.equal(img_a, f_img)

        feat = text.encode_text("Carrying a handbag")
        assert feat.shape == (32,) and bool(torch.isfinite(feat).all())

    def test_modified_weights_change_fingerprint(self, tmp_path):
        path = tmp_path / "dual.npz"
        config = TinyEncoderConfig(seed=4)
        arrays_v = TinyVisionEncoder._generate_arrays(config)
        arrays_t = TinyTextEncoder._generate_arrays(config)
        arrays_v["proj"] = arrays_v["proj"] + 0.1
        from oapr.encoders.adapter import save_dual_encoder

        save_dual_encoder(path, config, arrays_v, arrays_t)
        vision, _ = load_dual_encoder(path)
        assert vision.fingerprint != TinyVisionEncoder(config).fingerprint
