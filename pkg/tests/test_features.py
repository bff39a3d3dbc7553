import hashlib
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from padbench.errors import ChecksumError, CropError, ExtractionError
from padbench.features import (
    FeatureCache,
    IQMConfig,
    LBPConfig,
    config_hash,
    crop_face,
    extract_color_lbp,
    extract_iqm,
    video_feature,
)
from padbench.features import iqm, lbp
from padbench.features.cache import decode_entry, encode_entry
from padbench.features.imaging import color_channels, resize_bilinear, rgb_to_hsv, rgb_to_ycrcb


def rand_crop(seed, size=64):
    return np.random.default_rng(seed).integers(0, 256, size=(size, size, 3), dtype=np.uint8)


class TestCrop:
    def test_identity_when_already_64(self):
        frame = rand_crop(0)
        assert np.array_equal(crop_face(frame, (0, 0, 64, 64)), frame)

    def test_constant_frame(self):
        frame = np.full((128, 128, 3), 77, dtype=np.uint8)
        assert np.all(crop_face(frame, (0, 0, 128, 128)) == 77)

    def test_checkerboard_upscale_matches_oracle(self):
        board = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        src = np.stack([board, 255 - board, board // 2], axis=-1)
        out = resize_bilinear(src, 64, 64)
        for oy in range(64):
            for ox in range(64):
                ref = oracles.bilinear_pixel(src, oy, ox, 64, 64)
                assert np.all(np.abs(out[oy, ox].astype(float) - ref) <= 1.0)

    def test_random_downscale_matches_oracle(self):
        src = rand_crop(4, size=97)
        out = resize_bilinear(src, 64, 64)
        for oy, ox in itertools.product(range(0, 64, 7), range(0, 64, 5)):
            assert np.all(np.abs(out[oy, ox].astype(float) - oracles.bilinear_pixel(src, oy, ox, 64, 64)) <= 1.0)

    def test_square_expansion_and_clamp(self):
        frame = np.zeros((100, 200, 3), dtype=np.uint8)
        frame[:, 130:] = 200
        # 20x60 box near the right edge expands to a 60x60 square shifted inside
        out = crop_face(frame, (170, 20, 20, 60))
        assert out.shape == (64, 64, 3)
        assert np.all(out == 200)

    @pytest.mark.parametrize("bbox", [(0, 0, 0, 10), (300, 0, 10, 10), (-50, -50, 20, 20)])
    def test_bad_boxes(self, bbox):
        with pytest.raises(CropError):
            crop_face(np.zeros((100, 100, 3), dtype=np.uint8), bbox)


class TestColour:
    def test_grey_pixels(self):
        px = np.full((1, 1, 3), 100, dtype=np.uint8)
        assert rgb_to_ycrcb(px)[0, 0].tolist() == [100, 128, 128]
        assert rgb_to_hsv(px)[0, 0].tolist() == [0, 0, 100]

    def test_primaries(self):
        px = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]], dtype=np.uint8)
        hsv = rgb_to_hsv(px)[0]
        assert hsv[:, 0].tolist() == [0, 85, 170]
        assert hsv[:, 1].tolist() == [255, 255, 255]
        ycc = rgb_to_ycrcb(px)[0]
        assert ycc[0].tolist() == [76, 255, 85]  # Y=76.245, Cr=128+0.713*178.755, Cb=128-0.564*76.245


class TestLBP:
    def test_uniform_bin_count(self):
        assert lbp.n_bins(8) == 59
        table, n = oracles.uniform_bin_table()
        assert n == 59
        assert [table[c] for c in range(256)] == lbp.uniform_lookup(8).tolist()

    def test_offsets_are_3x3_ring(self):
        assert lbp.neighbour_offsets(8, 1) == oracles.RING_3X3

    def test_default_dim(self):
        cfg = LBPConfig()
        assert lbp.n_blocks(64, 64, 16, 8) == 49
        assert cfg.dim == 6 * 49 * 59 == 17346
        assert extract_color_lbp(rand_crop(1), cfg).shape == (17346,)

    @pytest.mark.parametrize("kw", [dict(block=32, stride=16), dict(channels=("Y", "H")), dict(uniform=False),
                                    dict(block=8, stride=4, channels=("V",))])
    def test_dim_closed_form(self, kw):
        cfg = LBPConfig(**kw)
        vec = extract_color_lbp(rand_crop(2), cfg)
        blocks = ((64 - cfg.block) // cfg.stride + 1) ** 2
        bins = 59 if cfg.uniform else 256
        assert vec.shape == (len(cfg.channels) * blocks * bins,) == (cfg.dim,)

    def test_constant_crop_single_bin(self):
        crop = np.full((64, 64, 3), 90, dtype=np.uint8)
        hists = extract_color_lbp(crop).reshape(6, 49, 59)
        flat_bin = int(lbp.uniform_lookup(8)[255])  # all neighbours >= centre
        assert np.all(hists[:, :, flat_bin] == 14 * 14)
        assert hists.sum() == 6 * 49 * 14 * 14

    @pytest.mark.parametrize("seed", range(3))
    def test_block_histograms_match_naive_loop(self, seed):
        ch = rand_crop(seed)[:, :, 0]
        assert np.array_equal(lbp.block_histograms(ch), oracles.naive_block_histograms(ch))

    def test_mass_conservation(self):
        hists = lbp.block_histograms(rand_crop(9)[:, :, 1], block=20, stride=11)
        assert np.all(hists.sum(axis=1) == 18 * 18)

    @given(arrays(np.uint8, (24, 24)), st.integers(0, 40))
    @settings(max_examples=40, deadline=None)
    def test_shift_invariance(self, channel, shift):
        channel = np.minimum(channel, 200)
        a = lbp.block_histograms(channel, block=12, stride=6)
        b = lbp.block_histograms(channel.astype(np.int32) + shift, block=12, stride=6)
        assert np.array_equal(a, b)

    def test_channel_order(self):
        crop = rand_crop(5)
        cfg = LBPConfig(channels=("S", "Y"))
        vec = extract_color_lbp(crop, cfg)
        planes = color_channels(crop, ("S", "Y"))
        expected = np.concatenate([lbp.block_histograms(planes["S"]).ravel(), lbp.block_histograms(planes["Y"]).ravel()])
        assert np.array_equal(vec, expected)


A = np.array([[10, 20, 30, 40], [50, 60, 70, 80], [90, 100, 110, 120], [130, 140, 150, 160]], dtype=float)
B = np.array([[12, 18, 33, 40], [49, 65, 70, 79], [90, 104, 108, 121], [135, 139, 150, 158]], dtype=float)


class TestIQM:
    def test_mse_hand_computed(self):
        # squared diffs: 4,4,9,0, 1,25,0,1, 0,16,4,1, 25,1,0,4 -> 95 / 16
        assert iqm.mse(A, B) == pytest.approx(95 / 16, abs=1e-12)
        assert abs(iqm.mse(A, B) - oracles.loop_mse(A, B)) < 1e-9

    def test_pointwise_measures_match_loops(self):
        cells = [(y, x) for y in range(4) for x in range(4)]
        sa2 = sum(A[c] ** 2 for c in cells)
        sb2 = sum(B[c] ** 2 for c in cells)
        mse = oracles.loop_mse(A, B)
        expect = {
            "psnr": 10 * np.log10(255.0 ** 2 / mse),
            "snr": 10 * np.log10(sa2 / (16 * mse)),
            "sc": sa2 / sb2,
            "md": max(abs(A[c] - B[c]) for c in cells),
            "ad": sum(A[c] - B[c] for c in cells) / 16,
            "nae": sum(abs(A[c] - B[c]) for c in cells) / sum(abs(A[c]) for c in cells),
            "nxc": sum(A[c] * B[c] for c in cells) / sa2,
        }
        for name, value in expect.items():
            assert abs(iqm.FULL_REFERENCE[name](A, B) - value) < 1e-9, name

    def test_edge_and_gradient_measures_match_loops(self):
        ted = np.mean(np.abs(oracles.loop_sobel_mag(A) - oracles.loop_sobel_mag(B)))
        gme = np.mean((oracles.loop_gradient_mag(A) - oracles.loop_gradient_mag(B)) ** 2)
        assert abs(iqm.total_edge_difference(A, B) - ted) < 1e-9
        assert abs(iqm.gradient_magnitude_error(A, B) - gme) < 1e-9

    def test_spectral_measures_match_naive_dft(self):
        fa, fb = oracles.naive_dft(A), oracles.naive_dft(B)
        sme = np.mean((np.abs(fa) - np.abs(fb)) ** 2)
        spe = np.mean(np.abs(np.angle(fa) - np.angle(fb)) ** 2)
        assert abs(iqm.spectral_magnitude_error(A, B) - sme) < 1e-9 * max(1.0, sme)
        assert abs(iqm.spectral_phase_error(A, B) - oracles.exact_phase_error4(A, B)) < 1e-9
        assert abs(iqm.spectral_phase_error(A, A)) < 1e-12
        assert spe >= 0

    def test_ssim_matches_loop(self):
        assert abs(iqm.ssim(A, B) - oracles.loop_ssim(A, B)) < 1e-9
        assert abs(iqm.ssim(A, A) - 1.0) < 1e-12

    def test_self_reference_identities(self):
        crop = rand_crop(3)
        vec = extract_iqm(crop, IQMConfig(sigma=0.0))
        names = list(IQMConfig().measures)
        assert vec[names.index("mse")] == 0.0
        assert vec[names.index("nxc")] == 1.0
        assert vec[names.index("psnr")] == 0.0  # sentinel

    def test_gaussian_reference_kernel(self):
        img = np.zeros((9, 9))
        img[4, 4] = 1.0
        ref = iqm.gaussian_reference(img, 1.0, 5)
        nz = np.argwhere(ref > 0)
        assert nz.min(axis=0).tolist() == [2, 2] and nz.max(axis=0).tolist() == [6, 6]
        assert ref.sum() == pytest.approx(1.0)

    def test_dim_matches_measure_list(self):
        cfg = IQMConfig()
        assert cfg.dim == 13 + 1 + 9 + 2 + 3 == 28
        assert extract_iqm(rand_crop(0), cfg).shape == (28,)
        sub = IQMConfig(measures=("mse", "chroma", "ssim"))
        assert sub.dim == 11 == extract_iqm(rand_crop(0), sub).shape[0]
        with pytest.raises(ValueError):
            IQMConfig(measures=("mse", "sharpness"))

    def test_constant_image_sentinels(self):
        vec = extract_iqm(np.full((64, 64, 3), 128, dtype=np.uint8))
        assert np.all(np.isfinite(vec))

    @given(arrays(np.uint8, (64, 64, 3)))
    @settings(max_examples=15, deadline=None)
    def test_finite_on_any_input(self, crop):
        assert np.all(np.isfinite(extract_iqm(crop)))
        assert np.all(np.isfinite(extract_color_lbp(crop)))


class TestVideoFeature:
    def test_single_frame(self):
        crop = rand_crop(0)
        assert np.array_equal(video_feature([crop], IQMConfig()), extract_iqm(crop))

    def test_two_frames_mean(self):
        a, b = rand_crop(1), rand_crop(2)
        u, v = extract_color_lbp(a), extract_color_lbp(b)
        assert np.allclose(video_feature([a, b], LBPConfig()), (u + v) / 2, rtol=0, atol=1e-12)

    def test_thirty_frames_match_accumulation(self):
        crops = [rand_crop(s) for s in range(30)]
        cfg = IQMConfig()
        total = [0.0] * cfg.dim
        for c in crops:
            for k, x in enumerate(extract_iqm(c, cfg)):
                total[k] += x
        expected = np.array(total) / 30
        got = video_feature(crops, cfg)
        assert np.all(np.abs(got - expected) <= 1e-9 * np.maximum(1.0, np.abs(expected)))

    def test_empty(self):
        with pytest.raises(ExtractionError):
            video_feature([], LBPConfig())

    def test_deterministic(self):
        crop = rand_crop(8)
        assert extract_color_lbp(crop).tobytes() == extract_color_lbp(crop.copy()).tobytes()
        assert extract_iqm(crop).tobytes() == extract_iqm(crop.copy()).tobytes()


class TestCache:
    def test_put_get(self, tmp_path):
        cache = FeatureCache(tmp_path)
        vec = np.random.default_rng(0).standard_normal(100).astype(np.float32)
        h = config_hash(LBPConfig())
        cache.put("ds", "s1", "color_lbp", h, vec)
        got = cache.get("ds", "s1", "color_lbp", h)
        assert got.dtype == np.float32 and got.tobytes() == vec.tobytes()

    def test_miss(self, tmp_path):
        assert FeatureCache(tmp_path).get("ds", "nope", "iqm", config_hash(IQMConfig())) is None

    def test_write_once(self, tmp_path):
        cache = FeatureCache(tmp_path)
        h = config_hash(IQMConfig())
        cache.put("ds", "s", "iqm", h, np.ones(3))
        cache.put("ds", "s", "iqm", h, np.zeros(3))
        assert cache.get("ds", "s", "iqm", h).tolist() == [1.0, 1.0, 1.0]

    def test_config_change_new_key(self, tmp_path):
        cache = FeatureCache(tmp_path)
        h1, h2 = config_hash(LBPConfig()), config_hash(LBPConfig(stride=16))
        cache.put("ds", "s", "color_lbp", h1, np.ones(4))
        assert cache.get("ds", "s", "color_lbp", h2) is None
        cache.put("ds", "s", "color_lbp", h2, np.zeros(4))
        assert cache.get("ds", "s", "color_lbp", h1).tolist() == [1, 1, 1, 1]

    def test_hashes_distinct_over_many_configs(self):
        seen = set()
        grid = itertools.product([1, 2, 3], [4, 8, 12, 16], [True, False], range(4, 33, 2), range(1, 15),
                                 [("Y",), ("Y", "Cr", "Cb", "H", "S", "V")])
        n = 0
        for radius, nb, uni, block, stride, channels in grid:
            if block - 2 * radius < 1:
                continue
            seen.add(config_hash(LBPConfig(radius, nb, uni, block, stride, channels)))
            n += 1
        for sigma, kernel in itertools.product(np.linspace(0.1, 5.0, 200), (3, 5, 7, 9, 11)):
            seen.add(config_hash(IQMConfig(sigma=float(sigma), kernel=kernel)))
            n += 1
        assert n >= 10_000 and len(seen) == n

    def test_corruption_detected(self, tmp_path):
        cache = FeatureCache(tmp_path)
        h = config_hash(IQMConfig())
        path = cache.put("ds", "s", "iqm", h, np.arange(5, dtype=np.float32))
        blob = bytearray(path.read_bytes())
        blob[-8] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            cache.get("ds", "s", "iqm", h)

    def test_entry_layout(self):
        h = hashlib.sha256(b"x").hexdigest()
        blob = encode_entry(np.array([1.5, -2.0]), "iqm", h)
        assert blob[:4] == b"PADF"
        assert blob[4:6] == (1).to_bytes(2, "little")
        values, ext, got_hash = decode_entry(blob)
        assert ext == "iqm" and got_hash == h and values.tolist() == [1.5, -2.0]
        assert blob[-12:-4] == np.array([1.5, -2.0], dtype="<f4").tobytes()
