"""Tests for frame-level representation extraction, persistence, and caching."""

from fractions import Fraction
import math

import numpy as np
import pytest

from repsynth.errors import DataError
from repsynth.representation import (
    FRAME_SHIFT_MS,
    REP_DIM,
    LayerSpec,
    MockBackend,
    RepresentationBackend,
    RepresentationCache,
    RepresentationSequence,
    extract,
    load_representation,
    mock_backend,
    persist_representation,
    rep_frame_count,
)
from repsynth.signal import Waveform, save_mel
from repsynth.signal import MelSpectrogram, BASELINE
from repsynth.tensorfile import REP_HEADER_SIZE


class ConstantBackend:
    """Test double emitting one constant-valued matrix per layer."""

    expected_rate = 24000

    def __init__(self, values, dim=4, frame_offset=0):
        self.backend_id = f"const-{values}-{dim}-{frame_offset}"
        self.n_layers = len(values)
        self.dim = dim
        self._values = values
        self._frame_offset = frame_offset

    def layer_outputs(self, wav):
        n = rep_frame_count(len(wav), wav.sample_rate) + self._frame_offset
        return [np.full((n, self.dim), v, dtype=np.float32) for v in self._values]


def _one_second():
    return Waveform(np.zeros(24000), 24000)


class TestLayerSpec:
    def test_tags_round_trip(self):
        for spec in [LayerSpec.single(0), LayerSpec.single(12), LayerSpec.average_all()]:
            assert LayerSpec.from_tag(spec.tag) == spec

    def test_tag_strings(self):
        assert LayerSpec.single(5).tag == "layer5"
        assert LayerSpec.average_all().tag == "average"

    def test_bad_tag_rejected(self):
        with pytest.raises(DataError):
            LayerSpec.from_tag("final")

    def test_negative_layer_rejected(self):
        with pytest.raises(DataError):
            LayerSpec.single(-1)


class TestFrameCount:
    def test_matches_exact_rational_ceiling(self):
        for rate in [16000, 22050, 24000, 48000]:
            for n in [1, 479, 480, 481, 960, 12000, 23999, 24000, 24001, 72000]:
                expected = math.ceil(Fraction(n * 50, rate))
                assert rep_frame_count(n, rate) == expected

    def test_one_second_is_fifty_frames(self):
        assert rep_frame_count(24000, 24000) == 50
        assert rep_frame_count(16000, 16000) == 50


class TestExtract:
    def test_average_of_identical_layers_equals_single(self):
        backend = ConstantBackend([1.5, 1.5, 1.5])
        wav = _one_second()
        avg = extract(wav, LayerSpec.average_all(), backend)
        single = extract(wav, LayerSpec.single(1), backend)
        np.testing.assert_array_equal(avg.frames, single.frames)

    def test_average_of_two_constant_layers(self):
        backend = ConstantBackend([1.0, 3.0])
        seq = extract(_one_second(), LayerSpec.average_all(), backend)
        np.testing.assert_array_equal(seq.frames, np.full((50, 4), 2.0, dtype=np.float32))

    def test_one_second_default_backend_shape(self):
        seq = extract(_one_second(), LayerSpec.single(5), mock_backend(0))
        assert seq.frames.shape == (50, REP_DIM)
        assert seq.frame_shift_ms == FRAME_SHIFT_MS
        assert seq.source_rate == 24000

    def test_length_depends_only_on_duration(self, speechlike):
        backend = mock_backend(0, dim=16)
        for n in [480, 481, 500, 7130, 12000, 12001, 23999, 24000, 24001, 72000]:
            wav = Waveform(speechlike.samples[:n] if n <= len(speechlike) else np.zeros(n), 24000)
            seq = extract(wav, LayerSpec.single(2), backend)
            assert seq.n_frames == rep_frame_count(n, 24000), f"n_samples={n}"

    def test_deterministic(self, speechlike):
        a = extract(speechlike, LayerSpec.single(3), mock_backend(3, dim=64))
        b = extract(speechlike, LayerSpec.single(3), mock_backend(3, dim=64))
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_layers_are_distinct(self, speechlike):
        backend = mock_backend(0, dim=64)
        l0 = extract(speechlike, LayerSpec.single(0), backend)
        l1 = extract(speechlike, LayerSpec.single(1), backend)
        assert np.max(np.abs(l0.frames - l1.frames)) > 1e-3

    def test_silence_gives_constant_frames(self):
        seq = extract(_one_second(), LayerSpec.single(4), mock_backend(1, dim=32))
        np.testing.assert_array_equal(seq.frames, np.broadcast_to(seq.frames[0], seq.frames.shape))

    def test_average_matches_mean_of_singles(self, speechlike):
        backend = mock_backend(7, n_layers=5, dim=32)
        singles = [
            extract(speechlike, LayerSpec.single(k), backend).frames for k in range(5)
        ]
        avg = extract(speechlike, LayerSpec.average_all(), backend).frames
        expected = np.mean(np.stack([s.astype(np.float64) for s in singles]), axis=0)
        np.testing.assert_allclose(avg, expected, rtol=0, atol=1e-6)

    def test_layer_out_of_range(self):
        with pytest.raises(DataError, match="out of range"):
            extract(_one_second(), LayerSpec.single(13), mock_backend(0, n_layers=13, dim=8))

    def test_input_waveform_not_mutated(self, speechlike):
        before = speechlike.samples.copy()
        extract(speechlike, LayerSpec.single(0), mock_backend(0, dim=8))
        np.testing.assert_array_equal(speechlike.samples, before)

    def test_regrid_trims_excess_frames(self):
        seq = extract(_one_second(), LayerSpec.single(0), ConstantBackend([2.0], frame_offset=2))
        assert seq.n_frames == 50

    def test_regrid_extends_by_repeating_last_frame(self):
        class RampBackend(ConstantBackend):
            def layer_outputs(self, wav):
                n = rep_frame_count(len(wav), wav.sample_rate) - 2
                ramp = np.arange(n, dtype=np.float32)
                return [np.tile(ramp[:, None], (1, self.dim))]

        seq = extract(_one_second(), LayerSpec.single(0), RampBackend([0.0]))
        assert seq.n_frames == 50
        np.testing.assert_array_equal(seq.frames[-1], seq.frames[47])
        np.testing.assert_array_equal(seq.frames[-2], seq.frames[47])

    def test_layer_count_mismatch_rejected(self):
        backend = ConstantBackend([1.0, 2.0])
        backend.n_layers = 3
        with pytest.raises(DataError, match="layers"):
            extract(_one_second(), LayerSpec.single(0), backend)

    def test_mock_satisfies_backend_protocol(self):
        assert isinstance(mock_backend(0, dim=8), RepresentationBackend)


class TestPersistence:
    def test_round_trip_bitwise(self, tmp_path, speechlike):
        seq = extract(speechlike, LayerSpec.single(2), mock_backend(0, dim=48))
        path = tmp_path / "utt.rep"
        persist_representation(seq, path)
        loaded = load_representation(path)
        np.testing.assert_array_equal(loaded.frames, seq.frames)
        assert loaded.frame_shift_ms == seq.frame_shift_ms
        assert loaded.source_rate == seq.source_rate

    def test_file_size_law(self, tmp_path):
        seq = extract(_one_second(), LayerSpec.single(0), mock_backend(0))
        path = tmp_path / "one_second.rep"
        persist_representation(seq, path)
        assert path.stat().st_size == REP_HEADER_SIZE + 50 * REP_DIM * 4
        assert REP_HEADER_SIZE == 28

    def test_truncated_file_rejected(self, tmp_path):
        seq = extract(_one_second(), LayerSpec.single(0), mock_backend(0, dim=8))
        path = tmp_path / "cut.rep"
        persist_representation(seq, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(DataError, match="truncated"):
            load_representation(path)

    def test_mel_file_rejected_as_representation(self, tmp_path):
        path = tmp_path / "wrong.rep"
        save_mel(MelSpectrogram(np.zeros((5, 80), dtype=np.float32), BASELINE), path)
        with pytest.raises(DataError, match="corrupt header"):
            load_representation(path)

    def test_dim_guard(self, tmp_path):
        seq = extract(_one_second(), LayerSpec.single(0), mock_backend(0, dim=8))
        path = tmp_path / "small.rep"
        persist_representation(seq, path)
        with pytest.raises(DataError, match="dim mismatch"):
            load_representation(path, expected_dim=768)


class TestCache:
    def test_miss_then_hit_returns_equal_frames(self, tmp_path, speechlike):
        cache = RepresentationCache(tmp_path)
        backend = mock_backend(0, dim=16)
        first, hit1 = cache.get_or_extract(speechlike, LayerSpec.single(1), backend)
        second, hit2 = cache.get_or_extract(speechlike, LayerSpec.single(1), backend)
        assert (hit1, hit2) == (False, True)
        assert (cache.misses, cache.hits) == (1, 1)
        np.testing.assert_array_equal(first.frames, second.frames)

    def test_key_separates_audio_layer_and_backend(self, tmp_path, speechlike, white_noise):
        cache = RepresentationCache(tmp_path)
        b0 = mock_backend(0, dim=8)
        b1 = mock_backend(1, dim=8)
        keys = {
            cache.key(speechlike, LayerSpec.single(0), b0),
            cache.key(speechlike, LayerSpec.single(1), b0),
            cache.key(speechlike, LayerSpec.average_all(), b0),
            cache.key(speechlike, LayerSpec.single(0), b1),
            cache.key(white_noise, LayerSpec.single(0), b0),
        }
        assert len(keys) == 5

    def test_cached_file_is_valid_representation(self, tmp_path, speechlike):
        cache = RepresentationCache(tmp_path)
        backend = mock_backend(0, dim=16)
        seq, _ = cache.get_or_extract(speechlike, LayerSpec.single(1), backend)
        path = cache.path_for(cache.key(speechlike, LayerSpec.single(1), backend))
        assert path.exists()
        np.testing.assert_array_equal(load_representation(path).frames, seq.frames)


class TestSequenceValidation:
    def test_rejects_non_finite(self):
        with pytest.raises(DataError, match="non-finite"):
            RepresentationSequence(np.array([[1.0, np.nan]], dtype=np.float32))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DataError, match="2-D"):
            RepresentationSequence(np.zeros(10, dtype=np.float32))
