import dataclasses
import json

import numpy as np
import pytest

from repsynth.errors import ConfigError, DataError
from repsynth.pipeline import (
    ExperimentConfig,
    load_config,
    parse_overrides,
    prepare_data,
    run_layer_sweep,
    save_config,
    synthesize,
)
from repsynth.pipeline.config import CACHE_ENV_VAR, build_backend, build_enhancer
from repsynth.pipeline.manifest import load_manifest
from repsynth.representation import LayerSpec, mock_backend
from repsynth.toydata import make_toy_corpus


def write_config(root, **extra):
    lines = {
        "manifest": "corpus/manifest.jsonl",
        "noise_dir": "corpus/noise",
        "out_dir": "out",
        "enhancer": "identity",
        "backend": "mock:0",
        "layer": "layer2",
        "seed": 0,
        **extra,
    }
    path = root / "exp.yaml"
    path.write_text("".join(f"{k}: {v}\n" for k, v in lines.items() if v is not None))
    return path


@pytest.fixture()
def workspace(tmp_path):
    make_toy_corpus(tmp_path / "corpus", n_utterances=3, seed=0)
    return tmp_path


class TestConfig:
    def test_paths_resolve_relative_to_config_file(self, workspace):
        config = load_config(write_config(workspace))
        assert config.manifest == workspace / "corpus/manifest.jsonl"
        assert config.out_dir == workspace / "out"

    def test_round_trip_through_save(self, workspace, tmp_path):
        config = load_config(write_config(workspace))
        saved = save_config(config, tmp_path / "echo.yaml")
        again = load_config(saved)
        assert again == config

    def test_unknown_key_rejected(self, workspace):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(write_config(workspace, learning_rate=0.1))

    def test_missing_required_keys_rejected(self, tmp_path):
        path = tmp_path / "sparse.yaml"
        path.write_text("seed: 3\n")
        with pytest.raises(ConfigError, match="missing required"):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_bad_layer_tag_rejected(self, workspace):
        with pytest.raises(ConfigError, match="layer spec tag"):
            load_config(write_config(workspace, layer="fifth"))

    def test_bad_preset_rejected(self, workspace):
        with pytest.raises(ConfigError, match="preset"):
            load_config(write_config(workspace, preset="huge"))

    def test_overrides_win(self, workspace):
        config = load_config(
            write_config(workspace), parse_overrides(["seed=7", "layer=average"])
        )
        assert config.seed == 7 and config.layer == "average"

    def test_bad_override_form_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_overrides(["seed:7"])

    def test_cache_dir_from_env_var(self, workspace, monkeypatch, tmp_path):
        monkeypatch.setenv(CACHE_ENV_VAR, str(tmp_path / "shared_cache"))
        config = load_config(write_config(workspace))
        assert config.resolved_cache_dir() == tmp_path / "shared_cache"
        monkeypatch.delenv(CACHE_ENV_VAR)
        assert config.resolved_cache_dir() == config.out_dir / "cache"

    def test_backend_and_enhancer_selection(self, workspace):
        config = load_config(write_config(workspace, backend="mock:5"))
        backend = build_backend(config)
        assert backend.backend_id.startswith("mock-s5")
        assert build_enhancer(config).name == "identity"
        with pytest.raises(ConfigError, match="unknown backend"):
            build_backend(dataclasses.replace(config, backend="hubert"))
        with pytest.raises(ConfigError, match="unknown enhancer"):
            build_enhancer(dataclasses.replace(config, enhancer="wiener"))

    def test_steps_fall_back_to_preset(self, workspace):
        config = load_config(write_config(workspace))
        assert config.resolved_vocoder_steps() == 500
        assert config.resolved_acoustic_steps() == 2000
        fixed = dataclasses.replace(config, vocoder_steps=7)
        assert fixed.resolved_vocoder_steps() == 7


class TestPrepareData:
    def test_end_to_end_plumbing(self, workspace):
        config = load_config(write_config(workspace))
        report = prepare_data(config)
        assert report.failures == 0
        assert len(report.utterances) == 3
        for utt in report.utterances:
            assert utt.status == "ok"
            assert utt.achieved_snr_db == pytest.approx(5.0, abs=1e-6)
        cached = list(config.resolved_cache_dir().glob("*.rep"))
        assert len(cached) == 3
        assert (config.out_dir / "prepare_report.json").exists()
        assert (config.out_dir / "config_echo.json").exists()

    def test_rerun_hits_cache(self, workspace):
        config = load_config(write_config(workspace))
        first = prepare_data(config)
        assert first.cache_hits == 0
        second = prepare_data(config)
        assert second.cache_hits == len(second.utterances)
        assert second.failures == 0

    def test_empty_noise_dir_fails_before_processing(self, workspace):
        empty = workspace / "no_noise"
        empty.mkdir()
        config = load_config(write_config(workspace, noise_dir="no_noise"))
        with pytest.raises(DataError, match="no noise clips"):
            prepare_data(config)
        assert not (config.out_dir / "prepare_report.json").exists()

    def test_missing_noise_dir_key_rejected(self, workspace):
        config = load_config(write_config(workspace, noise_dir=None))
        with pytest.raises(ConfigError, match="noise_dir"):
            prepare_data(config)

    def test_failure_budget_exceeded(self, workspace):
        (workspace / "corpus" / "wav" / "utt0001.wav").write_bytes(b"not audio")
        config = load_config(write_config(workspace))
        with pytest.raises(DataError, match="failed preparation"):
            prepare_data(config)
        payload = json.loads((config.out_dir / "prepare_report.json").read_text())
        assert payload["failures"] == 1
        statuses = {u["id"]: u["status"] for u in payload["utterances"]}
        assert statuses["utt0001"] == "failed"
        assert statuses["utt0000"] == "ok"

    def test_failures_within_budget_tolerated(self, tmp_path):
        make_toy_corpus(tmp_path / "corpus", n_utterances=11, seed=1)
        (tmp_path / "corpus" / "wav" / "utt0003.wav").write_bytes(b"junk")
        config = load_config(write_config(tmp_path))
        report = prepare_data(config)
        assert report.failures == 1
        assert len(report.utterances) == 11

    def test_config_echo_mismatch_rejected(self, workspace):
        config = load_config(write_config(workspace))
        prepare_data(config)
        with pytest.raises(ConfigError, match="config does not match"):
            prepare_data(dataclasses.replace(config, seed=99))

    def test_layer_out_of_range_for_backend(self, workspace):
        config = load_config(write_config(workspace, layer="layer40"))
        with pytest.raises(ConfigError, match="out of range"):
            prepare_data(config)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """Tiny checkpoints shared by the synthesis and sweep tests."""
    import repsynth.acoustic as acoustic
    import repsynth.vocoder as vocoder
    from repsynth.vocoder import DiscriminatorConfig, GeneratorConfig

    root = tmp_path_factory.mktemp("trained")
    make_toy_corpus(root / "corpus", n_utterances=2, seed=0)
    records = load_manifest(root / "corpus" / "manifest.jsonl")
    backend = mock_backend(seed=0, dim=8)
    spec = LayerSpec.single(1)
    vcfg = vocoder.VocoderTrainConfig(
        generator=GeneratorConfig.tiny(input_dim=8),
        discriminator=DiscriminatorConfig.tiny(),
        steps=2, crop_frames=4, batch_size=1, seed=0,
    )
    vres = vocoder.train_vocoder(records, root / "corpus", backend, spec, vcfg, root / "voc")
    acfg = acoustic.AcousticTrainConfig.toy(output_dim=8, steps=2, seed=0)
    ares = acoustic.train_acoustic(records, root / "corpus", backend, spec, acfg, root / "ac")
    other_tag = vocoder.train_vocoder(
        records, root / "corpus", backend, LayerSpec.single(2), vcfg, root / "voc2"
    )
    wide = vocoder.train_vocoder(
        records, root / "corpus", mock_backend(seed=0, dim=16), spec,
        dataclasses.replace(vcfg, generator=GeneratorConfig.tiny(input_dim=16)),
        root / "voc16",
    )
    return {
        "acoustic": ares.final_checkpoint,
        "vocoder": vres.final_checkpoint,
        "vocoder_other_tag": other_tag.final_checkpoint,
        "vocoder_wide": wide.final_checkpoint,
    }


class TestSynthesize:
    def test_duration_stub_length_law(self, trained):
        wav = synthesize([1, 2, 3], trained["acoustic"], trained["vocoder"], durations=[2, 1, 3])
        assert len(wav) == 6 * 480
        assert wav.sample_rate == 24000

    def test_predicted_duration_length_law(self, trained):
        from repsynth.acoustic import AcousticConfig, AcousticModel, PhonemeSequence, predict_representation
        from repsynth.pipeline.checkpoints import load_checkpoint

        payload = load_checkpoint(trained["acoustic"])
        model = AcousticModel(AcousticConfig(**payload["config"]["model"]))
        model.load_state_dict(payload["model"]["model"])
        rep, variances = predict_representation(PhonemeSequence([1, 2, 3]), model)
        wav = synthesize([1, 2, 3], trained["acoustic"], trained["vocoder"])
        assert len(wav) == variances.expanded_length * 480
        assert rep.n_frames == variances.expanded_length

    def test_bit_identical_across_calls(self, trained):
        a = synthesize([4, 5], trained["acoustic"], trained["vocoder"], durations=[3, 2])
        b = synthesize([4, 5], trained["acoustic"], trained["vocoder"], durations=[3, 2])
        assert np.array_equal(a.samples, b.samples)

    def test_layer_tag_mismatch_rejected(self, trained):
        with pytest.raises(ConfigError, match="layer specs differ"):
            synthesize([1], trained["acoustic"], trained["vocoder_other_tag"])

    def test_dim_mismatch_rejected(self, trained):
        with pytest.raises(ConfigError, match="dim"):
            synthesize([1], trained["acoustic"], trained["vocoder_wide"])

    def test_unknown_phoneme_rejected(self, trained):
        with pytest.raises(DataError, match="out of range"):
            synthesize([9999], trained["acoustic"], trained["vocoder"])

    def test_wrong_checkpoint_kind_rejected(self, trained):
        with pytest.raises(ConfigError, match="kind"):
            synthesize([1], trained["vocoder"], trained["vocoder"])


class TestLayerSweep:
    @pytest.fixture()
    def sweep_config(self, workspace):
        return load_config(
            write_config(workspace, backend="mock:0", vocoder_steps=2)
        )

    def test_row_count_law(self, sweep_config):
        report = run_layer_sweep(
            sweep_config, [LayerSpec.single(0), LayerSpec.average_all()]
        )
        assert report.conditions() == ["rep-average", "rep-layer0"]
        for condition in report.conditions():
            for metric in ("snr", "speaker_similarity"):
                assert len(report.values(condition, metric)) == 3

    def test_empty_layer_list_rejected(self, sweep_config):
        with pytest.raises(DataError, match="empty layer list"):
            run_layer_sweep(sweep_config, [])

    def test_rerun_byte_identical(self, sweep_config):
        layers = [LayerSpec.single(1)]
        run_layer_sweep(sweep_config, layers)
        first = (sweep_config.out_dir / "layer_sweep.csv").read_bytes()
        run_layer_sweep(sweep_config, layers)
        second = (sweep_config.out_dir / "layer_sweep.csv").read_bytes()
        assert first == second
        assert (sweep_config.out_dir / "sweep_layer1" / "vocoder_final.ckpt").exists()
