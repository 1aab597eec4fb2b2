import subprocess
import sys

import pytest

from repsynth.pipeline.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main
from repsynth.toydata import make_toy_corpus


def write_config(root, **extra):
    lines = {
        "manifest": "corpus/manifest.jsonl",
        "noise_dir": "corpus/noise",
        "out_dir": "out",
        "enhancer": "identity",
        "backend": "mock:0",
        "layer": "layer1",
        "seed": 0,
        "vocoder_steps": 2,
        "acoustic_steps": 2,
        **extra,
    }
    path = root / "exp.yaml"
    path.write_text("".join(f"{k}: {v}\n" for k, v in lines.items()))
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    make_toy_corpus(root / "corpus", n_utterances=2, seed=0)
    write_config(root)
    return root


def run_cli(*argv) -> int:
    return main(list(argv))


class TestExitCodeContract:
    def test_codes_are_distinct_and_nonzero(self):
        codes = {EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC}
        assert len(codes) == 3
        assert EXIT_OK == 0
        assert 0 not in codes

    def test_missing_config_is_config_error(self, workspace, capsys):
        rc = run_cli("prepare-data", "--config", str(workspace / "absent.yaml"))
        assert rc == EXIT_CONFIG
        assert "configuration error" in capsys.readouterr().err

    def test_unknown_override_key_is_config_error(self, workspace):
        rc = run_cli(
            "prepare-data", "--config", str(workspace / "exp.yaml"),
            "--set", "warp_factor=9",
        )
        assert rc == EXIT_CONFIG

    def test_missing_audio_is_data_error(self, tmp_path, capsys):
        make_toy_corpus(tmp_path / "corpus", n_utterances=2, seed=0)
        (tmp_path / "corpus" / "wav" / "utt0000.wav").unlink()
        config = write_config(tmp_path)
        rc = run_cli("prepare-data", "--config", str(config))
        assert rc == EXIT_DATA
        assert "data error" in capsys.readouterr().err


class TestVerbs:
    def test_prepare_data(self, workspace, capsys):
        rc = run_cli("prepare-data", "--config", str(workspace / "exp.yaml"))
        assert rc == EXIT_OK
        assert (workspace / "out" / "prepare_report.json").exists()
        assert "prepared 2/2" in capsys.readouterr().out

    def test_prepare_data_rerun_reports_cache_hits(self, workspace, capsys):
        rc = run_cli("prepare-data", "--config", str(workspace / "exp.yaml"))
        assert rc == EXIT_OK
        assert "2 cache hits" in capsys.readouterr().out

    def test_train_vocoder(self, workspace, capsys):
        rc = run_cli("train-vocoder", "--config", str(workspace / "exp.yaml"))
        assert rc == EXIT_OK
        out_dir = workspace / "out" / "vocoder"
        assert (out_dir / "vocoder_final.ckpt").exists()
        assert (out_dir / "vocoder_losses.csv").exists()
        assert not (out_dir / ".lock").exists()

    def test_train_acoustic(self, workspace, capsys):
        rc = run_cli("train-acoustic", "--config", str(workspace / "exp.yaml"))
        assert rc == EXIT_OK
        out_dir = workspace / "out" / "acoustic"
        assert (out_dir / "acoustic_final.ckpt").exists()
        assert (out_dir / "acoustic_losses.csv").exists()

    def test_lock_blocks_concurrent_training(self, workspace, capsys):
        lock = workspace / "out" / "vocoder" / ".lock"
        lock.write_text("12345")
        try:
            rc = run_cli("train-vocoder", "--config", str(workspace / "exp.yaml"))
            assert rc == EXIT_CONFIG
            assert "lock" in capsys.readouterr().err
        finally:
            lock.unlink()

    def test_synthesize(self, workspace, capsys):
        out_wav = workspace / "synth.wav"
        rc = run_cli(
            "synthesize",
            "--acoustic", str(workspace / "out" / "acoustic" / "acoustic_final.ckpt"),
            "--vocoder", str(workspace / "out" / "vocoder" / "vocoder_final.ckpt"),
            "--phonemes", "1,2,3", "--durations", "2,1,3",
            "--out", str(out_wav),
        )
        assert rc == EXIT_OK
        assert out_wav.exists()
        assert "2880 samples" in capsys.readouterr().out

    def test_synthesize_bad_phoneme_list(self, workspace, capsys):
        rc = run_cli(
            "synthesize",
            "--acoustic", str(workspace / "out" / "acoustic" / "acoustic_final.ckpt"),
            "--vocoder", str(workspace / "out" / "vocoder" / "vocoder_final.ckpt"),
            "--phonemes", "one,two", "--out", str(workspace / "x.wav"),
        )
        assert rc == EXIT_CONFIG

    def test_evaluate(self, workspace, capsys):
        rc = run_cli("evaluate", "--config", str(workspace / "exp.yaml"))
        assert rc == EXIT_OK
        report = workspace / "out" / "evaluation.csv"
        assert report.exists()
        text = report.read_text()
        assert text.startswith("condition,metric,utterance_id,value")
        assert "# summary" in text
        out = capsys.readouterr().out
        assert "clean: SNR undefined" in out
        assert "noisy: mean SNR" in out
        assert "enhanced: mean SNR" in out

    def test_sweep_layers(self, workspace, capsys):
        rc = run_cli(
            "sweep-layers", "--config", str(workspace / "exp.yaml"),
            "--layers", "layer0,layer1",
        )
        assert rc == EXIT_OK
        assert (workspace / "out" / "layer_sweep.csv").exists()
        out = capsys.readouterr().out
        assert "rep-layer0" in out and "rep-layer1" in out

    def test_cache_env_var_controls_cache_root(self, tmp_path, monkeypatch):
        make_toy_corpus(tmp_path / "corpus", n_utterances=2, seed=0)
        config = write_config(tmp_path)
        monkeypatch.setenv("REPSYNTH_CACHE_DIR", str(tmp_path / "elsewhere"))
        rc = run_cli("prepare-data", "--config", str(config))
        assert rc == EXIT_OK
        assert list((tmp_path / "elsewhere").glob("*.rep"))


class TestModuleEntry:
    def test_python_dash_m_invocation(self, workspace):
        proc = subprocess.run(
            [sys.executable, "-m", "repsynth.pipeline.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        for verb in (
            "prepare-data", "train-vocoder", "train-acoustic",
            "synthesize", "evaluate", "sweep-layers",
        ):
            assert verb in proc.stdout

    def test_config_error_exit_code_through_process(self, workspace):
        proc = subprocess.run(
            [sys.executable, "-m", "repsynth.pipeline.cli", "prepare-data",
             "--config", str(workspace / "absent.yaml")],
            capture_output=True, text=True,
        )
        assert proc.returncode == EXIT_CONFIG
