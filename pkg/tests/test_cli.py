"""Command-line behavior: exit codes, config files, and file outputs."""

import os

import numpy as np
import pytest

from compse.checkpoint import save_checkpoint
from compse.cli import main
from compse.models import DiscriminatorConfig, GeneratorConfig
from compse.trainer import build_models, checkpoint_arrays
from compse.wavio import read_wav, write_wav


def _tiny_checkpoint(path):
    gen_cfg = GeneratorConfig.tiny_scale()
    disc_cfg = DiscriminatorConfig.tiny_scale(slice_len=16000)
    gen, disc = build_models(gen_cfg, disc_cfg, seed=0)
    # one training-mode forward seeds the batch-norm running statistics
    gen.forward(np.random.default_rng(0).standard_normal((1, 64)))
    save_checkpoint(path, checkpoint_arrays(gen, disc, gen_cfg, disc_cfg))


def test_no_subcommand_is_usage_error():
    assert main([]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "SUBCOMMAND" in capsys.readouterr().out


def test_unknown_flag_is_usage_error():
    assert main(["synth-data", "--out", "/tmp/x", "--bogus"]) == 1


def test_synth_data_writes_corpus_and_manifests(tmp_path, capsys):
    out = str(tmp_path / "corpus")
    code = main(["synth-data", "--out", out, "--n-train", "3",
                 "--n-test", "2", "--seed", "1"])
    assert code == 0
    train_manifest = os.path.join(out, "train_manifest.tsv")
    test_manifest = os.path.join(out, "test_manifest.tsv")
    assert len(open(train_manifest).read().splitlines()) == 3
    assert len(open(test_manifest).read().splitlines()) == 2
    wavs = [f for f in os.listdir(os.path.join(out, "train")) if f.endswith(".wav")]
    assert len(wavs) == 6  # clean + noisy per utterance
    assert "seed = 1" in capsys.readouterr().err


def test_invalid_epochs_exits_one(tmp_path):
    out = str(tmp_path / "corpus")
    main(["synth-data", "--out", out, "--n-train", "1", "--n-test", "1"])
    code = main(["train", "--manifest", os.path.join(out, "train_manifest.tsv"),
                 "--out", str(tmp_path / "run"), "--epochs", "0"])
    assert code == 1


def test_config_file_sets_defaults_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("# corpus size\nn-train = 2\nseed = 7\n")
    out = str(tmp_path / "a")
    assert main(["synth-data", "--config", str(cfg), "--out", out,
                 "--n-test", "1"]) == 0
    err = capsys.readouterr().err
    assert "n-train = 2" in err and "seed = 7" in err
    out2 = str(tmp_path / "b")
    assert main(["synth-data", "--config", str(cfg), "--out", out2,
                 "--n-test", "1", "--seed", "9"]) == 0
    assert "seed = 9" in capsys.readouterr().err


def test_config_file_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("does-not-exist = 1\n")
    assert main(["synth-data", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_config_file_bad_value_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n-train = many\n")
    assert main(["synth-data", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_missing_config_file_rejected(tmp_path):
    assert main(["synth-data", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path)]) == 1


def test_enhance_preserves_length_and_writes_wav(tmp_path):
    ckpt = str(tmp_path / "model.dcrg")
    _tiny_checkpoint(ckpt)
    noisy_path = str(tmp_path / "noisy.wav")
    write_wav(noisy_path, 0.3 * np.sin(np.arange(20000) * 0.05))
    out_path = str(tmp_path / "enhanced.wav")
    assert main(["enhance", "--checkpoint", ckpt, "--in", noisy_path,
                 "--out", out_path]) == 0
    enhanced, rate = read_wav(out_path)
    assert rate == 16000
    assert len(enhanced) == 20000


def test_enhance_with_bad_checkpoint_exits_one(tmp_path):
    bad = tmp_path / "bad.dcrg"
    bad.write_bytes(b"nope")
    wav = str(tmp_path / "in.wav")
    write_wav(wav, np.zeros(16000))
    assert main(["enhance", "--checkpoint", str(bad), "--in", wav,
                 "--out", str(tmp_path / "out.wav")]) == 1


def test_evaluate_writes_metric_report(tmp_path):
    corpus = str(tmp_path / "corpus")
    main(["synth-data", "--out", corpus, "--n-train", "1", "--n-test", "2"])
    ckpt = str(tmp_path / "model.dcrg")
    _tiny_checkpoint(ckpt)
    report = str(tmp_path / "report.tsv")
    code = main(["evaluate", "--manifest", os.path.join(corpus, "test_manifest.tsv"),
                 "--checkpoint", ckpt, "--report", report])
    assert code == 0
    lines = open(report).read().splitlines()
    metrics = {line.split("\t")[1] for line in lines}
    assert {"si_sdr", "seg_snr", "lsd", "si_sdr_noisy"} <= metrics
    assert any(line.startswith("all\tsi_sdr_mean\t") for line in lines)
    assert any(line.startswith("snr_2.5\t") for line in lines)


def test_gradcheck_single_module_passes(capsys):
    assert main(["gradcheck", "--module", "tensor_ops"]) == 0
    assert "[pass]" in capsys.readouterr().err


def test_gradcheck_unknown_module_is_usage_error():
    assert main(["gradcheck", "--module", "warp_drive"]) == 1


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    err = capsys.readouterr().err
    assert "oracle mask SI-SDR" in err and "FAIL" not in err
