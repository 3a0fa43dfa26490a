"""Acceptance gate: one test per shipped guarantee.

Each test prints a single "acceptance N ...: PASS|FAIL" line with the
measured quantity before asserting, so a red run still reports every
criterion's outcome and margin.
"""

import math
import os
import time

import numpy as np
import pytest

import compse.gradcheck as gradcheck
from compse.autodiff import Tensor, parameter
from compse.autodiff import conv1d as ad_conv1d
from compse.cli import main as cli_main
from compse.cplx import ComplexTensor
from compse.data import CorpusSpec, generate_corpus
from compse.layers import ComplexConv2d, ComplexLSTM, spectral_normalize
from compse.losses import (relativistic_average_losses, relativistic_d_loss,
                           relativistic_g_adv_loss)
from compse.masking import apply_mask_crm, oracle_crm
from compse.metrics import si_sdr
from compse.models import DiscriminatorConfig, GeneratorConfig
from compse.stft import (StftConfig, istft, reconstruct_utterance,
                         slice_utterance, stft)
from compse.trainer import TrainConfig, train_loop


def _verdict(num, label, detail, ok):
    print(f"acceptance {num} {label}: {detail} [{'PASS' if ok else 'FAIL'}]")
    return ok


# -- 1: gradient correctness of every differentiable building block ----------


def test_acceptance_1_gradient_suite():
    t0 = time.monotonic()
    results = gradcheck.run()
    elapsed = time.monotonic() - t0
    worst = max(err for _, err, _ in results)
    ok = all(r[2] for r in results) and worst < 1e-4 and elapsed < 300.0
    assert _verdict(1, "gradient suite",
                    f"{len(results)} checks, max rel err {worst:.2e}, {elapsed:.1f}s",
                    ok)


# -- 2: vectorized kernels against scalar-loop oracles -----------------------


def _complex_conv_oracle(re, im, A, B, b_re, b_im, stride, f_pad, t_pad):
    Bn, Ci, F, T = re.shape
    Co, _, KF, KT = A.shape
    rp = np.pad(re, ((0, 0), (0, 0), f_pad, t_pad))
    ip = np.pad(im, ((0, 0), (0, 0), f_pad, t_pad))
    OF = (rp.shape[2] - KF) // stride[0] + 1
    OT = (rp.shape[3] - KT) // stride[1] + 1
    out_re = np.zeros((Bn, Co, OF, OT))
    out_im = np.zeros((Bn, Co, OF, OT))
    for b in range(Bn):
        for oc in range(Co):
            for of in range(OF):
                for ot in range(OT):
                    acc_r = float(b_re[oc])
                    acc_i = float(b_im[oc])
                    for ic in range(Ci):
                        for kf in range(KF):
                            for kt in range(KT):
                                xr = rp[b, ic, of * stride[0] + kf, ot * stride[1] + kt]
                                xi = ip[b, ic, of * stride[0] + kf, ot * stride[1] + kt]
                                a = A[oc, ic, kf, kt]
                                bb = B[oc, ic, kf, kt]
                                acc_r += a * xr - bb * xi
                                acc_i += bb * xr + a * xi
                    out_re[b, oc, of, ot] = acc_r
                    out_im[b, oc, of, ot] = acc_i
    return out_re, out_im


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def _lstm_oracle(seq, w_ih, w_hh, bias):
    T, Bn, I = seq.shape
    H = w_hh.shape[0]
    out = np.zeros((T, Bn, H))
    h = np.zeros((Bn, H))
    c = np.zeros((Bn, H))
    for t in range(T):
        gates = np.zeros((Bn, 4 * H))
        for b in range(Bn):
            for g in range(4 * H):
                acc = float(bias[g])
                for i in range(I):
                    acc += seq[t, b, i] * w_ih[i, g]
                for j in range(H):
                    acc += h[b, j] * w_hh[j, g]
                gates[b, g] = acc
        h_new = np.zeros((Bn, H))
        c_new = np.zeros((Bn, H))
        for b in range(Bn):
            for j in range(H):
                i_g = _sigmoid(gates[b, j])
                f_g = _sigmoid(gates[b, H + j])
                g_g = math.tanh(gates[b, 2 * H + j])
                o_g = _sigmoid(gates[b, 3 * H + j])
                c_new[b, j] = f_g * c[b, j] + i_g * g_g
                h_new[b, j] = o_g * math.tanh(c_new[b, j])
        h, c = h_new, c_new
        out[t] = h
    return out


def _conv1d_oracle(x, w, stride, pad):
    Bn, Ci, L = x.shape
    Co, _, K = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), pad))
    OL = (xp.shape[2] - K) // stride + 1
    out = np.zeros((Bn, Co, OL))
    for b in range(Bn):
        for oc in range(Co):
            for ol in range(OL):
                acc = 0.0
                for ic in range(Ci):
                    for k in range(K):
                        acc += xp[b, ic, ol * stride + k] * w[oc, ic, k]
                out[b, oc, ol] = acc
    return out


def test_acceptance_2_kernels_match_scalar_oracles():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):  # complex 2-D convolution
        conv = ComplexConv2d(2, 2, rng)
        re = rng.standard_normal((1, 2, 8, 4))
        im = rng.standard_normal((1, 2, 8, 4))
        out = conv.forward(ComplexTensor(Tensor(re), Tensor(im)))
        o_re, o_im = _complex_conv_oracle(
            re, im, conv.A.data, conv.B.data, conv.bias_re.data,
            conv.bias_im.data, conv.stride, conv.freq_pad, conv.time_pad)
        worst = max(worst, np.max(np.abs(out.re.data - o_re)),
                    np.max(np.abs(out.im.data - o_im)))
    for _ in range(100):  # complex LSTM (both combination planes)
        lstm = ComplexLSTM(2, 2, 1, rng)
        re = rng.standard_normal((3, 1, 2))
        im = rng.standard_normal((3, 1, 2))
        out = lstm.forward(ComplexTensor(Tensor(re), Tensor(im)))
        lr, li = lstm.lstm_r.fwd0, lstm.lstm_i.fwd0

        def run(layer, seq):
            return _lstm_oracle(seq, layer.w_ih.data, layer.w_hh.data, layer.bias.data)

        o_re = run(lr, re) - run(li, im)
        o_im = run(lr, im) - run(li, re)
        worst = max(worst, np.max(np.abs(out.re.data - o_re)),
                    np.max(np.abs(out.im.data - o_im)))
    for _ in range(100):  # real 1-D convolution
        x = rng.standard_normal((1, 2, 11))
        w = rng.standard_normal((2, 2, 3))
        out = ad_conv1d(Tensor(x), Tensor(w), 2, (1, 1))
        worst = max(worst, np.max(np.abs(out.data - _conv1d_oracle(x, w, 2, (1, 1)))))
    ok = worst < 1e-10
    assert _verdict(2, "kernel oracles (300 instances)", f"max abs err {worst:.2e}", ok)


# -- 3: analysis/synthesis geometry and fidelity -----------------------------


def test_acceptance_3_stft_round_trip_and_framing():
    cfg = StftConfig.paper_scale()
    frames = cfg.num_frames(16000)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(16000)
    rt_err = float(np.max(np.abs(istft(stft(x, cfg), cfg, 16000) - x)))
    y = rng.standard_normal(37123)
    slices, _ = slice_utterance(y)
    exact = np.array_equal(reconstruct_utterance(slices, len(y)), y)
    ok = frames == 157 and rt_err < 1e-6 and exact
    assert _verdict(3, "analysis/synthesis",
                    f"{frames} frames, round trip {rt_err:.2e}, slicing exact={exact}",
                    ok)


# -- 4: oracle complex ratio mask recovers the clean signal ------------------


def test_acceptance_4_oracle_mask_recovery():
    cfg = StftConfig.paper_scale()
    train, _ = generate_corpus(CorpusSpec(n_train=4, n_test=0, min_len=16000,
                                          max_len=16000, seed=2))
    worst_rel = 0.0
    worst_score = np.inf
    for utt in train:
        X = stft(utt.noisy, cfg)
        Y = stft(utt.clean, cfg)
        est = apply_mask_crm(X, oracle_crm(X, Y))
        active = np.hypot(X.re, X.im) > 1e-3
        rel = np.hypot(est.re - Y.re, est.im - Y.im)[active] / \
            np.maximum(np.hypot(Y.re, Y.im)[active], 1e-30)
        worst_rel = max(worst_rel, float(np.max(rel)))
        worst_score = min(worst_score,
                          si_sdr(istft(est, cfg, len(utt.clean)), utt.clean))
    ok = worst_rel < 1e-6 and worst_score >= 60.0
    assert _verdict(4, "oracle mask",
                    f"max rel err {worst_rel:.2e}, min SI-SDR {worst_score:.1f} dB",
                    ok)


# -- 5: adversarial loss identities ------------------------------------------


def test_acceptance_5_loss_identities():
    rng = np.random.default_rng(3)
    z = Tensor(rng.standard_normal(8))
    eq = abs(float(relativistic_d_loss(z, z).data) - np.log(2.0))
    a, b = Tensor(rng.standard_normal(1)), Tensor(rng.standard_normal(1))
    g_ra, d_ra = relativistic_average_losses(a, b)
    dbl = max(abs(float(g_ra.data) - 2 * float(relativistic_g_adv_loss(a, b).data)),
              abs(float(d_ra.data) - 2 * float(relativistic_d_loss(a, b).data)))
    d_real = rng.standard_normal(6)
    d_fake = rng.standard_normal(6)
    shift = abs(float(relativistic_d_loss(Tensor(d_real + 42.0),
                                          Tensor(d_fake + 42.0)).data) -
                float(relativistic_d_loss(Tensor(d_real), Tensor(d_fake)).data))
    worst = max(eq, dbl, shift)
    ok = worst < 1e-10
    assert _verdict(5, "loss identities",
                    f"log2 {eq:.1e}, batch-1 doubling {dbl:.1e}, shift {shift:.1e}",
                    ok)


# -- 6: spectral norm estimate against full SVD ------------------------------


def test_acceptance_6_spectral_norm_vs_svd():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(40):
        m = int(rng.integers(1, 65))
        n = int(rng.integers(1, 65))
        W = rng.standard_normal((m, n))
        w = parameter(W.copy())
        u = rng.standard_normal(m)
        u /= np.linalg.norm(u)
        w_sn = spectral_normalize(w, u, n_power_iters=50)
        idx = np.argmax(np.abs(W))
        sigma_est = W.flat[idx] / w_sn.data.flat[idx]
        sigma_true = np.linalg.svd(W, compute_uv=False)[0]
        worst = max(worst, abs(sigma_est - sigma_true))
    ok = worst < 1e-4
    assert _verdict(6, "spectral norm (40 matrices to 64x64, 50 iters)",
                    f"max abs err {worst:.2e}", ok)


# -- 8: bitwise determinism of training --------------------------------------


def test_acceptance_8_training_determinism(tmp_path):
    train, _ = generate_corpus(CorpusSpec(n_train=3, n_test=0, min_len=16000,
                                          max_len=16000, seed=5))
    gen_cfg = GeneratorConfig.toy_scale()
    disc_cfg = DiscriminatorConfig.toy_scale()
    runs = []
    for tag in ("a", "b"):
        cfg = TrainConfig(epochs=2, batch_size=2, seed=77)
        report, _, _, ckpt = train_loop(train, cfg, gen_cfg, disc_cfg,
                                        str(tmp_path / tag))
        runs.append((report.to_lines(), open(ckpt, "rb").read()))
    same_report = runs[0][0] == runs[1][0]
    same_ckpt = runs[0][1] == runs[1][1]
    ok = same_report and same_ckpt
    assert _verdict(8, "seeded determinism",
                    f"reports identical={same_report}, checkpoints identical={same_ckpt}",
                    ok)


# -- 9: every mask mode x recurrent kind trains ------------------------------


def test_acceptance_9_mask_recurrent_grid(tmp_path):
    train, _ = generate_corpus(CorpusSpec(n_train=2, n_test=0, min_len=16000,
                                          max_len=16000, seed=6))
    failures = []
    for mask in ("crm", "polar", "real"):
        for recurrent in ("lstm", "clstm", "cblstm"):
            gen_cfg = GeneratorConfig.toy_scale(mask_mode=mask,
                                                recurrent_kind=recurrent)
            cfg = TrainConfig(epochs=1, batch_size=2, seed=0)
            try:
                report, _, _, _ = train_loop(train, cfg, gen_cfg,
                                             DiscriminatorConfig.toy_scale(),
                                             str(tmp_path / f"{mask}_{recurrent}"))
                stats = report.entries[0]
                if not all(np.isfinite([stats.g_loss, stats.d_loss, stats.l1])):
                    failures.append(f"{mask}/{recurrent}: non-finite stats")
            except Exception as exc:  # any numeric failure flunks the grid
                failures.append(f"{mask}/{recurrent}: {exc}")
    ok = not failures
    assert _verdict(9, "3x3 mask/recurrent grid",
                    "all 9 combinations trained" if ok else "; ".join(failures),
                    ok)


# -- 7: end-to-end enhancement quality (slowest, runs last) ------------------


def _report_value(path, uid, metric):
    for line in open(path).read().splitlines():
        parts = line.split("\t")
        if parts[0] == uid and parts[1] == metric:
            return float(parts[2])
    raise AssertionError(f"{metric} for {uid} missing from {path}")


@pytest.mark.parametrize("loss", ["r", "ra"])
def test_acceptance_7_end_to_end_quality(tmp_path, loss):
    corpus = str(tmp_path / "corpus")
    assert cli_main(["synth-data", "--out", corpus,
                     "--n-train", "200", "--n-test", "40", "--seed", "0"]) == 0
    run_dir = str(tmp_path / f"run_{loss}")
    t0 = time.monotonic()
    code = cli_main(["train", "--manifest", os.path.join(corpus, "train_manifest.tsv"),
                     "--out", run_dir, "--scale", "toy", "--loss", loss,
                     "--epochs", "15", "--batch", "32", "--seed", "0"])
    train_minutes = (time.monotonic() - t0) / 60.0
    assert code == 0
    report = str(tmp_path / f"eval_{loss}.tsv")
    assert cli_main(["evaluate", "--manifest", os.path.join(corpus, "test_manifest.tsv"),
                     "--checkpoint", os.path.join(run_dir, "checkpoint.dcrg"),
                     "--report", report]) == 0
    enhanced = _report_value(report, "all", "si_sdr_mean")
    noisy = _report_value(report, "all", "si_sdr_noisy_mean")
    gain = enhanced - noisy
    ok = train_minutes < 30.0 and gain >= 3.0
    assert _verdict(7, f"end-to-end quality (loss={loss})",
                    f"trained in {train_minutes:.1f} min, SI-SDR {noisy:.2f} -> "
                    f"{enhanced:.2f} dB (gain {gain:.2f})", ok)
