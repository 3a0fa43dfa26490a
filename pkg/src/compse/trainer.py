"""Alternating adversarial training: one discriminator update then one
generator update per batch, epoch-level learning-rate decay on loss
increase, per-epoch checkpoints and a line-oriented training report."""

import os
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import model_arrays, restore_model, save_checkpoint
from .errors import ContractError, NumericError
from .losses import (l1_term, relativistic_average_losses, relativistic_d_loss,
                     relativistic_g_adv_loss)
from .masking import MASK_MODES
from .metrics import si_sdr
from .models import (Discriminator, DiscriminatorConfig, Generator, GeneratorConfig,
                     RECURRENT_KINDS)
from .optim import Adam
from .precision import dtype, set_precision
from .stft import StftConfig, reconstruct_utterance, slice_utterance

LOSS_KINDS = ("r", "ra")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 0.001
    lr_decay: float = 0.5
    lambda_l1: float = 100.0
    loss_kind: str = "r"
    seed: int = 0
    val_fraction: float = 0.1
    precision: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ContractError("batch size must be >= 1")
        if self.lambda_l1 < 0:
            raise ContractError("lambda_l1 must be >= 0")
        if self.loss_kind not in LOSS_KINDS:
            raise ContractError(f"loss kind must be one of {LOSS_KINDS}")


@dataclass
class EpochStats:
    epoch: int
    g_loss: float
    d_loss: float
    l1: float
    val_si_sdr: float
    lr: float

    def line(self):
        return (f"{self.epoch}\t{self.g_loss:.6f}\t{self.d_loss:.6f}\t"
                f"{self.l1:.6f}\t{self.val_si_sdr:.6f}\t{self.lr:.6f}")


@dataclass
class TrainReport:
    entries: list = field(default_factory=list)

    def to_lines(self):
        return [e.line() for e in self.entries]

    def write(self, path):
        with open(path, "w") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")


def _check_finite(value, term):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {term}; aborting training step")


def train_step(x, y, gen, disc, opt_g, opt_d, cfg):
    """One D update then one G update on batch (x noisy, y clean).

    Returns (g_total, d_loss, l1) as floats. The two classic D sub-steps
    collapse into one update because the relativistic losses couple the
    real and fake scores.
    """
    fake = gen.forward(x)
    # discriminator update (generator frozen via detach)
    d_real = disc.forward(y, x)
    d_fake = disc.forward(fake.detach(), x)
    if cfg.loss_kind == "r":
        d_loss = relativistic_d_loss(d_real, d_fake)
    else:
        _, d_loss = relativistic_average_losses(d_real, d_fake)
    _check_finite(d_loss.data, "discriminator loss")
    d_loss.backward()
    opt_d.step()
    opt_d.zero_grad()
    d_loss_value = float(d_loss.data)
    del d_real, d_fake, d_loss  # release the D-step graph before building G's
    # generator update (discriminator frozen: its grads are discarded)
    d_fake_g = disc.forward(fake, x)
    d_real_g = disc.forward(y, x)
    if cfg.loss_kind == "r":
        adv = relativistic_g_adv_loss(d_real_g, d_fake_g)
    else:
        adv, _ = relativistic_average_losses(d_real_g, d_fake_g)
    _check_finite(adv.data, "generator adversarial loss")
    l1 = l1_term(fake, y)
    _check_finite(l1.data, "generator L1 term")
    total = adv + l1 * cfg.lambda_l1
    total.backward()
    opt_g.step()
    opt_g.zero_grad()
    opt_d.zero_grad()
    return float(total.data), d_loss_value, float(l1.data)


def enhance_utterance(gen, noisy):
    """Slice, enhance each slice, overlap-add back to the original length."""
    slices, _ = slice_utterance(noisy)
    out = gen.forward(slices.astype(dtype()))
    return reconstruct_utterance(out.data.astype(np.float64), len(noisy))


def _slice_pairs(utterances):
    pairs = []
    for utt in utterances:
        noisy_slices, _ = slice_utterance(utt.noisy)
        clean_slices, _ = slice_utterance(utt.clean)
        for ns, cs in zip(noisy_slices, clean_slices):
            pairs.append((ns, cs))
    return pairs


def build_models(gen_cfg, disc_cfg, seed):
    gen = Generator(gen_cfg, rng=np.random.default_rng([seed, 1]))
    disc = Discriminator(disc_cfg, rng=np.random.default_rng([seed, 2]))
    return gen, disc


def train_loop(utterances, cfg, gen_cfg, disc_cfg, out_dir, log=None,
               report_path=None):
    """Full training run; returns (report, gen, disc, final checkpoint path)."""
    if not utterances:
        raise ContractError("empty dataset")
    os.makedirs(out_dir, exist_ok=True)
    set_precision(cfg.precision)
    gen, disc = build_models(gen_cfg, disc_cfg, cfg.seed)
    opt_g = Adam(gen.parameters(), lr=cfg.lr)
    opt_d = Adam(disc.parameters(), lr=cfg.lr)

    n_val = int(len(utterances) * cfg.val_fraction)
    order = np.random.default_rng([cfg.seed, 3]).permutation(len(utterances))
    val_utts = [utterances[i] for i in order[:n_val]]
    train_utts = [utterances[i] for i in order[n_val:]]
    pairs = _slice_pairs(train_utts)

    report = TrainReport()
    prev_g = None
    lr = cfg.lr
    ckpt_path = os.path.join(out_dir, "checkpoint.dcrg")
    for epoch in range(cfg.epochs):
        perm = np.random.default_rng([cfg.seed, 4, epoch]).permutation(len(pairs))
        g_sum = d_sum = l1_sum = 0.0
        n_seen = 0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            x = np.stack([pairs[i][0] for i in idx]).astype(dtype())
            y = np.stack([pairs[i][1] for i in idx]).astype(dtype())
            g_val, d_val, l1_val = train_step(x, y, gen, disc, opt_g, opt_d, cfg)
            g_sum += g_val * len(idx)
            d_sum += d_val * len(idx)
            l1_sum += l1_val * len(idx)
            n_seen += len(idx)
        g_mean = g_sum / n_seen
        val_score = _validate(gen, val_utts)
        stats = EpochStats(epoch=epoch, g_loss=g_mean, d_loss=d_sum / n_seen,
                           l1=l1_sum / n_seen, val_si_sdr=val_score, lr=lr)
        report.entries.append(stats)
        if log:
            log(stats.line())
        if prev_g is not None and g_mean > prev_g:
            lr *= cfg.lr_decay
            opt_g.lr = lr
            opt_d.lr = lr
        prev_g = g_mean
        if report_path:
            report.write(report_path)
        arrays = checkpoint_arrays(gen, disc, gen_cfg, disc_cfg, opt_g, opt_d,
                                   epoch=epoch, lr=lr)
        try:
            save_checkpoint(os.path.join(out_dir, f"checkpoint_epoch{epoch:03d}.dcrg"),
                            arrays)
            save_checkpoint(ckpt_path, arrays)
        except OSError:
            # flush what we have before surfacing the I/O failure
            if report_path:
                report.write(report_path)
            raise
    return report, gen, disc, ckpt_path


def _validate(gen, val_utts):
    if not val_utts:
        return float("nan")
    gen.eval()
    try:
        scores = [si_sdr(enhance_utterance(gen, u.noisy), u.clean) for u in val_utts]
    finally:
        gen.train()
    return float(np.mean(scores))


# -- checkpoint assembly ---------------------------------------------------


def config_arrays(gen_cfg, disc_cfg):
    return [
        ("cfg.encoder_channels", np.array(gen_cfg.encoder_channels, dtype=np.float64)),
        ("cfg.recurrent", np.array([RECURRENT_KINDS.index(gen_cfg.recurrent_kind),
                                    gen_cfg.recurrent_layers, gen_cfg.recurrent_units,
                                    gen_cfg.complex_units], dtype=np.float64)),
        ("cfg.mask_mode", np.array([MASK_MODES.index(gen_cfg.mask_mode)], dtype=np.float64)),
        ("cfg.stft", np.array([gen_cfg.stft.win_len, gen_cfg.stft.hop,
                               gen_cfg.stft.fft_len], dtype=np.float64)),
        ("cfg.disc_channels", np.array(disc_cfg.channels, dtype=np.float64)),
        ("cfg.disc", np.array([disc_cfg.filter_len, disc_cfg.stride,
                               disc_cfg.leaky_slope, disc_cfg.slice_len], dtype=np.float64)),
    ]


def configs_from_arrays(arrays):
    rec = arrays["cfg.recurrent"]
    stft_dims = arrays["cfg.stft"].astype(int)
    gen_cfg = GeneratorConfig(
        encoder_channels=tuple(arrays["cfg.encoder_channels"].astype(int)),
        recurrent_kind=RECURRENT_KINDS[int(rec[0])],
        recurrent_layers=int(rec[1]),
        recurrent_units=int(rec[2]),
        complex_units=int(rec[3]),
        mask_mode=MASK_MODES[int(arrays["cfg.mask_mode"][0])],
        stft=StftConfig(win_len=int(stft_dims[0]), hop=int(stft_dims[1]),
                        fft_len=int(stft_dims[2])))
    d = arrays["cfg.disc"]
    disc_cfg = DiscriminatorConfig(
        channels=tuple(arrays["cfg.disc_channels"].astype(int)),
        filter_len=int(d[0]), stride=int(d[1]), leaky_slope=float(d[2]),
        slice_len=int(d[3]))
    return gen_cfg, disc_cfg


def checkpoint_arrays(gen, disc, gen_cfg, disc_cfg, opt_g=None, opt_d=None,
                      epoch=0, lr=0.0):
    arrays = config_arrays(gen_cfg, disc_cfg)
    arrays.append(("meta.progress", np.array([epoch, lr], dtype=np.float64)))
    arrays += model_arrays(gen, "g.")
    arrays += model_arrays(disc, "d.")
    for tag, opt in (("opt_g", opt_g), ("opt_d", opt_d)):
        if opt is None:
            continue
        for i, s in enumerate(opt.states):
            arrays.append((f"{tag}.{i}.m", s.m))
            arrays.append((f"{tag}.{i}.v", s.v))
            arrays.append((f"{tag}.{i}.step", np.array([s.step], dtype=np.float64)))
    return arrays


def load_models(ckpt_arrays):
    """Rebuild generator and discriminator from a loaded checkpoint dict."""
    gen_cfg, disc_cfg = configs_from_arrays(ckpt_arrays)
    sample = next(a for n, a in ckpt_arrays.items() if n.startswith("g."))
    set_precision("float32" if sample.dtype == np.float32 else "float64")
    gen, disc = build_models(gen_cfg, disc_cfg, seed=0)
    restore_model(gen, ckpt_arrays, "g.")
    restore_model(disc, ckpt_arrays, "d.")
    return gen, disc, gen_cfg, disc_cfg
