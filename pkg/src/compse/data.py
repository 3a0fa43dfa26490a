"""Synthetic noisy-speech corpus: harmonic tone complexes mixed with
disjoint train/test noise families at controlled SNRs, plus manifest IO."""

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateInputError, ParseError
from .wavio import read_wav, write_wav

TRAIN_SNRS = (0.0, 5.0, 10.0, 15.0)
TEST_SNRS = (2.5, 7.5, 12.5, 17.5)
TRAIN_NOISES = ("white", "pink", "band")
TEST_NOISES = ("chirp", "impulse")
SAMPLE_RATE = 16000


@dataclass
class CorpusSpec:
    n_train: int = 200
    n_test: int = 40
    train_snrs: tuple = TRAIN_SNRS
    test_snrs: tuple = TEST_SNRS
    min_len: int = 16000
    max_len: int = 20000
    seed: int = 0

    def __post_init__(self):
        if set(self.train_snrs) & set(self.test_snrs):
            raise ContractError("train and test SNR sets must be disjoint")
        if self.min_len < 400 or self.max_len < self.min_len:
            raise ContractError(f"bad utterance length range [{self.min_len}, {self.max_len}]")


@dataclass
class Utterance:
    id: str
    clean: np.ndarray
    noisy: np.ndarray
    snr_db: float
    noise_kind: str = ""


def synth_clean(seed, length):
    """Deterministic harmonic tone complex with envelope and silences.

    Randomized fundamental in 100-300 Hz, 3-8 harmonics with decaying
    amplitudes, a slow amplitude envelope, and gated silent stretches;
    peak-normalized to 0.5.
    """
    if length < 400:
        raise ContractError(f"length {length} too short")
    rng = np.random.default_rng(seed)
    t = np.arange(length) / SAMPLE_RATE
    f0 = rng.uniform(100.0, 300.0)
    n_harm = int(rng.integers(3, 9))
    x = np.zeros(length)
    for h in range(1, n_harm + 1):
        amp = rng.uniform(0.5, 1.0) / h
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += amp * np.sin(2.0 * np.pi * h * f0 * t + phase)
    env_rate = rng.uniform(1.0, 4.0)  # Hz
    env = 0.6 + 0.4 * np.sin(2.0 * np.pi * env_rate * t + rng.uniform(0, 2 * np.pi))
    x *= env
    # a couple of gated silences with short linear ramps
    for _ in range(int(rng.integers(1, 3))):
        start = int(rng.integers(0, max(length - 800, 1)))
        dur = int(rng.integers(400, 1600))
        end = min(start + dur, length)
        gate = np.zeros(end - start)
        ramp = min(80, (end - start) // 2)
        gate[:ramp] = np.linspace(1.0, 0.0, ramp)
        gate[-ramp:] = np.linspace(0.0, 1.0, ramp)
        x[start:end] *= gate
    peak = np.max(np.abs(x))
    if peak == 0.0:
        raise DegenerateInputError("synthesized silence")
    return x * (0.5 / peak)


def _shaped_noise(rng, length, shaper):
    white = rng.standard_normal(length)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(length, d=1.0 / SAMPLE_RATE)
    spec *= shaper(freqs)
    out = np.fft.irfft(spec, n=length)
    rms = np.sqrt(np.mean(out ** 2))
    return out / max(rms, 1e-12)


def synth_noise(kind, seed, length):
    """One realization of a named noise family, unit RMS."""
    rng = np.random.default_rng(seed)
    if kind == "white":
        out = rng.standard_normal(length)
        return out / np.sqrt(np.mean(out ** 2))
    if kind == "pink":
        return _shaped_noise(rng, length, lambda f: 1.0 / np.sqrt(np.maximum(f, 1.0)))
    if kind == "band":
        lo = rng.uniform(300.0, 2000.0)
        hi = lo * rng.uniform(1.5, 4.0)
        return _shaped_noise(rng, length, lambda f: ((f >= lo) & (f <= hi)).astype(float))
    if kind == "chirp":
        t = np.arange(length) / SAMPLE_RATE
        f_start = rng.uniform(200.0, 1000.0)
        f_end = rng.uniform(2000.0, 6000.0)
        sweep = np.sin(2 * np.pi * (f_start * t + (f_end - f_start) * t ** 2 /
                                    (2 * t[-1])))
        out = sweep + 0.1 * rng.standard_normal(length)
        return out / np.sqrt(np.mean(out ** 2))
    if kind == "impulse":
        out = 0.05 * rng.standard_normal(length)
        n_bursts = max(3, length // 2000)
        decay = np.exp(-np.arange(200) / 30.0)
        for _ in range(n_bursts):
            pos = int(rng.integers(0, length - 200))
            out[pos:pos + 200] += rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5) * decay
        return out / np.sqrt(np.mean(out ** 2))
    raise ContractError(f"unknown noise kind {kind!r}")


def mix_at_snr(clean, noise, snr_db):
    """clean + noise scaled so the clean/noise power ratio hits snr_db exactly."""
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if clean.shape != noise.shape:
        raise ContractError(f"length mismatch: {clean.shape} vs {noise.shape}")
    p_clean = np.mean(clean ** 2)
    if p_clean <= 0.0:
        raise DegenerateInputError("all-zero clean signal")
    p_noise = np.mean(noise ** 2)
    if p_noise <= 0.0:
        raise DegenerateInputError("all-zero noise signal")
    scale = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return clean + scale * noise


def _make_split(spec, n, snrs, noise_kinds, tag):
    utts = []
    for i in range(n):
        seed = np.random.SeedSequence([spec.seed, 1 if tag == "test" else 0, i])
        rng = np.random.default_rng(seed)
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        clean = synth_clean(seed.spawn(1)[0], length)
        snr = snrs[i % len(snrs)]
        kind = noise_kinds[(i // len(snrs)) % len(noise_kinds)]
        noise = synth_noise(kind, seed.spawn(2)[1], length)
        noisy = mix_at_snr(clean, noise, snr)
        # common rescale keeps the SNR exact while avoiding PCM clipping
        peak = max(np.max(np.abs(noisy)), np.max(np.abs(clean)))
        if peak > 0.9:
            scale = 0.9 / peak
            clean = clean * scale
            noisy = noisy * scale
        utts.append(Utterance(id=f"{tag}_{i:04d}", clean=clean, noisy=noisy,
                              snr_db=snr, noise_kind=kind))
    return utts


def generate_corpus(spec):
    """(train, test) utterance lists; noise families disjoint between splits."""
    train = _make_split(spec, spec.n_train, spec.train_snrs, TRAIN_NOISES, "train")
    test = _make_split(spec, spec.n_test, spec.test_snrs, TEST_NOISES, "test")
    return train, test


def write_corpus(utterances, out_dir, manifest_path):
    """Write clean/noisy WAV pairs plus a manifest of tab-separated records."""
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for utt in utterances:
        clean_path = os.path.join(out_dir, f"{utt.id}_clean.wav")
        noisy_path = os.path.join(out_dir, f"{utt.id}_noisy.wav")
        write_wav(clean_path, utt.clean)
        write_wav(noisy_path, utt.noisy)
        lines.append(f"{utt.id}\t{clean_path}\t{noisy_path}\t{utt.snr_db}")
    with open(manifest_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(manifest_path):
    """Load utterances listed in a manifest written by write_corpus."""
    utts = []
    with open(manifest_path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"{manifest_path}:{ln}: expected 4 tab-separated fields")
            uid, clean_path, noisy_path, snr = parts
            clean, _ = read_wav(clean_path)
            noisy, _ = read_wav(noisy_path)
            utts.append(Utterance(id=uid, clean=clean, noisy=noisy, snr_db=float(snr)))
    return utts
