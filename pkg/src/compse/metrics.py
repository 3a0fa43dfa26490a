"""Waveform-domain proxy metrics: SI-SDR, segmental SNR, log-spectral distance."""

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .stft import stft

SI_SDR_CAP_DB = 100.0


def si_sdr(est, ref):
    """Scale-invariant signal-to-distortion ratio in dB, capped at +100."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ShapeError(f"length mismatch: {est.shape} vs {ref.shape}")
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_energy = np.dot(ref, ref)
    if ref_energy <= 0.0:
        raise DegenerateInputError("all-zero reference")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    err = est - target
    t_energy = np.dot(target, target)
    e_energy = np.dot(err, err)
    if e_energy <= t_energy * 10.0 ** (-SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return min(10.0 * np.log10(t_energy / e_energy), SI_SDR_CAP_DB)


def seg_snr(est, ref, frame=400, hop=200, floor_db=-10.0, ceil_db=35.0, energy_gate=1e-8):
    """Mean per-frame SNR in dB, clamped per frame, over reference-active frames."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ShapeError(f"length mismatch: {est.shape} vs {ref.shape}")
    vals = []
    for start in range(0, len(ref) - frame + 1, hop):
        r = ref[start:start + frame]
        e = est[start:start + frame] - r
        r_energy = np.dot(r, r)
        if r_energy <= energy_gate:
            continue
        e_energy = max(np.dot(e, e), 1e-300)
        vals.append(np.clip(10.0 * np.log10(r_energy / e_energy), floor_db, ceil_db))
    if not vals:
        raise DegenerateInputError("no reference-active frames")
    return float(np.mean(vals))


def log_spectral_distance(est, ref, cfg):
    """RMS over frames of the per-frame RMS log-magnitude spectral gap (dB)."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ShapeError(f"length mismatch: {est.shape} vs {ref.shape}")
    s_est = stft(est, cfg)
    s_ref = stft(ref, cfg)
    mag_est = 20.0 * np.log10(np.hypot(s_est.re, s_est.im) + 1e-8)
    mag_ref = 20.0 * np.log10(np.hypot(s_ref.re, s_ref.im) + 1e-8)
    per_frame = np.sqrt(np.mean((mag_est - mag_ref) ** 2, axis=0))
    return float(np.sqrt(np.mean(per_frame ** 2)))


def metric_report_lines(rows):
    """Format (utterance_id, metric, value) rows: tab-separated, 4 decimals."""
    return [f"{uid}\t{metric}\t{value:.4f}" for uid, metric, value in rows]
