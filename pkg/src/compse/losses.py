"""Relativistic adversarial losses and the L1-augmented generator objective.

All log-sigmoid terms use the softplus identities -log(sigmoid(z)) =
softplus(-z) and -log(1 - sigmoid(z)) = softplus(z), so every loss stays
finite for scores far into saturation.
"""

from . import autodiff as ad
from .autodiff import as_tensor
from .errors import ShapeError


def _pair(d_real, d_fake):
    d_real, d_fake = as_tensor(d_real), as_tensor(d_fake)
    if d_real.data.shape != d_fake.data.shape:
        raise ShapeError(f"score batches differ: {d_real.data.shape} vs {d_fake.data.shape}")
    return d_real, d_fake


def relativistic_d_loss(d_real, d_fake):
    """-E[log sigmoid(D(real) - D(fake))]."""
    d_real, d_fake = _pair(d_real, d_fake)
    return ad.tmean(ad.softplus(ad.sub(d_fake, d_real)))


def relativistic_g_adv_loss(d_real, d_fake):
    """-E[log sigmoid(D(fake) - D(real))]."""
    d_real, d_fake = _pair(d_real, d_fake)
    return ad.tmean(ad.softplus(ad.sub(d_real, d_fake)))


def relativistic_average_losses(d_real, d_fake):
    """(g_loss, d_loss) comparing each score against the opposite batch mean."""
    d_real, d_fake = _pair(d_real, d_fake)
    mean_real = ad.tmean(d_real)
    mean_fake = ad.tmean(d_fake)
    fake_rel = ad.sub(d_fake, mean_real)  # argument of D-bar_x
    real_rel = ad.sub(d_real, mean_fake)  # argument of D-bar_y
    g_loss = ad.add(ad.tmean(ad.softplus(ad.mul(fake_rel, -1.0))),
                    ad.tmean(ad.softplus(real_rel)))
    d_loss = ad.add(ad.tmean(ad.softplus(ad.mul(real_rel, -1.0))),
                    ad.tmean(ad.softplus(fake_rel)))
    return g_loss, d_loss


def l1_term(g_out, target):
    """Mean absolute waveform error (length-normalized)."""
    g_out, target = as_tensor(g_out), as_tensor(target)
    if g_out.data.shape != target.data.shape:
        raise ShapeError(f"waveform shapes differ: {g_out.data.shape} vs {target.data.shape}")
    return ad.tmean(ad.absolute(ad.sub(g_out, target)))


def generator_total_loss(adv, g_out, target, lambda_l1):
    """Adversarial term plus lambda * mean absolute error."""
    return ad.add(as_tensor(adv), ad.mul(l1_term(g_out, target), lambda_l1))
