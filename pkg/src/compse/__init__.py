"""Complex-valued speech enhancement: conv-STFT masking generator with a
recurrent bottleneck, spectrally normalized discriminator, relativistic
adversarial training, all on a small numpy-backed autodiff engine."""

__version__ = "0.1.0"
