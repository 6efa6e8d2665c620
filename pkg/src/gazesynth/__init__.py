"""Subject-conditioned eye-movement synthesis: preprocessing, a conditional DDPM,
a conditional GAN baseline, and signal-quality evaluation."""

__version__ = "0.1.0"
