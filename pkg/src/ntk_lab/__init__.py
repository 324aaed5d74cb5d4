"""Two-layer ReLU neural tangent kernel on the real line: kernels, spectra,
gradient-flow regression, finite-width training and experiment scenarios."""

__version__ = "0.1.0"
