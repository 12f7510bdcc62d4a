"""Iterate unbounded ascending maps F(x) = alpha*f(x) + x + beta and classify
their orbits into stable helixes, pseudo-helix regimes and chaos."""

__version__ = "0.1.0"
