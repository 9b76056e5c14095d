"""Model-free quantum state stabilization from sampled finite differences of a
measured Lyapunov observable."""

__version__ = "0.1.0"
