"""Human driving bounds learned from mined requirements and their counterexamples."""

__version__ = "0.1.0"
