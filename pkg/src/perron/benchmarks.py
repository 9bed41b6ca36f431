"""Benchmark maps used by the checks and the command-line runner."""

from .rational_map import from_affine


def z_squared():
    return from_affine([0, 0, 1], [1])


def basilica():
    """``z**2 - 1``."""
    return from_affine([-1, 0, 1], [1])


def newton_quadratic():
    """``(z**2 + 1) / (2z)``, Newton's method for ``z**2 + 1``; Julia set is the imaginary axis."""
    return from_affine([1, 0, 1], [0, 2])


BENCHMARKS = {"z2": z_squared, "z2-1": basilica, "newton": newton_quadratic}


def benchmark_maps():
    return {name: build() for name, build in BENCHMARKS.items()}
