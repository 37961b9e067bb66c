import numpy as np

from src.errors import DomainError


def _check_shape(beta: float) -> None:
    if not beta > 0:
        raise DomainError(f"fading shape must be > 0, got {beta}")


def sample_fading_array(beta: float, size, rng: np.random.Generator) -> np.ndarray:
    """
    Small-scale fading power gains, Gamma(shape=beta) scaled to mean 1.
    beta = 1 is Rayleigh fading (Exponential with mean 1).
    """
    _check_shape(beta)
    return rng.gamma(beta, 1.0 / beta, size)


def sample_fading(beta: float, rng: np.random.Generator) -> float:
    _check_shape(beta)
    return float(rng.gamma(beta, 1.0 / beta))
