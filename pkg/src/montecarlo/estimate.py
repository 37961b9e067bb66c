import math
from typing import NamedTuple, Optional, Tuple

from scipy import stats

from src.errors import DomainError
from src.geometry.space import RangeBucket


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion. Stays inside [0, 1] and
    behaves near 0 and 1, where the normal approximation does not.
    """
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must be in (0, 1), got {confidence}")
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")

    z = stats.norm.ppf(1.0 - (1.0 - confidence) / 2.0)
    p_hat = successes / trials
    denominator = 1.0 + z ** 2 / trials
    center = (p_hat + z ** 2 / (2.0 * trials)) / denominator
    margin = (z / denominator) * math.sqrt(p_hat * (1.0 - p_hat) / trials + z ** 2 / (4.0 * trials ** 2))

    lower = 0.0 if successes == 0 else max(0.0, center - margin)
    upper = 1.0 if successes == trials else min(1.0, center + margin)
    return lower, upper


def ratio_standard_error(successes: int, targets: int, successes_sq: int, cross: int, targets_sq: int) -> float:
    """
    Standard error of a pooled ratio sum(s_i) / sum(n_i) over independent trials,
    where one trial contributes n_i correlated targets. Takes the raw sums of
    s_i, n_i, s_i**2, s_i*n_i and n_i**2.
    """
    if targets < 1:
        return float("nan")
    p_hat = successes / targets
    residual = successes_sq - 2.0 * p_hat * cross + p_hat ** 2 * targets_sq
    return math.sqrt(max(residual, 0.0)) / targets


class Estimate(NamedTuple):
    """
    A binomial estimate with its Wilson interval. Population runs pool several
    targets per trial; those targets share interferers, so cluster_se carries the
    between-trial standard error and standard_error takes the larger of the two.
    """
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    bucket: Optional[RangeBucket] = None
    confidence: float = 0.95
    cluster_se: Optional[float] = None

    @classmethod
    def from_counts(
        cls,
        successes: int,
        trials: int,
        confidence: float = 0.95,
        bucket: Optional[RangeBucket] = None,
        cluster_se: Optional[float] = None,
    ) -> "Estimate":
        if trials == 0:
            # Empty bucket: no information, full interval.
            return cls(0, 0, float("nan"), 0.0, 1.0, bucket, confidence, None)
        low, high = wilson_interval(successes, trials, confidence)
        return cls(successes, trials, successes / trials, low, high, bucket, confidence, cluster_se)

    @property
    def empty(self) -> bool:
        return self.trials == 0

    @property
    def standard_error(self) -> float:
        """Wilson half-width in units of z, widened to cluster_se when that is larger."""
        if self.empty:
            return float("nan")
        z = stats.norm.ppf(1.0 - (1.0 - self.confidence) / 2.0)
        wilson_se = (self.ci_high - self.ci_low) / (2.0 * z)
        if self.cluster_se is None or math.isnan(self.cluster_se):
            return wilson_se
        return max(wilson_se, self.cluster_se)

    def agrees_with(self, p: float, n_se: float = 3.0) -> bool:
        return not self.empty and abs(self.p_hat - p) <= n_se * self.standard_error
