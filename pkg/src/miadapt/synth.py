"""Synthetic corpus generator with known ground truth.

Negative users emit background messages only: every keyword count is an
independent Poisson draw at the background rate.  Positive users get the
same background messages except that one, at a recorded position, has its
signal-keyword counts redrawn at the (larger) signal rate.  Reports mimic
adverse messages with each signal keyword's rate shifted further, creating
a controlled domain gap.

Each user consumes an independent child stream of the seed, so any subset
of users is reproducible regardless of generation order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Coefficients, Dataset, KeywordVocabulary, ReportSet, UserBag

__all__ = ["SynthConfig", "generate"]


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; defaults give a learnable mid-sized corpus."""

    n_users: int = 1000
    positive_fraction: float = 0.36
    tweets_per_user: tuple = (3, 8)
    n_keywords: int = 50
    n_signal: int = 10
    n_reports: int = 2000
    background_rate: float = 0.3
    signal_rate: float = 3.0
    report_shift: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError(f"n_users must be >= 1, got {self.n_users}")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ConfigError(f"positive_fraction must be in (0, 1), got {self.positive_fraction}")
        lo, hi = self.tweets_per_user
        if not (1 <= lo <= hi):
            raise ConfigError(f"tweets_per_user must satisfy 1 <= lo <= hi, got {self.tweets_per_user}")
        if self.n_keywords < 1:
            raise ConfigError(f"n_keywords must be >= 1, got {self.n_keywords}")
        if not 1 <= self.n_signal <= self.n_keywords:
            raise ConfigError(f"n_signal must be in [1, n_keywords], got {self.n_signal}")
        if self.n_reports < 0:
            raise ConfigError(f"n_reports must be >= 0, got {self.n_reports}")
        if not self.background_rate > 0:
            raise ConfigError(f"background_rate must be > 0, got {self.background_rate}")
        if not self.signal_rate > self.background_rate:
            raise ConfigError(
                f"signal_rate must exceed background_rate, got {self.signal_rate} <= {self.background_rate}"
            )
        if self.report_shift < 0:
            raise ConfigError(f"report_shift must be >= 0, got {self.report_shift}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


def generate(config):
    """Draw a corpus; returns ``(dataset, truth, adverse_index)``.

    ``truth`` carries unit weights on the signal keywords and an intercept
    at the negated midpoint of the expected background and adverse signal
    mass, so typical background messages score below zero and adverse ones
    above.  ``adverse_index`` maps each positive user id to the position of
    its adverse message.
    """
    root = np.random.SeedSequence(config.seed)
    streams = root.spawn(config.n_users + 2)
    assign_rng = np.random.default_rng(streams[config.n_users])
    report_rng = np.random.default_rng(streams[config.n_users + 1])

    n_positive = round(config.positive_fraction * config.n_users)
    order = assign_rng.permutation(config.n_users)
    positive_users = set(map(int, order[:n_positive]))

    id_width = max(4, len(str(config.n_users - 1)))
    kw_width = max(3, len(str(config.n_keywords - 1)))
    vocabulary = KeywordVocabulary(tuple(f"kw{j:0{kw_width}d}" for j in range(config.n_keywords)))
    signal = np.arange(config.n_signal)

    lo, hi = config.tweets_per_user
    bags = []
    adverse_index = {}
    for u in range(config.n_users):
        rng = np.random.default_rng(streams[u])
        user_id = f"u{u:0{id_width}d}"
        n_tweets = int(rng.integers(lo, hi + 1))
        counts = rng.poisson(config.background_rate, size=(n_tweets, config.n_keywords))
        label = int(u in positive_users)
        if label:
            pos = int(rng.integers(n_tweets))
            counts[pos, signal] = rng.poisson(config.signal_rate, size=config.n_signal)
            adverse_index[user_id] = pos
        bags.append(UserBag(user_id, counts, label))

    reports = report_rng.poisson(config.background_rate, size=(config.n_reports, config.n_keywords))
    if config.n_reports:
        reports[:, signal] = report_rng.poisson(
            config.signal_rate + config.report_shift, size=(config.n_reports, config.n_signal)
        )

    dataset = Dataset(vocabulary, tuple(bags), ReportSet(reports))
    beta = np.zeros(config.n_keywords + 1)
    beta[1 : config.n_signal + 1] = 1.0
    beta[0] = -config.n_signal * (config.background_rate + config.signal_rate) / 2.0
    return dataset, Coefficients(beta), adverse_index
