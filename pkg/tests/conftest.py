"""Shared builders for small deterministic fixtures."""

import numpy as np
import pytest

from miadapt.model import Coefficients, Dataset, KeywordVocabulary, ReportSet, UserBag


def make_vocabulary(width):
    return KeywordVocabulary(tuple(f"kw{j:03d}" for j in range(width)))


def make_bag(user_id, rows, label):
    return UserBag(user_id, np.asarray(rows, dtype=np.int64), label)


def random_dataset(rng, n_users=6, width=4, max_tweets=3, n_reports=5, rate=2.0):
    """Small random dataset with at least one user of each label."""
    vocabulary = make_vocabulary(width)
    bags = []
    for u in range(n_users):
        n_tweets = int(rng.integers(1, max_tweets + 1))
        counts = rng.poisson(rate, size=(n_tweets, width))
        label = int(u % 2) if n_users > 1 else 1
        bags.append(UserBag(f"u{u:03d}", counts, label))
    reports = ReportSet(rng.poisson(rate, size=(n_reports, width)))
    return Dataset(vocabulary, tuple(bags), reports)


def random_coefficients(rng, width, scale=1.0):
    return Coefficients(rng.normal(0.0, scale, size=width + 1))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_vocabulary():
    return make_vocabulary(2)


@pytest.fixture
def tiny_dataset(tiny_vocabulary):
    bags = (
        make_bag("u000", [[2, 0], [0, 1]], 1),
        make_bag("u001", [[1, 1]], 0),
        make_bag("u002", [[0, 3]], 1),
    )
    reports = ReportSet(np.array([[1, 0], [2, 1]], dtype=np.int64))
    return Dataset(tiny_vocabulary, bags, reports)
