import numpy as np
import pytest

from echo_metrics.ingest import CATEGORIES, Dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dataset_from_sequences(sequences, platform=0):
    """Build a Dataset where user i comments with the given category sequence.

    ``sequences`` holds strings of 'S'/'C' or 0/1 arrays (1 = conspiracy).
    """
    user, cat, ts = [], [], []
    for i, seq in enumerate(sequences):
        codes = [1 if s in ("C", 1) else 0 for s in seq]
        user.extend([i] * len(codes))
        cat.extend(codes)
        ts.extend(range(1000, 1000 + len(codes)))
    cat = np.asarray(cat, dtype=np.int8)
    return Dataset(
        user_codes=user, user_names=[f"u{i}" for i in range(len(sequences))],
        item_codes=cat.astype(int), item_names=[f"{c[:3]}" for c in CATEGORIES],
        platform=np.full(len(cat), platform), category=cat, timestamp=ts,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
