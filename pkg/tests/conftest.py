import numpy as np
import pytest

from alphatim.data import FeatureSet, SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def separable_fs():
    """Trivially separable clusters: 10 classes, 16 dims."""
    return generate_synthetic(SynthConfig(classes=10, dim=16, per_class=120, separation=100.0, seed=3))


@pytest.fixture(scope="session")
def small_fs():
    return generate_synthetic(SynthConfig(classes=8, dim=8, per_class=40, separation=3.0, seed=11))


def random_simplex(rng, k):
    return rng.dirichlet(np.ones(k))


def tiny_featureset():
    feats = np.array([[1.0, 2.0, 3.0], [-0.5, 0.25, 4.0]])
    return FeatureSet(feats, np.array([0, 1]), ("cat", "dög"), "test")


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
