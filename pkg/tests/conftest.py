import sys

import numpy as np
import pytest

from extubate.bundle import SubsetTensor, SubsetTensorBundle
from extubate.cohort import GeneratorConfig, generate_cohort
from extubate.pipeline import prepare


def random_bundle(rng, n=6, features=(2, 1, 3), steps=(4, 7, 13), p_missing=0.3, static_dim=0,
                  empty_rows=True):
    """Random masked bundle; whole features go missing per patient, as in real data."""
    subsets = {}
    for name, f, t in zip(("low", "medium", "high"), features, steps):
        values = rng.random((n, t, f))
        mask = np.ones((n, t, f), dtype=bool)
        absent = rng.random((n, f)) < p_missing
        mask[absent[:, None, :].repeat(t, axis=1)] = False
        if empty_rows and n > 1:
            mask[0] = False
        values[~mask] = np.nan
        subsets[name] = SubsetTensor(values, mask, [f"{name}{j}" for j in range(f)],
                                     {4: 120, 7: 60, 13: 30}[t])
    static = rng.random((n, static_dim)) if static_dim else None
    return SubsetTensorBundle(np.array([f"P{i}" for i in range(n)]), subsets, static,
                              [f"s{j}" for j in range(static_dim)])


@pytest.fixture(scope="session")
def small_prepared():
    events, profiles, timelines = generate_cohort(GeneratorConfig(n_patients=240, seed=11))
    return prepare(events, profiles, timelines, feature_set=1, seed=11)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
