import numpy as np
import pytest

from pmcpower.dataset import Dataset, RunMeta, RunRecord


def make_dataset(columns: dict, target, workload="Other", frequency=1.0, util=None):
    """Assemble a Dataset from raw rate columns and a target-current series."""
    names = tuple(columns)
    n = len(target)
    records = []
    for i in range(n):
        u = util[i] if util is not None else None
        meta = RunMeta(f"run-{i:03d}", workload, frequency, u)
        rates = {name: float(columns[name][i]) for name in names}
        records.append(RunRecord(meta, rates, float(target[i]), float(target[i])))
    return Dataset(records, names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
