import numpy as np
import pytest

from koopload import LoadPanel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_panel(values, tau=3600.0):
    values = np.asarray(values, float)
    ids = [f"s{j}" for j in range(values.shape[1])]
    return LoadPanel(values, tau, ids)


def write_panel_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    return path
