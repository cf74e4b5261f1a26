import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cost.data import CATEGORICAL, Dataset, FeatureSchema  # noqa: E402

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def make_dataset(codes, y, labels=None):
    """Fully categorical dataset straight from integer codes."""
    codes = np.asarray(codes, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    d = codes.shape[1]
    k = int(y.max()) + 1 if labels is None else len(labels)
    schema = FeatureSchema(
        names=tuple(f"f{i}" for i in range(d)),
        kinds=(CATEGORICAL,) * d,
        vocabularies=tuple(tuple(str(v) for v in range(int(codes[:, i].max()) + 1))
                           for i in range(d)),
        labels=tuple(labels or (f"c{j}" for j in range(k))),
    )
    return Dataset(X=codes, schema=schema, y=y)


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


@pytest.fixture
def separable():
    """Two classes with disjoint values on every feature."""
    rng = np.random.default_rng(11)
    y = np.repeat([0, 1], 20)
    codes = np.column_stack([2 * y + rng.integers(0, 2, size=40) for _ in range(3)])
    return make_dataset(codes, y)


@pytest.fixture
def noisy():
    """Three classes, five features, weak signal in feature 0."""
    rng = np.random.default_rng(5)
    n = 90
    y = np.repeat([0, 1, 2], n // 3)
    f0 = np.where(rng.random(n) < 0.6, y, rng.integers(0, 3, size=n))
    codes = np.column_stack([f0] + [rng.integers(0, 3, size=n) for _ in range(4)])
    return make_dataset(codes, y)


ACCEPTANCE: list[str] = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    """Log one acceptance-criterion outcome; printed again in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
