import numpy as np
import pytest

from extbandit.environments import TRACE_HEADER


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_trace(tmp_path):
    """Write a trace CSV from ``{(arm, rep): [loss, ...]}`` or raw lines."""

    def _write(data, name="task.csv", header=",".join(TRACE_HEADER)):
        path = tmp_path / name
        if isinstance(data, str):
            path.write_text(data, encoding="utf-8")
            return path
        lines = [header]
        for (arm, rep), losses in data.items():
            lines += [f"{arm},{rep},{i},{x!r}" for i, x in enumerate(losses, start=1)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
