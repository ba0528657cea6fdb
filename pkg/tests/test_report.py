import json
import math

import numpy as np
import pytest

from fibernet.report import (CURVE_COLUMNS, SchemaError, curve_csv, read_curve, read_states,
                             summary_json, write_curve, write_states)
from fibernet.scenarios import cantilever_model
from fibernet.solver import SolveConfig, run


@pytest.fixture(scope="module")
def report():
    return run(cantilever_model(0.1, 1), SolveConfig(n_steps=20, delta_0=0.3))


class TestCurveCsv:
    def test_roundtrip_exact(self, report, tmp_path):
        path = write_curve(report, tmp_path / "c.csv")
        data = read_curve(path)
        assert tuple(data) == CURVE_COLUMNS
        u, f = report.curve()
        np.testing.assert_array_equal(data["u"], u)
        np.testing.assert_array_equal(data["reaction"], f)
        assert data["iters"][1:].tolist() == [r.iterations for r in report.records]

    def test_versioned_header(self, report):
        first, second = curve_csv(report).splitlines()[:2]
        assert first == "# fibernet-curve v1"
        assert second.split(",") == list(CURVE_COLUMNS)

    def test_rejects_missing_version(self, report, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("\n".join(curve_csv(report).splitlines()[1:]))
        with pytest.raises(SchemaError):
            read_curve(path)

    def test_rejects_bad_value(self, report, tmp_path):
        lines = curve_csv(report).splitlines()
        lines[3] = lines[3].replace(lines[3].split(",")[1], "abc", 1)
        path = tmp_path / "c.csv"
        path.write_text("\n".join(lines))
        with pytest.raises(SchemaError):
            read_curve(path)


class TestStates:
    def test_roundtrip(self, tmp_path):
        xi = np.array([0.0, 0.1, math.pi])
        path = write_states(tmp_path / "s.csv", 7, xi, xi, [False, False, True])
        back = read_states(path)
        np.testing.assert_array_equal(back["xi"], xi)
        assert back["ruptured"].tolist() == [False, False, True]
        assert path.read_text().startswith("# fibernet-state v1 step=7")


class TestSummary:
    def test_fields(self, report):
        doc = json.loads(summary_json(report, {"scheme": "hybrid"}))
        assert doc["termination"] == "converged"
        assert doc["cumulative_iterations"] == report.cumulative_iterations
        assert doc["config"] == {"scheme": "hybrid"}
        assert "wall_time" not in doc
