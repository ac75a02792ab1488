import csv
import json

import numpy as np
import pytest

from unijunction.integrate import IntegratorConfig, extract_maxima, integrate_trajectory
from unijunction.model import PAPER_G, PAPER_PARAMS, State
from unijunction.sweep import (WORKERS_ENV, BifurcationDiagram, bifurcation_sweep,
                               diagram_summary, max_workers, summary_to_json)

SHORT = IntegratorConfig(t_transient=20.0, t_record=30.0)
GRID = np.array([0.0, 0.25, 0.5, 0.75])


@pytest.fixture(scope="module")
def serial():
    return bifurcation_sweep(GRID, PAPER_PARAMS, PAPER_G, SHORT, workers=1)


class TestSweep:
    def test_single_column(self):
        d = bifurcation_sweep([0.3], PAPER_PARAMS, PAPER_G, SHORT)
        assert len(d.m_values) == 1 and len(d.maxima_per_m) == 1

    def test_columns_match_direct_integration(self, serial):
        for m, vals in zip(serial.m_values, serial.maxima_per_m):
            tr = integrate_trajectory(None, PAPER_PARAMS.with_m(m), PAPER_G, SHORT)
            assert vals.tobytes() == extract_maxima(tr, "u").values.tobytes()

    def test_parallel_matches_serial(self, serial):
        par = bifurcation_sweep(GRID[::-1], PAPER_PARAMS, PAPER_G, SHORT, workers=3)
        np.testing.assert_array_equal(par.m_values, serial.m_values)
        for a, b in zip(par.maxima_per_m, serial.maxima_per_m):
            assert a.tobytes() == b.tobytes()

    def test_rerun_bit_exact(self, serial):
        again = bifurcation_sweep(GRID, PAPER_PARAMS, PAPER_G, SHORT, workers=1)
        for a, b in zip(again.maxima_per_m, serial.maxima_per_m):
            assert a.tobytes() == b.tobytes()

    def test_continuation_inherits_final_state(self):
        grid = [0.1, 0.2]
        d = bifurcation_sweep(grid, PAPER_PARAMS, PAPER_G, SHORT, continuation=True)
        first = integrate_trajectory(None, PAPER_PARAMS.with_m(0.1), PAPER_G, SHORT)
        second = integrate_trajectory(State.from_array(first.states[-1]),
                                      PAPER_PARAMS.with_m(0.2), PAPER_G, SHORT)
        assert d.maxima_per_m[1].tobytes() == extract_maxima(second, "u").values.tobytes()
        assert d.settings["continuation"] is True

    def test_descending_continuation(self):
        grid = [0.1, 0.2]
        d = bifurcation_sweep(grid, PAPER_PARAMS, PAPER_G, SHORT, continuation=True,
                              descending=True)
        first = integrate_trajectory(None, PAPER_PARAMS.with_m(0.2), PAPER_G, SHORT)
        second = integrate_trajectory(State.from_array(first.states[-1]),
                                      PAPER_PARAMS.with_m(0.1), PAPER_G, SHORT)
        assert d.maxima_per_m[0].tobytes() == extract_maxima(second, "u").values.tobytes()

    def test_failures_are_recorded_not_fatal(self):
        cfg = SHORT.replace(blowup_bound=10.0)
        d = bifurcation_sweep([0.0, 0.5], PAPER_PARAMS, PAPER_G, cfg)
        assert set(d.failures) == {0.0, 0.5}
        assert "BlowUpError" in d.failures[0.0]
        assert all(len(v) == 0 for v in d.maxima_per_m)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            bifurcation_sweep([], PAPER_PARAMS, PAPER_G, SHORT)
        with pytest.raises(ValueError):
            bifurcation_sweep([0.1, 0.1], PAPER_PARAMS, PAPER_G, SHORT)

    def test_long_form_csv(self, serial, tmp_path):
        serial.to_csv(tmp_path / "b.csv")
        rows = list(csv.reader(open(tmp_path / "b.csv")))
        assert rows[0] == ["m", "u_max"]
        assert len(rows) - 1 == sum(len(v) for v in serial.maxima_per_m)
        first = serial.maxima_per_m[0]
        assert float(rows[1][0]) == 0.0 and float(rows[1][1]) == first[0]


class TestSummary:
    def test_period_two_column(self):
        d = BifurcationDiagram(np.array([0.0]), [np.array([1.0, 2.0, 1.0, 2.0])])
        (s,) = diagram_summary(d, gap=1e-3)
        assert s.branches == 2 and s.count == 4 and s.spread == 1.0

    def test_empty_column_flagged(self):
        d = BifurcationDiagram(np.array([0.0, 0.1]), [np.array([1.0]), np.empty(0)],
                               failures={0.1: "BlowUpError: boom"})
        s = diagram_summary(d)
        assert not s[0].skipped and s[1].skipped
        assert s[1].min is None and s[1].spread is None and "boom" in s[1].note

    def test_single_branch(self):
        d = BifurcationDiagram(np.array([0.0]), [np.full(10, 0.5) + 1e-6 * np.arange(10)])
        assert diagram_summary(d)[0].branches == 1

    def test_empty_diagram(self):
        with pytest.raises(ValueError):
            diagram_summary(BifurcationDiagram(np.empty(0), []))

    def test_json(self, serial, tmp_path):
        summary_to_json(diagram_summary(serial), tmp_path / "s.json")
        doc = json.load(open(tmp_path / "s.json"))
        assert [row["m"] for row in doc] == list(GRID)


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "2")
        assert max_workers(8) == 2
        assert max_workers(1) == 1

    def test_default(self, monkeypatch):
        monkeypatch.delenv(WORKERS_ENV, raising=False)
        assert max_workers() >= 1
