import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurobeat.errors import EmptyGroup, ParseError
from neurobeat.evaluate import Metrics
from neurobeat.report import (
    METRICS_HEADER,
    MetricsRow,
    format_metrics_csv,
    per_subject_f,
    read_metrics_csv,
    render_boxplot_svg,
    summarize,
    write_metrics_csv,
)

SVG = "{http://www.w3.org/2000/svg}"


def row(method="gru", subject="s01", song="a", tol=0.1, p=1.0, r=0.5, f=2 / 3):
    return MetricsRow(method, subject, song, tol, Metrics(p, r, f, 2, 1, 1))


class TestMetricsCsv:
    def test_one_row(self):
        text = format_metrics_csv([row()])
        lines = text.splitlines()
        assert lines[0] == ",".join(METRICS_HEADER)
        assert lines[1] == "gru,s01,a,0.100000,1.000000,0.500000,0.666667,2,1,1"
        assert len(lines) == 2 and text.endswith("\n")

    def test_sorted(self):
        rows = [row("gru", "s02"), row("flux", "s01"), row("gru", "s01", tol=0.05), row("gru", "s01")]
        lines = format_metrics_csv(rows).splitlines()[1:]
        assert [l.split(",")[:4] for l in lines] == [
            ["flux", "s01", "a", "0.100000"],
            ["gru", "s01", "a", "0.050000"],
            ["gru", "s01", "a", "0.100000"],
            ["gru", "s02", "a", "0.100000"],
        ]

    @given(st.permutations(list(range(6))))
    def test_order_independent(self, perm):
        rows = [row(subject=f"s{i}", tol=0.1 * (i % 3 + 1)) for i in range(6)]
        assert format_metrics_csv([rows[i] for i in perm]) == format_metrics_csv(rows)

    def test_round_trip(self, tmp_path):
        rows = [row(), row("flux", "s02", "b", 0.5, 0.25, 0.75, 0.375)]
        write_metrics_csv(rows, tmp_path / "m.csv")
        back = read_metrics_csv(tmp_path / "m.csv")
        assert format_metrics_csv(back) == format_metrics_csv(rows)

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n")
        with pytest.raises(ParseError):
            read_metrics_csv(tmp_path / "m.csv")


class TestSummaries:
    def test_per_subject(self):
        rows = [row(subject="s01", song="a", f=0.2), row(subject="s01", song="b", f=0.4), row(subject="s02", f=0.9)]
        out = per_subject_f(rows, "gru")
        assert out["s01"] == pytest.approx(0.3) and out["s02"] == pytest.approx(0.9)

    def test_summarize(self):
        rows = [row(f=0.2), row(subject="s02", f=0.4), row("flux", f=0.1)]
        out = summarize(rows)
        assert [(e["method"], e["n"]) for e in out] == [("flux", 1), ("gru", 2)]
        assert out[1]["f_measure_mean"] == pytest.approx(0.3)


class TestBoxplot:
    def boxes(self, svg):
        return ET.fromstring(svg).findall(f"{SVG}g[@class='box']")

    def test_four_methods(self, rng):
        groups = {m: list(rng.random(12)) for m in ("rnn", "fcn", "flux", "dummy")}
        svg = render_boxplot_svg(groups, "f_measure")
        root = ET.fromstring(svg)
        assert root.find(f"{SVG}title").text == "f_measure"
        assert [g.get("data-method") for g in self.boxes(svg)] == ["rnn", "fcn", "flux", "dummy"]
        for g in self.boxes(svg):
            assert len(g.findall(f"{SVG}rect")) == 1

    def test_degenerate(self):
        svg = render_boxplot_svg({"only": [0.4] * 5}, "recall")
        (box,) = self.boxes(svg)
        assert float(box.find(f"{SVG}rect").get("height")) == 0.0

    def test_outlier(self):
        svg = render_boxplot_svg({"m": [0.5, 0.51, 0.52, 0.5, 0.49, 0.0]}, "precision")
        assert len(self.boxes(svg)[0].findall(f"{SVG}circle")) == 1

    def test_escapes(self):
        ET.fromstring(render_boxplot_svg({"a<b&c": [0.1, 0.2]}, "F @ <0.1>"))

    def test_empty(self):
        with pytest.raises(EmptyGroup):
            render_boxplot_svg({"a": []}, "f")
        with pytest.raises(EmptyGroup):
            render_boxplot_svg({}, "f")
