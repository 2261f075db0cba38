import random

import pytest

from iuseg.chat import IntonationUnit, IUToken, TimeInterval, TokenKind
from iuseg.dsp import sweep_specs
from iuseg.errors import DataError
from iuseg.evaluate import ChunkScore, ConfusionCounts, aggregate
from iuseg.report import (
    comparison_csv_rows,
    comparison_table,
    iu_length_histogram,
    sweep_report,
    total_variation_distance,
)


def unit(n_words, start=0, end=500):
    return IntonationUnit(
        speaker="A",
        interval=TimeInterval(start, end),
        tokens=tuple(IUToken(TokenKind.WORD, f"w{i}") for i in range(n_words)),
    )


def report_with(f1=None, accuracy=None, tp=1, fp=0, fn=0, tn=0):
    rep = aggregate([ChunkScore("c", ConfusionCounts(tp, fp, fn, tn))])
    if f1 is not None:
        rep.f1 = f1
    if accuracy is not None:
        rep.accuracy = accuracy
    return rep


class TestHistogram:
    def test_word_counts(self):
        hist = iu_length_histogram([unit(2), unit(2), unit(3)], unit="words")
        assert hist.total == 3
        by_left_edge = dict((hist.edges[i], hist.counts[i]) for i in range(len(hist.counts)))
        assert by_left_edge == {2: 2, 3: 1}

    def test_empty_input(self):
        hist = iu_length_histogram([], unit="words")
        assert hist.total == 0
        assert hist.counts == []

    def test_fuzzed_counts_sum_to_input_size(self):
        rng = random.Random(12)
        for _ in range(50):
            units = [unit(rng.randint(1, 9)) for _ in range(rng.randint(0, 60))]
            hist = iu_length_histogram(units, unit="words")
            assert sum(hist.counts) == len(units)

    def test_duration_bins_are_100ms(self):
        units = [unit(1, 0, 140), unit(1, 0, 160), unit(1, 0, 420)]
        hist = iu_length_histogram(units, unit="duration")
        assert hist.edges[1] - hist.edges[0] == 100
        assert sum(hist.counts) == 3
        by_left = dict(zip(hist.edges, hist.counts))
        assert by_left[100] == 2 and by_left[400] == 1

    def test_long_rows(self):
        hist = iu_length_histogram([unit(2)], unit="words")
        assert hist.as_long_rows("ref") == [("ref", 2, 1)]


class TestTotalVariation:
    def test_identical_is_zero(self):
        a = iu_length_histogram([unit(2), unit(3)], unit="words")
        assert total_variation_distance(a, a) == 0.0

    def test_disjoint_is_one(self):
        a = iu_length_histogram([unit(1)], unit="words")
        b = iu_length_histogram([unit(9)], unit="words")
        assert total_variation_distance(a, b) == pytest.approx(1.0)

    def test_empty_versus_nonempty_is_one(self):
        a = iu_length_histogram([], unit="words")
        b = iu_length_histogram([unit(2)], unit="words")
        assert total_variation_distance(a, b) == 1.0

    def test_half_overlap(self):
        a = iu_length_histogram([unit(1), unit(2)], unit="words")
        b = iu_length_histogram([unit(1), unit(3)], unit="words")
        assert total_variation_distance(a, b) == pytest.approx(0.5)


class TestSweep:
    def full_reports(self, f1=0.8, accuracy=0.9):
        reports = {"baseline": report_with(f1=f1, accuracy=accuracy)}
        for spec in sweep_specs():
            reports[spec.label] = report_with(f1=f1, accuracy=accuracy)
        return reports

    def test_identical_metrics_give_zero_deltas(self):
        grid = sweep_report(self.full_reports(), sweep_specs())
        for cell in grid.cells.values():
            assert cell.f1_delta == 0.0
            assert cell.accuracy_delta == 0.0

    def test_delta_against_baseline(self):
        reports = self.full_reports(f1=0.87)
        reports["lowpass_400hz"] = report_with(f1=0.71, accuracy=0.9)
        grid = sweep_report(reports, sweep_specs())
        assert grid.cells["lowpass_400hz"].f1_delta == pytest.approx(-0.16)

    def test_absent_cell_marked_absent(self):
        reports = self.full_reports()
        del reports["highpass_3200hz"]
        grid = sweep_report(reports, sweep_specs())
        assert grid.cells["highpass_3200hz"].absent
        rows = grid.csv_rows()
        absent_rows = [r for r in rows if r[0] == "highpass_3200hz"]
        assert absent_rows and "absent" in absent_rows[0]

    def test_missing_baseline_rejected(self):
        reports = self.full_reports()
        del reports["baseline"]
        with pytest.raises(DataError):
            sweep_report(reports, sweep_specs())

    def test_grid_covers_all_ten_cells(self):
        grid = sweep_report(self.full_reports(), sweep_specs())
        assert len(grid.cells) == 10


class TestComparison:
    def test_best_f1_first(self):
        table = comparison_table(
            {
                "baseline": report_with(f1=0.48, accuracy=0.85),
                "segmenter": report_with(f1=0.87, accuracy=0.96),
            }
        )
        lines = [l for l in table.splitlines() if l.strip()]
        assert lines.index(next(l for l in lines if "segmenter" in l)) < lines.index(
            next(l for l in lines if "baseline" in l)
        )
        assert "0.87" in table and "0.96" in table

    def test_single_row(self):
        table = comparison_table({"only": report_with(f1=0.5, accuracy=0.5)})
        assert "only" in table

    def test_tie_broken_by_accuracy_then_name(self):
        rows = comparison_csv_rows(
            {
                "bbb": report_with(f1=0.5, accuracy=0.7),
                "aaa": report_with(f1=0.5, accuracy=0.7),
                "ccc": report_with(f1=0.5, accuracy=0.9),
            }
        )
        names = [r[0] for r in rows[1:]]
        assert names == ["ccc", "aaa", "bbb"]

    def test_two_decimal_rendering(self):
        table = comparison_table({"m": report_with(f1=1 / 3, accuracy=2 / 3)})
        assert "0.33" in table and "0.67" in table
