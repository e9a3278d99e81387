import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopload import (
    SplitSpec,
    load_csv,
    minmax_normalize,
    split,
    split_normalized,
    write_csv,
)
from koopload.errors import (
    FileError,
    InsufficientData,
    ParseError,
    RangeError,
    SpacingError,
)

from conftest import make_panel, write_panel_csv


class TestLoadCsv:
    def test_hourly_two_stations(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a,b",
                               [[0, 1.0, 2.0], [3600, 1.5, 2.5], [7200, 2.0, 3.0]])
        panel = load_csv(path)
        assert panel.n_samples == 3
        assert panel.n_stations == 2
        assert panel.sample_interval_s == 3600.0
        assert panel.station_ids == ("a", "b")

    def test_iso_timestamps(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a",
                               [["2014-01-01T00:00:00Z", 1.0],
                                ["2014-01-01T01:00:00Z", 2.0]])
        panel = load_csv(path)
        assert panel.sample_interval_s == 3600.0

    def test_gap_raises_spacing(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a",
                               [[0, 1.0], [3600, 2.0], [10800, 3.0]])
        with pytest.raises(SpacingError):
            load_csv(path)

    def test_unparsable_cell_names_position(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a,b",
                               [[0, 1.0, 2.0], [3600, "abc", 2.5]])
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.row == 2
        assert err.value.col == 1

    def test_empty_cell_rejected(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a,b",
                               [[0, 1.0, 2.0], [3600, "", 2.5]])
        with pytest.raises(ParseError):
            load_csv(path)

    def test_nan_rejected(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a",
                               [[0, 1.0], [3600, "nan"]])
        with pytest.raises(ParseError):
            load_csv(path)

    def test_single_row_insufficient(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a", [[0, 1.0]])
        with pytest.raises(InsufficientData):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileError):
            load_csv(tmp_path / "nope.csv")

    def test_decreasing_timestamps_rejected(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a",
                               [[7200, 1.0], [3600, 2.0], [0, 3.0]])
        with pytest.raises(SpacingError):
            load_csv(path)

    def test_jitter_within_one_second_ok(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a",
                               [[0, 1.0], [3600.4, 2.0], [7199.8, 3.0]])
        panel = load_csv(path)
        assert panel.n_samples == 3

    def test_roundtrip_values_stable(self, tmp_path):
        panel = make_panel(np.random.default_rng(0).random((5, 3)) * 1e4)
        write_csv(panel, tmp_path / "out.csv")
        back = load_csv(tmp_path / "out.csv")
        np.testing.assert_array_equal(back.values, panel.values)
        assert back.station_ids == panel.station_ids

    def test_schema_selects_columns(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", "timestamp,a,b,c",
                               [[0, 1, 2, 3], [3600, 4, 5, 6]])
        panel = load_csv(path, {"timestamp": "timestamp", "stations": ["c", "a"]})
        assert panel.station_ids == ("c", "a")
        np.testing.assert_array_equal(panel.values, [[3, 1], [6, 4]])


class TestNormalize:
    def test_simple_column(self):
        panel = make_panel([[2.0], [4.0], [6.0]])
        normed, stats = minmax_normalize(panel)
        np.testing.assert_allclose(normed.values[:, 0], [0.0, 0.5, 1.0])
        assert stats.col_min[0] == 2.0
        assert stats.col_max[0] == 6.0

    def test_constant_column_flagged(self):
        panel = make_panel([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
        normed, stats = minmax_normalize(panel)
        assert stats.constant[0]
        assert not stats.constant[1]
        np.testing.assert_array_equal(normed.values[:, 0], 0.0)

    def test_unit_range_identity(self):
        panel = make_panel([[0.0], [1.0]])
        normed, _ = minmax_normalize(panel)
        np.testing.assert_array_equal(normed.values[:, 0], [0.0, 1.0])

    def test_global_mode_shares_range(self):
        panel = make_panel([[0.0, 5.0], [10.0, 6.0]])
        normed, stats = minmax_normalize(panel, mode="global")
        assert stats.col_min[0] == stats.col_min[1] == 0.0
        assert stats.col_max[0] == stats.col_max[1] == 10.0
        np.testing.assert_allclose(normed.values, [[0.0, 0.5], [1.0, 0.6]])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=4),
                    min_size=2, max_size=30))
    def test_roundtrip_property(self, data):
        width = len(data[0])
        rows = [row for row in data if len(row) == width]
        if len(rows) < 2:
            return
        panel = make_panel(rows)
        normed, stats = minmax_normalize(panel)
        back = stats.invert(normed.values)
        span = np.abs(panel.values).max() + 1.0
        mask = ~stats.constant
        if np.any(mask):
            assert np.max(np.abs(back[:, mask] - panel.values[:, mask])) <= 1e-12 * span
        assert np.array_equal(back[:, ~mask], panel.values[:, ~mask])


class TestSplit:
    def test_week_split(self):
        panel = make_panel(np.arange(336 * 2, dtype=float).reshape(336, 2))
        train, test = split(panel, SplitSpec((0, 168), (168, 336)))
        assert train.n_samples == 168
        assert test.n_samples == 168
        assert train.station_ids == test.station_ids == panel.station_ids
        assert test.start_timestamp == panel.start_timestamp + 168 * 3600.0

    def test_overlap_rejected(self):
        panel = make_panel(np.zeros((20, 1)) + np.arange(20)[:, None])
        with pytest.raises(RangeError):
            split(panel, SplitSpec((0, 10), (5, 15)))

    def test_out_of_bounds_rejected(self):
        panel = make_panel(np.arange(336, dtype=float)[:, None])
        with pytest.raises(RangeError):
            split(panel, SplitSpec((0, 168), (168, 400)))

    def test_normalization_from_train_only(self):
        values = np.concatenate([np.linspace(0, 1, 50), np.linspace(5, 9, 50)])
        panel = make_panel(values[:, None])
        train, test, stats = split_normalized(panel, SplitSpec((0, 50), (50, 100)))
        # train spans [0, 1]; test values blow past 1 instead of being rescaled
        assert stats.col_max[0] == 1.0
        assert train.values.max() == 1.0
        assert test.values.min() > 1.0
