"""CSV contract, display rendering, and model-matrix encoding."""

import numpy as np
import pandas as pd
import pytest
from pandas.testing import assert_frame_equal

from stratwave.errors import (
    ColumnNotFound,
    DataError,
    DuplicateId,
    MissingValues,
    ParseError,
)
from stratwave.io import (
    build_model_matrix,
    parse_units_text,
    read_units,
    render_float,
    render_table,
    write_units,
)


class TestParseUnitsText:
    def test_type_inference_per_column(self):
        table = parse_units_text("id,score,label\n1,2.5,a\n2,3,b\n")
        assert table["id"].dtype == np.int64
        assert table["score"].dtype == np.float64
        assert table["label"].dtype == object
        assert list(table["score"]) == [2.5, 3.0]

    def test_integer_column_is_int64(self):
        table = parse_units_text("n\n-3\n+4\n007\n")
        assert table["n"].dtype == np.int64
        assert list(table["n"]) == [-3, 4, 7]

    def test_scientific_notation_is_real(self):
        table = parse_units_text("x\n1e3\n2\n")
        assert table["x"].dtype == np.float64
        assert list(table["x"]) == [1000.0, 2.0]

    def test_nan_and_inf_strings_stay_text(self):
        # Accepting float("nan") here would let a text token masquerade
        # as a missing value, so non-finite spellings keep the column text.
        table = parse_units_text("x\nnan\n1\n")
        assert table["x"].dtype == object
        assert list(table["x"]) == ["nan", "1"]

    def test_empty_and_na_cells_are_missing(self):
        table = parse_units_text("x,y\n1.5,\n,NA\n")
        assert table["x"].isna().tolist() == [False, True]
        assert table["y"].isna().tolist() == [True, True]

    def test_integer_column_with_missing_becomes_real(self):
        table = parse_units_text("n\n1\nNA\n3\n")
        assert table["n"].dtype == np.float64
        assert table["n"].isna().tolist() == [False, True, False]

    def test_text_na_reads_back_as_missing(self):
        # The documented loss: a literal text "NA" cannot round-trip.
        table = parse_units_text("label\nNA\nok\n")
        assert table["label"].isna().tolist() == [True, False]

    def test_quoted_field_keeps_comma_and_newline(self):
        table = parse_units_text('note\n"a, b\nc"\n')
        assert list(table["note"]) == ["a, b\nc"]

    def test_fully_empty_lines_are_skipped(self):
        table = parse_units_text("a,b\n1,2\n\n3,4\n")
        assert len(table) == 2

    def test_column_order_preserved(self):
        table = parse_units_text("z,a,m\n1,2,3\n")
        assert list(table.columns) == ["z", "a", "m"]

    def test_empty_input_rejected(self):
        with pytest.raises(ParseError, match="empty"):
            parse_units_text("")

    def test_blank_header_rejected(self):
        with pytest.raises(ParseError, match="header"):
            parse_units_text(",,\n1,2,3\n")

    def test_duplicate_column_rejected(self):
        with pytest.raises(ParseError, match="duplicate column"):
            parse_units_text("a,b,a\n1,2,3\n")

    def test_ragged_row_names_the_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_units_text("a,b\n1,2\n1,2,3\n")

    def test_source_appears_in_errors(self):
        with pytest.raises(ParseError, match="units.csv"):
            parse_units_text("", source="units.csv")

    def test_header_only_gives_empty_typed_table(self):
        table = parse_units_text("a,b\n")
        assert list(table.columns) == ["a", "b"]
        assert len(table) == 0

    def test_int64_overflow_falls_back_to_text(self):
        table = parse_units_text("serial\n99999999999999999999\n1\n")
        assert table["serial"].dtype == object
        assert list(table["serial"]) == ["99999999999999999999", "1"]


class TestReadWriteRoundTrip:
    def test_iris_round_trips(self, iris, tmp_path):
        path = tmp_path / "iris.csv"
        write_units(iris, path)
        again = read_units(path)
        assert_frame_equal(again, iris)

    def test_reserialization_is_byte_identical(self, iris, tmp_path):
        first = tmp_path / "one.csv"
        second = tmp_path / "two.csv"
        write_units(iris, first)
        write_units(read_units(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_full_precision_floats_survive(self, tmp_path):
        value = 0.1 + 0.2  # not representable at two decimals
        path = tmp_path / "t.csv"
        write_units(pd.DataFrame({"x": [value]}), path)
        assert read_units(path)["x"].iloc[0] == value

    def test_missing_cells_write_as_empty(self, tmp_path):
        path = tmp_path / "t.csv"
        write_units(pd.DataFrame({"x": [1.5, np.nan], "s": ["a", np.nan]}), path)
        assert path.read_text() == "x,s\n1.5,a\n,\n"

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            read_units(tmp_path / "absent.csv")

    def test_id_column_checked_when_asked(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("id,x\n1,a\n1,b\n")
        with pytest.raises(DuplicateId, match="repeated ids: 1"):
            read_units(path, id_col="id")

    def test_id_column_must_exist(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x\n1\n")
        with pytest.raises(ColumnNotFound, match="unit"):
            read_units(path, id_col="unit")

    def test_id_column_must_be_complete(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("id,x\n1,a\n,b\n")
        with pytest.raises(MissingValues, match="id"):
            read_units(path, id_col="id")

    def test_non_utf8_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_bytes(b"a,b\n\xff\xfe,2\n")
        with pytest.raises(ParseError, match="UTF-8"):
            read_units(path)


class TestRenderFloat:
    def test_half_even_at_the_second_decimal(self):
        # 13/40 = 0.325 exactly in decimal; the 2 is even so it stays.
        assert render_float(13 / 40) == "0.32"
        # 0.375 is exactly representable; the 7 is odd so it rounds up.
        assert render_float(0.375) == "0.38"
        assert render_float(0.125) == "0.12"
        assert render_float(2.675) == "2.68"

    def test_rounding_reads_the_shortest_decimal_form(self):
        # float(0.325) is slightly below 0.325 in binary; rounding the
        # shortest decimal form, not the binary expansion, is the point.
        assert render_float(0.325) == "0.32"

    def test_trailing_zeros_kept(self):
        assert render_float(3.0) == "3.00"
        assert render_float(0.1) == "0.10"

    def test_plain_rounding_away_from_ties(self):
        assert render_float(1.234) == "1.23"
        assert render_float(1.236) == "1.24"
        assert render_float(-1.236) == "-1.24"

    def test_full_precision_mode(self):
        assert render_float(0.1 + 0.2, "full") == "0.30000000000000004"
        assert render_float(3.0, "full") == "3.0"


class TestRenderTable:
    def test_alignment_and_rounding(self):
        table = pd.DataFrame(
            {"strata": ["setosa", "x"], "sd": [0.375, 10.0], "n": [5, 12]}
        )
        assert render_table(table) == (
            "strata     sd   n\n"
            "setosa   0.38   5\n"
            "x       10.00  12\n"
        )

    def test_missing_renders_as_na(self):
        table = pd.DataFrame({"x": [1.5, np.nan]})
        assert render_table(table) == "   x\n1.50\n  NA\n"

    def test_full_precision_rendering(self):
        table = pd.DataFrame({"x": [0.1 + 0.2]})
        assert "0.30000000000000004" in render_table(table, "full")

    def test_empty_table(self):
        assert render_table(pd.DataFrame()) == "(empty table)\n"

    def test_no_trailing_whitespace(self):
        table = pd.DataFrame({"label": ["a", "longer"], "n": [1, 2]})
        for line in render_table(table).splitlines():
            assert line == line.rstrip()

    def test_integers_stay_integers(self):
        table = pd.DataFrame({"n": [1, 2]})
        assert render_table(table) == "n\n1\n2\n"


class TestBuildModelMatrix:
    def test_numeric_passthrough_with_intercept(self):
        units = pd.DataFrame({"x": [1, 2, 3], "z": [0.5, 0.25, 0.0]})
        matrix = build_model_matrix(units, ["x", "z"])
        assert list(matrix.columns) == ["intercept", "x", "z"]
        assert matrix["intercept"].tolist() == [1.0, 1.0, 1.0]
        assert matrix["x"].dtype == np.float64
        assert matrix["x"].tolist() == [1.0, 2.0, 3.0]

    def test_text_column_becomes_reference_dummies(self):
        units = pd.DataFrame({"species": ["b", "a", "c", "a"]})
        matrix = build_model_matrix(units, ["species"])
        # Levels sort to a, b, c and the first is the reference.
        assert list(matrix.columns) == ["intercept", "species_b", "species_c"]
        assert matrix["species_b"].tolist() == [1.0, 0.0, 0.0, 0.0]
        assert matrix["species_c"].tolist() == [0.0, 0.0, 1.0, 0.0]

    def test_no_intercept(self):
        units = pd.DataFrame({"x": [1.0, 2.0]})
        matrix = build_model_matrix(units, ["x"], intercept=False)
        assert list(matrix.columns) == ["x"]

    def test_mixed_columns_keep_request_order(self):
        units = pd.DataFrame({"g": ["u", "v"], "x": [1.0, 2.0]})
        matrix = build_model_matrix(units, ["x", "g"])
        assert list(matrix.columns) == ["intercept", "x", "g_v"]

    def test_boolean_column_counts_as_numeric(self):
        units = pd.DataFrame({"flag": [True, False]})
        matrix = build_model_matrix(units, ["flag"])
        assert matrix["flag"].tolist() == [1.0, 0.0]

    def test_no_covariates_rejected(self):
        with pytest.raises(DataError, match="covariate"):
            build_model_matrix(pd.DataFrame({"x": [1.0]}), [])

    def test_unknown_column(self):
        with pytest.raises(ColumnNotFound, match="nope"):
            build_model_matrix(pd.DataFrame({"x": [1.0]}), ["nope"])

    def test_missing_values_rejected(self):
        with pytest.raises(MissingValues, match="x"):
            build_model_matrix(pd.DataFrame({"x": [1.0, np.nan]}), ["x"])
