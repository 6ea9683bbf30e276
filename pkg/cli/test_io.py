"""
Tests for CSV parsing and model persistence.
"""

from unittest.mock import patch

import numpy as np
import pytest

from classifier.qda import fit_qda
from estimators.model_core import PenaltyConfig
from shared.utils.error_handling import DataFormatError, DimensionMismatchError, PersistenceError
from .io import (
    ModelDocument,
    read_grid_file,
    read_labeled_csv,
    read_model,
    read_observations,
    write_model,
)


def write_rows(path, rows):
    path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n")
    return path


def fitted_document():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.standard_normal((25, 3)) + 3 * c for c in range(2)])
    y = np.repeat(["left", "right"], 25)
    cfg = PenaltyConfig(lambda1=0.3, lambda2=2.0, Q=1)
    model, fit = fit_qda(X, y, "pcen", cfg)
    return ModelDocument.from_fit("pcen", cfg, model, fit), model


class TestReadLabeledCsv:
    """Observation files."""

    def test_label_last_by_default(self, tmp_path):
        """The trailing column holds the labels."""
        path = write_rows(tmp_path / "data.csv", [[1.0, 2.0, "a"], [3.0, 4.0, "b"], [5.0, 6.0, "a"]])
        X, y = read_labeled_csv(path)
        np.testing.assert_array_equal(X, [[1, 2], [3, 4], [5, 6]])
        assert y.tolist() == ["a", "b", "a"]

    def test_label_column_by_index_and_name(self, tmp_path):
        """--label-col accepts a position or a header name."""
        path = write_rows(tmp_path / "data.csv", [[7, 1.5, 2.5], [8, 3.5, 4.5]])
        X, y = read_labeled_csv(path, label_col="0")
        assert y.tolist() == ["7", "8"]
        np.testing.assert_array_equal(X, [[1.5, 2.5], [3.5, 4.5]])
        named = write_rows(tmp_path / "named.csv", [["x1", "class", "x2"], [1, "u", 2], [3, "v", 4]])
        X, y = read_labeled_csv(named, label_col="class", header=True)
        assert y.tolist() == ["u", "v"]
        np.testing.assert_array_equal(X, [[1, 2], [3, 4]])

    def test_libras_layout(self, tmp_path):
        """Ninety features and a trailing integer label give C=15, p=90."""
        rng = np.random.default_rng(1)
        rows = [list(np.round(rng.uniform(0, 1, 90), 6)) + [label] for label in range(1, 16) for _ in range(2)]
        X, y = read_labeled_csv(write_rows(tmp_path / "movement_libras.data", rows))
        assert X.shape == (30, 90)
        assert len(set(y.tolist())) == 15
        assert "15" in set(y.tolist())

    def test_bad_inputs(self, tmp_path):
        """Missing files, empty files and non-numeric features are format errors."""
        with pytest.raises(DataFormatError):
            read_labeled_csv(tmp_path / "absent.csv")
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(DataFormatError):
            read_labeled_csv(empty)
        with pytest.raises(DataFormatError):
            read_labeled_csv(write_rows(tmp_path / "text.csv", [[1, "x", "a"], [2, 3, "b"]]))
        with pytest.raises(DataFormatError):
            read_labeled_csv(write_rows(tmp_path / "gap.csv", [[1, "", "a"], [2, 3, "b"]]))
        with pytest.raises(DataFormatError):
            read_labeled_csv(write_rows(tmp_path / "ok.csv", [[1, 2, "a"]]), label_col="5")

    def test_observations_with_and_without_labels(self, tmp_path):
        """Prediction input may omit the label; any other width is a dimension error."""
        X, y = read_observations(write_rows(tmp_path / "bare.csv", [[1, 2], [3, 4]]), p=2)
        assert y is None and X.shape == (2, 2)
        X, y = read_observations(write_rows(tmp_path / "labeled.csv", [[1, 2, "a"]]), p=2)
        assert y.tolist() == ["a"]
        with pytest.raises(DimensionMismatchError):
            read_observations(write_rows(tmp_path / "wide.csv", [[1, 2, 3, 4]]), p=2)


class TestModelFile:
    """Model JSON persistence."""

    def test_round_trip_is_bitwise(self, tmp_path):
        """Matrices, means and priors read back exactly."""
        document, model = fitted_document()
        write_model(tmp_path / "model.json", document)
        restored = read_model(tmp_path / "model.json")
        assert restored == document
        again = restored.to_qda()
        assert np.array_equal(again.omegas.omegas, model.omegas.omegas)
        assert np.array_equal(again.mus, model.mus)
        assert np.array_equal(again.log_priors, model.log_priors)
        assert again.classes == ("left", "right")

    def test_diagnostics_recorded(self):
        """The document carries the partition and the solver report."""
        document, _ = fitted_document()
        assert document.partition == [0, 0]
        assert document.diagnostics["converged"] in (True, False)
        assert len(document.diagnostics["objective_trace"]) >= 1

    def test_invalid_model_files(self, tmp_path):
        """Missing, malformed and wrongly shaped documents are format errors."""
        with pytest.raises(DataFormatError):
            read_model(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(DataFormatError):
            read_model(broken)
        partial = tmp_path / "partial.json"
        partial.write_text('{"method": "crf"}')
        with pytest.raises(DataFormatError):
            read_model(partial)

    def test_shape_mismatch(self):
        """Precisions that disagree with the header are rejected when loaded."""
        document, _ = fitted_document()
        wrong = document.model_copy(update={"p": 4})
        with pytest.raises(DimensionMismatchError):
            wrong.to_qda()

    def test_write_failure(self, tmp_path):
        """An OS error while writing becomes a persistence error."""
        document, _ = fitted_document()
        with patch("builtins.open", side_effect=OSError("disk full")):
            with pytest.raises(PersistenceError):
                write_model(tmp_path / "model.json", document)


class TestGridFile:
    """Grid JSON."""

    def test_reads_object(self, tmp_path):
        """A JSON object is returned as a dict."""
        path = tmp_path / "grid.json"
        path.write_text('{"lambda1": [0.1, 1], "lambda2": [0, 10], "q": [1, 2]}')
        assert read_grid_file(path)["q"] == [1, 2]

    def test_rejects_non_objects(self, tmp_path):
        """Lists and broken JSON are format errors."""
        path = tmp_path / "grid.json"
        path.write_text("[1, 2]")
        with pytest.raises(DataFormatError):
            read_grid_file(path)
        path.write_text("{")
        with pytest.raises(DataFormatError):
            read_grid_file(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
