import numpy as np
import pytest

from dataset import load_dataset
from evaluation import (predict_split, predict_records, sample_table, evaluate_predictions, breakdown, Predictions,
                        METRIC_COLUMNS)
from geometry import HORIZON
from tests.episode_builders import saved_dataset
from tests.model_builders import tiny_model
from utils.exceptions import InvalidArgumentError


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    return load_dataset(saved_dataset(str(tmp_path_factory.mktemp("open-loop"))))


def test_predictions_cover_the_split(dataset):
    predictions = predict_split(tiny_model("M0"), dataset, "test", batch_size=3)
    n = len(dataset.split("test"))
    assert n > 0 and len(predictions) == n
    assert predictions.trajectory.shape == predictions.truth.shape == (n, HORIZON, 3)
    assert predictions.log_var.shape == (n, HORIZON, 3)
    assert predictions.attention.shape == (n, 12)
    assert list(predictions.samples.columns) == ["episode_id", "tick", "weather", "command", "behavior"]


def test_batching_does_not_change_predictions(dataset):
    model = tiny_model("M1", seed=2)
    a = predict_split(model, dataset, "val", batch_size=1)
    b = predict_split(model, dataset, "val", batch_size=64)
    np.testing.assert_allclose(a.trajectory, b.trajectory, atol=1e-5)
    assert a.log_var is None and b.log_var is None


def test_sample_limit(dataset):
    assert len(predict_split(tiny_model("M2"), dataset, "train", max_samples=5)) == 5


def test_sample_table_and_breakdown(dataset):
    predictions = predict_split(tiny_model("M0"), dataset, "train")
    table = sample_table(predictions)
    assert set(METRIC_COLUMNS) <= set(table.columns)
    assert "uncertainty" in table.columns and (table["uncertainty"] > 0).all()
    by_weather = breakdown(table, "weather")
    assert by_weather["n_samples"].sum() == len(table)
    assert set(by_weather["weather"]) <= {"clear-day", "rainy-day"}


def test_perfect_predictions_score_zero(dataset):
    records = dataset.split("test")
    truth = np.stack([r.future.values for r in records])
    report = evaluate_predictions(Predictions(samples=predict_records(tiny_model("M1"), dataset, records).samples,
                                              trajectory=truth.copy(), truth=truth))
    for name in ("e_x", "e_y", "e_v", "e_ad", "e_fd"):
        assert report.metrics()[name] == pytest.approx(0.0, abs=1e-12)


def test_nothing_to_predict(dataset):
    with pytest.raises(InvalidArgumentError):
        predict_records(tiny_model("M0"), dataset, [])
