import json

import numpy as np
import pytest

import cbrbench  # noqa: F401  (registers every family)
from cbrbench.data import GeneratorConfig, generate_synthetic
from cbrbench.model import (MODEL_REGISTRY, ModelFormatError, fit,
                            load_model, save_model)

FAST_PARAMS = {
    "decision_tree": {"max_depth": 4},
    "random_forest": {"n_estimators": 5},
    "extra_trees": {"n_estimators": 5},
    "bagging": {"n_estimators": 5},
    "adaboost": {"n_estimators": 5},
    "gradient_boosting": {"n_estimators": 10},
    "reg_boosting": {"n_estimators": 10},
    "svr": {},
    "knn": {},
    "mlp": {"hidden_layer_sizes": [8], "max_epochs": 20},
    "voting": {},
    "stacking": {},
}


@pytest.fixture(scope="module")
def soil():
    return generate_synthetic(GeneratorConfig(40, seed=18))


@pytest.fixture(scope="module")
def queries():
    return generate_synthetic(GeneratorConfig(15, seed=19)).X


@pytest.mark.parametrize("family", sorted(FAST_PARAMS))
def test_round_trip_preserves_predictions(family, soil, queries, tmp_path):
    model = fit(family, soil, FAST_PARAMS[family], seed=7)
    path = tmp_path / f"{family}.model"
    save_model(model, path)
    clone = load_model(path)
    assert type(clone) is type(model)
    assert np.array_equal(model.predict(queries), clone.predict(queries))


def test_model_file_is_single_line_json(soil, tmp_path):
    path = tmp_path / "m.model"
    save_model(fit("knn", soil, {}, seed=0), path)
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n") and text.count("\n") == 1
    doc = json.loads(text)
    assert doc["format"] == "cbrbench-model"
    assert doc["version"] == 1
    assert doc["family"] == "knn"
    assert doc["schema"] == ["G", "S", "FC", "LL", "PI", "MDD", "OMC"]


def saved_doc(soil, tmp_path):
    path = tmp_path / "base.model"
    save_model(fit("knn", soil, {}, seed=0), path)
    return json.loads(path.read_text(encoding="utf-8"))


def rewrite(doc, tmp_path, **edits):
    doc = dict(doc)
    doc.update(edits)
    path = tmp_path / "edited.model"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_load_rejects_malformed_and_mismatched_files(soil, tmp_path):
    doc = saved_doc(soil, tmp_path)

    bad = tmp_path / "bad.model"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError, match="not a JSON"):
        load_model(bad)

    with pytest.raises(ModelFormatError, match="format marker"):
        load_model(rewrite(doc, tmp_path, format="other"))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(rewrite(doc, tmp_path, version=2))
    with pytest.raises(ModelFormatError, match="unknown model family"):
        load_model(rewrite(doc, tmp_path, family="ridge"))
    with pytest.raises(ModelFormatError, match="schema"):
        load_model(rewrite(doc, tmp_path, schema=["a", "b"]))
    with pytest.raises(ModelFormatError, match="params"):
        load_model(rewrite(doc, tmp_path, params=None))


def test_fit_unknown_family_lists_known(soil):
    with pytest.raises(KeyError, match="unknown model family"):
        fit("ridge", soil, {}, seed=0)


def test_predict_input_validation(soil):
    m = fit("knn", soil, {}, seed=0)
    with pytest.raises(ValueError, match="feature matrix"):
        m.predict(np.zeros((3, 4)))
    bad = np.zeros((3, 7))
    bad[1, 2] = np.nan
    with pytest.raises(ValueError, match="row 1"):
        m.predict(bad)
    one = m.predict(np.zeros(7))
    assert one.shape == (1,)


def test_registry_covers_twelve_families():
    assert set(FAST_PARAMS) == set(MODEL_REGISTRY)
