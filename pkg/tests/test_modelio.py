import json

import numpy as np
import pytest

from conftest import DATA, FIXTURES, load
from imprecise_hitting.errors import DimensionMismatch, ParseError, UnknownStateInTarget
from imprecise_hitting.modelio import (
    decode_value,
    dump_document,
    encode,
    model_digest,
    model_to_dict,
    parse_model,
    write_model,
)


def write(tmp_path, doc):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    return path


def geo_doc():
    return json.loads((DATA / "fix-geo.json").read_text())


def test_parse_geo(geo):
    chain, a = geo
    assert chain.size == 2 and a == frozenset({0})


def test_unknown_target(tmp_path):
    doc = geo_doc()
    doc["target"] = ["nowhere"]
    with pytest.raises(UnknownStateInTarget, match="nowhere"):
        parse_model(write(tmp_path, doc))


def test_wrong_length_names_row(tmp_path):
    doc = geo_doc()
    doc["rows"]["s"]["intervals"]["lower"] = [0.25, 0.25, 0.0]
    with pytest.raises(DimensionMismatch, match="'s'"):
        parse_model(write(tmp_path, doc))


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        parse_model(path)
    with pytest.raises(ParseError):
        parse_model(tmp_path / "missing.json")
    with pytest.raises(ParseError):
        parse_model(write(tmp_path, {"states": ["a"]}))


@pytest.mark.parametrize("name", FIXTURES)
def test_round_trip(tmp_path, name):
    chain, a = load(name)
    path = tmp_path / "out.json"
    write_model(path, chain, a)
    assert parse_model(path) == (chain, a)


def test_digest_ignores_key_order(tmp_path, geo):
    chain, a = geo
    doc = geo_doc()
    shuffled = {"rows": dict(reversed(list(doc["rows"].items()))), "target": doc["target"],
                "states": doc["states"]}
    assert model_digest(*parse_model(write(tmp_path, shuffled))) == model_digest(chain, a)


def test_inf_encoding():
    assert encode(np.array([0.0, np.inf])) == [0.0, "inf"]
    assert decode_value("inf") == np.inf
    text = dump_document({"b": np.inf, "a": frozenset({2, 1})})
    assert json.loads(text) == {"a": [1, 2], "b": "inf"}


def test_document_round_trip(geo):
    chain, a = geo
    doc = {"values": {"g": 0.0, "s": np.inf}, "digest": model_digest(chain, a)}
    back = json.loads(dump_document(doc))
    assert {k: decode_value(v) for k, v in back["values"].items()} == {"g": 0.0, "s": np.inf}
    assert dump_document(back) == dump_document(doc)


def test_model_dict_labels(trap):
    chain, a = trap
    d = model_to_dict(chain, a)
    assert d["states"] == ["g", "m", "t"] and d["target"] == ["g"]
