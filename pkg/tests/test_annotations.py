import json

import pytest

from cropaware.annotations import (
    SynthSpec,
    annotations_from_dict,
    annotations_to_dict,
    load_annotations,
    save_annotations,
    synth_dataset,
)
from cropaware.common import DataError, InvalidArgument

MINIMAL = {
    "images": [{"id": 1, "width": 640, "height": 480, "file_name": "a.jpg", "license": 3}],
    "annotations": [{"id": 7, "image_id": 1, "category_id": 2, "bbox": [10, 20, 100, 50], "iscrowd": 0}],
    "categories": [{"id": 2, "name": "car", "isthing": 1, "supercategory": "vehicle"}],
}


def _write(tmp_path, raw):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


def test_load_minimal_file(tmp_path):
    aset = load_annotations(_write(tmp_path, MINIMAL))
    assert len(aset.images) == len(aset.annotations) == len(aset.categories) == 1
    ann = aset.annotations[0]
    assert ann.area == 5000.0
    assert ann.bbox == (10.0, 20.0, 100.0, 50.0)
    assert aset.categories[0].is_thing
    assert aset.images_by_category == {2: (1,)}


def test_is_thing_spellings():
    raw = json.loads(json.dumps(MINIMAL))
    raw["categories"] = [{"id": 2, "name": "road", "is_thing": False}]
    assert not annotations_from_dict(raw).categories[0].is_thing


def test_missing_image_names_the_instance(tmp_path):
    raw = json.loads(json.dumps(MINIMAL))
    raw["annotations"][0]["image_id"] = 99
    with pytest.raises(DataError, match="Annotation 7"):
        load_annotations(_write(tmp_path, raw))


def test_bbox_outside_image(tmp_path):
    raw = json.loads(json.dumps(MINIMAL))
    raw["annotations"][0]["bbox"] = [600, 20, 100, 50]
    with pytest.raises(DataError, match="exceeds"):
        load_annotations(_write(tmp_path, raw))


def test_duplicate_ids():
    raw = json.loads(json.dumps(MINIMAL))
    raw["images"].append(dict(raw["images"][0]))
    with pytest.raises(DataError, match="Duplicate image id 1"):
        annotations_from_dict(raw)


def test_unreadable_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError):
        load_annotations(str(bad))
    with pytest.raises(DataError):
        load_annotations(str(tmp_path / "missing.json"))
    with pytest.raises(DataError):
        annotations_from_dict({"annotations": [{"id": 1, "bbox": [1, 2]}]})


def test_save_load_round_trip(tmp_path, synth_small):
    path = str(tmp_path / "synth.json")
    save_annotations(synth_small, path)
    assert load_annotations(path) == synth_small


def test_synth_is_deterministic():
    spec = SynthSpec(n_images=10, n_instances=100, seed=3)
    a = json.dumps(annotations_to_dict(synth_dataset(spec)))
    b = json.dumps(annotations_to_dict(synth_dataset(spec)))
    assert a == b
    assert a != json.dumps(annotations_to_dict(synth_dataset(SynthSpec(n_images=10, n_instances=100, seed=4))))


def test_synth_counts_and_bounds():
    aset = synth_dataset(SynthSpec(n_images=50, n_instances=1000, seed=1))
    assert len(aset.thing_annotations()) == 1000
    # stuff segments are counted separately from the requested instances
    assert len(aset.annotations) == 1000 + 50 * SynthSpec().stuff_per_image
    for ann in aset.annotations:
        im = aset.image_by_id[ann.image_id]
        x, y, w, h = ann.bbox
        assert x >= 0 and y >= 0 and x + w <= im.width and y + h <= im.height
    assert all(aset.images_by_category[c.id] for c in aset.categories)


def test_synth_spec_validation():
    with pytest.raises(InvalidArgument):
        SynthSpec(n_images=0)
    with pytest.raises(InvalidArgument):
        SynthSpec(n_classes_thing=10, n_instances=5)


@pytest.mark.parametrize(
    "patch, match",
    [
        ({"images": 5}, "must be a list"),
        ({"categories": {"id": 2}}, "must be a list"),
        ({"annotations": "bbox"}, "must be a list"),
        ({"categories": [5]}, "non-object entry"),
        ({"images": [[1, 640, 480]]}, "non-object entry"),
        ({"annotations": [None]}, "non-object entry"),
    ],
)
def test_malformed_structure_is_a_data_error(patch, match):
    raw = json.loads(json.dumps(MINIMAL))
    raw.update(patch)
    with pytest.raises(DataError, match=match):
        annotations_from_dict(raw)


def test_bbox_of_wrong_type():
    raw = json.loads(json.dumps(MINIMAL))
    raw["annotations"][0]["bbox"] = 12
    with pytest.raises(DataError, match="Bad annotation record 7"):
        annotations_from_dict(raw)
