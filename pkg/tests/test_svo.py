import numpy as np
import pytest

from voxanim import ingest, svo
from voxanim.errors import (
    BadMagicError,
    DepthRangeError,
    GridResolutionError,
    IndexOutOfRangeError,
    InvalidNodeError,
    ModelNotFoundError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

from .conftest import grid_from, model_from, random_occupancy, subdivision_counts


def handmade(valid_mask, leaf_mask, child_base=1, attr_base=0, extra_nodes=2, attrs=1):
    nodes = np.zeros(1 + extra_nodes, dtype=svo.NODE_DTYPE)
    nodes[0] = (child_base, attr_base, valid_mask, leaf_mask, 0)
    return svo.SvoModel(2, nodes, np.zeros((attrs, 4), dtype=np.uint8))


def test_node_layout_is_twelve_bytes():
    assert svo.NODE_BYTES == 12
    assert svo.HEADER.size == 20


def test_build_empty_grid():
    model = model_from(np.zeros((8, 8, 8), dtype=bool))
    assert model.node_count == 1
    assert model.node(0).valid_mask == 0
    assert model.leaf_count == 0


def test_build_full_depth_one(full_model):
    root = full_model.node(0)
    assert root.valid_mask == 0xFF
    assert root.leaf_mask == 0xFF
    assert full_model.leaf_count == 8


def test_build_single_voxel():
    occupancy = np.zeros((8, 8, 8), dtype=bool)
    occupancy[0, 0, 0] = True
    model = model_from(occupancy)
    assert model.node_count == 3
    assert model.leaf_count == 1
    assert (model.node_count, model.leaf_count) == subdivision_counts(occupancy)


def test_build_rejects_resolution_mismatch():
    grid = grid_from(np.ones((4, 4, 4), dtype=bool))
    with pytest.raises(GridResolutionError):
        svo.build_from_grid(grid, 3)


def test_build_rejects_depth_out_of_range():
    grid = grid_from(np.ones((2, 2, 2), dtype=bool))
    with pytest.raises(DepthRangeError):
        svo.build_from_grid(grid, 0)


def test_build_depth_cap():
    grid = grid_from(np.ones((8, 8, 8), dtype=bool))
    with pytest.raises(DepthRangeError, match=r"\[1, 2\]"):
        svo.build_from_grid(grid, 3, max_depth=2)
    assert svo.build_from_grid(grid, 3, max_depth=3).leaf_count == 512
    with pytest.raises(DepthRangeError, match=rf"\[1, {svo.DEFAULT_MAX_BUILD_DEPTH}\]"):
        svo.build_from_grid(grid, svo.DEFAULT_MAX_BUILD_DEPTH + 1)


def test_leaf_colors_come_from_grid():
    occupancy = np.zeros((4, 4, 4), dtype=bool)
    occupancy[1, 2, 3] = True
    grid = grid_from(occupancy)
    model = svo.build_from_grid(grid, 2)
    (x, y, z, attr), = svo.iter_leaves(model)
    assert (x, y, z) == (1, 2, 3)
    assert tuple(attr) == tuple(grid.colors_at([(1, 2, 3)])[0])


def test_node_child_empty_node():
    model = handmade(0x00, 0x00)
    assert all(svo.node_child(model, 0, k) is None for k in range(8))


def test_node_child_full_packing():
    model = model_from(np.ones((4, 4, 4), dtype=bool))
    for k in range(8):
        assert svo.node_child(model, 0, k) == svo.ChildRef("node", 1 + k)


def test_node_child_popcount_rank():
    model = handmade(0b10100100, 0b00100000, child_base=1, attr_base=0)
    assert svo.node_child(model, 0, 5) == svo.ChildRef("leaf", 0)
    assert svo.node_child(model, 0, 7) == svo.ChildRef("node", 2)
    assert svo.node_child(model, 0, 2) == svo.ChildRef("node", 1)
    assert svo.node_child(model, 0, 0) is None


def test_child_table_agrees_with_node_child(rng):
    model = model_from(random_occupancy(rng, 3))
    for i in range(model.node_count):
        for k in range(8):
            ref = svo.node_child(model, i, k)
            entry = model.child_table[i][k]
            if ref is None:
                assert entry is None
            elif ref.kind == "leaf":
                assert entry == ~ref.index
            else:
                assert entry == ref.index


def test_validate_fresh_models(rng):
    for depth in (1, 2, 3, 4):
        for _ in range(10):
            assert svo.validate(model_from(random_occupancy(rng, depth))).ok


def test_validate_leaf_not_valid():
    model = model_from(np.ones((2, 2, 2), dtype=bool))
    model.nodes["valid_mask"][0] = 0x7F
    report = svo.validate(model)
    assert not report.ok
    assert report.violations[0].node == 0
    assert "leaf not valid" in report.violations[0].message


def test_validate_child_base_out_of_range():
    model = model_from(np.ones((4, 4, 4), dtype=bool))
    model.nodes["child_base"][0] = 50
    report = svo.validate(model)
    assert any(v.kind == svo.RANGE and v.node == 0 for v in report.violations)


def test_leaves_match_grid_exactly(rng):
    for depth in (1, 2, 3, 4, 5):
        occupancy = random_occupancy(rng, depth, fill=0.2)
        model = model_from(occupancy)
        leaves = {(x, y, z) for x, y, z, _ in svo.iter_leaves(model)}
        assert leaves == {tuple(int(c) for c in p) for p in np.argwhere(occupancy)}
        assert (model.node_count, model.leaf_count) == subdivision_counts(occupancy)


def test_children_come_after_parents(rng):
    model = model_from(random_occupancy(rng, 4))
    for i, children in enumerate(model.child_table):
        assert all(c > i for c in children if c is not None and c >= 0)


def test_stats_empty_and_full(full_model):
    empty = svo.stats(model_from(np.zeros((2, 2, 2), dtype=bool)))
    assert (empty.node_count, empty.leaf_count) == (1, 0)
    full = svo.stats(full_model)
    assert (full.node_count, full.leaf_count, full.fill_ratio) == (1, 8, 1.0)


def test_stats_menger_level_three():
    grid = ingest.gen_primitive("menger", 3)
    model = svo.build_from_grid(grid, grid.depth)
    assert svo.stats(model).leaf_count == 20 ** 3


def test_byte_size_matches_serialized_length(rng):
    model = model_from(random_occupancy(rng, 3))
    assert svo.stats(model).byte_size == len(svo.serialize(model))


def test_serialize_round_trip(rng):
    for _ in range(100):
        depth = int(rng.integers(1, 5))
        model = model_from(random_occupancy(rng, depth, fill=float(rng.uniform(0.0, 0.6))))
        data = svo.serialize(model)
        again = svo.deserialize(data)
        assert again == model
        assert svo.serialize(again) == data


def test_serialized_header(full_model):
    data = svo.serialize(full_model)
    assert data[:4] == b"SVOA"
    assert svo.HEADER.unpack_from(data) == (b"SVOA", 1, 1, 1, 8)


@pytest.fixture
def good_bytes(rng):
    return svo.serialize(model_from(random_occupancy(rng, 3)))


def test_deserialize_bad_magic(good_bytes):
    with pytest.raises(BadMagicError):
        svo.deserialize(b"XXXX" + good_bytes[4:])


def test_deserialize_unsupported_version(good_bytes):
    data = bytearray(good_bytes)
    data[4] = 2
    with pytest.raises(UnsupportedVersionError):
        svo.deserialize(bytes(data))


def test_deserialize_truncated(good_bytes):
    with pytest.raises(TruncatedPayloadError):
        svo.deserialize(good_bytes[:-3])
    with pytest.raises(TruncatedPayloadError):
        svo.deserialize(good_bytes[:10])


def test_deserialize_trailing_data(good_bytes):
    with pytest.raises(TrailingDataError):
        svo.deserialize(good_bytes + b"\0")


def test_deserialize_index_out_of_range(good_bytes):
    data = bytearray(good_bytes)
    # root child_base
    data[20:24] = (1000).to_bytes(4, "little")
    with pytest.raises(IndexOutOfRangeError):
        svo.deserialize(bytes(data))


def test_deserialize_invalid_node(good_bytes):
    data = bytearray(good_bytes)
    # root reserved field
    data[30] = 1
    with pytest.raises(InvalidNodeError):
        svo.deserialize(bytes(data))


def test_corruption_errors_are_distinct():
    classes = {BadMagicError, UnsupportedVersionError, TruncatedPayloadError,
               IndexOutOfRangeError, InvalidNodeError}
    assert len(classes) == 5
    assert not any(issubclass(a, b) for a in classes for b in classes if a is not b)


def test_save_and_load(tmp_path, full_model):
    path = tmp_path / "cube.svo"
    svo.save_model(full_model, path)
    assert svo.load_model(path) == full_model
    assert path.stat().st_size == svo.stats(full_model).byte_size


def test_load_missing_model(tmp_path):
    with pytest.raises(ModelNotFoundError, match="nope.svo"):
        svo.load_model(tmp_path / "nope.svo")


def test_load_names_path_on_parse_error(tmp_path):
    path = tmp_path / "bad.svo"
    path.write_bytes(b"not a model at all, just text")
    with pytest.raises(BadMagicError, match="bad.svo"):
        svo.load_model(path)
