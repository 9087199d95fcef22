"""Model assembly: config validation, feature shapes, pooling, regression, checkpoints."""

import json

import numpy as np
import pytest

from helpers import make_video
from vqlab.preprocess import CubeBatch
from vqlab.stnet.network import (
    CUBE,
    GLOBAL,
    SUBSEQ,
    CubeNet,
    FeatureTensor,
    NetworkConfig,
    Regressor,
    STFEEModel,
    cube_to_input,
    desk_config,
    encode_and_regress,
    extract_cube_features,
    load_checkpoint,
    paper_config,
    pool_subsequence,
    save_checkpoint,
    tiny_config,
)
from vqlab.stnet.tensor import Tensor


def video_config(**overrides):
    """Tiny widths but full-length 16-frame cubes, for video-level paths."""
    return tiny_config(cube_frames=16, **overrides)


# -- configuration ----------------------------------------------------------------


def test_presets_validate():
    for config in (desk_config(), paper_config(), tiny_config()):
        config.validate()


def test_paper_scale_constants():
    config = paper_config()
    assert config.cube_side == 224
    assert config.cube_frames == 16
    assert config.d_cube == 1024
    assert config.pooled_dim == 2048
    assert config.stem_stride == (1, 2, 2)


def test_config_validation_errors():
    with pytest.raises(ValueError):
        tiny_config(cube_side=8).validate()
    with pytest.raises(ValueError):
        tiny_config(heads=3).validate()  # 3 does not divide pooled_dim 16
    with pytest.raises(ValueError):
        tiny_config(attention_ratio=5).validate()
    with pytest.raises(ValueError):
        tiny_config(blocks=()).validate()


def test_config_survives_json_round_trip():
    config = tiny_config(stem_stride=(1, 2, 2))
    raw = json.loads(json.dumps(config.to_dict()))
    assert NetworkConfig.from_dict(raw) == config


# -- feature containers --------------------------------------------------------------


def test_feature_tensor_validation():
    with pytest.raises(ValueError):
        FeatureTensor(level="BOGUS", values=np.zeros((1, 4)))
    with pytest.raises(ValueError):
        FeatureTensor(level=CUBE, values=np.zeros(4))
    with pytest.raises(ValueError):
        FeatureTensor(level=SUBSEQ, values=np.zeros((2, 4)))
    with pytest.raises(ValueError):
        FeatureTensor(level=GLOBAL, values=np.zeros((0, 4)))
    FeatureTensor(level=GLOBAL, values=np.zeros((3, 4)))


def test_pool_subsequence_mean_and_max():
    pooled = pool_subsequence(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert pooled.level == SUBSEQ
    assert np.array_equal(pooled.values, [[2.0, 3.0, 3.0, 4.0]])


def test_pool_subsequence_single_cube_duplicates():
    pooled = pool_subsequence(np.array([[5.0, -1.0, 2.0]]))
    assert np.array_equal(pooled.values, [[5.0, -1.0, 2.0, 5.0, -1.0, 2.0]])


def test_pool_subsequence_accepts_tensor_and_rejects_empty():
    pooled = pool_subsequence(Tensor(np.array([[1.0, 2.0]])))
    assert np.array_equal(pooled.values, [[1.0, 2.0, 1.0, 2.0]])
    with pytest.raises(ValueError):
        pool_subsequence(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        pool_subsequence(np.zeros(4))


# -- cube feature extractor -----------------------------------------------------------


def test_cube_net_feature_shapes():
    net = CubeNet(tiny_config(), np.random.default_rng(0))
    x = Tensor(np.random.default_rng(1).random((2, 3, 4, 16, 16)))
    features = net.features(x)
    assert features.shape == (2, 8)
    scores = net.cube_scores(x)
    assert scores.shape == (2, 1)
    assert np.all(scores.data > 0.0) and np.all(scores.data < 1.0)


def test_cube_net_rejects_wrong_geometry():
    net = CubeNet(tiny_config(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.features(Tensor(np.zeros((2, 3, 4, 16))))
    with pytest.raises(ValueError):
        net.features(Tensor(np.zeros((2, 1, 4, 16, 16))))
    with pytest.raises(ValueError):
        net.features(Tensor(np.zeros((2, 3, 8, 16, 16))))
    with pytest.raises(ValueError):
        net.features(Tensor(np.zeros((2, 3, 4, 32, 32))))


def test_cube_to_input_layout():
    cube = np.random.default_rng(2).random((4, 4, 3, 2)).astype(np.float32)
    out = cube_to_input(cube)
    assert out.shape == (3, 2, 4, 4)
    assert out.dtype == np.float64
    assert out[1, 0, 2, 3] == pytest.approx(float(cube[2, 3, 1, 0]))
    with pytest.raises(ValueError):
        cube_to_input(np.zeros((4, 4, 2, 2)))


def test_extract_cube_features():
    net = CubeNet(tiny_config(), np.random.default_rng(3))
    cube = np.random.default_rng(4).random((16, 16, 3, 4)).astype(np.float32)
    feature = extract_cube_features(cube, net)
    assert feature.level == CUBE
    assert feature.values.shape == (1, 8)
    assert np.isfinite(feature.values).all()


# -- regressor -------------------------------------------------------------------------


def test_regressor_encodes_to_unit_interval_scalar():
    reg = Regressor(tiny_config(), np.random.default_rng(5))
    out = reg.encode(Tensor(np.random.default_rng(6).standard_normal((5, 16))))
    assert out.shape == ()
    assert 0.0 < float(out.data) < 1.0
    with pytest.raises(ValueError):
        reg.encode(Tensor(np.zeros((5, 8))))


def test_regressor_without_positions_is_permutation_invariant():
    reg = Regressor(tiny_config(use_positional_encoding=False), np.random.default_rng(7))
    x = np.random.default_rng(8).standard_normal((6, 16))
    perm = np.random.default_rng(9).permutation(6)
    a = float(reg.encode(Tensor(x)).data)
    b = float(reg.encode(Tensor(x[perm])).data)
    assert abs(a - b) <= 1e-9


def test_regressor_with_positions_sees_order():
    reg = Regressor(tiny_config(), np.random.default_rng(7))
    x = np.random.default_rng(8).standard_normal((6, 16))
    a = float(reg.encode(Tensor(x)).data)
    b = float(reg.encode(Tensor(x[::-1].copy())).data)
    assert abs(a - b) > 1e-9


def test_encode_and_regress_accepts_feature_or_array():
    reg = Regressor(tiny_config(), np.random.default_rng(10))
    values = np.random.default_rng(11).standard_normal((4, 16))
    feature = FeatureTensor(level=GLOBAL, values=values)
    a = encode_and_regress(feature, reg)
    b = encode_and_regress(values, reg)
    assert isinstance(a, float)
    assert a == b


# -- full model --------------------------------------------------------------------------


def test_model_param_names_are_prefixed_and_unique():
    model = STFEEModel(tiny_config(), seed=0)
    names = [name for name, _ in model.named_params()]
    assert len(names) == len(set(names))
    assert any(name.startswith("cube_net.stem.") for name in names)
    assert any(name.startswith("cube_net.block1.") for name in names)
    assert any(name.startswith("regressor.layer0.") for name in names)
    assert "regressor.head.weight" in names
    assert model.training_log == {}


def test_same_seed_builds_identical_models():
    a = STFEEModel(tiny_config(), seed=42)
    b = STFEEModel(tiny_config(), seed=42)
    for (name_a, pa), (name_b, pb) in zip(a.named_params(), b.named_params()):
        assert name_a == name_b
        assert np.array_equal(pa.data, pb.data)
    c = STFEEModel(tiny_config(), seed=43)
    assert not np.array_equal(a.cube_net.stem.weight.data, c.cube_net.stem.weight.data)


def batch_of(n_cubes, index, rng):
    cubes = [rng.random((16, 16, 3, 16), dtype=np.float32) for _ in range(n_cubes)]
    return CubeBatch(cubes=cubes, subsequence_index=index, side=16)


def test_subsequence_features_one_row_per_batch():
    model = STFEEModel(video_config(), seed=1)
    rng = np.random.default_rng(12)
    batches = [batch_of(2, 0, rng), batch_of(1, 1, rng), batch_of(3, 2, rng)]
    feature = model.subsequence_features(batches)
    assert feature.level == GLOBAL
    assert feature.values.shape == (3, 16)
    with pytest.raises(ValueError):
        model.subsequence_features([])


def test_video_feature_row_count_follows_subsequence_schedule():
    model = STFEEModel(video_config(), seed=2)
    video = make_video(n_frames=150, width=16, height=16, seed=13, fps=30)
    feature = model.video_feature(video)
    assert feature.level == GLOBAL
    assert feature.values.shape == (10, 16)


def test_predict_video_is_bounded():
    model = STFEEModel(video_config(), seed=3)
    video = make_video(n_frames=16, width=16, height=16, seed=14)
    score = model.predict_video(video)
    assert isinstance(score, float)
    assert 0.0 <= score <= 1.0


# -- checkpoints ----------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    model = STFEEModel(tiny_config(), seed=7)
    save_checkpoint(model, tmp_path)
    loaded = load_checkpoint(tmp_path)
    assert loaded.config == model.config
    assert loaded.seed == 7
    originals = dict(model.named_params())
    for name, param in loaded.named_params():
        want = originals[name].data.astype("<f4").astype(np.float64)
        assert np.array_equal(param.data, want), name


def test_checkpoint_resave_is_byte_identical(tmp_path):
    model = STFEEModel(tiny_config(), seed=8)
    first = tmp_path / "first"
    second = tmp_path / "second"
    save_checkpoint(model, first)
    save_checkpoint(load_checkpoint(first), second)
    assert (first / "params.bin").read_bytes() == (second / "params.bin").read_bytes()
    assert (first / "manifest.json").read_bytes() == (second / "manifest.json").read_bytes()


def test_checkpoint_rejects_unknown_parameter(tmp_path):
    save_checkpoint(STFEEModel(tiny_config(), seed=9), tmp_path)
    manifest_path = tmp_path / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["params"][0]["name"] = "cube_net.bogus.weight"
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path)


def test_checkpoint_rejects_wrong_parameter_size(tmp_path):
    save_checkpoint(STFEEModel(tiny_config(), seed=10), tmp_path)
    manifest_path = tmp_path / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["params"][0]["bytes"] -= 4
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path)
