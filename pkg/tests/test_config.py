import pytest

from conftest import write_json
from deskasm.config import AppConfig, PlanningConfig, derive_seed, load_profile
from deskasm.errors import SchemaError


def test_defaults() -> None:
    cfg = load_profile(None)
    assert cfg == AppConfig()
    assert cfg.placement.margin_fraction == 0.1
    assert cfg.placement.mode == "yaw-invariant"
    assert cfg.planning.yaw_samples == 36
    assert cfg.planning.max_joint_step == 0.02
    assert cfg.grasp.max_grasps is None


def test_default_profile_file_matches_models() -> None:
    assert load_profile("default") == AppConfig()


def test_named_profiles() -> None:
    demo = load_profile("demo")
    assert demo.planning.yaw_samples == 4
    assert demo.grasp.max_grasps == 80
    assert demo.perception.template_size == 64
    assert demo.placement == AppConfig().placement
    assert load_profile("literal").placement.mode == "literal"


def test_profile_from_path(tmp_path) -> None:
    path = str(tmp_path / "mine.json")
    write_json(path, {"seed": 11, "planning": {"insert_steps": 5}})
    cfg = load_profile(path)
    assert cfg.seed == 11
    assert cfg.planning.insert_steps == 5
    assert cfg.planning.yaw_samples == 36


def test_unknown_profile() -> None:
    with pytest.raises(SchemaError):
        load_profile("no-such-profile")


def test_invalid_value_names_the_key(tmp_path) -> None:
    path = str(tmp_path / "bad.json")
    write_json(path, {"placement": {"margin_fraction": 1.5}})
    with pytest.raises(SchemaError) as info:
        load_profile(path)
    assert info.value.key == "placement.margin_fraction"


def test_extra_keys_are_rejected(tmp_path) -> None:
    path = str(tmp_path / "extra.json")
    write_json(path, {"planning": {"yaw_steps": 3}})
    with pytest.raises(SchemaError) as info:
        load_profile(path)
    assert info.value.key == "planning.yaw_steps"


def test_invalid_json(tmp_path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_profile(str(path))


def test_section_bounds() -> None:
    with pytest.raises(ValueError):
        PlanningConfig(goal_bias=1.5)
    with pytest.raises(ValueError):
        PlanningConfig(home=[0.0] * 5)


def test_derive_seed() -> None:
    assert derive_seed(7, "detect/blockA") == derive_seed(7, "detect/blockA")
    assert derive_seed(7, "detect/blockA") != derive_seed(7, "detect/blockB")
    assert derive_seed(7, "motion") != derive_seed(8, "motion")
    assert 0 <= derive_seed(0, "x") < 2 ** 32
