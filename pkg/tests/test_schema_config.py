import pytest
import yaml

from maskrepair.config import STEPS, PipelineConfig, apply_env, load_config
from maskrepair.errors import ConfigError, SchemaError, UnknownOrgan, UnknownStep
from maskrepair.schema import OrganSchema, OrganSpec, load_schema, reference_schema


def test_reference_schema_contents():
    schema = reference_schema()
    assert "liver" in schema
    kidney = schema.get("kidney")
    assert kidney.paired and kidney.keep_top == 2
    for name in ("liver", "spleen", "stomach", "gall_bladder", "pancreas"):
        assert schema.get(name).keep_top == 1
    for name in ("colon", "intestine", "duodenum"):
        organ = schema.get(name)
        assert organ.keep_top is None and organ.mergeable and organ.min_component_voxels == 50
    labels = list(schema.mask_labels().values())
    assert len(labels) == len(set(labels))


def test_schema_yaml_round_trip(tmp_path):
    schema = reference_schema()
    path = tmp_path / "schema.yaml"
    path.write_text(yaml.safe_dump(schema.to_dict()))
    assert load_schema(path) == schema


@pytest.mark.parametrize("organs, err", [
    ((OrganSpec("a", 1), OrganSpec("b", 1)), SchemaError),
    ((OrganSpec("a", 1), OrganSpec("a", 2)), SchemaError),
    ((OrganSpec("a", paired=True),), SchemaError),
    ((OrganSpec("a", 1, pair_sides=(2, 3)),), SchemaError),
    ((OrganSpec("a", 1, keep_top=0),), SchemaError),
    ((OrganSpec("a", 1, adjacency=("a",)),), SchemaError),
    ((OrganSpec("a", 1, adjacency=("zzz",)),), UnknownOrgan),
    ((OrganSpec("a", 0),), SchemaError),
])
def test_schema_validation(organs, err):
    with pytest.raises(err):
        OrganSchema(organs)


def test_schema_rejects_unknown_keys():
    with pytest.raises(SchemaError):
        OrganSchema.from_dict({"organs": [{"name": "a", "label": 1, "colour": "red"}]})
    with pytest.raises(SchemaError):
        OrganSchema.from_dict({"nothing": []})


def test_config_defaults():
    cfg = PipelineConfig()
    assert cfg.check_size_threshold == 500
    assert cfg.lateral_axis_fallback == 0
    assert cfg.d_merge == 10.0 and cfg.r_bridge == 1
    assert cfg.enabled_steps == STEPS and cfg.workers == 1


def test_config_canonical_order():
    cfg = PipelineConfig(enabled_steps=("split_right_left", "remove_small_components"))
    assert cfg.enabled_steps == ("remove_small_components", "split_right_left")


@pytest.mark.parametrize("kwargs, err", [
    ({"enabled_steps": ("fly",)}, UnknownStep),
    ({"workers": 0}, ConfigError),
    ({"connectivity": 8}, ConfigError),
    ({"d_merge": -1}, ConfigError),
    ({"report_format": "xml"}, ConfigError),
    ({"organ_overrides": {"liver": {"colour": 1}}}, ConfigError),
])
def test_config_validation(kwargs, err):
    with pytest.raises(err):
        PipelineConfig(**kwargs)


def test_config_yaml(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        "enabled_steps: [remove_small_components, merge_fragmented_structure]\n"
        "defaults:\n  d_merge: 6.5\n  connectivity: 18\n"
        "organs:\n  colon: {min_component_voxels: 80}\n"
        "workers: 3\nreport_format: json\n"
    )
    cfg = load_config(path, env={})
    assert cfg.enabled_steps == ("remove_small_components", "merge_fragmented_structure")
    assert cfg.d_merge == 6.5 and cfg.connectivity == 18
    assert cfg.organ_overrides == {"colon": {"min_component_voxels": 80}}
    assert cfg.workers == 3 and cfg.report_format == "json"
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg


def test_config_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"speed": 3})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"defaults": {"speed": 3}})
    bad = tmp_path / "bad.yaml"
    bad.write_text("defaults: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_env_overrides():
    cfg = apply_env(PipelineConfig(), {"MASKREPAIR_WORKERS": "4", "MASKREPAIR_LOG_LEVEL": "debug"})
    assert cfg.workers == 4 and cfg.log_level == "DEBUG"
    with pytest.raises(ConfigError):
        apply_env(PipelineConfig(), {"MASKREPAIR_WORKERS": "many"})
    assert load_config(None, env={}) == PipelineConfig()
