import json

import pytest

from restorelab.config import SCHEMA_VERSION, THREADS_ENV, ToolConfig, load_config
from restorelab.losses import LossWeights
from restorelab.pipeline import DistortionConfig


def test_defaults_round_trip_through_json():
    cfg = ToolConfig()
    assert ToolConfig.from_json(cfg.to_json()) == cfg


def test_custom_values_round_trip(tmp_path):
    cfg = ToolConfig(distortion=DistortionConfig(p1=0.3), weights=LossWeights(lambda_mel=7.0),
                     workers=3, seed=11)
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert load_config(p, environ={}) == cfg


def test_default_loss_weights_from_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema_version": SCHEMA_VERSION}))
    w = load_config(p, environ={}).weights
    assert (w.lambda_mel, w.lambda_sc, w.lambda_mag, w.lambda_seg, w.lambda_energy,
            w.lambda_phase, w.lambda_D) == (50, 5, 5, 200, 100, 100, 4)


def test_schema_version_required_and_checked():
    with pytest.raises(ValueError, match="schema_version"):
        ToolConfig.from_dict({})
    with pytest.raises(ValueError, match="schema_version 2"):
        ToolConfig.from_dict({"schema_version": 2})


def test_unknown_section_and_bad_values_rejected():
    with pytest.raises(ValueError, match="unknown"):
        ToolConfig.from_dict({"schema_version": 1, "vocoder": {}})
    with pytest.raises(ValueError):
        ToolConfig.from_dict({"schema_version": 1, "weights": {"lambda_mel": -1}})
    with pytest.raises(TypeError):
        ToolConfig.from_dict({"schema_version": 1, "weights": {"lambda_x": 1}})
    with pytest.raises(ValueError):
        ToolConfig(workers=0)


def test_threads_environment_override(tmp_path):
    assert load_config(environ={THREADS_ENV: "6"}).workers == 6
    assert load_config(environ={}).workers == 1
    with pytest.raises(ValueError, match=THREADS_ENV):
        load_config(environ={THREADS_ENV: "many"})
    with pytest.raises(ValueError):
        load_config(environ={THREADS_ENV: "0"})
