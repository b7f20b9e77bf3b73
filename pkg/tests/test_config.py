import pytest

from grasp.config import SCHEMA, defaults, parse_config_text, parse_overrides, resolve
from grasp.engine import ABLATION_ROWS, DefenseConfig
from grasp.errors import ConfigError


def test_defaults_reproduce_engine_defaults(tmp_path):
    cfg = resolve("gradcheck")
    assert cfg.defense() == DefenseConfig(ssim=cfg.defense().ssim)
    d = defaults()
    assert (d["projection.eta1"], d["projection.eta2"], d["projection.eta3"]) == (11.0, 3.0, 19.0)
    assert d["model.name"] == "conv" and d["model.seed"] == 42


def test_flat_file_parsing():
    text = """
    # comment line
    projection.eta1 = 7      # trailing comment
    ablation.projection = off
    sweep.values = 8, 10, 12
    image.size = none
    """
    v = parse_config_text(text)
    assert v == {"projection.eta1": 7.0, "ablation.projection": False,
                 "sweep.values": (8.0, 10.0, 12.0), "image.size": None}


@pytest.mark.parametrize("text", ["nonsense", "foo.bar = 1", "kappa = fast", "kappa = 1\nkappa = 2",
                                  "ablation.mse = maybe"])
def test_bad_files(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_layer_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("kappa = 3\nepsilon = 0.02\niterations = 4\n")
    cfg = resolve("gradcheck", config_path=f, overrides=parse_overrides(["kappa=5"]),
                  flags={"iterations": 9, "epsilon": None})
    d = cfg.defense()
    assert (d.kappa, d.epsilon, d.iterations) == (5.0, 0.02, 9)
    assert cfg.resolved()["kappa"] == 5.0


def test_ablation_flags_express_every_row():
    for row in ABLATION_ROWS.values():
        pairs = [f"ablation.{k}={int(getattr(row, k))}" for k in ("mse", "ssim", "lf", "projection")]
        assert resolve("gradcheck", overrides=parse_overrides(pairs)).defense().ablation == row


def test_contradictions_fail_early(tmp_path):
    img = tmp_path / "a.png"
    img.write_bytes(b"")
    with pytest.raises(ConfigError):
        resolve("defend", [tmp_path / "missing.png"])
    with pytest.raises(ConfigError):
        resolve("defend", [])
    with pytest.raises(ConfigError):
        resolve("defend", [img], flags={"epsilon": -0.1})
    with pytest.raises(ConfigError):
        resolve("defend", [img], flags={"model.name": "identity", "model.bridge": "tcp://h:1"})
    with pytest.raises(ConfigError):
        resolve("sweep", [img], flags={"sweep.axis": "lambda1", "sweep.values": (1.0,)})
    with pytest.raises(ConfigError):
        resolve("sweep", [img], flags={"sweep.axis": "iterations", "sweep.values": (2.5,)})
    with pytest.raises(ConfigError):
        resolve("sweep", [img], flags={"sweep.axis": "epsilon", "sweep.values": (-1.0,)})
    with pytest.raises(ConfigError):
        resolve("ablate", [img], flags={"ablation.rows": ("full", "bogus")})
    with pytest.raises(ConfigError):
        resolve("evaluate", [img])
    with pytest.raises(ConfigError):
        resolve("defend", [img], flags={"smoothing_kernel": 4})


def test_every_key_parses_its_default():
    for key, (parser, default) in SCHEMA.items():
        if isinstance(default, tuple):
            text = ",".join(map(str, default))
        else:
            text = "none" if default is None else str(default)
        assert parse_config_text(f"{key} = {text}")[key] == default
