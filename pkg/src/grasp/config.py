"""Run configuration: flat ``key = value`` files, CLI overrides, validation.

Keys are dotted (``projection.eta1 = 11``). Resolution order is defaults,
then the config file, then ``--set`` pairs, then dedicated CLI flags. The
fully resolved flat mapping is what gets echoed into run manifests.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ABLATION_ROWS, Ablation, DefenseConfig
from .errors import ConfigError, InvalidInput
from .losses import SsimConfig
from .models import BUILTINS
from .projection import ProjectionConfig

COMMANDS = ("defend", "evaluate", "robustness", "ablate", "sweep", "gradcheck", "synth")
SWEEP_AXES = {
    "eta1": "projection.eta1",
    "eta2": "projection.eta2",
    "eta3": "projection.eta3",
    "kappa": "kappa",
    "epsilon": "epsilon",
    "iterations": "iterations",
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _str_list(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(s) for s in _str_list(text))


# key -> (parser, default)
SCHEMA = {
    "epsilon": (float, 0.05),
    "iterations": (int, 20),
    "kappa": (float, 10.0),
    "smoothing_kernel": (int, 11),
    "probe_seed": (int, 0),
    **{f"projection.{k}": (float, v) for k, v in ProjectionConfig().__dict__.items()},
    "ssim.window_size": (int, 11),
    "ssim.sigma": (float, 1.5),
    "ssim.covariance": (_bool, True),
    "ablation.mse": (_bool, True),
    "ablation.ssim": (_bool, True),
    "ablation.lf": (_bool, True),
    "ablation.projection": (_bool, True),
    "ablation.rows": (_str_list, tuple(ABLATION_ROWS)),
    "model.name": (str, "conv"),
    "model.seed": (int, 42),
    "model.hidden": (int, 64),
    "model.bridge": (str, ""),
    "model.timeout": (float, 30.0),
    "image.size": (_optional_int, None),
    "run.jobs": (int, 1),
    "run.out": (str, "grasp_out"),
    "sweep.axis": (str, ""),
    "sweep.values": (_float_list, ()),
    "robustness.battery": (_str_list, ()),
    "gradcheck.seeds": (int, 20),
    "gradcheck.size": (int, 8),
    "synth.count": (int, 16),
    "synth.size": (int, 64),
    "synth.seed": (int, 0),
}


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser = SCHEMA[key][0]
    try:
        return parser(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = parse_value(key, value)
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = parse_value(key.strip(), value)
    return out


def defaults() -> dict:
    return {k: v for k, (_, v) in SCHEMA.items()}


@dataclass
class RunConfig:
    command: str
    inputs: list[Path]
    out: Path
    values: dict
    adv_dir: Path | None = None
    explicit: frozenset = field(default_factory=frozenset)

    # -- derived views --------------------------------------------------------

    def defense(self, **overrides) -> DefenseConfig:
        """The :class:`DefenseConfig` described by the resolved values.

        ``overrides`` use config keys (``projection.eta1``, ``kappa``...).
        """
        v = {**self.values, **overrides}
        try:
            proj = ProjectionConfig(**{k.split(".", 1)[1]: float(v[k])
                                       for k in v if k.startswith("projection.")})
            ssim = SsimConfig(window_size=v["ssim.window_size"], sigma=v["ssim.sigma"],
                              covariance=v["ssim.covariance"])
            ablation = Ablation(mse=v["ablation.mse"], ssim=v["ablation.ssim"],
                                lf=v["ablation.lf"], projection=v["ablation.projection"])
            return DefenseConfig(epsilon=float(v["epsilon"]), iterations=int(v["iterations"]),
                                 kappa=float(v["kappa"]), smoothing_kernel=int(v["smoothing_kernel"]),
                                 projection=proj, ssim=ssim, ablation=ablation,
                                 probe_seed=int(v["probe_seed"]))
        except (InvalidInput, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def jobs(self) -> int:
        return self.values["run.jobs"]

    def resolved(self) -> dict:
        """JSON-friendly copy of every resolved key."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.values.items())}


def _check_inputs(paths) -> list[Path]:
    out = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise ConfigError(f"input path does not exist: {p}")
        out.append(p)
    return out


def resolve(command: str, inputs=(), config_path=None, overrides=None, flags=None,
            adv_dir=None) -> RunConfig:
    """Merge all configuration layers and validate the result.

    ``flags`` holds dedicated CLI options already mapped to config keys;
    ``None`` values are ignored.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = defaults()
    explicit = set()
    layers = [load_config_file(config_path) if config_path else {},
              overrides or {},
              {k: v for k, v in (flags or {}).items() if v is not None}]
    for layer in layers:
        for key, value in layer.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
            explicit.add(key)

    if "model.bridge" in explicit and values["model.bridge"] and "model.name" in explicit:
        raise ConfigError("give either a builtin model or a bridge endpoint, not both")
    if not values["model.bridge"] and values["model.name"] not in BUILTINS:
        raise ConfigError(f"unknown model {values['model.name']!r}; choose from {sorted(BUILTINS)}")
    if values["run.jobs"] < 1:
        raise ConfigError("run.jobs must be >= 1")
    if command != "synth" and command != "gradcheck" and not inputs:
        raise ConfigError(f"{command} needs at least one input image or directory")
    if command == "sweep":
        axis = values["sweep.axis"]
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
        if not values["sweep.values"]:
            raise ConfigError("sweep needs at least one value")
    if command == "ablate":
        unknown = [r for r in values["ablation.rows"] if r not in ABLATION_ROWS]
        if unknown:
            raise ConfigError(f"unknown ablation rows {unknown}; choose from {list(ABLATION_ROWS)}")
    if command == "evaluate" and adv_dir is None:
        raise ConfigError("evaluate needs --adv DIR with the protected images")
    if adv_dir is not None and not Path(adv_dir).is_dir():
        raise ConfigError(f"--adv directory does not exist: {adv_dir}")

    cfg = RunConfig(command=command, inputs=_check_inputs(inputs), out=Path(values["run.out"]),
                    values=values, adv_dir=Path(adv_dir) if adv_dir else None,
                    explicit=frozenset(explicit))
    cfg.defense()  # surface contradictions before any work
    if command == "sweep":
        key = SWEEP_AXES[values["sweep.axis"]]
        for v in values["sweep.values"]:
            if key == "iterations" and not float(v).is_integer():
                raise ConfigError(f"iterations must be integers, got {v}")
            cfg.defense(**{key: int(v) if key == "iterations" else v})
    return cfg


def log_level() -> str:
    return os.environ.get("GRASP_LOG", "WARNING").upper()
