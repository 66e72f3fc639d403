"""Strict JSON run configuration.

One document with up to five sections: `scenario` or `input` for where the
sequence comes from, `tracker`, `attack`, `patch`, and `metrics`. Every key
is checked; unknown keys are rejected with their dotted path, so a typo in
an attack parameter fails the run instead of silently changing the
experiment. A minimal file is `{"scenario": {"preset": "single"}}`, which
leaves every other section at its defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .attack import AttackConfig
from .geometry import BBox, FrameDims
from .patchopt.eot import EOTParams
from .patchopt.losses import LossWeights
from .patchopt.optimize import (
    DEFAULT_INIT,
    DEFAULT_ITERATIONS,
    DEFAULT_PATCH_SIZE,
    DEFAULT_SEED,
    DEFAULT_STEP,
    DEFAULT_TEMP,
)
from .scenario import ObjectSpec, ScenarioSpec, preset
from .tracker import TrackerConfig


class ConfigError(ValueError):
    """Schema violation; the message carries the dotted key path."""


@dataclass(frozen=True)
class InputPaths:
    """File-based sequence input, the alternative to a synthetic scenario."""

    gt: Path | None = None
    detections: Path | None = None
    dims: FrameDims | None = None


@dataclass(frozen=True)
class PatchConfig:
    iterations: int = DEFAULT_ITERATIONS
    step_size: float = DEFAULT_STEP
    seed: int = DEFAULT_SEED
    patch_size: int = DEFAULT_PATCH_SIZE
    init: float = DEFAULT_INIT
    selection_temp: float = DEFAULT_TEMP
    weights: LossWeights = LossWeights()
    eot: EOTParams | None = None
    use_clips: bool = False
    clip_margin: float = 0.2


@dataclass(frozen=True)
class MetricsOptions:
    restrict_stasr_to_victims: bool = True
    restrict_ior_to_victims: bool = False


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec | None = None
    input: InputPaths | None = None
    tracker: TrackerConfig = TrackerConfig()
    attack: AttackConfig | None = None
    patch: PatchConfig = PatchConfig()
    metrics: MetricsOptions = MetricsOptions()


class _Section:
    """A mapping being consumed key by key; leftovers are schema errors."""

    def __init__(self, mapping, path: str):
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        self._d = dict(mapping)
        self._path = path

    def _sub(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def has(self, key: str) -> bool:
        return key in self._d

    def take(self, key: str, default=None):
        return self._d.pop(key, default)

    def section(self, key: str) -> "_Section | None":
        if key not in self._d:
            return None
        return _Section(self._d.pop(key), self._sub(key))

    def done(self) -> None:
        if self._d:
            key = sorted(self._d)[0]
            raise ConfigError(f"unknown key {self._sub(key)}")


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(v)


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer")
    return v


def _bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true or false")
    return v


def _str(v, path: str) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{path}: expected a string")
    return v


def _nums(v, path: str, n: int) -> tuple[float, ...]:
    if not isinstance(v, list) or len(v) != n:
        raise ConfigError(f"{path}: expected a list of {n} numbers")
    return tuple(_num(x, path) for x in v)


def _ints(v, path: str) -> tuple[int, ...]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a non-empty list of integers")
    return tuple(_int(x, path) for x in v)


def _existing(v, path: str, base: Path) -> Path:
    p = Path(_str(v, path))
    if not p.is_absolute():
        p = base / p
    if not p.is_file():
        raise ConfigError(f"{path}: no such file: {p}")
    return p


def _scenario(sec: _Section) -> ScenarioSpec:
    try:
        if sec.has("preset"):
            spec = preset(
                _str(sec.take("preset"), "scenario.preset"),
                seed=_int(sec.take("seed", 0), "scenario.seed"),
                n_frames=_int(sec.take("n_frames", 100), "scenario.n_frames"),
            )
        else:
            dims = _nums(sec.take("dims"), "scenario.dims", 2)
            n_frames = _int(sec.take("n_frames", 100), "scenario.n_frames")
            raw = sec.take("objects")
            if not isinstance(raw, list) or not raw:
                raise ConfigError("scenario.objects: expected a non-empty list")
            objects = []
            for i, entry in enumerate(raw):
                osec = _Section(entry, f"scenario.objects[{i}]")
                box = _nums(osec.take("box"), f"scenario.objects[{i}].box", 4)
                vel = _nums(osec.take("velocity", [0.0, 0.0]), f"scenario.objects[{i}].velocity", 2)
                entry_frame = _int(osec.take("entry", 1), f"scenario.objects[{i}].entry")
                osec.done()
                objects.append(ObjectSpec(BBox(*box), vel, entry_frame))
            spec = ScenarioSpec(
                dims=FrameDims(int(dims[0]), int(dims[1])),
                n_frames=n_frames,
                objects=tuple(objects),
                seed=_int(sec.take("seed", 0), "scenario.seed"),
            )
        overrides = {}
        for name in ("jitter_sigma", "miss_prob", "score_lo", "score_hi"):
            if sec.has(name):
                overrides[name] = _num(sec.take(name), f"scenario.{name}")
        if overrides:
            spec = replace(spec, **overrides)
        sec.done()
        return spec
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"scenario: {e}") from e


def _input(sec: _Section, base: Path) -> InputPaths:
    gt = _existing(sec.take("gt"), "input.gt", base) if sec.has("gt") else None
    dets = _existing(sec.take("detections"), "input.detections", base) if sec.has("detections") else None
    dims = None
    if sec.has("dims"):
        w, h = _nums(sec.take("dims"), "input.dims", 2)
        dims = FrameDims(int(w), int(h))
    sec.done()
    if gt is None and dets is None:
        raise ConfigError("input: needs at least one of gt, detections")
    return InputPaths(gt=gt, detections=dets, dims=dims)


def _tracker(sec: _Section) -> TrackerConfig:
    kwargs = {}
    for name in ("tau_high", "tau_low", "iou_gate_1", "iou_gate_2"):
        if sec.has(name):
            kwargs[name] = _num(sec.take(name), f"tracker.{name}")
    for name in ("max_age", "min_hits"):
        if sec.has(name):
            kwargs[name] = _int(sec.take(name), f"tracker.{name}")
    sec.done()
    try:
        return TrackerConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(f"tracker: {e}") from e


def _attack(sec: _Section) -> AttackConfig:
    kwargs = {"mode": _str(sec.take("mode"), "attack.mode") if sec.has("mode") else None}
    if kwargs["mode"] is None:
        raise ConfigError("attack.mode: required")
    if sec.has("victim_ids"):
        kwargs["victim_ids"] = _ints(sec.take("victim_ids"), "attack.victim_ids")
    for name in ("onset", "duration", "seed"):
        if sec.has(name):
            kwargs[name] = _int(sec.take(name), f"attack.{name}")
    for name in ("kappa_iou", "score_drop", "false_score", "noise_sigma", "score_jitter", "occlusion"):
        if sec.has(name):
            kwargs[name] = _num(sec.take(name), f"attack.{name}")
    sec.done()
    try:
        return AttackConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(f"attack: {e}") from e


def _patch(sec: _Section) -> PatchConfig:
    kwargs = {}
    for name in ("iterations", "seed", "patch_size"):
        if sec.has(name):
            kwargs[name] = _int(sec.take(name), f"patch.{name}")
    for name in ("step_size", "init", "selection_temp", "clip_margin"):
        if sec.has(name):
            kwargs[name] = _num(sec.take(name), f"patch.{name}")
    if sec.has("use_clips"):
        kwargs["use_clips"] = _bool(sec.take("use_clips"), "patch.use_clips")
    wsec = sec.section("weights")
    if wsec is not None:
        wkw = {}
        for name in ("beta", "gamma", "delta"):
            if wsec.has(name):
                wkw[name] = _num(wsec.take(name), f"patch.weights.{name}")
        wsec.done()
        try:
            kwargs["weights"] = LossWeights(**wkw)
        except ValueError as e:
            raise ConfigError(f"patch.weights: {e}") from e
    if sec.has("eot"):
        raw = sec.take("eot")
        if raw is not None:
            esec = _Section(raw, "patch.eot")
            ekw = {}
            for name in ("rotation", "scale", "blur", "brightness"):
                if esec.has(name):
                    ekw[name] = _nums(esec.take(name), f"patch.eot.{name}", 2)
            esec.done()
            try:
                kwargs["eot"] = EOTParams(**ekw)
            except ValueError as e:
                raise ConfigError(f"patch.eot: {e}") from e
    sec.done()
    try:
        return PatchConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(f"patch: {e}") from e


def _metrics(sec: _Section) -> MetricsOptions:
    kwargs = {}
    for name in ("restrict_stasr_to_victims", "restrict_ior_to_victims"):
        if sec.has(name):
            kwargs[name] = _bool(sec.take(name), f"metrics.{name}")
    sec.done()
    return MetricsOptions(**kwargs)


def parse_config(document: dict, base: Path | None = None) -> RunConfig:
    """Validate a decoded config document; `base` anchors relative paths."""
    base = base or Path.cwd()
    top = _Section(document, "")
    scenario_sec = top.section("scenario")
    input_sec = top.section("input")
    if scenario_sec is not None and input_sec is not None:
        raise ConfigError("config has both scenario and input sections; pick one")
    attack_sec = top.section("attack")
    cfg = RunConfig(
        scenario=_scenario(scenario_sec) if scenario_sec is not None else None,
        input=_input(input_sec, base) if input_sec is not None else None,
        tracker=_tracker(top.section("tracker") or _Section({}, "tracker")),
        attack=_attack(attack_sec) if attack_sec is not None else None,
        patch=_patch(top.section("patch") or _Section({}, "patch")),
        metrics=_metrics(top.section("metrics") or _Section({}, "metrics")),
    )
    top.done()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run-config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return parse_config(document, base=path.parent)
