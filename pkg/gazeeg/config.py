"""Layered pipeline configuration.

Config files are flat YAML mappings with dotted keys::

    seed: 7
    gaze.velocity_threshold_deg_s: 30
    synth.n_participants: 6

Built-in defaults are overridden by the file, the file by ``--set key=value``
flags. Unknown keys and mistyped values raise :class:`ConfigError`.
"""
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import psutil
import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class GazeConfig:
    """I-VT parameters."""
    max_gap_ms: float = 75.0
    median_window_samples: int = 3
    velocity_window_ms: float = 20.0
    velocity_threshold_deg_s: float = 30.0
    merge_max_gap_ms: float = 75.0
    merge_max_angle_deg: float = 0.5
    min_fixation_ms: float = 60.0

    def validate(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ConfigError("gaze.{} must be positive.".format(f.name))
        if self.median_window_samples % 2 != 1:
            raise ConfigError("gaze.median_window_samples must be odd.")


IvtParams = GazeConfig


@dataclass(frozen=True)
class EegConfig:
    highpass_hz: float = 1.0
    notch_low_hz: float = 48.0
    notch_high_hz: float = 52.0
    lowpass_hz: float = 40.0
    filter_order: int = 4
    bad_channel_threshold: float = 0.8
    bad_channel_window_s: float = 4.0
    bad_channel_fraction: float = 0.5
    spline_order: int = 4
    legendre_terms: int = 7
    spline_ridge: float = 1e-5
    sobi_lags: int = 50
    sobi_tolerance: float = 1e-8
    sobi_max_sweeps: int = 100
    ocular_threshold: float = 0.7
    kurtosis_threshold: float = 15.0
    frontal_channels: List[str] = field(default_factory=lambda: ['Fp1', 'Fp2'])
    srp_length_ms: float = 1000.0

    def validate(self):
        if not 0 < self.highpass_hz < self.lowpass_hz:
            raise ConfigError("eeg.highpass_hz must be positive and below eeg.lowpass_hz.")
        if not self.notch_low_hz < self.notch_high_hz:
            raise ConfigError("eeg.notch_low_hz must be below eeg.notch_high_hz.")
        if not 0 < self.bad_channel_threshold <= 1:
            raise ConfigError("eeg.bad_channel_threshold must lie in (0, 1].")
        if not 0 <= self.bad_channel_fraction < 1:
            raise ConfigError("eeg.bad_channel_fraction must lie in [0, 1).")
        for name in ('filter_order', 'spline_order', 'legendre_terms', 'sobi_lags', 'sobi_max_sweeps'):
            if getattr(self, name) < 1:
                raise ConfigError("eeg.{} must be at least 1.".format(name))
        if self.srp_length_ms <= 0 or self.bad_channel_window_s <= 0:
            raise ConfigError("eeg window lengths must be positive.")


@dataclass(frozen=True)
class FeatureConfig:
    higuchi_kmax: int = 8
    csp_components: int = 15
    csp_ridge: float = 1e-10
    srp_baseline_ms: float = 100.0
    srp_rate_hz: float = 25.0
    min_epoch_samples: int = 16

    def validate(self):
        if self.higuchi_kmax < 2:
            raise ConfigError("features.higuchi_kmax must be at least 2.")
        if self.csp_components < 1:
            raise ConfigError("features.csp_components must be at least 1.")
        if self.srp_rate_hz <= 0 or self.srp_baseline_ms < 0:
            raise ConfigError("features.srp_rate_hz must be positive, srp_baseline_ms non-negative.")


@dataclass(frozen=True)
class LearnConfig:
    inner_folds: int = 5
    kernels: List[str] = field(default_factory=lambda: ['linear', 'poly', 'rbf'])
    c_values: List[float] = field(default_factory=lambda: [0.1, 1.0, 10.0])
    gamma_values: List[Union[float, str]] = field(default_factory=lambda: [0.1, 1.0, 'scale', 'auto'])
    poly_degree: int = 3
    poly_coef0: float = 1.0
    tol: float = 1e-3
    max_iter: int = 20000
    clip_low: float = -0.5
    clip_high: float = 1.5

    def validate(self):
        unknown = [kernel for kernel in self.kernels if kernel not in ('linear', 'poly', 'rbf')]
        if unknown or not self.kernels:
            raise ConfigError("learn.kernels must be a non-empty subset of linear, poly, rbf.")
        if not self.c_values or any(c <= 0 for c in self.c_values):
            raise ConfigError("learn.c_values must be positive.")
        for gamma in self.gamma_values:
            if isinstance(gamma, str) and gamma not in ('scale', 'auto'):
                raise ConfigError("Unknown gamma '{}'.".format(gamma))
            if not isinstance(gamma, str) and gamma <= 0:
                raise ConfigError("learn.gamma_values must be positive.")
        if self.inner_folds < 2:
            raise ConfigError("learn.inner_folds must be at least 2.")
        if not self.clip_low < 0 < 1 < self.clip_high:
            raise ConfigError("learn clip range must enclose [0, 1].")


@dataclass(frozen=True)
class EvalConfig:
    folds: int = 10
    min_targets: int = 10
    conditions: List[str] = field(default_factory=lambda: ['all'])
    feature_sets: List[str] = field(default_factory=lambda: ['gaze', 'pyeeg', 'csp15', 'srp', 'fusion'])
    splits: List[str] = field(default_factory=lambda: ['within_user', 'cross_user'])
    include_unfound: bool = False
    svg: bool = True
    object_curve: bool = True
    object_bins: int = 5

    def validate(self):
        if self.folds < 2:
            raise ConfigError("eval.folds must be at least 2.")
        unknown = [split for split in self.splits if split not in ('within_user', 'cross_user')]
        if unknown:
            raise ConfigError("Unknown split(s) {}.".format(", ".join(unknown)))
        if self.object_bins < 1:
            raise ConfigError("eval.object_bins must be at least 1.")


@dataclass(frozen=True)
class SynthConfig:
    n_participants: int = 6
    trials_per_participant: int = 40
    workshop_fraction: float = 0.5
    fixations_min: int = 3
    fixations_max: int = 8
    post_target_max: int = 1
    skip_rate: float = 0.05
    target_duration_ms: float = 280.0
    nontarget_duration_ms: float = 200.0
    duration_shape: float = 6.0
    duration_effect: bool = True
    effect_amplitude_uv: float = 4.0
    effect_peak_ms: float = 350.0
    effect_width_ms: float = 300.0
    n_sources: int = 8
    background_uv: float = 8.0
    effect_background_uv: float = 0.3
    reference_uv: float = 30.0
    sensor_noise_uv: float = 0.2
    noise_slope: float = -1.0
    blink_rate_hz: float = 0.2
    blink_amplitude_uv: float = 120.0
    gaze_jitter_deg: float = 0.15
    jitter_correlation: float = 0.9
    dropout_rate: float = 0.05
    eye_distance_mm: float = 600.0
    screen_px: List[int] = field(default_factory=lambda: [1920, 1080])
    screen_mm: List[float] = field(default_factory=lambda: [531.4, 298.9])
    gaze_rate_hz: float = 60.0
    eeg_rate_hz: float = 500.0
    gaze_origin: str = 'top_left'
    pause_ms: float = 1000.0
    seed: Optional[int] = None

    def validate(self):
        if self.n_participants < 1 or self.trials_per_participant < 1:
            raise ConfigError("synth needs at least one participant and one trial.")
        if not 1 <= self.fixations_min <= self.fixations_max:
            raise ConfigError("synth.fixations_min must lie in [1, fixations_max].")
        if self.effect_amplitude_uv < 0:
            raise ConfigError("synth.effect_amplitude_uv must be non-negative.")
        if not 0 <= self.workshop_fraction <= 1 or not 0 <= self.skip_rate < 1:
            raise ConfigError("synth fractions must lie in [0, 1].")
        if not 0 <= self.jitter_correlation < 1:
            raise ConfigError("synth.jitter_correlation must lie in [0, 1).")
        positive = ('target_duration_ms', 'nontarget_duration_ms', 'duration_shape', 'effect_peak_ms',
                    'effect_width_ms', 'background_uv', 'eye_distance_mm', 'gaze_rate_hz', 'eeg_rate_hz',
                    'pause_ms', 'n_sources')
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError("synth.{} must be positive.".format(name))
        negative = ('effect_background_uv', 'reference_uv', 'sensor_noise_uv', 'blink_rate_hz',
                    'blink_amplitude_uv', 'gaze_jitter_deg', 'dropout_rate', 'post_target_max')
        for name in negative:
            if getattr(self, name) < 0:
                raise ConfigError("synth.{} must be non-negative.".format(name))
        if self.gaze_origin not in ('top_left', 'top_right'):
            raise ConfigError("synth.gaze_origin must be top_left or top_right.")
        if len(self.screen_px) != 2 or len(self.screen_mm) != 2:
            raise ConfigError("synth screen geometry needs two values.")

    @property
    def duration_effect_active(self) -> bool:
        return self.duration_effect and self.effect_amplitude_uv > 0


_SECTIONS = {
    'gaze': GazeConfig,
    'eeg': EegConfig,
    'features': FeatureConfig,
    'learn': LearnConfig,
    'eval': EvalConfig,
    'synth': SynthConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 7
    jobs: Optional[int] = None
    gaze: GazeConfig = field(default_factory=GazeConfig)
    eeg: EegConfig = field(default_factory=EegConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> "PipelineConfig":
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be at least 1.")
        for name in _SECTIONS:
            getattr(self, name).validate()
        return self

    @property
    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            return self.jobs
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1

    @property
    def synth_seed(self) -> int:
        return self.seed if self.synth.seed is None else self.synth.seed

    def flat(self) -> Dict[str, Any]:
        """Dotted-key mapping of every setting."""
        values = {'seed': self.seed, 'jobs': self.jobs}
        for name in _SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                value = getattr(section, f.name)
                values['{}.{}'.format(name, f.name)] = list(value) if isinstance(value, (list, tuple)) else value
        return values

    def override(self, mapping: Mapping[str, Any]) -> "PipelineConfig":
        """New config with the dotted keys of ``mapping`` replaced."""
        top = {}
        sections: Dict[str, Dict[str, Any]] = {}
        for key, value in mapping.items():
            if key in ('seed', 'jobs'):
                top[key] = _coerce(key, value, typing.get_type_hints(PipelineConfig)[key])
                continue
            section, _, name = key.partition('.')
            if section not in _SECTIONS or not name:
                raise ConfigError("Unknown config key '{}'.".format(key))
            hints = typing.get_type_hints(_SECTIONS[section])
            if name not in hints:
                raise ConfigError("Unknown config key '{}'.".format(key))
            sections.setdefault(section, {})[name] = _coerce(key, value, hints[name])
        updated = replace(self, **top)
        for section, values in sections.items():
            updated = replace(updated, **{section: replace(getattr(updated, section), **values)})
        return updated.validate()

    def dump(self, path: Union[str, Path]) -> Path:
        """Write the effective configuration as flat YAML."""
        path = Path(path)
        if path.suffix == '' or path.is_dir():
            path.mkdir(parents=True, exist_ok=True)
            path = path / 'config.yaml'
        path.write_text(yaml.safe_dump(self.flat(), sort_keys=True, default_flow_style=None), encoding='utf-8')
        return path


def _coerce(key: str, value: Any, hint) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(key, value, arg)
            except ConfigError as error:
                errors.append(error)
        raise ConfigError("Config key '{}' has invalid value {!r}.".format(key, value))
    if origin in (list, List, tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError("Config key '{}' expects a list, got {!r}.".format(key, value))
        item = args[0] if args else Any
        return [_coerce(key, element, item) for element in value]
    if hint is Any:
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError("Config key '{}' expects true/false, got {!r}.".format(key, value))
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("Config key '{}' expects an integer, got {!r}.".format(key, value))
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("Config key '{}' expects a number, got {!r}.".format(key, value))
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError("Config key '{}' expects a string, got {!r}.".format(key, value))
        return value
    raise ConfigError("Config key '{}' has unsupported type.".format(key))


def parse_assignment(text: str) -> Tuple[str, Any]:
    """Split a ``key=value`` flag; the value is parsed as a YAML scalar or list."""
    key, sep, raw = text.partition('=')
    if not sep or not key.strip():
        raise ConfigError("Expected key=value, got '{}'.".format(text))
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as error:
        raise ConfigError("Cannot parse value of '{}': {}".format(key, error))
    return key.strip(), value


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """
    Build the effective configuration.

    :param path: flat YAML config file (optional)
    :param overrides: dotted-key overrides applied after the file
    :return: validated configuration
    """
    config = PipelineConfig()
    if path is not None:
        path = Path(path).expanduser()
        if not path.is_file():
            raise ConfigError("Config file '{}' does not exist.".format(path))
        try:
            data = yaml.safe_load(path.read_text(encoding='utf-8')) or {}
        except yaml.YAMLError as error:
            raise ConfigError("Cannot parse config file '{}': {}".format(path, error))
        if not isinstance(data, dict):
            raise ConfigError("Config file '{}' must hold a flat key-value mapping.".format(path))
        nested = [key for key, value in data.items() if isinstance(value, dict)]
        if nested:
            raise ConfigError("Config file '{}' must be flat, nested key(s): {}.".format(path, ", ".join(nested)))
        config = config.override(data)
    if overrides:
        config = config.override(overrides)
    return config.validate()
