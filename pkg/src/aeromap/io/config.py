"""Pipeline configuration: one flat JSON document.

Every knob defaults to the setting the method was published with: a 3x3
extraction window, IQR outlier removal, a 70/30 split with 5-fold CV, and
the tree-ensemble hyperparameters reported for each regressor.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

MODEL_KINDS = (
    "Univariate", "Multivariate", "Ridge", "Lasso",
    "RandomForest", "ExtraTrees", "GradientBoosting",
)

# Kriging kind and semivariogram per meteorological variable.
DEFAULT_KRIGING = {
    "d2m": "universal/spherical",
    "t2m": "universal/spherical",
    "blh": "ordinary/spherical",
    "lai_hv": "ordinary/spherical",
    "lai_lv": "ordinary/spherical",
    "sp": "universal/power",
    "ws10": "ordinary/spherical",
    "wd10": "ordinary/spherical",
    "uvb": "ordinary/spherical",
    "cdir": "ordinary/spherical",
    "RH": "universal/spherical",
}

# Feature groups discarded cumulatively in the ablation study.
DEFAULT_ABLATION = [
    ["lai_lv"],
    ["lai_lv", "month"],
    ["lai_lv", "month", "Prob_medm"],
    ["lai_lv", "month", "Prob_medm", "cdir"],
    ["lai_lv", "month", "Prob_medm", "cdir", "sp"],
    ["lai_lv", "month", "Prob_medm", "cdir", "sp", "Prob_bestm"],
    ["lai_lv", "month", "Prob_medm", "cdir", "sp", "Prob_bestm", "ws10"],
    ["lai_lv", "month", "Prob_medm", "cdir", "sp", "Prob_bestm", "ws10", "wd10"],
]

# Upper PM2.5 bound (µg/m³) of each band; the last band is open-ended.
DEFAULT_AQI_BANDS = {
    "Clean": 12.0,
    "Moderate": 35.4,
    "UnhealthySensitive": 55.4,
    "Unhealthy": 150.4,
    "VeryUnhealthy": None,
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int = 42

    # synthetic scene
    synth_n_stations: int = 40
    synth_n_days: int = 400
    synth_start_date: str = "2018-01-01"
    synth_n_rows: int = 30
    synth_n_cols: int = 30
    synth_origin_lat: float = 35.82
    synth_origin_lon: float = 51.17
    synth_cell_size: float = 0.01
    synth_cloud_fraction: float = 0.35
    synth_noise_sd: float = 2.5

    # preprocessing
    window_size: int = 3
    std_threshold: float = 0.5
    min_valid_pixels: int = 3
    outlier_method: str = "IQR"
    merge_mode: str = "seasonal"
    kriging: dict = field(default_factory=lambda: dict(DEFAULT_KRIGING))
    kriging_n_bins: int = 12

    # evaluation protocol
    split_fraction: float = 0.7
    split_mode: str = "random"
    cv_folds: int = 5

    # models
    model: str = "GradientBoosting"
    ridge_lambda: float = 0.1
    lasso_lambda: float = 0.1
    rf_n_estimators: int = 500
    rf_max_depth: int = 10
    rf_max_features: float = 0.5
    rf_min_samples_leaf: int = 1
    et_n_estimators: int = 500
    et_max_depth: int = 10
    et_max_features: float = 0.8
    et_min_samples_leaf: int = 1
    gb_n_estimators: int = 2000
    gb_learning_rate: float = 0.3
    gb_max_depth: int = 6
    gb_max_features: float = 1.0
    gb_min_child_weight: float = 1.0
    gb_gamma: float = 0.0
    gb_reg_lambda: float = 0.0
    gb_early_stopping_rounds: int | None = None

    ablation: list = field(default_factory=lambda: [list(s) for s in DEFAULT_ABLATION])

    # deployment
    map_kriging: str = "ordinary/spherical"
    clamp_negative: bool = True
    instrument_units: bool = False
    aqi_bands: dict = field(default_factory=lambda: dict(DEFAULT_AQI_BANDS))

    threads: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ConfigError(f"window_size must be an odd integer >= 1, got {self.window_size}")
        if not 0 < self.split_fraction < 1:
            raise ConfigError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.outlier_method not in ("IQR", "ThreeSigma", "none"):
            raise ConfigError(f"unknown outlier_method {self.outlier_method!r}")
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_KINDS)}")
        if self.merge_mode not in ("seasonal", "pooled"):
            raise ConfigError(f"merge_mode must be 'seasonal' or 'pooled', got {self.merge_mode!r}")
        if self.split_mode not in ("random", "temporal"):
            raise ConfigError(f"split_mode must be 'random' or 'temporal', got {self.split_mode!r}")
        if self.std_threshold < 0 or self.min_valid_pixels < 0:
            raise ConfigError("std_threshold and min_valid_pixels must be non-negative")
        for var, setting in [*self.kriging.items(), ("map_kriging", self.map_kriging)]:
            kind, _, family = setting.partition("/")
            if kind not in ("ordinary", "universal") or family not in (
                    "linear", "spherical", "gaussian", "power"):
                raise ConfigError(f"bad kriging setting for {var}: {setting!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        if "kriging" in data:
            data["kriging"] = {**DEFAULT_KRIGING, **data["kriging"]}
        return cls(**data)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return PipelineConfig.from_dict(data)
