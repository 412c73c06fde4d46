"""Run configuration: presets, flat key-value config files, overrides.

A config file is plain text, one ``key = value`` per line, ``#`` comments.
Values are parsed by key: weights and bandwidths as floats, counts as ints,
flags as true/false. The ``mju-waste`` and ``taco`` presets carry the tuned
inference parameters and proposal size thresholds for the two datasets;
precedence is preset < config file < explicit overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields

from .densecrf import CrfConfig
from .proposer import MJU_SIZE_LIMITS, TACO_SIZE_LIMITS, ProposerConfig


@dataclass(frozen=True)
class RunConfig:
    crf: CrfConfig = field(default_factory=CrfConfig)
    proposer: ProposerConfig = field(default_factory=ProposerConfig)
    depth_fill_window: int = 5
    probability_floor: float = 1e-8
    classes: int = 2

    def __post_init__(self):
        if self.classes != 2:
            raise ValueError("the pipeline is binary: classes must be 2")


PRESETS: dict[str, dict[str, str]] = {
    "mju-waste": {
        "alpha": "1",
        "w_appearance": "3",
        "w_smooth": "1",
        "w_depth": "1",
        "theta_alpha": "20",
        "theta_beta": "20",
        "theta_gamma": "1",
        "theta_delta": "10",
        "theta_epsilon": "20",
        "iterations": "10",
        "use_depth": "true",
        "n_min": str(MJU_SIZE_LIMITS[0]),
        "n_max": str(MJU_SIZE_LIMITS[1]),
    },
    "taco": {
        "alpha": "1",
        "w_appearance": "3",
        "w_smooth": "1",
        "w_depth": "0",
        "theta_alpha": "100",
        "theta_beta": "20",
        "theta_gamma": "10",
        "iterations": "10",
        "use_depth": "false",
        "n_min": str(TACO_SIZE_LIMITS[0]),
        "n_max": str(TACO_SIZE_LIMITS[1]),
    },
}

_CRF_KEYS = {f.name for f in dc_fields(CrfConfig)}
_PROPOSER_KEYS = {f.name for f in dc_fields(ProposerConfig)}
_RUN_KEYS = {"depth_fill_window", "probability_floor", "classes"}

_INT_KEYS = {"iterations", "n_min", "n_max", "connectivity", "depth_fill_window", "classes"}
_BOOL_KEYS = {"use_depth"}
_STR_KEYS = {"init", "kernel_norm"}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; later lines win on duplicate keys."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValueError(f"config line {lineno}: empty key or value: {raw!r}")
        out[key] = value
    return out


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        lowered = value.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    if key in _INT_KEYS:
        return int(value)
    if key in _STR_KEYS:
        return value
    return float(value)


def build_run_config(
    preset: str | None = None,
    config_text: str | None = None,
    overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Merge preset, config file text, and overrides into a RunConfig."""
    merged: dict[str, object] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        merged.update({k: _coerce(k, v) for k, v in PRESETS[preset].items()})
    if config_text is not None:
        merged.update(
            {k: _coerce(k, v) for k, v in parse_config_text(config_text).items()}
        )
    if overrides:
        merged.update(overrides)

    known = _CRF_KEYS | _PROPOSER_KEYS | _RUN_KEYS
    unknown = set(merged) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    crf = CrfConfig(**{k: v for k, v in merged.items() if k in _CRF_KEYS})
    proposer = ProposerConfig(**{k: v for k, v in merged.items() if k in _PROPOSER_KEYS})
    run_kwargs = {k: v for k, v in merged.items() if k in _RUN_KEYS}
    return RunConfig(crf=crf, proposer=proposer, **run_kwargs)


def config_to_text(run: RunConfig) -> str:
    """Serialize a RunConfig back to the flat key-value format."""
    lines = []
    for f in dc_fields(CrfConfig):
        value = getattr(run.crf, f.name)
        lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
    for f in dc_fields(ProposerConfig):
        lines.append(f"{f.name} = {getattr(run.proposer, f.name)}")
    lines.append(f"depth_fill_window = {run.depth_fill_window}")
    lines.append(f"probability_floor = {run.probability_floor}")
    lines.append(f"classes = {run.classes}")
    return "\n".join(lines) + "\n"
