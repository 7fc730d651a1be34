"""JSON run configuration shared by the CLI and the scenario presets.

A config document looks like::

    {
      "name": "mixed",
      "margins": [{"family": "gp", "theta": 9.39, "lambda": -0.023}, ...],
      "correlation": {"lower": [0.28, 0.31, ...]},
      "labels": ["X1", ...],
      "calibration": {"n_binary": 100000, "tolerance": 0.001},
      "seed": 2345,
      "n": 2000,
      "replications": 200
    }

``correlation`` is either a full symmetric matrix or ``{"lower": [...]}``
listing the strictly lower triangle column by column (the order R's
``lower.tri`` fills). Only ``margins`` is required; ``correlation`` defaults
to the identity. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibrationOptions
from .exceptions import SpecError
from .marginals import MarginalSpec

TOP_KEYS = {"name", "margins", "correlation", "labels", "calibration", "seed", "n", "replications"}


class ConfigError(ValueError):
    """Malformed config document (CLI exit code 2)."""


def lower_to_matrix(values, dim=None):
    """Full matrix from the strictly lower triangle listed column by column."""
    values = [float(v) for v in values]
    if dim is None:
        dim = (1 + math.isqrt(1 + 8 * len(values))) // 2
    if dim * (dim - 1) // 2 != len(values):
        raise ConfigError(f"{len(values)} lower-triangle entries do not fit a square matrix"
                          + (f" of size {dim}" if dim else ""))
    out = np.eye(dim)
    k = 0
    for j in range(dim):
        for i in range(j + 1, dim):
            out[i, j] = out[j, i] = values[k]
            k += 1
    return out


def matrix_to_lower(mat):
    mat = np.asarray(mat)
    return [float(mat[i, j]) for j in range(mat.shape[0]) for i in range(j + 1, mat.shape[0])]


@dataclass
class RunConfig:
    margins: list
    correlation: np.ndarray
    name: str = "config"
    labels: list | None = None
    calibration: dict = field(default_factory=dict)
    seed: int | None = None
    n: int | None = None
    replications: int | None = None

    def options(self, **overrides):
        d = dict(self.calibration)
        if self.seed is not None:
            d.setdefault("seed", self.seed)
        d.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return CalibrationOptions.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"calibration options: {exc}") from exc


def parse_config(doc) -> RunConfig:
    """Validate the document's shape and build a RunConfig.

    Raises ConfigError for structural problems (wrong keys or types). Domain
    checks on parameter values are left to ``validate_spec``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "margins" not in doc:
        raise ConfigError("config needs a 'margins' list")
    raw = doc["margins"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'margins' must be a non-empty list")
    margins = []
    for k, m in enumerate(raw):
        if not isinstance(m, dict) or "family" not in m:
            raise ConfigError(f"margin {k + 1}: needs an object with a 'family' key")
        try:
            margins.append(MarginalSpec.from_dict(m))
        except (SpecError, ValueError, TypeError) as exc:
            raise ConfigError(f"margin {k + 1}: {exc}") from exc
    J = len(margins)

    corr = doc.get("correlation")
    if corr is None:
        mat = np.eye(J)
    elif isinstance(corr, dict):
        if set(corr) != {"lower"}:
            raise ConfigError("correlation object must have exactly one key, 'lower'")
        mat = lower_to_matrix(corr["lower"], J)
    elif isinstance(corr, list):
        try:
            mat = np.array(corr, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"correlation matrix: {exc}") from exc
        if mat.shape != (J, J):
            raise ConfigError(f"correlation matrix is {mat.shape}, expected {(J, J)}")
    else:
        raise ConfigError("correlation must be a matrix or {'lower': [...]}")

    labels = doc.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != J
                               or not all(isinstance(s, str) for s in labels)):
        raise ConfigError(f"labels must be a list of {J} strings")
    cal = doc.get("calibration", {})
    if not isinstance(cal, dict):
        raise ConfigError("calibration must be an object")
    for key in ("seed", "n", "replications"):
        v = doc.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
            raise ConfigError(f"'{key}' must be an integer")
    cfg = RunConfig(margins, mat, str(doc.get("name", "config")), labels, dict(cal),
                    doc.get("seed"), doc.get("n"), doc.get("replications"))
    cfg.options()  # surfaces bad calibration keys early
    return cfg


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)
