"""
Reading and writing of model, task, gait, trajectory and crutch force files.

Angles in files are radians except the joint limits of a body model, which are degrees. Lengths
are meters.
"""
import json
import logging
from os.path import exists

import numpy as np
import pandas as pd
import yaml

from .model import NUM_LINKS, build_body_model
from .gait import (GaitTask, AnkleProfile, GaitControlPoints, ReferenceGait, ANGLE_COLUMNS,
                   TRAJECTORY_COLUMNS, DEFAULT_SAMPLES, DEFAULT_RESOLUTION, DEFAULT_CONTACT_RADIUS)
from .optimizer import OptimizerOptions
from .metrics import ForceTrace, DEFAULT_SAMPLE_TIME

logger = logging.getLogger(__name__)

REFERENCE_COLUMNS = ["t"] + ANGLE_COLUMNS
FLOAT_FORMAT = "%.17g"
LINK_KEYS = ("l", "d", "m", "I")
TASK_KEYS = {"start", "land", "step_time", "r2_0", "phi3_0", "ankle_profile", "samples", "resolution",
             "penalty_weight", "contact_radius", "max_foot_speed", "name", "optimizer"}
ANKLE_KEYS = {"phi1_start", "phi1_end", "steepness", "midpoint"}
OPTIMIZER_KEYS = {"max_evaluations", "restarts", "seed", "tolerance", "step_tolerance", "simplex_scale",
                  "init_attempts"}


class SchemaError(ValueError):
    """
    Raised when a file does not follow its schema.

    Attributes:
        field: dotted name of the offending field
    """
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def _read_mapping(path):
    if not exists(path):
        raise FileNotFoundError(f"{path} does not exist")
    with open(path) as config_file:
        config = yaml.safe_load(config_file)
    if not isinstance(config, dict):
        raise SchemaError("<root>", f"expected a mapping in {path}")
    return config


def _check_keys(mapping, allowed, required, where):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise SchemaError(f"{where}.{unknown[0]}" if where else unknown[0], "unknown field")
    for key in required:
        if key not in mapping:
            raise SchemaError(f"{where}.{key}" if where else key, "missing field")


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, f"expected a number, got {value!r}")
    return float(value)


def _optional_number(value, field):
    return None if value is None else _number(value, field)


def _integer(value, field):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(field, f"expected an integer, got {value!r}")
    return value


def _point(value, field):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError(field, f"expected [x, y], got {value!r}")
    return np.array([_number(v, f"{field}[{i}]") for i, v in enumerate(value)])


def load_body_model(path):
    """
    Load a body model file of the form

        {"links": [{"l": .., "d": .., "m": .., "I": ..}, x5],
         "joint_limits_deg": {"hip": [flexion, extension], "knee": [..], "ankle": [..]},
         "gravity": 9.81}

    joint_limits_deg and gravity are optional.

    Args:
        path: JSON (or YAML) file

    Returns:
        BodyModel
    """
    config = _read_mapping(path)
    _check_keys(config, ("links", "joint_limits_deg", "gravity"), ("links",), "")
    links = config["links"]
    if not isinstance(links, list) or len(links) != NUM_LINKS:
        raise SchemaError("links", f"expected {NUM_LINKS} link entries, got "
                                   f"{len(links) if isinstance(links, list) else links!r}")
    values = {key: [] for key in LINK_KEYS}
    for i, link in enumerate(links):
        if not isinstance(link, dict):
            raise SchemaError(f"links[{i}]", "expected a mapping")
        _check_keys(link, LINK_KEYS, LINK_KEYS, f"links[{i}]")
        for key in LINK_KEYS:
            values[key].append(_number(link[key], f"links[{i}].{key}"))
        if not values["m"][-1] > 0:
            raise SchemaError(f"links[{i}].m", f"link mass must be positive, got {values['m'][-1]}")
    limits = None
    if "joint_limits_deg" in config:
        limits = {}
        raw = config["joint_limits_deg"]
        if not isinstance(raw, dict):
            raise SchemaError("joint_limits_deg", "expected a mapping")
        _check_keys(raw, ("hip", "knee", "ankle"), ("hip", "knee", "ankle"), "joint_limits_deg")
        for joint, pair in raw.items():
            limits[joint] = tuple(_point(pair, f"joint_limits_deg.{joint}"))
    gravity = _number(config.get("gravity", 9.81), "gravity")
    model = build_body_model(values["l"], values["d"], values["m"], values["I"], joint_limits_deg=limits,
                             gravity=gravity)
    logger.debug("loaded body model from %s", path)
    return model


def parse_task(config, name=None):
    """
    Build a GaitTask from a task mapping. The optional optimizer block is ignored here.
    """
    _check_keys(config, TASK_KEYS, ("start", "land", "step_time", "r2_0", "phi3_0", "ankle_profile"), "")
    ankle = config["ankle_profile"]
    if not isinstance(ankle, dict):
        raise SchemaError("ankle_profile", "expected a mapping")
    _check_keys(ankle, ANKLE_KEYS, ("phi1_start", "phi1_end"), "ankle_profile")
    profile = AnkleProfile(**{key: _number(value, f"ankle_profile.{key}") for key, value in ankle.items()})
    task_name = config.get("name", name or "task")
    if not isinstance(task_name, str):
        raise SchemaError("name", f"expected a string, got {task_name!r}")
    return GaitTask(start=_point(config["start"], "start"),
                    land=_point(config["land"], "land"),
                    step_time=_number(config["step_time"], "step_time"),
                    r2_0=_number(config["r2_0"], "r2_0"),
                    phi3_0=_number(config["phi3_0"], "phi3_0"),
                    ankle_profile=profile,
                    samples=_integer(config.get("samples", DEFAULT_SAMPLES), "samples"),
                    resolution=_integer(config.get("resolution", DEFAULT_RESOLUTION), "resolution"),
                    penalty_weight=_number(config.get("penalty_weight", 0.0), "penalty_weight"),
                    contact_radius=_number(config.get("contact_radius", DEFAULT_CONTACT_RADIUS),
                                           "contact_radius"),
                    max_foot_speed=_optional_number(config.get("max_foot_speed"), "max_foot_speed"),
                    name=task_name)


def load_task(path):
    """
    Load a gait task file (YAML or JSON).

    Returns:
        GaitTask
    """
    return parse_task(_read_mapping(path))


def load_optimizer_options(path, **overrides):
    """
    Optimizer options from the optional optimizer block of a task file. Keyword arguments that are
    not None replace file values.
    """
    block = _read_mapping(path).get("optimizer", {}) or {}
    if not isinstance(block, dict):
        raise SchemaError("optimizer", "expected a mapping")
    _check_keys(block, OPTIMIZER_KEYS, (), "optimizer")
    settings = {}
    for key, value in block.items():
        if key in ("max_evaluations", "restarts", "seed", "init_attempts"):
            settings[key] = _integer(value, f"optimizer.{key}")
        else:
            settings[key] = _number(value, f"optimizer.{key}")
    settings.update({key: value for key, value in overrides.items() if value is not None})
    return OptimizerOptions(**settings)


def load_reference_gait(path):
    """
    Load a joint space reference gait from a CSV file with header t,theta1,...,theta5. Lines
    starting with # are comments; a "# provenance: ..." line sets the provenance note.

    Returns:
        ReferenceGait
    """
    if not exists(path):
        raise FileNotFoundError(f"{path} does not exist")
    provenance = ""
    with open(path) as ref_file:
        for line in ref_file:
            if not line.startswith("#"):
                break
            if line[1:].strip().startswith("provenance:"):
                provenance = line.split("provenance:", 1)[1].strip()
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    if list(frame.columns) != REFERENCE_COLUMNS:
        raise SchemaError("columns", f"expected {','.join(REFERENCE_COLUMNS)}, got {','.join(frame.columns)}")
    if frame.isna().any().any():
        raise SchemaError("values", "missing or non-numeric entries")
    return ReferenceGait(frame["t"].values, frame[ANGLE_COLUMNS].values, provenance)


def save_reference_gait(reference, path):
    frame = pd.DataFrame(np.column_stack([reference.t, reference.theta]), columns=REFERENCE_COLUMNS)
    with open(path, "w") as ref_file:
        if reference.provenance:
            ref_file.write(f"# provenance: {reference.provenance}\n")
        frame.to_csv(ref_file, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote reference gait to %s", path)


def export_trajectory(table, path):
    """
    Write a TrajectoryTable. The format follows the extension: .parquet, .nc, anything else CSV with
    columns t, theta1..5, phi1..5, x5, y5, vx5, vy5, T1..T5 at full double precision.
    """
    if path.endswith(".nc"):
        table.to_dataset().to_netcdf(path)
    elif path.endswith(".parquet"):
        table.to_dataframe().to_parquet(path)
    else:
        table.to_dataframe().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %d trajectory samples to %s", table.num_rows, path)


def load_trajectory(path):
    """
    Read an exported trajectory from CSV or parquet.

    Returns:
        pandas.DataFrame with the trajectory columns
    """
    if not exists(path):
        raise FileNotFoundError(f"{path} does not exist")
    if path.endswith(".parquet"):
        frame = pd.read_parquet(path)
    else:
        frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise SchemaError("columns", f"unexpected trajectory columns {','.join(frame.columns)}")
    return frame


def save_control_points(control_points, path, **metadata):
    """
    Write the gait control points as JSON blocks Pr, Pphi, Pp, Pz plus optional metadata entries.
    """
    record = {name: getattr(control_points, name).tolist() for name in GaitControlPoints.BLOCK_ROWS}
    record.update(metadata)
    with open(path, "w") as gait_file:
        json.dump(record, gait_file, indent=2)
    logger.info("wrote control points to %s", path)


def load_control_points(path):
    config = _read_mapping(path)
    blocks = {}
    for name, rows in GaitControlPoints.BLOCK_ROWS.items():
        if name not in config:
            raise SchemaError(name, "missing field")
        block = config[name]
        if not isinstance(block, list) or len(block) != rows:
            raise SchemaError(name, f"expected {rows} points")
        blocks[name] = np.array([_point(p, f"{name}[{i}]") for i, p in enumerate(block)])
    return GaitControlPoints(**blocks)


def load_force_trace(path, column=None, sample_time=DEFAULT_SAMPLE_TIME):
    """
    Load one crutch force log.

    Args:
        path: CSV file with one or more force columns in newtons; a column named t is ignored
        column: force column to use; required when the file has several force columns
        sample_time: seconds between samples

    Returns:
        ForceTrace
    """
    if not exists(path):
        raise FileNotFoundError(f"{path} does not exist")
    frame = pd.read_csv(path, float_precision="round_trip")
    candidates = [c for c in frame.columns if c != "t"]
    if column is None:
        if len(candidates) != 1:
            raise SchemaError("column", f"choose one of {', '.join(candidates)} in {path}")
        column = candidates[0]
    if column not in frame.columns:
        raise SchemaError("column", f"{column} not found in {path}")
    values = frame[column]
    if values.isna().any() or not np.issubdtype(values.dtype, np.number):
        raise SchemaError(column, "missing or non-numeric force samples")
    return ForceTrace(values.values.astype(float), sample_time)
