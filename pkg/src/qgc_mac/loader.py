"""Data loader for bundled documents and shared document parsing."""

from collections.abc import Sequence
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import DocumentError

BUILTIN_ASSIGNMENTS = ("lemma4", "degenerate-qgc")

BUILTIN_EXPERIMENTS = ("example1",)


def _get_data_path(filename: str) -> Path:
    """Get path to a bundled data file."""
    with resources.as_file(
        resources.files("qgc_mac.data").joinpath(filename)
    ) as path:
        return Path(path)


def read_document(path: str | Path) -> Any:
    """Parse a YAML or JSON document from disk."""
    path = Path(path)
    with open(path, "r") as f:
        try:
            return yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise DocumentError(str(path), f"unreadable document: {exc}") from exc


def load_assignment_document(name: str) -> dict[str, Any]:
    """Load a bundled assignment document by name."""
    if name not in BUILTIN_ASSIGNMENTS:
        raise DocumentError(name, f"unknown built-in assignment; choose from {BUILTIN_ASSIGNMENTS}")
    return read_document(_get_data_path(f"assignments/{name}.yaml"))


def load_experiment_document(name: str = "example1") -> dict[str, Any]:
    """Load a bundled simulation experiment config by name."""
    if name not in BUILTIN_EXPERIMENTS:
        raise DocumentError(name, f"unknown built-in experiment; choose from {BUILTIN_EXPERIMENTS}")
    return read_document(_get_data_path(f"experiments/{name}.yaml"))


def parse_number(value: Any, path: str, error: type[DocumentError] = DocumentError) -> float:
    """Parse a float, an int or a decimal/fraction string such as ``"1/3"``."""
    if isinstance(value, bool):
        raise error(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise error(path, f"cannot parse {value!r} as a number") from None
    raise error(path, f"expected a number, got {type(value).__name__}")


def parse_array(
    value: Any,
    path: str,
    shape: tuple[int, ...],
    error: type[DocumentError] = DocumentError,
) -> np.ndarray:
    """Parse a flat or nested list of numbers into an array of ``shape``."""
    flat: list[float] = []

    def walk(node: Any, where: str):
        if isinstance(node, (list, tuple)):
            for i, item in enumerate(node):
                walk(item, f"{where}[{i}]")
        else:
            flat.append(parse_number(node, where, error))

    if not isinstance(value, (list, tuple)):
        raise error(path, "expected an array")
    walk(value, path)
    expected = int(np.prod(shape))
    if len(flat) != expected:
        raise error(path, f"expected {expected} entries, got {len(flat)}")
    return np.array(flat, dtype=float).reshape(shape)


def parse_stochastic(
    value: Any,
    path: str,
    shape: tuple[int, ...],
    tolerance: float,
    error: type[DocumentError] = DocumentError,
    axes: Sequence[str] | None = None,
) -> np.ndarray:
    """
    Parse an array whose last axis holds probability vectors, renormalizing rows.

    Rows are named ``path[i][j]`` in errors, or ``path[a=i,b=j]`` when ``axes`` names
    the leading axes.
    """
    if axes is not None and len(axes) != len(shape) - 1:
        raise ValueError(f"need {len(shape) - 1} axis names, got {len(axes)}")
    table = parse_array(value, path, shape, error)
    for index in np.ndindex(shape[:-1]):
        row = table[index]
        if axes is None:
            where = path + "".join(f"[{i}]" for i in index)
        else:
            where = path + "[" + ",".join(f"{a}={i}" for a, i in zip(axes, index)) + "]"
        if np.any(row < 0):
            raise error(where, "negative probability")
        if abs(row.sum() - 1.0) > tolerance:
            raise error(where, f"row sums to {row.sum():.9g}, not 1")
        table[index] = row / row.sum()
    return table


def require_fields(document: Any, fields: tuple[str, ...], error: type[DocumentError] = DocumentError) -> None:
    """Raise unless ``document`` is a mapping holding every key in ``fields``."""
    if not isinstance(document, dict):
        raise error("$", "document must be a mapping")
    for key in fields:
        if key not in document:
            raise error(key, "missing required field")
