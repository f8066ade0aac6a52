"""Touchstone v1 reader for unit-cell S-parameter sweeps.

Supports .s1p (3 columns: f, S11 pair) and .s2p (9 columns: f, then
S11 S21 S12 S22 pairs, standard column order) with RI, MA and DB value
formats. Every parse error carries the 1-based line number.

A cell manifest is a JSON file naming one or more cells and, per cell, the
state id -> Touchstone path map (paths relative to the manifest):

    {
      "cells": [
        {
          "name": "pin_cell",
          "kind": "reflection",            # or "transmission"
          "use_effective_s11": false,       # fold |S11| loss into the phase state
          "states": {"on": "pin_on.s1p", "off": "pin_off.s1p"}
        }
      ]
    }
"""

from __future__ import annotations

import cmath
import json
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TouchstoneError

_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}

_CONVERTERS = {
    "RI": lambda a, b: complex(a, b),
    "MA": lambda a, b: a * cmath.exp(1j * math.radians(b)),
    "DB": lambda a, b: 10.0 ** (a / 20.0) * cmath.exp(1j * math.radians(b)),
}

_PASSIVITY_SLACK = 1e-6


@dataclass(frozen=True)
class StateRecord:
    """One cell state's frequency sweep."""

    state_id: str
    frequencies_hz: np.ndarray
    s11: np.ndarray
    s21: np.ndarray | None = None
    reference_ohm: float = 50.0

    @property
    def port_count(self) -> int:
        return 1 if self.s21 is None else 2


def _parse_option_line(tokens, line_no):
    unit = "GHZ"
    fmt = "MA"
    reference = 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in _FREQ_UNITS:
            unit = tok
        elif tok in _CONVERTERS:
            fmt = tok
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise TouchstoneError(f"only S-parameters are supported, got '{tok}'", line_no)
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError("'R' must be followed by a reference resistance", line_no)
            try:
                reference = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"bad reference resistance '{tokens[i + 1]}'", line_no) from None
            i += 1
        else:
            raise TouchstoneError(f"unexpected token '{tokens[i]}' in option line", line_no)
        i += 1
    return unit, fmt, reference


def parse_touchstone(data, state_id: str) -> StateRecord:
    """Parse Touchstone v1 text (str or bytes) into a StateRecord.

    The port count is inferred from the data row arity: 3 columns for a
    1-port file, 9 for a 2-port file.
    """
    if isinstance(data, bytes):
        data = data.decode("ascii", errors="replace")
    unit = fmt = None
    reference = 50.0
    freqs: list[float] = []
    rows: list[list[float]] = []
    arity = None
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if unit is not None:
                raise TouchstoneError("multiple option lines", line_no)
            unit, fmt, reference = _parse_option_line(line[1:].split(), line_no)
            continue
        if unit is None:
            raise TouchstoneError("data before option line", line_no)
        parts = line.split()
        if arity is None:
            if len(parts) == 3:
                arity = 3
            elif len(parts) == 9:
                arity = 9
            else:
                raise TouchstoneError(
                    f"expected 3 (.s1p) or 9 (.s2p) columns, got {len(parts)}", line_no
                )
        elif len(parts) != arity:
            raise TouchstoneError(f"expected {arity} columns, got {len(parts)}", line_no)
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise TouchstoneError(f"non-numeric value in data row: '{line}'", line_no) from None
        f_hz = values[0] * _FREQ_UNITS[unit]
        if freqs and f_hz <= freqs[-1]:
            raise TouchstoneError(
                f"frequencies must be strictly increasing ({f_hz:g} Hz after {freqs[-1]:g} Hz)",
                line_no,
            )
        freqs.append(f_hz)
        rows.append(values[1:])
    if unit is None:
        raise TouchstoneError("no option line found")
    if not rows:
        raise TouchstoneError("no data rows found")
    convert = _CONVERTERS[fmt]
    s11 = np.array([convert(r[0], r[1]) for r in rows])
    s21 = np.array([convert(r[2], r[3]) for r in rows]) if arity == 9 else None
    record = StateRecord(
        state_id=state_id,
        frequencies_hz=np.array(freqs),
        s11=s11,
        s21=s21,
        reference_ohm=reference,
    )
    _warn_if_active(record)
    return record


def _warn_if_active(record: StateRecord):
    worst = float(np.max(np.abs(record.s11)))
    if record.s21 is not None:
        worst = max(worst, float(np.max(np.abs(record.s21))))
    if worst > 1.0 + _PASSIVITY_SLACK:
        warnings.warn(
            f"state '{record.state_id}': |S| reaches {worst:.6f} > 1, data looks active",
            stacklevel=3,
        )


def read_touchstone(path, state_id: str | None = None) -> StateRecord:
    with open(path, "rb") as fh:
        data = fh.read()
    if state_id is None:
        state_id = os.path.splitext(os.path.basename(path))[0]
    try:
        return parse_touchstone(data, state_id)
    except TouchstoneError as exc:
        raise TouchstoneError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class CellSpec:
    """One cell's entry from a manifest: resolved file paths per state."""

    name: str
    states: tuple[tuple[str, str], ...]
    kind: str = "reflection"
    use_effective_s11: bool = False


def load_cell_manifest(path) -> list[CellSpec]:
    """Read a manifest JSON and resolve its state paths."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or "cells" not in doc:
        raise ConfigError(f"{path}: manifest must be an object with a 'cells' list")
    base = os.path.dirname(os.path.abspath(path))
    cells = []
    for i, entry in enumerate(doc["cells"]):
        where = f"{path}: cells[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be an object")
        unknown = set(entry) - {"name", "kind", "use_effective_s11", "states"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        name = entry.get("name")
        if not name or not isinstance(name, str):
            raise ConfigError(f"{where}: 'name' is required")
        kind = entry.get("kind", "reflection")
        if kind not in ("reflection", "transmission"):
            raise ConfigError(f"{where}: kind must be 'reflection' or 'transmission', got '{kind}'")
        states = entry.get("states")
        if not isinstance(states, dict) or not states:
            raise ConfigError(f"{where}: 'states' must map state ids to file paths")
        resolved = tuple(
            (state_id, os.path.join(base, rel)) for state_id, rel in states.items()
        )
        for state_id, spath in resolved:
            if not os.path.exists(spath):
                raise ConfigError(f"{where}: state '{state_id}' file not found: {spath}")
        cells.append(
            CellSpec(
                name=name,
                states=resolved,
                kind=kind,
                use_effective_s11=bool(entry.get("use_effective_s11", False)),
            )
        )
    if not cells:
        raise ConfigError(f"{path}: manifest lists no cells")
    return cells
