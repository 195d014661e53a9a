"""Reading fleet description files.

A fleet file is a YAML mapping::

    units:
      - id: "1"
        a: 0.022
        b: 0.0001375
        p_max: 160        # optional, defaults to a/b
    reference:          # optional published values to compare against
      breakpoints: [96, 150]
      allocations:
        - pt: 200
          loads: {"1": 80, "2": 120}

Unknown keys are rejected with their line and column.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .curves import EfficiencyCurve, Fleet, Unit
from .errors import DispatchError

_FLOAT_RE = re.compile(r"^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")

UNIT_KEYS = {"id", "a", "b", "p_max"}
TOP_KEYS = {"units", "reference"}
REFERENCE_KEYS = {"breakpoints", "allocations"}
ALLOCATION_KEYS = {"pt", "loads"}


class FleetFileError(DispatchError):
    def __init__(self, message, line=None, column=None, source=None):
        where = source or "<fleet>"
        if line is not None:
            where += f":{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ReferenceAllocation:
    p_t: float
    loads: dict


@dataclass(frozen=True)
class FleetFile:
    fleet: Fleet
    reference_breakpoints: tuple = ()
    reference_allocations: tuple = field(default=())
    source: str = "<fleet>"


class _Parser:
    def __init__(self, source):
        self.source = source

    def fail(self, node, message):
        mark = node.start_mark if node is not None else None
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise FleetFileError(message, line, col, self.source)

    def mapping(self, node, allowed, what):
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key not in allowed:
                self.fail(key_node, f"unknown key {key!r} in {what} "
                                    f"(allowed: {', '.join(sorted(allowed))})")
            if key in out:
                self.fail(key_node, f"duplicate key {key!r} in {what}")
            out[key] = value_node
        return out

    def sequence(self, node, what):
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, f"{what} must be a list")
        return node.value

    def number(self, node, what):
        if not isinstance(node, yaml.ScalarNode) or not _FLOAT_RE.match(node.value.strip()):
            self.fail(node, f"{what} must be a number")
        value = float(node.value)
        if not math.isfinite(value):
            self.fail(node, f"{what} must be finite")
        return value

    def text(self, node, what):
        if not isinstance(node, yaml.ScalarNode) or not node.value.strip():
            self.fail(node, f"{what} must be a non-empty string")
        return node.value.strip()

    def unit(self, node, index):
        fields = self.mapping(node, UNIT_KEYS, f"unit #{index}")
        for required in ("id", "a", "b"):
            if required not in fields:
                self.fail(node, f"unit #{index} is missing {required!r}")
        uid = self.text(fields["id"], "unit id")
        a = self.number(fields["a"], f"unit {uid}: a")
        b = self.number(fields["b"], f"unit {uid}: b")
        p_max = self.number(fields["p_max"], f"unit {uid}: p_max") if "p_max" in fields else None
        return Unit(uid, EfficiencyCurve(a, b, p_max)), fields["id"]

    def document(self, root):
        if root is None:
            raise FleetFileError("empty document", source=self.source)
        top = self.mapping(root, TOP_KEYS, "fleet file")
        if "units" not in top:
            self.fail(root, "missing top-level key 'units'")
        unit_nodes = self.sequence(top["units"], "units")
        if not unit_nodes:
            self.fail(top["units"], "units must not be empty")
        units, seen = [], set()
        for k, node in enumerate(unit_nodes, 1):
            unit, id_node = self.unit(node, k)
            if unit.id in seen:
                self.fail(id_node, f"duplicate unit id {unit.id!r}")
            seen.add(unit.id)
            units.append(unit)
        try:
            fleet = Fleet(tuple(units))
        except DispatchError as exc:
            self.fail(top["units"], str(exc))

        breakpoints, allocations = (), ()
        if "reference" in top:
            ref = self.mapping(top["reference"], REFERENCE_KEYS, "reference")
            if "breakpoints" in ref:
                breakpoints = tuple(
                    self.number(n, "reference breakpoint")
                    for n in self.sequence(ref["breakpoints"], "reference.breakpoints")
                )
            if "allocations" in ref:
                items = []
                for n in self.sequence(ref["allocations"], "reference.allocations"):
                    f = self.mapping(n, ALLOCATION_KEYS, "reference allocation")
                    if "pt" not in f or "loads" not in f:
                        self.fail(n, "reference allocation needs 'pt' and 'loads'")
                    loads = {}
                    for kn, vn in self.mapping(f["loads"], set(seen), "reference loads").items():
                        loads[kn] = self.number(vn, f"reference load of {kn}")
                    items.append(ReferenceAllocation(self.number(f["pt"], "pt"), loads))
                allocations = tuple(items)
        return FleetFile(fleet, breakpoints, allocations, self.source)


def parse_fleet(text: str, source: str = "<fleet>") -> FleetFile:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise FleetFileError(problem, mark.line + 1, mark.column + 1, source) from exc
        raise FleetFileError(problem, source=source) from exc
    return _Parser(source).document(root)


def load_fleet(path) -> FleetFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="latin-1")
    except OSError as exc:
        raise FleetFileError(f"cannot read file: {exc.strerror}", source=str(path)) from exc
    return parse_fleet(text, str(path))


def fixture_path(name: str) -> Path:
    """Path of a fleet file shipped with the package (``case1`` or ``case2``)."""
    return Path(__file__).parent / "fixtures" / f"{name}.fleet"
