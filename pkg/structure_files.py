# ============================================================================
# structure_files.py
# ============================================================================
"""
Line-oriented text files for structures and maps.

Structure file:
    # comment
    chart x y z
    pi deg 2
      (x y) = x^4+y^4
      (z x) = x
    E deg 1
      (z) = 2
    assert proper false
    note free text kept with the structure

Map file:
    map from p1 p2 p3 to x y z
    x = p1*cos(p1^3*p2)
    y = p1*sin(p1^3*p2)
    z = p3

Blocks named `alpha` hold differential forms, every other block holds a
multivector field. Every error carries a 1-based line and column.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from expr_core import (
    Chart,
    Expr,
    ExprSyntaxError,
    InvalidChart,
    ToolkitError,
    UnknownIdentifier,
    parse_expr,
    print_expr,
)
from jacobi import ContactForm, HomogeneousPoisson, JacobiStructure
from morphism import ASSERTION_FLAGS, MapError, SmoothMap
from multivector import DiffForm, MultiVectorField, sort_sign
from run_config import RunConfig

log = logging.getLogger(__name__)

FORM_BLOCKS = ("alpha",)
KNOWN_FLAGS = ASSERTION_FLAGS + ("z_complete",)

_BLOCK_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s+deg\s+(\d+)$")
_COMPONENT_RE = re.compile(r"^\(([^)]*)\)\s*=\s*(.*)$")
_ASSERT_RE = re.compile(r"^assert\s+([A-Za-z_][A-Za-z_0-9]*)\s+(\S+)$")
_MAP_HEADER_RE = re.compile(r"^map\s+from\s+(.+?)\s+to\s+(.+)$")
_MAP_LINE_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*)$")

Field = Union[MultiVectorField, DiffForm]


class StructureFileError(ToolkitError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


# ============================================================================
# Structure files
# ============================================================================

@dataclass
class StructureFile:
    chart: Chart
    blocks: Dict[str, Field] = field(default_factory=dict)
    assertions: Dict[str, bool] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    source: Optional[str] = None

    def block(self, name: str, degree: Optional[int] = None) -> Field:
        if name not in self.blocks:
            raise StructureFileError(f"missing block '{name}'{self._where()}", 1)
        found = self.blocks[name]
        if degree is not None and found.degree != degree:
            raise StructureFileError(f"block '{name}' has degree {found.degree}, expected {degree}", 1)
        return found

    def _where(self) -> str:
        return f" in {self.source}" if self.source else ""

    def jacobi_structure(self) -> JacobiStructure:
        pi = self.block("pi", 2)
        e = self.blocks.get("E") or MultiVectorField.zero(self.chart, 1)
        if e.degree != 1:
            raise StructureFileError(f"block 'E' has degree {e.degree}, expected 1", 1)
        return JacobiStructure(self.chart, pi, e)

    def homogeneous_poisson(self, cfg: Optional[RunConfig] = None) -> HomogeneousPoisson:
        return HomogeneousPoisson.measured(self.chart, self.block("pi", 2), self.block("Z", 1), cfg,
                                           z_complete=self.assertions.get("z_complete", True))

    def contact_form(self) -> ContactForm:
        return ContactForm(self.chart, self.block("alpha", 1))

    @classmethod
    def from_jacobi(cls, J: JacobiStructure, notes: Optional[List[str]] = None) -> "StructureFile":
        return cls(J.chart, {"pi": J.pi, "E": J.e}, notes=list(notes or []))

    @classmethod
    def from_homogeneous(cls, hp: HomogeneousPoisson, notes: Optional[List[str]] = None) -> "StructureFile":
        return cls(hp.chart, {"pi": hp.pi, "Z": hp.z}, {"z_complete": hp.z_complete}, list(notes or []))


def _strip(raw: str) -> str:
    return raw.split("#", 1)[0].strip()


def _parse_flag(value: str, lineno: int, column: int) -> bool:
    lowered = value.lower()
    if lowered not in ("true", "false"):
        raise StructureFileError(f"flag value must be true or false, got '{value}'", lineno, column)
    return lowered == "true"


def _parse_expression(text: str, chart: Chart, lineno: int, offset: int) -> Expr:
    try:
        return parse_expr(text, chart)
    except ExprSyntaxError as e:
        raise StructureFileError(e.reason, lineno, offset + e.position + 1) from None
    except UnknownIdentifier as e:
        column = offset + (e.position or 0) + 1
        raise StructureFileError(f"unknown identifier '{e.name}'", lineno, column) from None


def _parse_chart(names: List[str], lineno: int) -> Chart:
    try:
        return Chart(tuple(names))
    except InvalidChart as e:
        raise StructureFileError(str(e), lineno) from None


def parse_structure_text(text: str, source: Optional[str] = None) -> StructureFile:
    chart: Optional[Chart] = None
    blocks: Dict[str, Tuple[int, Dict[Tuple[int, ...], Expr]]] = {}
    order: List[str] = []
    current: Optional[str] = None
    assertions: Dict[str, bool] = {}
    notes: List[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        indent = len(raw) - len(raw.lstrip())
        line = _strip(raw)
        if not line:
            continue

        if line.startswith("note ") or line == "note":
            notes.append(raw.strip()[4:].strip())
            continue

        words = line.split()
        if words[0] == "chart":
            if chart is not None:
                raise StructureFileError("chart declared twice", lineno, indent + 1)
            if len(words) < 2:
                raise StructureFileError("chart needs at least one coordinate", lineno, indent + 1)
            chart = _parse_chart(words[1:], lineno)
            continue

        if chart is None:
            raise StructureFileError("expected 'chart' before any other line", lineno, indent + 1)

        m = _ASSERT_RE.match(line)
        if m:
            flag = m.group(1)
            if flag not in KNOWN_FLAGS:
                raise StructureFileError(f"unknown flag '{flag}'", lineno, indent + m.start(1) + 1)
            assertions[flag] = _parse_flag(m.group(2), lineno, indent + m.start(2) + 1)
            continue

        m = _BLOCK_RE.match(line)
        if m:
            name, degree = m.group(1), int(m.group(2))
            if name in blocks:
                raise StructureFileError(f"block '{name}' declared twice", lineno, indent + 1)
            if degree > chart.dim:
                raise StructureFileError(f"degree {degree} exceeds dimension {chart.dim}", lineno,
                                         indent + m.start(2) + 1)
            blocks[name] = (degree, {})
            order.append(name)
            current = name
            continue

        m = _COMPONENT_RE.match(line)
        if m:
            if current is None:
                raise StructureFileError("component line outside a block", lineno, indent + 1)
            degree, coeffs = blocks[current]
            names = m.group(1).split()
            if len(names) != degree:
                raise StructureFileError(f"block '{current}' has degree {degree}, got {len(names)} coordinates",
                                         lineno, indent + 1)
            indices = []
            for n in names:
                if n not in chart:
                    raise StructureFileError(f"unknown coordinate '{n}'", lineno, indent + line.index(n) + 1)
                indices.append(chart.index(n))
            sign, key = sort_sign(indices)
            if sign == 0:
                raise StructureFileError("repeated coordinate in component", lineno, indent + 1)
            if key in coeffs:
                raise StructureFileError(f"component ({' '.join(names)}) given twice", lineno, indent + 1)
            value = _parse_expression(m.group(2), chart, lineno, indent + m.start(2))
            coeffs[key] = value if sign > 0 else -value
            continue

        raise StructureFileError(f"unrecognized line '{line}'", lineno, indent + 1)

    if chart is None:
        raise StructureFileError("no chart declaration", 1)

    fields_: Dict[str, Field] = {}
    for name in order:
        degree, coeffs = blocks[name]
        cls = DiffForm if name in FORM_BLOCKS else MultiVectorField
        fields_[name] = cls(chart, degree, coeffs)
    log.debug("Parsed structure file %s: blocks %s", source or "<text>", ", ".join(order))
    return StructureFile(chart, fields_, assertions, notes, source)


def load_structure_file(path: Union[str, Path]) -> StructureFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StructureFileError(f"cannot read {path}: {e.strerror}", 0) from None
    return parse_structure_text(text, str(path))


def format_structure(sf: StructureFile) -> str:
    lines = [f"note {n}" for n in sf.notes]
    lines.append("chart " + " ".join(sf.chart.names))
    for name, value in sf.blocks.items():
        lines.append(f"{name} deg {value.degree}")
        lines.extend("  " + line for line in value.lines())
    for flag, flag_value in sf.assertions.items():
        lines.append(f"assert {flag} {'true' if flag_value else 'false'}")
    return "\n".join(lines) + "\n"


# ============================================================================
# Map files
# ============================================================================

@dataclass
class MapFile:
    map: SmoothMap
    assertions: Dict[str, bool] = field(default_factory=dict)
    source: Optional[str] = None


def parse_map_text(text: str, source: Optional[str] = None) -> MapFile:
    header: Optional[Tuple[Chart, Chart]] = None
    components: Dict[str, Expr] = {}
    assertions: Dict[str, bool] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        indent = len(raw) - len(raw.lstrip())
        line = _strip(raw)
        if not line:
            continue

        m = _MAP_HEADER_RE.match(line)
        if m:
            if header is not None:
                raise StructureFileError("map header given twice", lineno, indent + 1)
            header = (_parse_chart(m.group(1).split(), lineno), _parse_chart(m.group(2).split(), lineno))
            continue
        if header is None:
            raise StructureFileError("expected 'map from ... to ...' first", lineno, indent + 1)

        m = _ASSERT_RE.match(line)
        if m:
            if m.group(1) not in ASSERTION_FLAGS:
                raise StructureFileError(f"unknown flag '{m.group(1)}'", lineno, indent + m.start(1) + 1)
            assertions[m.group(1)] = _parse_flag(m.group(2), lineno, indent + m.start(2) + 1)
            continue

        m = _MAP_LINE_RE.match(line)
        if not m:
            raise StructureFileError(f"unrecognized line '{line}'", lineno, indent + 1)
        source_chart, target_chart = header
        name = m.group(1)
        if name not in target_chart:
            raise StructureFileError(f"'{name}' is not a target coordinate", lineno, indent + 1)
        if name in components:
            raise StructureFileError(f"component '{name}' given twice", lineno, indent + 1)
        components[name] = _parse_expression(m.group(2), source_chart, lineno, indent + m.start(2))

    if header is None:
        raise StructureFileError("no map header", 1)
    source_chart, target_chart = header
    missing = [n for n in target_chart.names if n not in components]
    if missing:
        raise StructureFileError(f"no component for {', '.join(missing)}", len(text.splitlines()) or 1)
    try:
        phi = SmoothMap(source_chart, target_chart, tuple(components[n] for n in target_chart.names))
    except MapError as e:
        raise StructureFileError(str(e), 1) from None
    return MapFile(phi, assertions, source)


def load_map_file(path: Union[str, Path]) -> MapFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StructureFileError(f"cannot read {path}: {e.strerror}", 0) from None
    return parse_map_text(text, str(path))


def format_map(mf: MapFile) -> str:
    phi = mf.map
    lines = [f"map from {' '.join(phi.source.names)} to {' '.join(phi.target.names)}"]
    lines.extend(f"{n} = {print_expr(c)}" for n, c in zip(phi.target.names, phi.components))
    for flag, value in mf.assertions.items():
        lines.append(f"assert {flag} {'true' if value else 'false'}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    import sys

    for arg in sys.argv[1:] or [str(Path(__file__).parent / "structures" / "lehbel.struct")]:
        sf = load_structure_file(arg)
        print(f"[Structure] {arg}: {', '.join(sf.blocks)} on {sf.chart}")
        print(format_structure(sf), end="")
