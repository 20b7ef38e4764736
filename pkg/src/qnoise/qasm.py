"""OpenQASM 2.0 subset reader/writer.

Accepted: the ``OPENQASM 2.0;`` header, ``include "qelib1.inc";``, exactly one
``qreg`` and at most one ``creg``, gate statements from the vocabulary,
``measure q[i] -> c[j];``, ``reset q[i];`` and ``barrier`` (ignored). Angle
arguments are arithmetic over numbers and ``pi``.
"""
from __future__ import annotations

import ast
import math
import operator
import re

from .circuit import DEFAULT_VOCABULARY, Circuit, GateOp, GateVocabulary
from .errors import InvalidArgument, ParseError, UnsupportedGateError
from .jsonio import fmt_float

_QREG = re.compile(r"^qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_CREG = re.compile(r"^creg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_MEASURE = re.compile(r"^measure\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]\s*->\s*([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_GATE = re.compile(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?\s+(.+)$", re.S)
_ARG = re.compile(r"^([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def eval_angle(expr: str) -> float:
    """Evaluate e.g. ``pi/2``, ``-3*pi/4`` or ``0.25`` to radians."""
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"bad angle expression '{expr}'") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported angle expression '{expr}'")

    try:
        value = ev(tree)
    except ZeroDivisionError:
        raise ValueError(f"division by zero in '{expr}'") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite angle '{expr}'")
    return value


def _statements(text: str):
    """Yield (statement, line, column) with comments stripped."""
    buf: list[str] = []
    start = None
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith("//", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            stmt = "".join(buf).strip()
            if stmt:
                yield stmt, start[0], start[1]
            elif start is None:
                raise ParseError("empty statement", line, col)
            buf, start = [], None
        else:
            if start is None and not ch.isspace():
                start = (line, col)
            buf.append(ch)
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1
        i += 1
    if "".join(buf).strip():
        raise ParseError("missing ';' at end of statement", start[0], start[1])


def parse_qasm(text: str, circuit_id: str = "qasm",
               vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> Circuit:
    stmts = list(_statements(text))
    if not stmts:
        raise ParseError("empty program", 1, 1)
    header, hl, hc = stmts[0]
    if not re.fullmatch(r"OPENQASM\s+2(\.0)?", header):
        raise ParseError(f"expected 'OPENQASM 2.0;' header, got '{header}'", hl, hc)

    qreg = creg = None
    size = 0
    ops: list[GateOp] = []

    def qubit(arg: str, line: int, col: int) -> int:
        m = _ARG.match(arg.strip())
        if not m:
            raise ParseError(f"expected qubit argument like q[0], got '{arg.strip()}'", line, col)
        if qreg is None:
            raise ParseError("gate before qreg declaration", line, col)
        if m.group(1) != qreg:
            raise ParseError(f"unknown register '{m.group(1)}'", line, col)
        idx = int(m.group(2))
        if idx >= size:
            raise ParseError(f"qubit index {idx} out of range for {qreg}[{size}]", line, col)
        return idx

    for stmt, line, col in stmts[1:]:
        if stmt.startswith("include"):
            if not re.fullmatch(r'include\s+"[^"]+"', stmt):
                raise ParseError(f"malformed include '{stmt}'", line, col)
            continue
        if stmt.startswith("qreg"):
            m = _QREG.match(stmt)
            if not m:
                raise ParseError(f"malformed qreg declaration '{stmt}'", line, col)
            if qreg is not None:
                raise ParseError("only one qreg is supported", line, col)
            qreg, size = m.group(1), int(m.group(2))
            continue
        if stmt.startswith("creg"):
            m = _CREG.match(stmt)
            if not m:
                raise ParseError(f"malformed creg declaration '{stmt}'", line, col)
            if creg is not None:
                raise ParseError("only one creg is supported", line, col)
            creg = m.group(1)
            continue
        if stmt.startswith("measure"):
            m = _MEASURE.match(stmt)
            if not m:
                raise ParseError(f"malformed measure '{stmt}'", line, col)
            if creg is None or m.group(3) != creg:
                raise ParseError(f"unknown classical register '{m.group(3)}'", line, col)
            ops.append(GateOp(vocabulary["measure"], (qubit(f"{m.group(1)}[{m.group(2)}]", line, col),)))
            continue
        if stmt.startswith("barrier"):
            continue
        m = _GATE.match(stmt)
        if not m:
            raise ParseError(f"cannot parse statement '{stmt}'", line, col)
        name, args, targets = m.group(1), m.group(2), m.group(3)
        if name not in vocabulary or name == "measure":
            raise UnsupportedGateError(name, line, col)
        kind = vocabulary[name]
        params = []
        if args is not None and args.strip():
            try:
                params = [eval_angle(a) for a in args.split(",")]
            except ValueError as exc:
                raise ParseError(str(exc), line, col) from None
        if len(params) != kind.param_count:
            raise ParseError(f"{name} expects {kind.param_count} parameter(s), got {len(params)}", line, col)
        qubits = tuple(qubit(a, line, col) for a in targets.split(","))
        try:
            ops.append(GateOp(kind, qubits, tuple(params)))
        except InvalidArgument as exc:
            raise ParseError(str(exc), line, col) from None

    if qreg is None:
        raise ParseError("no qreg declared", hl, hc)
    try:
        return Circuit(size, tuple(ops), circuit_id)
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from None


def emit_qasm(circuit: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";',
             f"qreg q[{circuit.num_qubits}];", f"creg c[{circuit.num_qubits}];"]
    for op in circuit.ops:
        if op.name == "measure":
            lines.append(f"measure q[{op.qubits[0]}] -> c[{op.qubits[0]}];")
            continue
        args = f"({','.join(fmt_float(p) for p in op.params)})" if op.params else ""
        lines.append(f"{op.name}{args} {','.join(f'q[{q}]' for q in op.qubits)};")
    return "\n".join(lines) + "\n"
