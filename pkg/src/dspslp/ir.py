"""Minimal straight-line SSA IR: types, textual parser, printer, validator.

Textual format (`.sir`, UTF-8, LF, one instruction per line):

    ; comment
    func @kernel(%b: i8, %alpha: u12) {
      %a0 = load i8 @a[0]
      %c0 = mul i8 %a0, %b
      %w = sext i16 %c0
      store i16 %w, @c[0]
      %r = call i48 @silvia.mul2x8(%a0, %a1, %b)
      ret
    }
    ;; carried %c0 -> %a0 distance 1

Types are `i<bits>` (signed) or `u<bits>` (unsigned), 1..64 bits.  Values
are `%name`, array cells `@array[index]` with a constant index.  A bare
integer literal is a constant operand and takes the instruction's type.
`ret` is optional for functions that return nothing.  Lines starting with
`;;` are directives (currently only `carried`, consumed by the dependence
graph); `;` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class Signedness(Enum):
    SIGNED = "i"
    UNSIGNED = "u"

    def __repr__(self):
        return self.name


class Opcode(Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    SEXT = "sext"
    ZEXT = "zext"
    TRUNC = "trunc"
    LOAD = "load"
    STORE = "store"
    CALL = "call"
    RET = "ret"


ARITH_OPS = frozenset({Opcode.ADD, Opcode.SUB, Opcode.MUL})
EXT_OPS = frozenset({Opcode.SEXT, Opcode.ZEXT, Opcode.TRUNC})

MIN_WIDTH = 1
MAX_WIDTH = 64


def value_range(width: int, signedness: Signedness) -> tuple[int, int]:
    if signedness is Signedness.SIGNED:
        return -(1 << (width - 1)), (1 << (width - 1)) - 1
    return 0, (1 << width) - 1


def fits(value: int, width: int, signedness: Signedness) -> bool:
    lo, hi = value_range(width, signedness)
    return lo <= value <= hi


def wrap(value: int, width: int, signedness: Signedness) -> int:
    """Two's-complement wrap of an integer to the canonical value of a type."""
    bits = value & ((1 << width) - 1)
    if signedness is Signedness.SIGNED and bits >= 1 << (width - 1):
        bits -= 1 << width
    return bits


def to_bits(value: int, width: int) -> int:
    """Raw bit pattern of a value at the given width (non-negative)."""
    return value & ((1 << width) - 1)


@dataclass(frozen=True)
class Ref:
    """Use of an SSA value (instruction result or function argument)."""

    name: str


@dataclass(frozen=True)
class Const:
    value: int
    width: int
    signedness: Signedness


@dataclass(frozen=True)
class MemLoc:
    array: str
    index: int


Operand = Ref | Const | MemLoc


@dataclass(eq=False)
class Instruction:
    """One IR instruction.  Identity-compared: passes track instructions
    by object across reordering, so two structurally equal instructions
    are still distinct."""

    opcode: Opcode
    result: str | None
    width: int
    signedness: Signedness
    operands: list
    callee: str | None = None

    def refs(self):
        return [op for op in self.operands if isinstance(op, Ref)]

    def memlocs(self):
        return [op for op in self.operands if isinstance(op, MemLoc)]


@dataclass(eq=False)
class BasicBlock:
    instructions: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def index_of(self, instr: Instruction) -> int:
        return self.instructions.index(instr)


@dataclass(frozen=True)
class Argument:
    name: str
    width: int
    signedness: Signedness


@dataclass(frozen=True)
class CarriedDep:
    """Loop-carried dependence annotation between two result values."""

    src: str
    dst: str
    distance: int


@dataclass(eq=False)
class Function:
    name: str
    args: list
    body: BasicBlock
    carried: list = field(default_factory=list)


class IRError(Exception):
    pass


class ParseError(IRError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class UseBeforeDef(IRError):
    pass


class DuplicateDef(IRError):
    pass


class WidthMismatch(IRError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "use-before-def" | "duplicate-def" | "width-mismatch" | "malformed"
    message: str
    index: int | None = None


_TYPE_RE = re.compile(r"([iu])(\d+)$")
_NAME = r"[A-Za-z0-9_.][A-Za-z0-9_.]*"
_VALUE_RE = re.compile(rf"%({_NAME})$|(-?\d+)$")
_MEMLOC_RE = re.compile(rf"@({_NAME})\[(\d+)\]$")
_FUNC_RE = re.compile(rf"func\s+@({_NAME})\s*\((.*)\)\s*\{{$")
_ASSIGN_RE = re.compile(rf"%({_NAME})\s*=\s*(\S+)\s+(\S+)(?:\s+(.*))?$")
_CALL_RE = re.compile(rf"@({_NAME})\s*\((.*)\)$")
_CARRIED_RE = re.compile(
    rf"carried\s+%({_NAME})\s*->\s*%({_NAME})\s+distance\s+(\d+)$"
)


def _parse_type(tok: str, lineno: int, col: int) -> tuple[int, Signedness]:
    m = _TYPE_RE.match(tok)
    if not m:
        raise ParseError(lineno, col, f"expected a type like i8 or u12, got {tok!r}")
    width = int(m.group(2))
    if not MIN_WIDTH <= width <= MAX_WIDTH:
        raise ParseError(lineno, col, f"width {width} out of range 1..64")
    sign = Signedness.SIGNED if m.group(1) == "i" else Signedness.UNSIGNED
    return width, sign


def _parse_value(tok: str, width: int, sign: Signedness, lineno: int) -> Operand:
    tok = tok.strip()
    m = _VALUE_RE.match(tok)
    if not m:
        raise ParseError(lineno, 0, f"expected %value or integer, got {tok!r}")
    if m.group(1) is not None:
        return Ref(m.group(1))
    value = int(m.group(2))
    if not fits(value, width, sign):
        raise ParseError(lineno, 0, f"constant {value} does not fit {sign.value}{width}")
    return Const(value, width, sign)


def _parse_memloc(tok: str, lineno: int) -> MemLoc:
    m = _MEMLOC_RE.match(tok.strip())
    if not m:
        raise ParseError(lineno, 0, f"expected @array[index], got {tok.strip()!r}")
    return MemLoc(m.group(1), int(m.group(2)))


def _split_args(text: str) -> list:
    text = text.strip()
    return [t.strip() for t in text.split(",")] if text else []


def parse(text: str) -> Function:
    """Parse textual IR into a Function; raises on syntax or SSA violations."""
    func = None
    in_body = False
    closed = False
    carried = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(";;"):
            body = line[2:].strip()
            m = _CARRIED_RE.match(body)
            if not m:
                raise ParseError(lineno, 0, f"unknown directive {body!r}")
            carried.append(CarriedDep(m.group(1), m.group(2), int(m.group(3))))
            continue
        if ";" in line:
            line = line[: line.index(";")].strip()
        if not line:
            continue

        if func is None:
            m = _FUNC_RE.match(line)
            if not m:
                raise ParseError(lineno, 0, "expected 'func @name(...) {'")
            args = []
            for spec in _split_args(m.group(2)):
                am = re.match(rf"%({_NAME})\s*:\s*(\S+)$", spec)
                if not am:
                    raise ParseError(lineno, 0, f"bad parameter {spec!r}")
                w, s = _parse_type(am.group(2), lineno, 0)
                args.append(Argument(am.group(1), w, s))
            func = Function(m.group(1), args, BasicBlock())
            in_body = True
            continue

        if line == "}":
            if not in_body:
                raise ParseError(lineno, 0, "unexpected '}'")
            in_body = False
            closed = True
            continue

        if not in_body:
            raise ParseError(lineno, 0, f"unexpected text outside function: {line!r}")

        func.body.instructions.append(_parse_instruction(line, lineno))

    if func is None:
        raise ParseError(1, 0, "no function found")
    if not closed:
        raise ParseError(len(text.splitlines()) or 1, 0, "missing closing '}'")
    func.carried = carried
    _raise_first(func)
    return func


def _parse_instruction(line: str, lineno: int) -> Instruction:
    if line == "ret":
        return Instruction(Opcode.RET, None, 0, Signedness.SIGNED, [])

    if line.startswith("ret "):
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise ParseError(lineno, 0, "expected 'ret <type> <value>'")
        w, s = _parse_type(parts[1], lineno, 0)
        return Instruction(Opcode.RET, None, w, s, [_parse_value(parts[2], w, s, lineno)])

    if line.startswith("store "):
        rest = line[len("store "):]
        parts = rest.split(None, 1)
        if len(parts) != 2 or "," not in parts[1]:
            raise ParseError(lineno, 0, "expected 'store <type> <value>, @array[index]'")
        w, s = _parse_type(parts[0], lineno, 0)
        val_tok, loc_tok = parts[1].split(",", 1)
        return Instruction(
            Opcode.STORE, None, w, s,
            [_parse_value(val_tok, w, s, lineno), _parse_memloc(loc_tok, lineno)],
        )

    m = _ASSIGN_RE.match(line)
    if not m:
        raise ParseError(lineno, 0, f"cannot parse instruction {line!r}")
    result, opname, type_tok, rest = m.group(1), m.group(2), m.group(3), m.group(4) or ""
    try:
        opcode = Opcode(opname)
    except ValueError:
        raise ParseError(lineno, 0, f"unknown opcode {opname!r}") from None
    if opcode in (Opcode.STORE, Opcode.RET):
        raise ParseError(lineno, 0, f"{opname} does not produce a result")
    w, s = _parse_type(type_tok, lineno, 0)

    if opcode in ARITH_OPS:
        toks = _split_args(rest)
        if len(toks) != 2:
            raise ParseError(lineno, 0, f"{opname} takes exactly two operands")
        ops = [_parse_value(t, w, s, lineno) for t in toks]
    elif opcode in EXT_OPS:
        ops = [_parse_value(rest, w, s, lineno)]
        if not isinstance(ops[0], Ref):
            raise ParseError(lineno, 0, f"{opname} operand must be a value reference")
    elif opcode is Opcode.LOAD:
        ops = [_parse_memloc(rest, lineno)]
    elif opcode is Opcode.CALL:
        cm = _CALL_RE.match(rest.strip())
        if not cm:
            raise ParseError(lineno, 0, "expected 'call <type> @callee(args...)'")
        ops = []
        for t in _split_args(cm.group(2)):
            op = _parse_value(t, w, s, lineno)
            if not isinstance(op, Ref):
                raise ParseError(lineno, 0, "call arguments must be value references")
            ops.append(op)
        return Instruction(Opcode.CALL, result, w, s, ops, cm.group(1))
    else:
        raise ParseError(lineno, 0, f"unknown opcode {opname!r}")
    return Instruction(opcode, result, w, s, ops)


def _raise_first(f: Function):
    for d in validate(f):
        exc = {
            "use-before-def": UseBeforeDef,
            "duplicate-def": DuplicateDef,
            "width-mismatch": WidthMismatch,
        }.get(d.kind, IRError)
        raise exc(d.message)


def type_token(width: int, signedness: Signedness) -> str:
    return f"{signedness.value}{width}"


def _operand_token(op: Operand) -> str:
    if isinstance(op, Ref):
        return f"%{op.name}"
    if isinstance(op, Const):
        return str(op.value)
    return f"@{op.array}[{op.index}]"


def print_function(f: Function) -> str:
    """Deterministic canonical text; parse(print_function(f)) round-trips."""
    params = ", ".join(f"%{a.name}: {type_token(a.width, a.signedness)}" for a in f.args)
    lines = [f"func @{f.name}({params}) {{"]
    for ins in f.body.instructions:
        t = type_token(ins.width, ins.signedness)
        if ins.opcode is Opcode.RET:
            if ins.operands:
                lines.append(f"  ret {t} {_operand_token(ins.operands[0])}")
            else:
                lines.append("  ret")
        elif ins.opcode is Opcode.STORE:
            val, loc = ins.operands
            lines.append(f"  store {t} {_operand_token(val)}, {_operand_token(loc)}")
        elif ins.opcode is Opcode.CALL:
            args = ", ".join(_operand_token(op) for op in ins.operands)
            lines.append(f"  %{ins.result} = call {t} @{ins.callee}({args})")
        else:
            args = ", ".join(_operand_token(op) for op in ins.operands)
            lines.append(f"  %{ins.result} = {ins.opcode.value} {t} {args}")
    lines.append("}")
    for c in f.carried:
        lines.append(f";; carried %{c.src} -> %{c.dst} distance {c.distance}")
    return "\n".join(lines) + "\n"


def structural_key(f: Function):
    """Hashable structural identity, for round-trip and equality checks."""
    return (
        f.name,
        tuple(f.args),
        tuple(
            (i.opcode, i.result, i.width, i.signedness, tuple(i.operands), i.callee)
            for i in f.body.instructions
        ),
        tuple(f.carried),
    )


def validate(f: Function) -> list:
    """Structural and type checks; one Diagnostic per violation, empty if valid."""
    diags = []
    defined = {}  # name -> def index (-1 for arguments)
    widths = {}  # name -> (width, signedness)

    for a in f.args:
        if a.name in defined:
            diags.append(Diagnostic("duplicate-def", f"argument %{a.name} defined twice"))
        defined[a.name] = -1
        widths[a.name] = (a.width, a.signedness)
        if not MIN_WIDTH <= a.width <= MAX_WIDTH:
            diags.append(Diagnostic("malformed", f"argument %{a.name} width {a.width} out of range"))

    array_types = {}

    def operand_width(op):
        if isinstance(op, Ref):
            return widths.get(op.name)
        if isinstance(op, Const):
            return (op.width, op.signedness)
        return None

    ret_seen = False
    for idx, ins in enumerate(f.body.instructions):
        where = f"instruction {idx}"
        if ins.opcode is not Opcode.RET and not MIN_WIDTH <= ins.width <= MAX_WIDTH:
            diags.append(Diagnostic("malformed", f"{where}: width {ins.width} out of range", idx))
        if ret_seen:
            diags.append(Diagnostic("malformed", f"{where}: instruction after ret", idx))

        for op in ins.operands:
            if isinstance(op, Ref):
                at = defined.get(op.name)
                if at is None or at >= idx:
                    diags.append(Diagnostic("use-before-def", f"{where}: %{op.name} used before definition", idx))
            elif isinstance(op, Const):
                if not fits(op.value, op.width, op.signedness):
                    diags.append(Diagnostic("malformed", f"{where}: constant {op.value} does not fit its type", idx))
            elif isinstance(op, MemLoc):
                if op.index < 0:
                    diags.append(Diagnostic("malformed", f"{where}: negative array index", idx))

        op = ins.opcode
        if op in ARITH_OPS:
            if len(ins.operands) != 2 or ins.memlocs():
                diags.append(Diagnostic("malformed", f"{where}: {op.value} takes two value operands", idx))
            else:
                for o in ins.operands:
                    ow = operand_width(o)
                    if ow is not None and ow[0] != ins.width:
                        diags.append(Diagnostic(
                            "width-mismatch",
                            f"{where}: {op.value} operand is {ow[0]} bits, result is {ins.width}", idx))
        elif op in EXT_OPS:
            if len(ins.operands) != 1 or not isinstance(ins.operands[0], Ref):
                diags.append(Diagnostic("malformed", f"{where}: {op.value} takes one value operand", idx))
            else:
                ow = operand_width(ins.operands[0])
                if ow is not None:
                    if op is Opcode.TRUNC and not ow[0] > ins.width:
                        diags.append(Diagnostic("width-mismatch", f"{where}: trunc must narrow", idx))
                    if op in (Opcode.SEXT, Opcode.ZEXT) and not ow[0] < ins.width:
                        diags.append(Diagnostic("width-mismatch", f"{where}: {op.value} must widen", idx))
        elif op is Opcode.LOAD:
            if len(ins.operands) != 1 or not isinstance(ins.operands[0], MemLoc):
                diags.append(Diagnostic("malformed", f"{where}: load takes one array cell", idx))
            elif ins.result is None:
                diags.append(Diagnostic("malformed", f"{where}: load must produce a result", idx))
        elif op is Opcode.STORE:
            if (len(ins.operands) != 2 or isinstance(ins.operands[0], MemLoc)
                    or not isinstance(ins.operands[1], MemLoc)):
                diags.append(Diagnostic("malformed", f"{where}: store takes a value and an array cell", idx))
            else:
                ow = operand_width(ins.operands[0])
                if ow is not None and ow[0] != ins.width:
                    diags.append(Diagnostic(
                        "width-mismatch", f"{where}: stored value is {ow[0]} bits, store is {ins.width}", idx))
        elif op is Opcode.CALL:
            if not ins.callee:
                diags.append(Diagnostic("malformed", f"{where}: call without callee", idx))
            if ins.memlocs():
                diags.append(Diagnostic("malformed", f"{where}: call arguments must be values", idx))
        elif op is Opcode.RET:
            ret_seen = True
            if len(ins.operands) > 1:
                diags.append(Diagnostic("malformed", f"{where}: ret takes at most one value", idx))
            elif ins.operands:
                ow = operand_width(ins.operands[0])
                if ow is not None and ow[0] != ins.width:
                    diags.append(Diagnostic("width-mismatch", f"{where}: returned value width mismatch", idx))

        for loc in ins.memlocs():
            seen = array_types.get(loc.array)
            if seen is None:
                array_types[loc.array] = (ins.width, ins.signedness, idx)
            elif (ins.width, ins.signedness) != seen[:2]:
                diags.append(Diagnostic(
                    "width-mismatch",
                    f"{where}: @{loc.array} accessed as {type_token(ins.width, ins.signedness)} "
                    f"but as {type_token(seen[0], seen[1])} at instruction {seen[2]}", idx))

        if ins.result is not None:
            if op in (Opcode.STORE, Opcode.RET):
                diags.append(Diagnostic("malformed", f"{where}: {op.value} cannot produce a result", idx))
            elif ins.result in defined:
                diags.append(Diagnostic("duplicate-def", f"{where}: %{ins.result} defined twice", idx))
            else:
                defined[ins.result] = idx
                widths[ins.result] = (ins.width, ins.signedness)

    known = set(defined)
    for c in f.carried:
        for name in (c.src, c.dst):
            if name not in known:
                diags.append(Diagnostic("malformed", f"carried annotation names unknown value %{name}"))
        if c.distance < 0:
            diags.append(Diagnostic("malformed", "carried distance must be non-negative"))

    return diags


def clone_function(f: Function) -> Function:
    """Fresh Instruction objects, shared immutable operands."""
    body = BasicBlock([
        Instruction(i.opcode, i.result, i.width, i.signedness, list(i.operands), i.callee)
        for i in f.body.instructions
    ])
    return Function(f.name, list(f.args), body, list(f.carried))


def array_profile(f: Function) -> dict:
    """Map array name -> (width, signedness, min size) over all accesses."""
    profile = {}
    for ins in f.body.instructions:
        for loc in ins.memlocs():
            w, s, size = profile.get(loc.array, (ins.width, ins.signedness, 0))
            profile[loc.array] = (w, s, max(size, loc.index + 1))
    return profile
