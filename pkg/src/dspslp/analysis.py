"""Use-def chains, conservative ordering constraints, and last-definition /
first-use intervals.  This is the legality machinery behind tuple formation:
two entities can share a packed call only if their intervals intersect, and
instructions may only be reordered along the constraints computed here.

Aliasing is decided purely on array names and constant indices: distinct
arrays never alias, equal arrays with different constant indices never
alias, and calls to unknown functions are barriers against memory
operations and each other.  Calls into the `silvia.*` emulator namespace
are pure and are exempt from the barrier rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .ir import (
    BasicBlock,
    Const,
    Function,
    Instruction,
    MemLoc,
    Opcode,
    Ref,
    Signedness,
)


class Reason(Enum):
    DATA_DEP = "data"
    MEM_ALIAS = "mem"
    CALL_BARRIER = "call"


@dataclass(frozen=True)
class OrderConstraint:
    before: int
    after: int
    reason: Reason


@dataclass(frozen=True)
class Interval:
    """last_def < first_use means there is room for an insertion point."""

    last_def: int
    first_use: int


@dataclass(frozen=True)
class DefUses:
    def_index: int  # -1 for function arguments
    uses: tuple


def use_def_chains(f: Function) -> dict:
    """Map each value name to its definition index and sorted use indices."""
    chains = {a.name: [-1, []] for a in f.args}
    for idx, ins in enumerate(f.body.instructions):
        if ins.result is not None:
            chains[ins.result] = [idx, []]
    for idx, ins in enumerate(f.body.instructions):
        for ref in ins.refs():
            if ref.name in chains:
                chains[ref.name][1].append(idx)
    return {name: DefUses(d, tuple(sorted(uses))) for name, (d, uses) in chains.items()}


def is_pure_call(ins: Instruction) -> bool:
    return ins.opcode is Opcode.CALL and (ins.callee or "").startswith("silvia.")


def _is_barrier_call(ins: Instruction) -> bool:
    return ins.opcode is Opcode.CALL and not is_pure_call(ins)


def _mem_effects(ins: Instruction):
    if ins.opcode is Opcode.LOAD:
        return ("r", ins.operands[0])
    if ins.opcode is Opcode.STORE:
        return ("w", ins.operands[1])
    return None


def must_precede(a: Instruction, b: Instruction) -> Reason | None:
    """Ordering requirement between two instructions, a textually before b."""
    if b.opcode is Opcode.RET or a.opcode is Opcode.RET:
        return Reason.CALL_BARRIER  # the terminator pins everything above it
    if a.result is not None and any(r.name == a.result for r in b.refs()):
        return Reason.DATA_DEP
    ma, mb = _mem_effects(a), _mem_effects(b)
    if ma and mb and ("w" in (ma[0], mb[0])):
        la, lb = ma[1], mb[1]
        if la.array == lb.array and la.index == lb.index:
            return Reason.MEM_ALIAS
    if _is_barrier_call(a) and (mb or _is_barrier_call(b)):
        return Reason.CALL_BARRIER
    if _is_barrier_call(b) and ma:
        return Reason.CALL_BARRIER
    return None


def order_constraints(f: Function) -> list:
    """All pairwise ordering constraints of the block, in program order."""
    instrs = f.body.instructions
    out = []
    for i in range(len(instrs)):
        for j in range(i + 1, len(instrs)):
            reason = must_precede(instrs[i], instrs[j])
            if reason is not None:
                out.append(OrderConstraint(i, j, reason))
    return out


def entity_interval(indices, f: Function) -> Interval:
    """Interval of a candidate or tuple given its member instruction indices.

    last_def is the largest definition index among operands produced outside
    the entity; first_use the smallest index of an external instruction
    consuming one of the entity's results.  Entities whose results are never
    used get first_use = len(block), so a trailing store never blocks packing.
    """
    instrs = f.body.instructions
    member = set(indices)
    results = {instrs[i].result for i in member if instrs[i].result is not None}
    def_index = {a.name: -1 for a in f.args}
    for idx, ins in enumerate(instrs):
        if ins.result is not None:
            def_index[ins.result] = idx

    last_def = -1
    for i in member:
        for ref in instrs[i].refs():
            if ref.name in results:
                continue  # internal edge
            d = def_index.get(ref.name, -1)
            if d not in member:
                last_def = max(last_def, d)

    first_use = len(instrs)
    for idx, ins in enumerate(instrs):
        if idx in member:
            continue
        if any(r.name in results for r in ins.refs()):
            first_use = min(first_use, idx)
            break
    return Interval(last_def, first_use)


def intervals_intersect(a: Interval, b: Interval) -> bool:
    return a.last_def < b.first_use and b.last_def < a.first_use


def intersect(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.last_def, b.last_def), min(a.first_use, b.first_use))


def effective_width(op, f: Function, _defs=None):
    """Payload width and signedness of an operand, seen through ext/trunc
    chains.  A zext'd 4-bit value keeps its (4, unsigned) payload no matter
    how wide its container is."""
    if _defs is None:
        _defs = {}
        for ins in f.body.instructions:
            if ins.result is not None:
                _defs[ins.result] = ins

    if isinstance(op, Const):
        return op.width, op.signedness
    if not isinstance(op, Ref):
        raise TypeError(f"effective_width of {op!r}")

    for a in f.args:
        if a.name == op.name:
            return a.width, a.signedness
    ins = _defs.get(op.name)
    if ins is None:
        raise KeyError(f"%{op.name} is not defined")

    if ins.opcode is Opcode.SEXT:
        # sign extension preserves the value exactly
        return effective_width(ins.operands[0], f, _defs)
    if ins.opcode is Opcode.ZEXT:
        src = ins.operands[0]
        w, s = effective_width(src, f, _defs)
        if s is Signedness.UNSIGNED:
            return w, s
        # reinterprets the source bits: payload is the full source container
        src_w = _declared_width(src, f, _defs)
        return src_w, Signedness.UNSIGNED
    if ins.opcode is Opcode.TRUNC:
        w, s = effective_width(ins.operands[0], f, _defs)
        if w <= ins.width:
            return w, s  # payload fits the narrower container, value preserved
        return ins.width, ins.signedness
    return ins.width, ins.signedness


def _declared_width(op, f, defs):
    if isinstance(op, Const):
        return op.width
    for a in f.args:
        if a.name == op.name:
            return a.width
    return defs[op.name].width
