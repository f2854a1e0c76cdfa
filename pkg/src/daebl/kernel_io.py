"""Text format for kernel definitions.

One kernel per file::

    # comments run to end of line
    kernel offset_sum
    iterations 100
    invocations 1              # optional, default 1

    [arrays]
    a elem=8 length=101 base=0x1000
    idx elem=4 length=3 base=0x9000 data=3,1,2

    [predicates]
    hot 1101                   # cyclic on/off pattern over iterations

    [body]
    1 addr in= cost=1
    2 load a[i+1] deps=1
    3 addr cost=1
    4 load b[i+2] deps=3
    5 compute in=2,4 cost=1 if=hot
    6 store c[i] src=5

Index terms are ``[scale*]i[+-offset]`` (affine) or ``[scale*]@id[+-offset]``
(indirect through the value loaded by instruction ``id``). Optional keys:
``in`` (value inputs), ``cost``, ``deps`` (address inputs), ``src`` (store
value), ``if`` (predicate). :func:`dump_kernel` writes the canonical form and
``parse_kernel(dump_kernel(k)) == k`` holds for every kernel.
"""

from __future__ import annotations

import re
from pathlib import Path

from daebl.kernel_ir import (
    ADDR, COMPUTE, KINDS, LOAD, PREFETCH, STORE,
    AddressExpr, ArrayDecl, Instr, KernelError, KernelSpec,
)


class KernelSyntaxError(KernelError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_INDEX = re.compile(r"^(?:(-?\d+)\*)?(i|@\d+)(?:([+-])(\d+))?$|^(-?\d+)$")
_ADDR = re.compile(r"^(\w+)\[([^\]]*)\]$")


def _ids(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _parse_index(text: str, lineno: int) -> tuple[int, int, int | None]:
    m = _INDEX.match(text.replace(" ", ""))
    if not m:
        raise KernelSyntaxError(f"bad index term {text!r}", lineno)
    if m.group(5) is not None:
        # constant index: scale 0
        return 0, int(m.group(5)), None
    scale = int(m.group(1)) if m.group(1) else 1
    var = m.group(2)
    offset = int(m.group(4)) if m.group(4) else 0
    if m.group(3) == "-":
        offset = -offset
    via = None if var == "i" else int(var[1:])
    return scale, offset, via


def _format_index(ax: AddressExpr) -> str:
    if ax.scale == 0 and ax.via is None:
        return str(ax.offset)
    var = "i" if ax.via is None else f"@{ax.via}"
    s = var if ax.scale == 1 else f"{ax.scale}*{var}"
    if ax.offset > 0:
        s += f"+{ax.offset}"
    elif ax.offset < 0:
        s += f"-{-ax.offset}"
    return s


def _keyvals(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise KernelSyntaxError(f"expected key=value, got {tok!r}", lineno)
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def parse_kernel(text: str) -> KernelSpec:
    header: dict = {}
    arrays: list[ArrayDecl] = []
    predicates: list[tuple[str, tuple[bool, ...]]] = []
    body: list[Instr] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            section = _parse_line(line, section, lineno, header, arrays, predicates, body)
        except KernelError:
            raise
        except ValueError as exc:
            raise KernelSyntaxError(str(exc), lineno) from None
    name, iterations, invocations = header.get("kernel"), header.get("iterations"), header.get("invocations", 1)
    if name is None or iterations is None:
        raise KernelSyntaxError("missing 'kernel' or 'iterations' header", 1)
    return KernelSpec(name, iterations, tuple(body), tuple(arrays), tuple(predicates), invocations)


def _parse_line(line: str, section: str | None, lineno: int, header: dict, arrays: list,
                predicates: list, body: list) -> str | None:
    """Parse one non-blank line; returns the section in force afterwards."""
    if line.startswith("[") and line.endswith("]"):
        section = line[1:-1].strip()
        if section not in ("arrays", "predicates", "body"):
            raise KernelSyntaxError(f"unknown section [{section}]", lineno)
        return section
    tokens = line.split()
    if section is None:
        if len(tokens) != 2:
            raise KernelSyntaxError(f"bad header line {line!r}", lineno)
        key, val = tokens
        if key == "kernel":
            header[key] = val
        elif key in ("iterations", "invocations"):
            header[key] = int(val)
        else:
            raise KernelSyntaxError(f"unknown header key {key!r}", lineno)
    elif section == "arrays":
        kv = _keyvals(tokens[1:], lineno)
        try:
            data = _ids(kv["data"]) if "data" in kv else None
            arrays.append(ArrayDecl(tokens[0], int(kv["elem"]), int(kv["length"]),
                                    int(kv["base"], 0), data))
        except KeyError as exc:
            raise KernelSyntaxError(f"array {tokens[0]!r} missing {exc}", lineno) from None
    elif section == "predicates":
        if len(tokens) != 2 or set(tokens[1]) - {"0", "1"}:
            raise KernelSyntaxError(f"bad predicate line {line!r}", lineno)
        predicates.append((tokens[0], tuple(c == "1" for c in tokens[1])))
    else:
        body.append(_parse_instr(tokens, lineno))
    return section


def _parse_instr(tokens: list[str], lineno: int) -> Instr:
    if len(tokens) < 2:
        raise KernelSyntaxError("instruction needs an id and a kind", lineno)
    iid, kind = int(tokens[0]), tokens[1]
    if kind not in KINDS:
        raise KernelSyntaxError(f"unknown instruction kind {kind!r}", lineno)
    rest = tokens[2:]
    addr = None
    if kind in (LOAD, STORE, PREFETCH):
        if not rest:
            raise KernelSyntaxError(f"{kind} needs an address", lineno)
        m = _ADDR.match(rest[0])
        if not m:
            raise KernelSyntaxError(f"bad address {rest[0]!r}", lineno)
        rest = rest[1:]
        scale, offset, via = _parse_index(m.group(2), lineno)
        kv = _keyvals(rest, lineno)
        addr = AddressExpr(m.group(1), scale, offset, via, _ids(kv.get("deps", "")))
    kv = _keyvals(rest, lineno)
    unknown = set(kv) - {"in", "cost", "deps", "src", "if"}
    if unknown:
        raise KernelSyntaxError(f"unknown keys {sorted(unknown)}", lineno)
    if kind == STORE:
        inputs = _ids(kv.get("src", ""))
    else:
        inputs = _ids(kv.get("in", ""))
    cost = int(kv.get("cost", 1))
    return Instr(iid, kind, inputs, cost, addr, kv.get("if"))


def dump_kernel(spec: KernelSpec) -> str:
    lines = [f"kernel {spec.name}", f"iterations {spec.iterations}"]
    if spec.invocations != 1:
        lines.append(f"invocations {spec.invocations}")
    lines += ["", "[arrays]"]
    for a in spec.arrays:
        s = f"{a.name} elem={a.elem_size} length={a.length} base={a.base:#x}"
        if a.data is not None:
            s += " data=" + ",".join(str(v) for v in a.data)
        lines.append(s)
    if spec.predicates:
        lines += ["", "[predicates]"]
        for name, pat in spec.predicates:
            lines.append(f"{name} " + "".join("1" if p else "0" for p in pat))
    lines += ["", "[body]"]
    for ins in spec.body:
        parts = [str(ins.id), ins.kind]
        if ins.addr is not None:
            parts.append(f"{ins.addr.array}[{_format_index(ins.addr)}]")
            if ins.addr.deps:
                parts.append("deps=" + ",".join(map(str, ins.addr.deps)))
        if ins.kind == STORE:
            if ins.inputs:
                parts.append("src=" + ",".join(map(str, ins.inputs)))
        elif ins.inputs:
            parts.append("in=" + ",".join(map(str, ins.inputs)))
        if ins.kind in (ADDR, COMPUTE) or ins.cost != 1:
            parts.append(f"cost={ins.cost}")
        if ins.predicate is not None:
            parts.append(f"if={ins.predicate}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_kernel(path: str | Path) -> KernelSpec:
    return parse_kernel(Path(path).read_text())


def save_kernel(spec: KernelSpec, path: str | Path) -> None:
    Path(path).write_text(dump_kernel(spec))
