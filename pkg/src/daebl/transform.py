"""Loop chunking and Access/Execute phase generation."""

from __future__ import annotations

from dataclasses import dataclass

from daebl.kernel_ir import (
    ADDR, LOAD, PREFETCH, STORE, COMPUTE,
    Instr, ValidatedKernel, backward_address_slice,
)


class GranularityOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class ChunkedKernel:
    base: ValidatedKernel
    granularity: int

    @property
    def slice_count(self) -> int:
        return -(-self.base.iterations // self.granularity)

    def slice_range(self, s: int) -> range:
        g, n = self.granularity, self.base.iterations
        if not 0 <= s < self.slice_count:
            raise IndexError(s)
        return range(s * g, min((s + 1) * g, n))

    def slices(self) -> list[range]:
        return [self.slice_range(s) for s in range(self.slice_count)]


def chunk(kernel: ValidatedKernel, granularity: int) -> ChunkedKernel:
    if not 1 <= granularity <= kernel.iterations:
        raise GranularityOutOfRange(
            f"granularity {granularity} outside [1, {kernel.iterations}]")
    return ChunkedKernel(kernel, granularity)


@dataclass(frozen=True)
class PhasePair:
    chunked: ChunkedKernel
    access: tuple[Instr, ...]
    execute: tuple[Instr, ...]
    degenerate: bool = False

    @property
    def kernel(self) -> ValidatedKernel:
        return self.chunked.base

    @property
    def granularity(self) -> int:
        return self.chunked.granularity

    @property
    def slice_count(self) -> int:
        return self.chunked.slice_count


def access_body(kernel: ValidatedKernel, elide_predicates: bool = False) -> tuple[Instr, ...]:
    """Address slice plus one prefetch per load outside the slice.

    Loads inside the slice feed other addresses and stay blocking loads.
    With ``elide_predicates`` prefetches lose their predicate, i.e. the
    Access phase fetches unconditionally.
    """
    keep = backward_address_slice(kernel)
    out = []
    for ins in kernel.body:
        if ins.id in keep:
            out.append(ins)
        elif ins.kind == LOAD:
            pred = None if elide_predicates else ins.predicate
            out.append(Instr(ins.id, PREFETCH, (), 1, ins.addr, pred))
    return tuple(out)


def make_phase_pair(chunked: ChunkedKernel, elide_predicates: bool = False) -> PhasePair:
    access = access_body(chunked.base, elide_predicates)
    degenerate = not any(ins.kind in (LOAD, PREFETCH) for ins in access)
    return PhasePair(chunked, access, chunked.base.body, degenerate)


def _dynamic_ops(kernel: ValidatedKernel, body: tuple[Instr, ...]) -> int:
    total = 0
    for ins in body:
        if ins.predicate is None:
            total += ins.ops * kernel.iterations
        else:
            total += ins.ops * int(kernel.active[ins.predicate].sum())
    return total


def instruction_overhead(pair: PhasePair) -> float:
    """(access + execute) / base dynamic op count, loop control excluded."""
    k = pair.kernel
    base = _dynamic_ops(k, k.body)
    return (_dynamic_ops(k, pair.access) + _dynamic_ops(k, pair.execute)) / base


def _fmt_instr(ins: Instr, kernel: ValidatedKernel) -> str:
    def ref(x: int) -> str:
        return f"v{x}"

    def addr() -> str:
        ax = ins.addr
        var = "i" if ax.via is None else ref(ax.via)
        idx = var if ax.scale == 1 else f"{ax.scale}*{var}"
        if ax.scale == 0:
            idx = ""
        if ax.offset:
            idx = f"{idx}{ax.offset:+d}" if idx else str(ax.offset)
        return f"{ax.array}[{idx}]"

    if ins.kind == ADDR:
        s = f"{ref(ins.id)} = addr({', '.join(map(ref, ins.inputs)) or 'i'})"
    elif ins.kind == COMPUTE:
        s = f"{ref(ins.id)} = op{ins.cost}({', '.join(map(ref, ins.inputs))})"
    elif ins.kind == LOAD:
        s = f"{ref(ins.id)} = {addr()}"
    elif ins.kind == STORE:
        src = ref(ins.inputs[0]) if ins.inputs else "_"
        s = f"{addr()} = {src}"
    else:
        s = f"prefetch({addr()})"
    if ins.predicate is not None:
        s = f"if ({ins.predicate}) {s}"
    return s


def dump_phase_pair(pair: PhasePair) -> str:
    """Pseudocode listing of both phases, chunked as an outer/inner loop."""
    k = pair.kernel
    lines = [f"// {k.name}: N={k.iterations} granularity={pair.granularity} "
             f"slices={pair.slice_count}"]
    if pair.degenerate:
        lines.append("// degenerate: no memory-bound work")
    for fname, body in (("access", pair.access), ("execute", pair.execute)):
        lines += [
            f"void {fname}() {{",
            "  offset = 0",
            f"  for (j = 0; j < {pair.slice_count}; j++) {{",
            f"    for (k = 0; k < min({pair.granularity}, N - offset); k++) {{",
            "      i = offset + k",
        ]
        lines += [f"      {_fmt_instr(ins, k)}" for ins in body]
        lines += [
            "    }",
            f"    offset += {pair.granularity}",
            "  }",
            "}",
        ]
    return "\n".join(lines) + "\n"
