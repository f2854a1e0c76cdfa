"""Loop-kernel instruction IR, address streams and backward address slicing.

A kernel is one straight-line loop body executed ``iterations`` times. Every
instruction is identified by an integer id and may only reference ids that
appear earlier in the body, so body order is a valid topological order.

Address semantics: an :class:`AddressExpr` resolves to
``array.base + elem_size * (scale * x + offset)`` where ``x`` is the loop
index ``i`` for affine terms, or the value loaded by instruction ``via`` for
indirect terms. Loaded values are only known for arrays that declare
``data``; those are the only arrays usable as index sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ADDR = "addr"
LOAD = "load"
STORE = "store"
COMPUTE = "compute"
PREFETCH = "prefetch"

KINDS = (ADDR, LOAD, STORE, COMPUTE, PREFETCH)
MEMORY_KINDS = (LOAD, STORE, PREFETCH)


class KernelError(ValueError):
    """Base class for kernel validation failures."""

    def __init__(self, message: str, instr_id: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.instr_id = instr_id
        self.iteration = iteration


class UseBeforeDef(KernelError):
    pass


class UnknownArray(KernelError):
    pass


class OutOfBoundsAddress(KernelError):
    pass


class RangeOutOfBounds(KernelError):
    pass


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    elem_size: int
    length: int
    base: int
    # element values, only needed for arrays used as index sources
    data: tuple[int, ...] | None = None

    @property
    def nbytes(self) -> int:
        return self.elem_size * self.length

    @property
    def end(self) -> int:
        return self.base + self.nbytes


@dataclass(frozen=True)
class AddressExpr:
    array: str
    scale: int = 1
    offset: int = 0
    via: int | None = None
    deps: tuple[int, ...] = ()

    def all_deps(self) -> tuple[int, ...]:
        if self.via is None or self.via in self.deps:
            return self.deps
        return self.deps + (self.via,)


@dataclass(frozen=True)
class Instr:
    id: int
    kind: str
    inputs: tuple[int, ...] = ()
    cost: int = 1
    addr: AddressExpr | None = None
    predicate: str | None = None

    def operands(self) -> tuple[int, ...]:
        """Every instruction id this one reads (values and address inputs)."""
        if self.addr is None:
            return self.inputs
        return self.inputs + tuple(d for d in self.addr.all_deps() if d not in self.inputs)

    @property
    def ops(self) -> int:
        """Dynamic op count of one execution."""
        return self.cost if self.kind in (ADDR, COMPUTE) else 1


@dataclass(frozen=True)
class KernelSpec:
    name: str
    iterations: int
    body: tuple[Instr, ...]
    arrays: tuple[ArrayDecl, ...]
    # predicate name -> cyclic per-iteration on/off pattern
    predicates: tuple[tuple[str, tuple[bool, ...]], ...] = ()
    invocations: int = 1

    def array(self, name: str) -> ArrayDecl:
        for a in self.arrays:
            if a.name == name:
                return a
        raise UnknownArray(f"array {name!r} is not declared")

    def instr(self, instr_id: int) -> Instr:
        for ins in self.body:
            if ins.id == instr_id:
                return ins
        raise KeyError(instr_id)


# Factories used by presets and tests; they keep kernel definitions short.

def addr_calc(id: int, inputs: Sequence[int] = (), cost: int = 1, predicate: str | None = None) -> Instr:
    return Instr(id, ADDR, tuple(inputs), cost, None, predicate)


def compute(id: int, inputs: Sequence[int] = (), cost: int = 1, predicate: str | None = None) -> Instr:
    return Instr(id, COMPUTE, tuple(inputs), cost, None, predicate)


def load(id: int, array: str, scale: int = 1, offset: int = 0, via: int | None = None,
         deps: Sequence[int] = (), predicate: str | None = None) -> Instr:
    return Instr(id, LOAD, (), 1, AddressExpr(array, scale, offset, via, tuple(deps)), predicate)


def store(id: int, source: int | None, array: str, scale: int = 1, offset: int = 0,
          via: int | None = None, deps: Sequence[int] = (), predicate: str | None = None) -> Instr:
    inputs = () if source is None else (source,)
    return Instr(id, STORE, inputs, 1, AddressExpr(array, scale, offset, via, tuple(deps)), predicate)


@dataclass(frozen=True, eq=False)
class ValidatedKernel:
    """A kernel whose invariants hold, with its address streams precomputed.

    ``position`` maps instruction id to its topological position;
    ``streams`` maps each memory instruction id to a numpy array of byte
    addresses (one entry per iteration, ``-1`` where the predicate is off).
    """

    spec: KernelSpec
    position: dict[int, int]
    streams: dict[int, np.ndarray] = field(repr=False)
    active: dict[str, np.ndarray] = field(repr=False)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def iterations(self) -> int:
        return self.spec.iterations

    @property
    def body(self) -> tuple[Instr, ...]:
        return self.spec.body

    def instr(self, instr_id: int) -> Instr:
        return self.spec.body[self.position[instr_id]]

    def executes(self, instr: Instr, i: int) -> bool:
        return instr.predicate is None or bool(self.active[instr.predicate][i])


def _predicate_masks(spec: KernelSpec) -> dict[str, np.ndarray]:
    n = spec.iterations
    masks = {}
    for name, pattern in spec.predicates:
        if not pattern:
            raise KernelError(f"predicate {name!r} has an empty pattern")
        pat = np.array(pattern, dtype=bool)
        masks[name] = np.resize(pat, n)
    return masks


def _index_values(spec: KernelSpec, streams: dict[int, np.ndarray], body: dict[int, Instr],
                  via: int, owner: int) -> np.ndarray:
    src = body[via]
    if src.kind != LOAD:
        raise KernelError(f"instr {owner}: indirect source {via} is not a load", owner)
    arr = spec.array(src.addr.array)
    if arr.data is None:
        raise KernelError(f"instr {owner}: array {arr.name!r} has no declared contents", owner)
    addrs = streams[via]
    data = np.asarray(arr.data, dtype=np.int64)
    # off iterations carry -1 and are masked by the caller
    elems = np.where(addrs >= 0, (addrs - arr.base) // arr.elem_size, 0)
    return data[elems]


def validate_kernel(spec: KernelSpec) -> ValidatedKernel:
    """Check every kernel invariant and precompute address streams."""
    if spec.iterations < 1:
        raise KernelError("iteration count must be >= 1")
    if not spec.body:
        raise KernelError("kernel body is empty")
    if spec.invocations < 1:
        raise KernelError("invocation count must be >= 1")

    names = [a.name for a in spec.arrays]
    if len(set(names)) != len(names):
        raise KernelError("duplicate array names")
    ordered = sorted(spec.arrays, key=lambda a: a.base)
    for a in ordered:
        if a.elem_size < 1 or a.length < 1 or a.base < 0:
            raise KernelError(f"array {a.name!r} has a non-positive size or negative base")
        if a.data is not None and len(a.data) != a.length:
            raise KernelError(f"array {a.name!r} declares {len(a.data)} values for length {a.length}")
    for lo, hi in zip(ordered, ordered[1:]):
        if hi.base < lo.end:
            raise KernelError(f"arrays {lo.name!r} and {hi.name!r} overlap")

    pred_names = {name for name, _ in spec.predicates}
    position: dict[int, int] = {}
    body: dict[int, Instr] = {}
    for pos, ins in enumerate(spec.body):
        if ins.id in position:
            raise KernelError(f"duplicate instruction id {ins.id}", ins.id)
        if ins.kind not in KINDS:
            raise KernelError(f"instr {ins.id}: unknown kind {ins.kind!r}", ins.id)
        if ins.kind == PREFETCH:
            raise KernelError(f"instr {ins.id}: prefetches are produced by the transform only", ins.id)
        if ins.kind in (ADDR, COMPUTE) and ins.cost < 1:
            raise KernelError(f"instr {ins.id}: cost must be >= 1", ins.id)
        if ins.predicate is not None and ins.predicate not in pred_names:
            raise KernelError(f"instr {ins.id}: unknown predicate {ins.predicate!r}", ins.id)
        if ins.kind in MEMORY_KINDS:
            if ins.addr is None:
                raise KernelError(f"instr {ins.id}: memory instruction without address", ins.id)
            if ins.addr.array not in names:
                raise UnknownArray(f"instr {ins.id}: array {ins.addr.array!r} is not declared", ins.id)
        elif ins.addr is not None:
            raise KernelError(f"instr {ins.id}: {ins.kind} cannot carry an address", ins.id)
        if ins.kind == STORE and len(ins.inputs) > 1:
            raise KernelError(f"instr {ins.id}: a store has at most one source", ins.id)
        for ref in ins.operands():
            if ref not in position:
                raise UseBeforeDef(f"instr {ins.id} reads {ref} before it is defined", ins.id)
            if body[ref].kind in (STORE, PREFETCH):
                raise KernelError(f"instr {ins.id} reads {ref}, which produces no value", ins.id)
        # address inputs must themselves be address-side values
        addr_inputs = ins.inputs if ins.kind == ADDR else ()
        if ins.addr is not None:
            addr_inputs = addr_inputs + ins.addr.all_deps()
        for ref in addr_inputs:
            if body[ref].kind not in (ADDR, LOAD):
                raise KernelError(f"instr {ins.id}: address input {ref} is a {body[ref].kind}", ins.id)
        position[ins.id] = pos
        body[ins.id] = ins

    active = _predicate_masks(spec)
    n = spec.iterations
    idx = np.arange(n, dtype=np.int64)
    streams: dict[int, np.ndarray] = {}
    for ins in spec.body:
        if ins.addr is None:
            continue
        ax = ins.addr
        arr = spec.array(ax.array)
        on = np.ones(n, dtype=bool) if ins.predicate is None else active[ins.predicate]
        if ax.via is None:
            x = idx
        else:
            src = body[ax.via]
            if src.predicate is not None and src.predicate != ins.predicate:
                src_on = active[src.predicate]
                if np.any(on & ~src_on):
                    raise KernelError(f"instr {ins.id}: indirect source {ax.via} is not always executed", ins.id)
            x = _index_values(spec, streams, body, ax.via, ins.id)
        elem = ax.scale * x + ax.offset
        bad = on & ((elem < 0) | (elem >= arr.length))
        if np.any(bad):
            it = int(np.argmax(bad))
            raise OutOfBoundsAddress(
                f"instr {ins.id}: element {int(elem[it])} of {arr.name!r} out of bounds at iteration {it}",
                ins.id, it)
        streams[ins.id] = np.where(on, arr.base + arr.elem_size * elem, -1)
    return ValidatedKernel(spec, position, streams, active)


def backward_address_slice(kernel: ValidatedKernel) -> frozenset[int]:
    """Instructions needed to compute every load address.

    Seeds are the address dependencies of all loads; the closure then follows
    AddrCalc inputs and the address dependencies of loads pulled in as index
    sources. Stores and computes never enter the set.
    """
    work = []
    for ins in kernel.body:
        if ins.kind == LOAD:
            work.extend(ins.addr.all_deps())
    result: set[int] = set()
    while work:
        ref = work.pop()
        if ref in result:
            continue
        result.add(ref)
        ins = kernel.instr(ref)
        if ins.kind == ADDR:
            work.extend(ins.inputs)
        elif ins.kind == LOAD:
            work.extend(ins.addr.all_deps())
    return frozenset(result)


def trace_addresses(kernel: ValidatedKernel, iters: Iterable[int] | range,
                    kinds: Sequence[str] = MEMORY_KINDS) -> list[tuple[int, int, str]]:
    """Ordered (iteration, byte address, kind) stream over ``iters``."""
    n = kernel.iterations
    iters = list(iters)
    for i in iters:
        if not 0 <= i < n:
            raise RangeOutOfBounds(f"iteration {i} outside [0, {n})", iteration=i)
    mem = [ins for ins in kernel.body if ins.kind in kinds]
    out = []
    for i in iters:
        for ins in mem:
            a = int(kernel.streams[ins.id][i])
            if a >= 0:
                out.append((i, a, ins.kind))
    return out


def evaluate_addresses(kernel: ValidatedKernel, keep: Iterable[int],
                       iters: Iterable[int]) -> list[tuple[int, int, int]] | None:
    """Load addresses computable when only ``keep`` (plus every load, demoted
    to a prefetch when outside ``keep``) is evaluated.

    Returns ``None`` when some address needs a value that was not kept. Used
    to check slice soundness and minimality.
    """
    keep = set(keep)
    avail = set(keep)

    def computable(ins: Instr) -> bool:
        return all(d in avail for d in ins.addr.all_deps())

    for ins in kernel.body:
        if ins.id in keep and ins.kind == ADDR and not all(d in avail for d in ins.inputs):
            return None
        if ins.id in keep and ins.kind == LOAD and not computable(ins):
            return None
    out = []
    for i in iters:
        for ins in kernel.body:
            if ins.kind != LOAD:
                continue
            if not computable(ins):
                return None
            a = int(kernel.streams[ins.id][i])
            if a >= 0:
                out.append((i, ins.id, a))
    return out
