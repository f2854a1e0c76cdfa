"""Synthetic kernels standing in for the three evaluated workloads.

They are analogues built from the IR, not ports of the real programs.
Sizing rule: one invocation touches more than the big cluster's 2 MB L2,
so the coupled loop streams from memory, while a slice at mid-sweep
granularity fits the LITTLE cluster's 512 kB L2.

lbm_like
    9216 cells of 16 doubles (two lines) in ``src`` and ``dst``; iteration i
    visits cell ``off[i]`` of a fixed permutation. The cell index goes
    through ``addr_cost`` ops of neighbourhood arithmetic, which stays in
    the Access phase and makes it long. Working set 9216 * 256 B = 2.25 MB
    plus 36 kB of offsets; a 1024-iteration slice touches 256 kB.
    Runs ``invocations`` times (default 10) over the same data.
cigar_like
    ``idx[i]`` picks an individual of ``pop`` whose first word indexes
    ``genes``: two levels of indirection, both kept as blocking loads in
    Access. Working set 18432 * (64 + 64) B + 72 kB of indices = 2.3 MB;
    a 1024-iteration slice touches 132 kB.
libquantum_like
    Unit-stride walk over 64-byte nodes, XOR on one member. Access is two
    instructions per line, so it outruns the 8-entry prefetch queue and
    many hints are dropped. Working set 36864 * 64 B = 2.25 MB; a
    4096-iteration slice touches 256 kB. Called twice through a thread pool.

The sweep grids are powers of four and stop short of N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from daebl.kernel_ir import ArrayDecl, KernelSpec, addr_calc, compute, load, store
from daebl.scheduler import Pool, SpawnPerInvocation, ThreadModel


@dataclass(frozen=True)
class Preset:
    name: str
    spec: KernelSpec
    granularities: tuple[int, ...]
    threads: ThreadModel


def lbm_like(cells: int = 9216, invocations: int = 10, addr_cost: int = 160,
             compute_cost: int = 30, seed: int = 11) -> KernelSpec:
    perm = np.random.default_rng(seed).permutation(cells).tolist()
    q = 16
    arrays = (
        ArrayDecl("off", 4, cells, 0x0100_0000, tuple(perm)),
        ArrayDecl("src", 8, q * cells, 0x0200_0000),
        ArrayDecl("dst", 8, q * cells, 0x0400_0000),
    )
    body = (
        load(1, "off", 1, 0),
        # neighbourhood index arithmetic for the permuted cell
        addr_calc(2, [1], addr_cost),
        load(3, "src", q, 0, via=1, deps=[2]),
        load(4, "src", q, 5, via=1, deps=[2]),
        load(5, "src", q, 9, via=1, deps=[2]),
        load(6, "src", q, 14, via=1, deps=[2]),
        compute(7, [3, 4, 5, 6], compute_cost),
        store(8, 7, "dst", q, 0, via=1, deps=[2]),
        store(9, 7, "dst", q, 8, via=1, deps=[2]),
    )
    return KernelSpec("lbm_like", cells, body, arrays, invocations=invocations)


def cigar_like(n: int = 18432, compute_cost: int = 2, seed: int = 12) -> KernelSpec:
    rng = np.random.default_rng(seed)
    order = rng.permutation(n).tolist()
    genes = rng.permutation(n).tolist()
    s = 8
    pop = tuple(v for gi in genes for v in (gi, 0, 0, 0, 0, 0, 0, 0))
    arrays = (
        ArrayDecl("idx", 4, n, 0x0100_0000, tuple(order)),
        ArrayDecl("pop", 8, s * n, 0x0200_0000, pop),
        ArrayDecl("genes", 8, s * n, 0x0400_0000),
    )
    body = (
        load(1, "idx", 1, 0),
        load(2, "pop", s, 0, via=1),
        load(3, "genes", s, 0, via=2),
        load(4, "genes", s, 1, via=2),
        compute(5, [3, 4], compute_cost),
        store(6, 5, "pop", s, 1, via=1),
    )
    return KernelSpec("cigar_like", n, body, arrays)


def libquantum_like(n: int = 36864, node_words: int = 8, invocations: int = 2) -> KernelSpec:
    arrays = (ArrayDecl("node", 8, node_words * n, 0x0100_0000),)
    body = (
        load(1, "node", node_words, 1),
        compute(2, [1], 1),
        store(3, 2, "node", node_words, 1),
    )
    return KernelSpec("libquantum_like", n, body, arrays, invocations=invocations)


def offset_sum_kernel(n: int = 100) -> KernelSpec:
    """c[i] = a[i+1] + b[i+2] with explicit address calculations."""
    arrays = (
        ArrayDecl("a", 8, n + 1, 0x1_0000),
        ArrayDecl("b", 8, n + 2, 0x10_0000),
        ArrayDecl("c", 8, n, 0x20_0000),
    )
    body = (
        addr_calc(1),
        load(2, "a", 1, 1, deps=[1]),
        addr_calc(3),
        load(4, "b", 1, 2, deps=[3]),
        compute(5, [2, 4]),
        store(6, 5, "c"),
    )
    return KernelSpec("offset_sum", n, body, arrays)


GRIDS = {
    "lbm_like": (64, 256, 1024, 4096),
    "cigar_like": (64, 256, 1024, 4096),
    "libquantum_like": (256, 1024, 4096, 16384),
}


def preset(name: str, **overrides) -> Preset:
    builders = {"lbm_like": lbm_like, "cigar_like": cigar_like, "libquantum_like": libquantum_like}
    if name not in builders:
        raise KeyError(f"unknown preset {name!r}")
    spec = builders[name](**overrides)
    n = spec.iterations
    grid = tuple(g for g in GRIDS[name] if g < n) or (n,)
    threads = Pool() if name == "libquantum_like" else SpawnPerInvocation()
    return Preset(name, spec, grid, threads)


PRESETS = ("lbm_like", "cigar_like", "libquantum_like")
