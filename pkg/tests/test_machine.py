import copy
import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from daebl.machine import (
    BIG, INFLIGHT, L1, LITTLE, LOCAL_L2, MEMORY, REMOTE, U_ALU, U_LOAD, U_PREF, Cache, CacheConfig,
    Clock, ConfigError, CoreTiming, MemorySystem, MemorySystemConfig, Program, exynos5422,
    load_machine, run_slice, save_machine, validate_machine,
)


def solo(core, mem, prog, start=0):
    gen = run_slice(core, mem, prog, start, clock=Clock(True))
    try:
        while True:
            next(gen)
    except StopIteration as stop:
        return stop.value


def prog(entries):
    """entries: (kind, ops, addr, deps) tuples."""
    kinds, ops, addrs, deps = zip(*entries) if entries else ((), (), (), ())
    return Program(list(kinds), list(ops), list(addrs), list(deps), [0, len(entries)])


def alu(n=1, deps=()):
    return (U_ALU, n, -1, tuple(deps))


def ld(addr, deps=()):
    return (U_LOAD, 1, addr, tuple(deps))


def pf(addr):
    return (U_PREF, 1, addr, ())


def test_default_latency_cycles(machine):
    # 2/8/68/95 ns at 2000 and 1400 MHz, rounded up
    assert machine.latencies(BIG) == {L1: 4, LOCAL_L2: 16, REMOTE: 136, MEMORY: 190}
    assert machine.latencies(LITTLE) == {L1: 3, LOCAL_L2: 12, REMOTE: 96, MEMORY: 133}
    assert (machine.period(BIG), machine.period(LITTLE)) == (7, 10)


def test_defaults_validate(machine):
    assert validate_machine(machine) is machine


@pytest.mark.parametrize("mem", [MemorySystemConfig(95.0, 95.0), MemorySystemConfig(120.0, 95.0),
                                 MemorySystemConfig(5.0, 95.0)])
def test_latency_ordering_enforced(machine, mem):
    with pytest.raises(ConfigError):
        validate_machine(replace(machine, memory=mem))


def test_frequency_range_enforced(machine):
    bad = replace(machine, little=replace(machine.little, core=replace(machine.little.core, frequency_mhz=1600)))
    with pytest.raises(ConfigError, match="frequency"):
        validate_machine(bad)


def test_inorder_width_fixed(machine):
    with pytest.raises(ConfigError):
        replace(machine.little.core, issue_width=2)


def test_l1_not_larger_than_l2(machine):
    big = replace(machine.big, l1d=CacheConfig(4 * 1024 * 1024, 2, 2.0))
    with pytest.raises(ConfigError, match="L1 larger"):
        validate_machine(replace(machine, big=big))


def test_machine_file_round_trip(machine, tmp_path):
    save_machine(machine, tmp_path / "m.json")
    assert load_machine(tmp_path / "m.json") == machine


def test_repeat_access_hits_l1(machine):
    mem = MemorySystem(machine)
    assert mem.access(BIG, 0x4000).source == MEMORY
    r = mem.access(BIG, 0x4008)
    assert (r.source, r.latency_cycles) == (L1, 4)


def test_remote_service_is_read_only(machine):
    mem = MemorySystem(machine)
    mem.access(LITTLE, 0x4000)
    before = mem.clusters[LITTLE].l2.lru_order((0x4000 >> 6) % mem.clusters[LITTLE].l2.nsets)
    r = mem.access(BIG, 0x4000)
    assert (r.source, r.latency_cycles) == (REMOTE, machine.latencies(BIG)[REMOTE])
    after = mem.clusters[LITTLE].l2.lru_order((0x4000 >> 6) % mem.clusters[LITTLE].l2.nsets)
    assert before == after and 0x4000 >> 6 in mem.clusters[LITTLE].l2


def test_store_allocates(machine):
    mem = MemorySystem(machine)
    mem.access(BIG, 0x100, "store")
    assert mem.access(BIG, 0x100).source == L1


def brute_lru(trace, nsets, assoc):
    sets = [[] for _ in range(nsets)]
    hits = []
    for ln in trace:
        s = sets[ln % nsets]
        hit = ln in s
        if hit:
            s.remove(ln)
        elif len(s) == assoc:
            s.pop(0)
        s.append(ln)
        hits.append(hit)
    return hits, sets


def test_lru_matches_brute_force_reference():
    cfg = CacheConfig(16 * 64 * 4, 4, 1.0)
    cache = Cache(cfg)
    rng = random.Random(5)
    trace = [rng.randrange(200) if rng.random() < 0.7 else rng.randrange(5000) for _ in range(100_000)]
    got = []
    for ln in trace:
        hit = cache.touch(ln)
        if not hit:
            cache.insert(ln)
        got.append(hit)
    want, sets = brute_lru(trace, cfg.sets, cfg.assoc)
    assert got == want
    assert [cache.lru_order(i) for i in range(cfg.sets)] == sets


@given(st.lists(st.integers(0, 300), max_size=400))
def test_access_leaves_line_in_l1_and_l1_within_l2(trace):
    m = exynos5422()
    small = replace(m.big, l1d=CacheConfig(4 * 64 * 2, 2, 2.0), l2=CacheConfig(16 * 64 * 2, 2, 8.0))
    mem = MemorySystem(replace(m, big=small))
    for ln in trace:
        mem.access(BIG, ln << 6)
        assert ln in mem.clusters[BIG].l1
    for s in range(mem.clusters[BIG].l2.nsets):
        order = mem.clusters[BIG].l2.lru_order(s)
        assert len(order) == len(set(order)) <= 2


def test_prefetch_neutral_on_resident_lines(machine):
    rng = random.Random(1)
    lines = [rng.randrange(4096) for _ in range(300)]
    a = MemorySystem(machine)
    for ln in lines:
        a.access(BIG, ln << 6)
    b = copy.deepcopy(a)
    for ln in set(lines):
        if ln in b.clusters[BIG].l2:
            assert b.issue_prefetch(BIG, ln << 6, 0)
    assert b.fills == [] and b.clusters[BIG].pending == {}
    probe = [rng.randrange(4096) for _ in range(500)]
    assert [a.access(BIG, x << 6) for x in probe] == [b.access(BIG, x << 6) for x in probe]


def test_prefetch_is_idempotent_while_in_flight(machine):
    mem = MemorySystem(machine)
    assert mem.issue_prefetch(LITTLE, 0x8000, 0)
    assert mem.issue_prefetch(LITTLE, 0x8000, 10)
    assert mem.clusters[LITTLE].prefetches_in_flight == 1


def test_completed_prefetch_then_load_hits(machine):
    core = CoreTiming.of(machine, LITTLE)
    mem = MemorySystem(machine)
    mem.issue_prefetch(LITTLE, 0x8000, 0)
    res = solo(core, mem, prog([alu(200), ld(0x8000)]))
    assert res.sources == {L1: 1}
    assert res.cycles == 200 + 3


def test_early_load_waits_for_residual_only(machine):
    core = CoreTiming.of(machine, LITTLE)
    mem = MemorySystem(machine)
    res = solo(core, mem, prog([pf(0x8000), alu(40), ld(0x8000)]))
    # prefetch lands at 133 cycles; the load is issued at cycle 41
    assert res.sources == {INFLIGHT: 1}
    assert res.cycles == 133


def test_full_queue_drops_hint(machine):
    core = CoreTiming.of(machine, LITTLE)
    mem = MemorySystem(machine)
    entries = [pf(0x10000 + 64 * i) for i in range(9)] + [ld(0x10000 + 64 * 8)]
    res = solo(core, mem, prog(entries))
    assert res.prefetches_dropped == 1
    assert res.sources == {MEMORY: 1}
    assert res.cycles == 9 + 133


@pytest.mark.parametrize("k", [1, 5, 37])
def test_compute_only_inorder(machine, k):
    res = solo(CoreTiming.of(machine, LITTLE), MemorySystem(machine), prog([alu() for _ in range(k)]))
    assert (res.cycles, res.retired, res.stall_cycles) == (k, k, 0)


@pytest.mark.parametrize("k", [1, 4, 20])
def test_cold_load_inorder(machine, k):
    res = solo(CoreTiming.of(machine, LITTLE), MemorySystem(machine), prog([alu()] * (k - 1) + [ld(0x4000)]))
    assert res.cycles == k - 1 + machine.latencies(LITTLE)[MEMORY]
    assert res.retired == k


def test_two_cold_loads_overlap_on_ooo(machine):
    mem_lat = machine.latencies(BIG)[MEMORY]
    res = solo(CoreTiming.of(machine, BIG), MemorySystem(machine), prog([ld(0x4000), ld(0x8000)]))
    assert mem_lat <= res.cycles <= mem_lat + 2
    inorder = solo(CoreTiming.of(machine, LITTLE), MemorySystem(machine), prog([ld(0x4000), ld(0x8000)]))
    assert inorder.cycles == 2 * machine.latencies(LITTLE)[MEMORY]


def test_mlp_one_serialises_misses(machine):
    core = replace(CoreTiming.of(machine, BIG), mlp=1)
    res = solo(core, MemorySystem(machine), prog([ld(0x4000), ld(0x8000)]))
    assert res.cycles >= 2 * machine.latencies(BIG)[MEMORY]


def test_ooo_issue_width(machine):
    core = CoreTiming.of(machine, BIG)
    res = solo(core, MemorySystem(machine), prog([alu() for _ in range(30)]))
    assert res.cycles == 10
    chain = solo(core, MemorySystem(machine), prog([alu()] + [alu(deps=(1,)) for _ in range(29)]))
    assert chain.cycles == 30


def test_multi_op_entry_uses_full_width(machine):
    res = solo(CoreTiming.of(machine, BIG), MemorySystem(machine), prog([alu(30)]))
    assert (res.cycles, res.retired) == (10, 30)


def test_slice_results_deterministic(machine):
    rng = random.Random(3)
    entries = [rng.choice([alu(rng.randrange(1, 4)), ld(rng.randrange(1 << 16) & ~7), pf(rng.randrange(1 << 16))])
               for _ in range(300)]
    for which in (BIG, LITTLE):
        a = solo(CoreTiming.of(machine, which), MemorySystem(machine), prog(entries), 70)
        b = solo(CoreTiming.of(machine, which), MemorySystem(machine), prog(entries), 70)
        assert a == b


def test_scaled_latencies(machine):
    half = machine.scaled_latencies(0.5)
    assert half.memory.coherence_ns == 34.0 and half.big.l1d.hit_ns == 1.0
    validate_machine(half)
    validate_machine(machine.scaled_latencies(1.5))
