from collections import Counter

import pytest
from hypothesis import given, strategies as st

from daebl.kernel_ir import (
    COMPUTE, LOAD, PREFETCH, STORE, ArrayDecl, KernelSpec, compute, load, trace_addresses,
    validate_kernel,
)
from daebl.presets import cigar_like, offset_sum_kernel
from daebl.transform import (
    GranularityOutOfRange, chunk, dump_phase_pair, instruction_overhead, make_phase_pair,
)

from test_kernel_ir import affine_kernels, cigar_chain


def ranges(n, g):
    k = validate_kernel(KernelSpec("c", n, (compute(1),), ()))
    return [(r.start, r.stop) for r in chunk(k, g).slices()]


def test_exact_division():
    assert ranges(100, 25) == [(0, 25), (25, 50), (50, 75), (75, 100)]


def test_identity_chunking():
    assert ranges(100, 100) == [(0, 100)]


def test_short_tail():
    # enumerated by hand: 0-32, 33-65, 66-98, 99
    assert [b - a for a, b in ranges(100, 33)] == [33, 33, 33, 1]


@pytest.mark.parametrize("g", [0, 101, -3])
def test_granularity_out_of_range(g):
    k = validate_kernel(KernelSpec("c", 100, (compute(1),), ()))
    with pytest.raises(GranularityOutOfRange):
        chunk(k, g)


@given(st.integers(1, 1000), st.data())
def test_chunks_partition_iterations(n, data):
    g = data.draw(st.integers(1, n))
    flat = [i for a, b in ranges(n, g) for i in range(a, b)]
    assert flat == list(range(n))
    assert len(ranges(n, g)) == -(-n // g)


def test_offset_sum_access_body():
    pair = make_phase_pair(chunk(validate_kernel(offset_sum_kernel(100)), 10))
    kinds = [(ins.id, ins.kind) for ins in pair.access]
    assert kinds == [(1, "addr"), (2, PREFETCH), (3, "addr"), (4, PREFETCH)]
    assert pair.execute == offset_sum_kernel(100).body
    assert not pair.degenerate


def test_pure_compute_is_degenerate():
    pair = make_phase_pair(chunk(validate_kernel(KernelSpec("c", 8, (compute(1), compute(2, [1])), ())), 4))
    assert pair.access == ()
    assert pair.degenerate
    assert "degenerate" in dump_phase_pair(pair)
    assert instruction_overhead(pair) == 1.0


def test_chain_keeps_index_load_blocking():
    pair = make_phase_pair(chunk(validate_kernel(cigar_chain(8)), 4))
    kinds = {ins.id: ins.kind for ins in pair.access}
    assert kinds == {1: "addr", 2: LOAD, 3: "addr", 4: PREFETCH}


def test_offset_sum_overhead():
    # base 6 ops/iter, access 4 ops/iter: (4 + 6) / 6
    pair = make_phase_pair(chunk(validate_kernel(offset_sum_kernel(100)), 25))
    assert instruction_overhead(pair) == pytest.approx(10 / 6)


def test_all_load_kernel_overhead_is_two():
    arrays = (ArrayDecl("a", 8, 16, 0),)
    k = validate_kernel(KernelSpec("l", 16, (load(1, "a"), load(2, "a", 1, 0)), arrays))
    assert instruction_overhead(make_phase_pair(chunk(k, 4))) == 2.0


def access_multisets(pair):
    k = pair.kernel
    out = []
    for r in pair.chunked.slices():
        acc = Counter()
        exe = Counter()
        for i in r:
            for ins in pair.access:
                if ins.kind in (LOAD, PREFETCH) and k.executes(ins, i):
                    acc[int(k.streams[ins.id][i])] += 1
            for ins in pair.execute:
                if ins.kind == LOAD and k.executes(ins, i):
                    exe[int(k.streams[ins.id][i])] += 1
        out.append((acc, exe))
    return out


@given(affine_kernels(), st.data())
def test_access_covers_execute_loads(spec, data):
    k = validate_kernel(spec)
    pair = make_phase_pair(chunk(k, data.draw(st.integers(1, k.iterations))))
    for acc, exe in access_multisets(pair):
        assert acc == exe
    assert not any(ins.kind in (STORE, COMPUTE) for ins in pair.access)


def test_cigar_access_matches_trace():
    k = validate_kernel(cigar_like(256))
    pair = make_phase_pair(chunk(k, 64))
    want = Counter(a for (_, a, _) in trace_addresses(k, range(64, 128), (LOAD,)))
    assert access_multisets(pair)[1][0] == want


def test_dump_golden():
    pair = make_phase_pair(chunk(validate_kernel(offset_sum_kernel(100)), 25))
    assert dump_phase_pair(pair) == GOLDEN


GOLDEN = """\
// offset_sum: N=100 granularity=25 slices=4
void access() {
  offset = 0
  for (j = 0; j < 4; j++) {
    for (k = 0; k < min(25, N - offset); k++) {
      i = offset + k
      v1 = addr(i)
      prefetch(a[i+1])
      v3 = addr(i)
      prefetch(b[i+2])
    }
    offset += 25
  }
}
void execute() {
  offset = 0
  for (j = 0; j < 4; j++) {
    for (k = 0; k < min(25, N - offset); k++) {
      i = offset + k
      v1 = addr(i)
      v2 = a[i+1]
      v3 = addr(i)
      v4 = b[i+2]
      v5 = op1(v2, v4)
      c[i] = v5
    }
    offset += 25
  }
}
"""
