import numpy as np
import pytest
from hypothesis import given, strategies as st

from daebl.kernel_ir import (
    ADDR, LOAD, ArrayDecl, KernelError, KernelSpec, OutOfBoundsAddress, RangeOutOfBounds,
    UnknownArray, UseBeforeDef, addr_calc, backward_address_slice, compute, evaluate_addresses,
    load, store, trace_addresses, validate_kernel,
)
from daebl.presets import offset_sum_kernel


def cigar_chain(n=8):
    """idx[i] -> data[idx[i]], two address calcs on the way."""
    arrays = (
        ArrayDecl("idx", 4, n, 0x1000, tuple(reversed(range(n)))),
        ArrayDecl("data", 8, n, 0x8000),
    )
    body = (
        addr_calc(1),
        load(2, "idx", deps=[1]),
        addr_calc(3, [2]),
        load(4, "data", via=2, deps=[3]),
        compute(5, [4]),
    )
    return KernelSpec("chain", n, body, arrays)


def test_offset_sum_kernel_is_valid():
    k = validate_kernel(offset_sum_kernel(100))
    assert k.iterations == 100
    assert [ins.kind for ins in k.body] == [ADDR, LOAD, ADDR, LOAD, "compute", "store"]


def test_minimal_kernel_single_compute():
    k = validate_kernel(KernelSpec("one", 1, (compute(1),), ()))
    assert k.position == {1: 0}
    assert backward_address_slice(k) == frozenset()


def test_store_into_undeclared_array():
    spec = KernelSpec("bad", 4, (compute(1), store(2, 1, "nope")), ())
    with pytest.raises(UnknownArray):
        validate_kernel(spec)


def test_use_before_def_reports_instruction():
    spec = KernelSpec("bad", 4, (compute(1, [2]), compute(2)), ())
    with pytest.raises(UseBeforeDef) as e:
        validate_kernel(spec)
    assert e.value.instr_id == 1


def test_out_of_bounds_reports_iteration():
    spec = KernelSpec("oob", 10, (load(1, "a", 1, 3),), (ArrayDecl("a", 8, 11, 0),))
    with pytest.raises(OutOfBoundsAddress) as e:
        validate_kernel(spec)
    assert e.value.instr_id == 1
    assert e.value.iteration == 8


def test_overlapping_arrays_rejected():
    arrays = (ArrayDecl("a", 8, 16, 0), ArrayDecl("b", 8, 16, 64))
    with pytest.raises(KernelError, match="overlap"):
        validate_kernel(KernelSpec("ov", 2, (load(1, "a"),), arrays))


def test_user_prefetch_rejected():
    from daebl.kernel_ir import PREFETCH, AddressExpr, Instr
    spec = KernelSpec("p", 2, (Instr(1, PREFETCH, (), 1, AddressExpr("a")),), (ArrayDecl("a", 8, 4, 0),))
    with pytest.raises(KernelError, match="transform"):
        validate_kernel(spec)


def test_indirection_needs_declared_values():
    arrays = (ArrayDecl("idx", 4, 4, 0), ArrayDecl("d", 8, 4, 0x100))
    spec = KernelSpec("ind", 4, (load(1, "idx"), load(2, "d", via=1)), arrays)
    with pytest.raises(KernelError, match="contents"):
        validate_kernel(spec)


def test_slice_of_offset_sum_is_both_address_calcs():
    assert backward_address_slice(validate_kernel(offset_sum_kernel())) == {1, 3}


def test_slice_of_chain_hand_enumerated():
    # 4 needs via=2 and dep 3; 3 reads 2; 2 needs 1. Compute 5 stays out.
    assert backward_address_slice(validate_kernel(cigar_chain())) == {1, 2, 3}


def test_slice_without_loads_is_empty():
    arrays = (ArrayDecl("c", 8, 4, 0),)
    k = validate_kernel(KernelSpec("st", 4, (addr_calc(1), compute(2), store(3, 2, "c", deps=[1])), arrays))
    assert backward_address_slice(k) == frozenset()


def test_trace_is_deterministic_and_ordered():
    k = validate_kernel(offset_sum_kernel(10))
    a = trace_addresses(k, range(2, 5))
    assert a == trace_addresses(k, range(2, 5))
    assert [x[0] for x in a] == [2, 2, 2, 3, 3, 3, 4, 4, 4]
    assert a[0] == (2, 0x1_0000 + 8 * 3, LOAD)


def test_trace_range_checked():
    k = validate_kernel(offset_sum_kernel(10))
    with pytest.raises(RangeOutOfBounds):
        trace_addresses(k, [10])


def test_indirect_addresses_follow_data():
    k = validate_kernel(cigar_chain(8))
    loads = [a for (i, a, kind) in trace_addresses(k, range(8), (LOAD,))]
    assert loads[1] == 0x8000 + 8 * 7
    assert loads[15] == 0x8000


def test_predicated_instruction_skips_iterations():
    arrays = (ArrayDecl("a", 8, 8, 0),)
    spec = KernelSpec("pred", 8, (load(1, "a", predicate="p"),), arrays, predicates=(("p", (True, False)),))
    k = validate_kernel(spec)
    assert [i for i, _, _ in trace_addresses(k, range(8))] == [0, 2, 4, 6]
    assert k.streams[1][1] == -1


@st.composite
def affine_kernels(draw):
    n = draw(st.integers(1, 40))
    narr = draw(st.integers(1, 3))
    arrays = []
    base = 0
    for a in range(narr):
        length = n * 3 + 4
        arrays.append(ArrayDecl(f"a{a}", draw(st.sampled_from([4, 8])), length, base))
        base += 8 * length + 64 * draw(st.integers(0, 4))
    body = []
    next_id = 1
    addr_ids = []
    for _ in range(draw(st.integers(1, 6))):
        kind = draw(st.sampled_from(["addr", "load", "compute"]))
        if kind == "addr":
            body.append(addr_calc(next_id, [x for x in addr_ids if draw(st.booleans())], draw(st.integers(1, 4))))
            addr_ids.append(next_id)
        elif kind == "load":
            deps = [x for x in addr_ids if draw(st.booleans())]
            body.append(load(next_id, f"a{draw(st.integers(0, narr - 1))}", draw(st.integers(1, 3)),
                             draw(st.integers(0, 4)), deps=deps))
        else:
            body.append(compute(next_id, [], draw(st.integers(1, 3))))
        next_id += 1
    return KernelSpec("rand", n, tuple(body), tuple(arrays))


@given(affine_kernels())
def test_slice_is_sound_and_minimal(spec):
    k = validate_kernel(spec)
    s = backward_address_slice(k)
    assert all(k.instr(x).kind in (ADDR, LOAD) for x in s)
    full = evaluate_addresses(k, s, range(k.iterations))
    assert full is not None
    want = [(i, ins.id, int(k.streams[ins.id][i])) for i in range(k.iterations)
            for ins in k.body if ins.kind == LOAD]
    assert full == want
    for x in s:
        assert evaluate_addresses(k, s - {x}, range(k.iterations)) is None


@given(affine_kernels())
def test_streams_within_bounds(spec):
    k = validate_kernel(spec)
    for ins in k.body:
        if ins.addr is None:
            continue
        arr = spec.array(ins.addr.array)
        s = k.streams[ins.id]
        assert np.all((s >= arr.base) & (s < arr.end))
