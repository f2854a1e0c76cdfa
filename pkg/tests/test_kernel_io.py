import pytest
from hypothesis import given

from daebl.kernel_io import KernelSyntaxError, dump_kernel, load_kernel, parse_kernel, save_kernel
from daebl.kernel_ir import validate_kernel
from daebl.presets import cigar_like, lbm_like, offset_sum_kernel

from test_kernel_ir import affine_kernels

TEXT = """\
kernel demo   # trailing comment
iterations 6

[arrays]
idx elem=4 length=6 base=0x100 data=5,4,3,2,1,0
a elem=8 length=12 base=0x1000

[predicates]
odd 01

[body]
1 load idx[i]
2 addr in=1 cost=3
3 load a[@1+2] deps=2
4 compute in=3 cost=2 if=odd
5 store a[2*i-0] src=4 if=odd
"""


def test_parse_example():
    spec = parse_kernel(TEXT)
    assert spec.name == "demo" and spec.iterations == 6
    assert spec.array("idx").data == (5, 4, 3, 2, 1, 0)
    ld = spec.instr(3)
    assert (ld.addr.array, ld.addr.via, ld.addr.offset, ld.addr.deps) == ("a", 1, 2, (2,))
    assert spec.instr(4).predicate == "odd"
    assert spec.instr(2).cost == 3
    validate_kernel(spec)


@pytest.mark.parametrize("spec", [offset_sum_kernel(), cigar_like(64), lbm_like(64, 2)],
                         ids=["offset_sum", "cigar", "lbm"])
def test_round_trip_presets(spec):
    assert parse_kernel(dump_kernel(spec)) == spec


@given(affine_kernels())
def test_round_trip_random(spec):
    assert parse_kernel(dump_kernel(spec)) == spec


def test_file_round_trip(tmp_path):
    p = tmp_path / "k.kernel"
    save_kernel(offset_sum_kernel(10), p)
    assert load_kernel(p) == offset_sum_kernel(10)


@pytest.mark.parametrize("bad, line", [
    ("kernel x\niterations ten\n", 2),
    ("kernel x\niterations 1\n[stuff]\n", 3),
    ("kernel x\niterations 1\n[body]\n1 jump\n", 4),
    ("kernel x\niterations 1\n[body]\n1 load a[j]\n", 4),
    ("kernel x\niterations 1\n[arrays]\na elem=8\n", 4),
    ("iterations 1\n", 1),
])
def test_syntax_errors_carry_line(bad, line):
    with pytest.raises(KernelSyntaxError) as e:
        parse_kernel(bad)
    assert e.value.line == line
