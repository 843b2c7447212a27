import pytest

from smvscan.boundary import recover_heuristic
from smvscan.errors import InvalidSymbol
from smvscan.signatures import (
    SYMBOLS,
    parse_symbols,
    render_symbols,
    signatures_for,
)

from conftest import tokenhub_cfg  # noqa: F401


def test_alphabet_is_fixed_and_ordered():
    assert len(SYMBOLS) == 18
    assert SYMBOLS[:9] == ("R", "W", "C0", "C1", "I", "Re", "E0", "M1", "M2")
    assert SYMBOLS[9:] == tuple(f"P{i}" for i in range(1, 10))


def test_parse_render_round_trip():
    seq = ("R", "W", "I", "Re", "P3")
    assert parse_symbols(render_symbols(seq)) == seq
    assert parse_symbols("") == ()


def test_parse_rejects_unknown_symbol():
    with pytest.raises(InvalidSymbol):
        parse_symbols("R W Q")


def test_signatures_cover_all_regions(tokenhub_cfg):
    regions = recover_heuristic(tokenhub_cfg)
    sigs = signatures_for(tokenhub_cfg, regions)
    assert set(sigs) == {r.id for r in regions}
    for sig in sigs.values():
        assert all(s in SYMBOLS for s in sig.intra)
        assert all(s in SYMBOLS for s in sig.chain)


def test_intra_excludes_nested_region(tokenhub_cfg):
    """A wrapper's own signature must not absorb its inlined callee."""
    regions = recover_heuristic(tokenhub_cfg)
    sigs = signatures_for(tokenhub_cfg, regions)
    validate = next(r for r in regions if r.start == 243)
    outer = next(
        r for r in regions
        if r.kind == "public" and r.contains(validate) and r.id != validate.id
    )
    inner_len = len(sigs[validate.id].intra)
    assert inner_len > 0
    # removing the nested span must have dropped symbols from the wrapper
    whole = [
        ins for ins in tokenhub_cfg.stream.code
        if outer.start <= ins.offset < outer.end
    ]
    assert len(sigs[outer.id].intra) < len(whole)


def test_chain_starts_with_intra(tokenhub_cfg):
    regions = recover_heuristic(tokenhub_cfg)
    sigs = signatures_for(tokenhub_cfg, regions)
    for sig in sigs.values():
        assert sig.chain[: len(sig.intra)] == sig.intra
        assert len(sig.chain) >= len(sig.intra)


def test_leaf_region_chain_equals_intra(tokenhub_cfg):
    from smvscan.cfg import region_call_edges

    regions = recover_heuristic(tokenhub_cfg)
    edges = region_call_edges(tokenhub_cfg, regions)
    sigs = signatures_for(tokenhub_cfg, regions)
    leaves = [r.id for r in regions if not edges.get(r.id)]
    assert leaves, "corpus fixture should have leaf regions"
    for rid in leaves:
        assert sigs[rid].chain == sigs[rid].intra


def test_signatures_deterministic(tokenhub_cfg):
    regions = recover_heuristic(tokenhub_cfg)
    a = signatures_for(tokenhub_cfg, regions)
    b = signatures_for(tokenhub_cfg, regions)
    assert a == b


def test_max_depth_limits_chain(tokenhub_cfg):
    regions = recover_heuristic(tokenhub_cfg)
    deep = signatures_for(tokenhub_cfg, regions, max_depth=5)
    shallow = signatures_for(tokenhub_cfg, regions, max_depth=1)
    for rid in deep:
        assert len(shallow[rid].chain) <= len(deep[rid].chain)
