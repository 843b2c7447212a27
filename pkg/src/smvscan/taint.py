"""Forward taint over the def-use graph.

Sources are the message-context reads (caller, call value, calldata);
taint follows operand edges forward, so it crosses stack shuffling, PHI
joins, and traced memory cells, and stops at the deliberate barriers
(loaded storage words, external call results).  `propagate` accepts a set
of removed edges so callers can probe how findings depend on individual
flows; removing an edge can only ever shrink the tainted set.
"""

from __future__ import annotations

from .absint import DefUseGraph

C1_SOURCE_OPS = frozenset(
    {"CALLER", "CALLVALUE", "CALLDATALOAD", "CALLDATACOPY", "CALLDATASIZE", "CALLCODE"}
)


def source_nodes(graph: DefUseGraph, site_ranges=None) -> set[int]:
    """Node ids of message-context reads, optionally limited to offset ranges."""
    out = set()
    for v in graph.values:
        if v.op not in C1_SOURCE_OPS:
            continue
        if site_ranges is not None and not any(
            lo <= v.site < hi for lo, hi in site_ranges
        ):
            continue
        out.add(v.nid)
    return out


def propagate(
    graph: DefUseGraph,
    sources: set[int],
    removed_edges: frozenset[tuple[int, int]] = frozenset(),
) -> set[int]:
    """Forward closure of the sources along operand edges."""
    fwd: dict[int, list[int]] = {}
    for dst, srcs in graph.operands.items():
        for src in srcs:
            if (src, dst) not in removed_edges:
                fwd.setdefault(src, []).append(dst)
    tainted = set(sources)
    work = list(sources)
    while work:
        n = work.pop()
        for dst in fwd.get(n, ()):
            if dst not in tainted:
                tainted.add(dst)
                work.append(dst)
    return tainted


def tainted_leaves(graph: DefUseGraph, nid: int, tainted: set[int]) -> set[int]:
    """Tainted nodes in the operand closure of nid (including itself)."""
    out = set()
    seen = set()
    work = [nid]
    while work:
        n = work.pop()
        if n in seen:
            continue
        seen.add(n)
        if n in tainted:
            out.add(n)
        work.extend(graph.inputs(n))
    return out
