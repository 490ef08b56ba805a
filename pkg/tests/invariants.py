"""Structural checks on a reduction, shared by the unit and acceptance suites."""

import pytest

from gridfold.grid import haversine_distance, radial_lines
from gridfold.reduction import FULL, compose_impedance
from gridfold.scenarios import SynthKnobs, synth_network


def random_network(seed, n):
    knobs = SynthKnobs(hv_fraction=0.4, candidates_per_cluster=2, n_integer_candidates=1)
    return synth_network(seed, n, knobs)[0]


def check_reduction(net, red, mm, D, mode):
    # conservation
    assert sum(l.peak for l in red.loads) == pytest.approx(sum(l.peak for l in net.loads))
    assert sum(g.capacity for g in red.generators) == pytest.approx(sum(g.capacity for g in net.generators))
    for attr in ("power_capacity", "energy_capacity"):
        assert sum(getattr(s, attr) for s in red.storage) == pytest.approx(sum(getattr(s, attr) for s in net.storage))
    for kind in ("generators", "storage", "loads", "candidates"):
        assert len(getattr(red, kind)) == len(getattr(net, kind))
    assert len(red.transformers) == len(net.transformers)

    # provenance
    assert set(mm.bus_map) == {b.id for b in net.buses}
    assert set(mm.bus_map.values()) == {b.id for b in red.buses}
    for kind in ("generators", "storage", "loads", "candidates"):
        for orig, new in zip(getattr(net, kind), getattr(red, kind)):
            assert orig.id == new.id
            assert mm.bus_map[orig.bus] == new.bus == mm.relocation[orig.id]
    for t in net.transformers:
        assert mm.line_composition[t.id] == t.id
        rt = red.branch(t.id)
        assert (rt.from_bus, rt.to_bus) == (mm.bus_map[t.from_bus], mm.bus_map[t.to_bus])

    # every original line is accounted for
    covered = set(mm.removed_lines)
    for rid in mm.line_composition:
        covered |= set(mm.components(rid))
    assert covered == {b.id for b in net.branches}
    assert set(mm.line_composition) == {b.id for b in red.branches}

    # series law
    orig = {b.id: b for b in net.branches}
    for b in red.branches:
        r, x = compose_impedance(mm.line_composition[b.id], orig.__getitem__)
        assert (b.r, b.x) == pytest.approx((r, x), rel=1e-9, abs=1e-15)

    # fixpoints
    loc = {b.id: b.location for b in red.buses}
    dist = {b.id: haversine_distance(loc[b.from_bus], loc[b.to_bus]) for b in red.lines}
    for lid in radial_lines(red):
        assert dist[lid] > D
    if mode == FULL:
        tpairs = {frozenset((t.from_bus, t.to_bus)) for t in red.transformers}
        for b in red.lines:
            assert dist[b.id] > D or frozenset((b.from_bus, b.to_bus)) in tpairs
    assert all(b.from_bus != b.to_bus for b in red.branches)
