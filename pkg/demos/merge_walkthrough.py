"""
Merging a four-bus network step by step
=======================================

A short radial spur is removed first, then a short meshed line is merged
and the long line behind it re-attaches in series. Run it and read the
printout from top to bottom.
"""

from gridfold.grid import Branch, Bus, GeoCoord, Network, TRANSFORMER, bus_distance
from gridfold.reduction import FULL, RADIAL, ReductionConfig, reduce_network, reduction_stats

buses = (
    Bus("1", GeoCoord(0.0, 0.0), is_substation=True),
    Bus("2", GeoCoord(0.0, 0.01)),
    Bus("3", GeoCoord(0.0, 0.5), is_substation=True),
    Bus("4", GeoCoord(0.005, 0.01)),
)
branches = (
    Branch("A", "1", "2", 0.01, 0.1, 100.0),
    Branch("B", "2", "4", 0.02, 0.15, 50.0),
    Branch("C", "2", "3", 0.03, 0.3, 80.0),
    Branch("T", "1", "3", 0.001, 0.05, 200.0, kind=TRANSFORMER),
)
net = Network(buses=buses, branches=branches, name="four-bus")

for b in net.branches:
    print(f"{b.id}: {b.from_bus}-{b.to_bus}  {bus_distance(net, b.from_bus, b.to_bus):6.2f} km")

# radial-only pass: the spur to bus 4 is shorter than 2 km and goes
radial, mm = reduce_network(net, ReductionConfig(2.0, RADIAL))
print("\nradial pass removed", mm.removed_lines, "-> buses", [b.id for b in radial.buses])

# full pass: bus 2 is also folded into substation 1
full, mm = reduce_network(net, ReductionConfig(2.0, FULL))
print("full pass bus map", mm.bus_map)
for b in full.branches:
    print(f"  {b.id}: {b.from_bus}-{b.to_bus} r={b.r:.3f} x={b.x:.3f} from {mm.components(b.id)}")

stats = reduction_stats(net, full)
print("\nbuses", stats["original"]["buses"], "->", stats["reduced"]["buses"],
      "| lines", stats["original"]["lines"], "->", stats["reduced"]["lines"])
