"""Relative length in Z^2 * Z where each Z^2 coset is coned off."""

from metriclab.groups import parse_group_spec
from metriclab.metrics import GeneratingSet, build_metric
from metriclab.numbers import format_number
from metriclab.relhyp import CosetId, coset_projection, relative_geodesic, relative_length

G = parse_group_spec("Z^2 * Z")
m = build_metric(G, GeneratingSet.standard(G))

for word in ("e1^2 e2^3 t e1", "e1^5 e2^7", "e1 t^-2 e2 t"):
    g = G.parse_element(word)
    path = relative_geodesic(m.gens, g)
    print(f"{word:<16} word length {format_number(m.length(g)):>4}  relative length {relative_length(m.gens, g)}"
          f"  steps {''.join(s.kind for s in path.steps)}")

proj = coset_projection(m, CosetId(0, ()), G.parse_element("t"))
print("projection of t onto Z^2:", sorted(G.key(p) for p in proj.points), "diameter", format_number(proj.diameter))
