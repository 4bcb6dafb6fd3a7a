"""Powers of the central element of H3 are distorted: d(1, z^n) grows like sqrt(n)."""

import math

from metriclab.groups import parse_group_spec
from metriclab.metrics import GeneratingSet, build_metric
from metriclab.numbers import format_number
from metriclab.spectrum import translation_length

H = parse_group_spec("H3")
m = build_metric(H, GeneratingSet.standard(H))
z = H.parse_key("0:0,0,1")

for n in (1, 4, 9, 16, 25):
    d = m.length(H.power(z, n))
    print(f"n={n:>2}  d(1,z^n)={format_number(d):>5}  d/sqrt(n)={float(d) / math.sqrt(n):.3f}")

est = translation_length(m, z, n_max=24)
print("upper:", format_number(est.upper), "recent slope:", format_number(est.recent_slope),
      "class:", est.classify())
