"""Compare the word metric on F(2) with the one that also counts ab as a single letter."""

from metriclab.comparison import MetricPair, coarse_equality_verdict
from metriclab.groups import parse_group_spec
from metriclab.hyperbolicity import witness_search
from metriclab.metrics import GeneratingSet, build_metric
from metriclab.numbers import format_number
from metriclab.spectrum import compare_spectra

F2 = parse_group_spec("F(2)")
std = build_metric(F2, GeneratingSet.standard(F2), name="std")
abc = build_metric(F2, GeneratingSet.from_words(F2, [("a", "a"), ("b", "b"), ("c", "a b")]), name="abc")

elements = [F2.parse_element(w) for w in ("a", "b", "a b", "a b^-1")]
table = compare_spectra(std, abc, elements)
print(table.to_csv())
print("spectra:", table.verdict, "witness:", F2.key(table.witness) if table.witness else "-")

pair = MetricPair(std, abc, "f2-abc")
prof = coarse_equality_verdict(pair, [4, 6, 8, 10])
print("max |Δ| by radius:", ", ".join(format_number(m) for m in prof.max_abs), "->", prof.verdict)

w = witness_search(pair, 10, N=8, delta_threshold=2)
print(w.summary())
