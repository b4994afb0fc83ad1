"""Build one month of program networks by hand and cluster them.

Run: python demos/03_networks_and_clustering.py
"""

import numpy as np

from newsbias.clustering import adjusted_rand_index, matrix_stddev, spectral_cluster
from newsbias.entities import Keyword, KeywordAssignment
from newsbias.networks import build_month
from newsbias.stance import StanceRecord

REFS = ((0, 0), (0, 1), (0, 2))
coverage = {
    ("FOX", "Hannity"): ["Trump", "Biden", "Durham"],
    ("FOX", "Ingraham"): ["Trump", "Biden", "Barr"],
    ("CNN", "AC360"): ["Trump", "Biden", "Cuomo"],
    ("CNN", "Newsroom"): ["Trump", "Cuomo", "Fauci"],
    ("MSNBC", "Maddow"): ["Trump", "Biden", "Fauci"],
    ("MSNBC", "The Beat"): ["Trump", "Fauci", "McConnell"],
}
lean = {"FOX": 1.0, "CNN": -1.0, "MSNBC": -1.0}

assignments, stances = [], []
for i, ((net, prog), topics) in enumerate(coverage.items()):
    kws = tuple(Keyword(t, 3, REFS) for t in sorted(topics))
    assignments.append(KeywordAssignment(f"t{i}", kws, prog, net, "2020-10"))
    for t in topics:
        s = lean[net] if t == "Trump" else -lean[net] if t == "Biden" else 0.0
        stances.append(StanceRecord(f"t{i}", t, s, 3, prog, net, "2020-10"))

net = build_month(assignments, stances)
np.set_printoptions(precision=2, suppress=True)
print("programs:", net.programs)
print("\nT (topic cosine):\n", net.t.values)
print("\nS (stance similarity):\n", net.s.values)
print("\nP = T * S:\n", net.p.values)

for name, m in (("T", net.t), ("S", net.s), ("P", net.p)):
    print(f"std of {name} off-diagonal: {matrix_stddev(m):.3f}")

labels = spectral_cluster(net.p, k=2)
truth = {p: p.split(":")[0] == "FOX" for p in net.programs}
print("\nclusters:", labels)
print("ARI vs FOX / not-FOX:", adjusted_rand_index(labels, {p: int(v) for p, v in truth.items()}))
