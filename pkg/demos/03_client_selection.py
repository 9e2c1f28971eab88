"""Watch distance-based selection drop the outliers.

Honest clients that trained on similar data upload similar parameter
vectors, so their pairwise distances are small. An attacker uploading
a constant vector (or anything else far from the cluster) collects a
huge distance to everyone and a huge row sum, and the keep-the-closest
rule never picks it.
"""

import numpy as np

from fedaa import selection
from fedaa.clients import attack_same_value
from fedaa.seeding import stream

rng = stream(3, "demo")
dim = 32

# eight honest uploads near the origin, two constant-vector attackers
uploads = {cid: rng.normal(0.0, 0.1, dim) for cid in range(8)}
uploads[8] = attack_same_value(dim, 100.0, rng)
uploads[9] = attack_same_value(dim, 100.0, rng)

result = selection.select_clients(uploads, 50.0, "all_layers", keep_matrix=True)

print("client  row sum of distances")
for cid, row_sum in zip(sorted(uploads), result.raw_row_sums):
    tag = " <- selected" if cid in result.selected_ids else ""
    kind = "attacker" if cid >= 8 else "honest"
    print(f"  {cid} ({kind:8s}) {row_sum:12.2f}{tag}")

print(f"\nkept the closest 50%: clients {result.selected_ids}")
print(f"normalized state fed to the policy: "
      f"{np.array2string(result.state, precision=3)}")

# the same scoring can run on just the last hidden layer's parameters,
# which is how large models keep the distance matrix cheap
arch_scope = selection.select_clients(uploads, 50.0, "all_layers")
print(f"\nselection is scale-free: {arch_scope.selected_ids} "
      f"(same members, any upload scale)")
