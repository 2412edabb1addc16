"""
Reference decoder kernels
=========================

Runs the straight-line forward pieces on seeded random inputs: scaled
dot-product attention, the per-query coefficient head, and the dense head
that turns coefficients plus a feature map into edge-probability maps.
Closes with the layer schedule and its cross-attention cost accounting.
"""

import numpy as np

from pointedge import (
    FeatureMap,
    QuerySet,
    coef_head,
    cross_attention_cost,
    default_schedule,
    dense_head,
    scaled_dot_attention,
)

rng = np.random.default_rng(0)

# Attention: every output row is a convex combination of the value rows,
# so each weight row sums to one no matter how extreme the logits are.
queries = rng.standard_normal((4, 16)) * 8.0
keys = rng.standard_normal((10, 16)) * 8.0
values = rng.standard_normal((10, 16))
out, weights = scaled_dot_attention(queries, keys, values)
print(f"attention: {out.shape[0]} outputs of dim {out.shape[1]}")
print(f"weight row sums: {np.array2string(weights.sum(axis=1), precision=15)}")
print(f"sharpest row max: {weights.max(axis=1).max():.4f}")

# Coefficient head: a linear layer plus sigmoid, one coefficient row per
# query, every entry strictly inside (0, 1).
qset = QuerySet(rng.standard_normal((4, 16)))
coefs = coef_head(qset, rng.standard_normal((16, 8)), rng.standard_normal(8))
print()
print(f"coefficients: {coefs.n} rows x {coefs.f} channels")
print(f"range: ({coefs.data.min():.4f}, {coefs.data.max():.4f})")

# Dense head: per query, a coefficient-weighted sum over feature channels,
# squashed back into (0, 1). One probability map per query.
features = FeatureMap(rng.standard_normal((8, 32, 32)))
maps = dense_head(coefs, features)
print()
print(f"dense head: {len(maps)} maps of {maps[0].height}x{maps[0].width}")
for i, m in enumerate(maps):
    v = m.values
    print(f"  query {i}: min {v.min():.4f} max {v.max():.4f} mean {v.mean():.4f}")

# The decoder attends to coarse features first and refines: four layers at
# 1/32 scale, then 1/16, then 1/8. Token count grows 4x per refinement and
# the attention cost grows with it.
print()
print("schedule and cross-attention cost for a 512 x 512 input:")
n, d = qset.n, qset.d
for factor in default_schedule().downsample_factors:
    side = 512 // factor
    cost = cross_attention_cost(n, d, side, side)
    print(f"  1/{factor:<2}: {side:>2}x{side:<2} = {side * side:>4} tokens, cost {cost:>12,}")
