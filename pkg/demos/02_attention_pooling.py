"""Multi-head attention pooling on a spatial feature map, with heatmaps.

A feature grid with two synthetic 'objects' goes through the attention
module; each head produces a weight distribution over cells, which is
rendered to a PGM heatmap the way the CLI's export-attention does.

    python3 demos/02_attention_pooling.py   # writes /tmp/vsembed_demo/*.pgm
"""

import os

import numpy as np

from vsembed.attention import (
    attend,
    attention_to_heatmap,
    attention_weights,
    init_attention_params,
    init_projection_params,
    project_joint,
)
from vsembed.dataio import write_heatmap
from vsembed.encoders import flatten_spatial
from vsembed.tensor import tensor

rng = np.random.default_rng(7)
h = w = 4
d = 16

# A map that is mostly quiet, with two strong distinct cells.
grid = rng.normal(scale=0.05, size=(h, w, d)).astype(np.float32)
grid[0, 1] += rng.normal(scale=2.0, size=d)
grid[3, 2] += rng.normal(scale=2.0, size=d)

features = flatten_spatial(tensor(grid))
print("flattened grid:", features.shape, "(cell (x, y) -> row y*w + x)")

params = init_attention_params(rng, d=d, d_attn=8, heads=3, activation="relu", drop=0.0)
weights = attention_weights(features, params)
print("attention row sums:", weights.data.sum(axis=1).round(6).tolist())

pooled = attend(weights, features)
print("pooled embedding matrix:", pooled.shape)

proj = init_projection_params(rng, d=d, heads=3, d_joint=32, drop=0.0)
joint = project_joint(pooled, proj)
print("joint vector norm:", float(np.linalg.norm(joint.data)))

out_dir = "/tmp/vsembed_demo"
os.makedirs(out_dir, exist_ok=True)
for head in range(weights.shape[0]):
    raster = attention_to_heatmap(weights.data[head], w, h, 128, 128)
    path = os.path.join(out_dir, f"attention_head{head}.pgm")
    write_heatmap(raster, path)
    peak = np.unravel_index(int(raster.argmax()), raster.shape)
    print(f"head {head}: peak at pixel (y={peak[0]}, x={peak[1]}) -> {path}")
