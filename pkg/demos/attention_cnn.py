"""Train a small CNN with and without channel attention and inspect the attention maps.

This takes a few minutes on one CPU core. Pass a number of epochs to shorten it:
    python demos/attention_cnn.py 30
"""

import math
import sys

import numpy as np

from mimoce.analysis import attention_analysis
from mimoce.channel import SystemConfig
from mimoce.estimators import EstimatorKind, LSEstimator, build_cnn
from mimoce.harness import TrainConfig, build_dataset, evaluate_mse, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
cfg = SystemConfig(n_antennas=64, angular_spread=math.radians(5), snr_db=20.0, master_seed=0)
ds = build_dataset(cfg, 20_000, modes=("full",))
print("ls", evaluate_mse(LSEstimator(), ds.test)[0]["mse_linear"])

models = {}
for tag in ("cnn", "cnn-att"):
    model = build_cnn(EstimatorKind(tag, n_blocks=2, filters=32), 64, seed=0)
    est, rep = train(model, ds, TrainConfig(batch_size=50, max_epochs=epochs, snr_db=20.0),
                     progress=lambda e, tl, vl, lr: e % 10 or print(f"  {tag} epoch {e:3d}  val {vl:.4f}  lr {lr:g}"))
    models[tag] = est
    print(tag, evaluate_mse(est, ds.test)[0]["mse_linear"], "best epoch", rep.best_epoch)

# Attention maps per sine range of the mean AoA. Neighbouring ranges should
# give similar maps and a distant range a different one.
est = models["cnn-att"]
res = attention_analysis(est.model, est.features(ds.val, 0), ds.val.channels.mean_aoa)
for layer in res.layers:
    print(f"layer {layer}: samples per bucket {res.bucket_counts}")
    print(np.array2string(res.distances[layer], precision=3))
