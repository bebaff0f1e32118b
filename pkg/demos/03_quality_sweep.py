"""How a model trained at one quality factor behaves at others.

Run: python3 demos/03_quality_sweep.py model.dsrw
(for instance the checkpoint written by 02_train_small_model.py)
"""

# %%
import sys

from dsr.corpus import TEST_NAMES, load_named
from dsr.evaluate import evaluate
from dsr.neuralnet import load_checkpoint

params = load_checkpoint(sys.argv[1] if len(sys.argv) > 1 else "demo.dsrw")
test = [(n, load_named(n)) for n in TEST_NAMES]

# %% Coarser quantisation keeps fewer, larger coefficients. Those are the ones
# whose signs shape the image most, so they are easier to guess.
rows = [r for r in evaluate(test, params, [10, 25, 50, 75, 90]) if r.image == "MEAN"]
print("qf    AoS   BPS reduction  bpp")
for r in rows:
    print(f"{r.qf:3d}  {r.aos:.3f}  {100 * r.bps_reduction:6.2f}%  {r.bpp:.4f}")
