"""Train a small recursive model and use it inside the codec.

A few hundred patches and one epoch take seconds on one core; the
acceptance configuration (RDSR K=4, 2000 patches, 5 epochs) takes about seven.

Run: python3 demos/02_train_small_model.py [out.dsrw]
"""

# %%
import sys
import time

from dsr.codec import decode, encode
from dsr.corpus import TEST_NAMES, TRAIN_NAMES, load_named
from dsr.evaluate import evaluate
from dsr.neuralnet import save_checkpoint
from dsr.trainer import PatchSet, TrainConfig, train

out = sys.argv[1] if len(sys.argv) > 1 else "demo.dsrw"

# %% Patches come from the training images only; the test photographs stay unseen.
patches = PatchSet([load_named(n) for n in TRAIN_NAMES], patch_size=64, count=400, seed=0)
config = TrainConfig(K=2, epochs=1, lr=3e-3, seed=0)
t0 = time.perf_counter()
params = train(patches, config, progress=sys.stdout)
print(f"trained {params.count()} parameters in {time.perf_counter() - t0:.0f}s")
save_checkpoint(params, out)

# %% Accuracy of signs on three held-out photographs at the training QF.
test = [(n, load_named(n)) for n in TEST_NAMES[:3]]
for row in evaluate(test, params, [50]):
    print(f"{row.image:10s} AoS {row.aos:.3f}  BPS {row.bps:.3f} (raw {row.bps_baseline:.3f})")

# %% The residual replaces the raw sign bits in the stream; decoding is exact.
name, image = test[0]
plain = encode(image, 50, retrieval=False)
coded = encode(image, 50, params)
assert (decode(coded, params).samples == decode(plain).samples).all()
print(f"{name}: {len(plain)} bytes with raw signs, {len(coded)} bytes with retrieval")
