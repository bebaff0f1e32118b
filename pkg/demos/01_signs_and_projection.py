"""Why signs are hard to compress, and what the projection constrains.

Run: python3 demos/01_signs_and_projection.py
"""

# %% Quantise one photograph at QF 50 and look at the AC sign bits.
import numpy as np

from dsr.codec import extract_signs
from dsr.corpus import load_named
from dsr.imageio import pad_to_blocks
from dsr.metrics import binary_entropy
from dsr.pocs import magnitude_field, project
from dsr.trainer import initial_from_grid
from dsr.transform import BASE_QUANT_TABLE, dct2, forward_quantize, scale_quant_table, to_blocks

image = pad_to_blocks(load_named("camera"))
table = scale_quant_table(BASE_QUANT_TABLE, 50)
grid = forward_quantize(image, table)
signs, _ = extract_signs(grid, table)
print(f"{signs.size} non-zero AC levels, {signs.mean():.3f} of them negative")
print(f"raw sign entropy: {binary_entropy(int(signs.sum()), signs.size):.4f} bits/sign")

# %% Without any side information a sign costs about one bit. The decoder does
# know the magnitudes, though, so every block of a plausible image must satisfy
# |DCT coefficient| <= dequantised magnitude.
lam = magnitude_field(grid, table)
x0 = initial_from_grid(grid.levels, table)
print(f"x0 (DC only) already feasible: {np.all(np.abs(dct2(to_blocks(x0))) <= lam + 1e-12)}")

# %% Projection onto that set is a coefficient-wise clamp. Start from noise:
rng = np.random.default_rng(0)
z = x0 + 0.3 * rng.standard_normal(x0.shape)
pz, kept = project(z, lam)
print(f"noisy guess: {np.mean(np.abs(dct2(to_blocks(z))) > lam):.2%} of coefficients out of bounds")
print(f"after projection: max violation {np.max(np.abs(dct2(to_blocks(pz))) - lam):.1e}")
print(f"coefficients passed through unclamped: {kept.mean():.2%}")

# %% Signs read off the projected noise are no better than chance. The network
# learns to produce images whose clamped DCT signs agree with the truth.
mask = grid.levels != 0
mask[..., 0, 0] = False
guess = dct2(to_blocks(pz))[mask] < 0
print(f"AoS of projected noise: {np.mean(guess == (grid.levels[mask] < 0)):.3f}")
