# # Colour space and enhancement
#
# Leaf images are converted from RGB to YCbCr before clustering. Luma (Y)
# carries brightness; Cb and Cr carry chroma, so brown lesions and green
# tissue separate along Cr.

import numpy as np

from leafdx.imaging import RGB, GRAY, GammaParams, RasterImage, SsimParams
from leafdx.imaging import gamma_degrade, gamma_enhance, rgb_to_ycbcr, ssim, ycbcr_to_rgb

# A few reference colours: black, white, a leaf green and a lesion brown.

swatch = RasterImage(np.array([[[0, 0, 0], [255, 255, 255], [60, 140, 50], [150, 85, 40]]], dtype=float), RGB)
ycc = rgb_to_ycbcr(swatch)
for name, (y, cb, cr) in zip(["black", "white", "green", "brown"], ycc.data[0]):
    print(f"{name:>6}: Y={y:7.2f} Cb={cb:7.2f} Cr={cr:7.2f}")

# The inverse is exact up to floating point, so a round trip is lossless.

back = ycbcr_to_rgb(ycc)
print("round-trip max error:", np.abs(back.data - swatch.data).max())

# Gamma degradation darkens an image; enhancement with the same gamma undoes it.

rng = np.random.default_rng(0)
img = RasterImage(rng.uniform(0, 255, (32, 32, 1)), GRAY)
for g in (1.5, 3.5, 5.5):
    dark = gamma_degrade(img, GammaParams(g))
    fixed = gamma_enhance(dark, GammaParams(g))
    print(f"gamma {g}: ssim(degraded)={ssim(img, dark):.4f}  ssim(restored)={ssim(img, fixed):.4f}")

# Two flat patches at a quarter and a half of full scale give the textbook
# zero-variance SSIM value.

a = RasterImage(np.full((11, 11, 1), 0.25 * 255), GRAY)
b = RasterImage(np.full((11, 11, 1), 0.50 * 255), GRAY)
print("flat-patch ssim:", round(ssim(a, b, SsimParams(11)), 4))
