# # GLCM texture features
#
# The lesion region is described by five statistics of its grey-level
# co-occurrence matrix: contrast, energy, dissimilarity, entropy, correlation.

import numpy as np

from leafdx.synthgen import CLASSES, generate_one, sample_seed
from leafdx.texture import GlcmConfig, compute_glcm, extract_features, glcm_features

# The smallest interesting case: two rows of constant grey.

g = compute_glcm(np.array([[0, 0], [1, 1]]), None, (0, 1), GlcmConfig(levels=2))
print("GLCM:\n", g)
print(glcm_features(g))

# Feature vectors of one lesion per disease class, computed inside the
# ground-truth mask.

for i, label in enumerate(CLASSES):
    s = generate_one(label, 128, 3.0, sample_seed(2, i))
    vec = extract_features(s.image, s.mask)
    print(f"{label:>12}: " + "  ".join(f"{v:8.4f}" for v in vec))
