# # Genetic-algorithm colour clustering
#
# Each chromosome holds K cluster centres in (Y, Cr, Cb). Fitness is the sum
# of Euclidean distances from pixels to their nearest centre; lower is better.

from leafdx.imaging import rgb_to_ycbcr
from leafdx.segmentation import GaConfig, run_ga, select_diseased_cluster
from leafdx.synthgen import generate_one, sample_seed

# A noise-free synthetic Blight leaf: white background, green leaf, brown patches.

sample = generate_one("Blight", 128, 0.0, sample_seed(0, 0))
ycc = rgb_to_ycbcr(sample.image)

result = run_ga(ycc, GaConfig(k=3, seed=1))
print("generations run:", result.generations_run)
print("best fitness per generation:", [round(f, 1) for f in result.history[:8]], "...")

# Cluster centroids. The lesion has the highest Cr of the clusters that stay
# away from the image border.

for i, (count, centre) in enumerate(zip(result.assignment.counts, result.assignment.centroids)):
    print(f"cluster {i}: {count:6d} px  Y={centre[0]:6.1f} Cr={centre[1]:6.1f} Cb={centre[2]:6.1f}")

chosen = select_diseased_cluster(result.assignment, ycc)
pred = result.assignment.labels.reshape(128, 128) == chosen
truth = sample.mask.data[:, :, 0] > 0
print("diseased cluster:", chosen, " IoU vs ground truth:", round((pred & truth).sum() / (pred | truth).sum(), 3))
