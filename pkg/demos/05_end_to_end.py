# # End to end: synthetic dataset -> segmentation -> features -> SVM
#
# The same steps are available from the shell:
#
#     leafdx synth --out data --per-class 20 --eval-per-class 5 --seed 7
#     leafdx train data/train --model model.json --seed 7
#     leafdx eval data/eval --model model.json --seed 7

import tempfile
from pathlib import Path

from leafdx.classifier import evaluate_accuracy
from leafdx.pipeline import PipelineConfig, derive_seed, load_dataset, stratified_split, train
from leafdx.synthgen import SynthConfig, export_dataset, generate

seed = 7
samples = generate(SynthConfig(per_class=20, seed=seed))
keep_train, keep_eval = stratified_split([s.label for s in samples], 5, derive_seed(seed, "split"))

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    export_dataset([s for s, k in zip(samples, keep_train) if k], root / "train", seed)
    export_dataset([s for s, k in zip(samples, keep_eval) if k], root / "eval", seed)
    cfg = PipelineConfig(seed=seed)
    train_set = load_dataset(root / "train", cfg)
    eval_set = load_dataset(root / "eval", cfg)

model = train(train_set, cfg)
report = evaluate_accuracy(model, eval_set)
print(report.table())
