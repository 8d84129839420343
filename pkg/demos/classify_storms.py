"""Featurize synthetic storms and compare the six classifiers by 10-fold CV.

Run: python demos/classify_storms.py   (about ten seconds)
"""
import numpy as np

from windclime.features import CLASSES, featurize_storm
from windclime.ingest import StationMeta
from windclime.learn import KINDS, Dataset, evaluate, kfold_cross_validate, stratified_split, train_classifier
from windclime.storms import segment_storms
from windclime.synth import SynthSpec, generate_synthetic_station, labels_from_truth

station = generate_synthetic_station(SynthSpec(years=10), seed=11)
meta = StationMeta("SYN", 30.0, 122.0, 10.0)
storms = segment_storms(station.frame)
labels = labels_from_truth(storms, station.truth)

X = np.vstack([featurize_storm(s, meta) for s in storms])
data = Dataset(X, [labels[s.storm_id] for s in storms], [s.storm_id for s in storms], CLASSES, "SYN")
print("feature matrix", X.shape, "class counts", np.bincount(data.y))

for kind in KINDS:
    r = kfold_cross_validate(data, 10, kind, seed=0)
    print(f"{kind:5s} accuracy {r.mean_accuracy:.3f} +/- {r.std_accuracy:.3f}")

# Hold-out evaluation of one model, with the confusion matrix and macro AUC.
train, test = stratified_split(data, 0.7, seed=0)
report = evaluate(train_classifier("SVM", train), test)
print("SVM confusion (rows true, cols predicted):", CLASSES)
print(report.confusion)
print("macro AUC", round(report.macro_auc, 4))
