"""Tune a regression tree for one synthetic project and compare it with untuned CART."""
from oshealth.data import IndicatorId, split_horizon
from oshealth.decart import DEConfig, decart_tune
from oshealth.learners import CartHyperParams, cart_fit
from oshealth.metrics import mre
from oshealth.synthetic import SyntheticSpec, generate_synthetic

project = generate_synthetic(SyntheticSpec(project_count=1, months_per_project=60, seed=3))[0]
split = split_horizon(project, IndicatorId.STAR, 1)  # train on months 1..59, forecast month 60
print(project.project_id, "train rows", len(split.train), "features", split.train.X.shape[1])

# tuning: DE over (max_feature, max_depth, min_sample_leaf, min_sample_split)
tuned = decart_tune(split.train, DEConfig(), seed=0)
print("tuned params", tuned.params)
print("DE evaluations", tuned.evaluations)
for gen, best in tuned.log:
    print(f"  gen {gen:2d}  validation error {best:.3f}")

default = cart_fit(split.train, CartHyperParams(), seed=0)
for name, tree in (("DECART", tuned.tree), ("CART", default)):
    guess, actual = tree.predict(split.test_features), split.test_actual
    print(f"{name:6s} predict {guess:8.2f} actual {actual:8.2f} MRE {mre((guess, actual)).value:.3f}"
          f"  depth {tree.max_depth}")

print("features used by the tuned tree:", tuned.tree.used_feature_names())
