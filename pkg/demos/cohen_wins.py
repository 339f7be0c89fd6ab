"""How the small-effect threshold turns per-project errors into wins."""
from oshealth.analysis import LOWER_BETTER, cohen_threshold, win_flags

errors = {"KNN": 0.10, "CART": 0.11, "LNR": 0.50}
d = cohen_threshold(errors.values())
print(f"d = 0.3 * sigma = {d.d:.5f}")
print(win_flags(errors, LOWER_BETTER, d))  # KNN is best, CART is within d of it

# rescaling every error leaves the winners unchanged
scaled = {k: 40 * v for k, v in errors.items()}
print(win_flags(scaled, LOWER_BETTER, cohen_threshold(scaled.values())))
