"""Reference values for the statistics fixtures, computed with scipy,
statsmodels and scikit-learn. Writes stats_oracle.json next to this file."""
import json
import pathlib

import numpy as np
from scipy import stats
from sklearn.naive_bayes import GaussianNB
from statsmodels.stats.inter_rater import fleiss_kappa

out = {}

a = [0.82, 0.79, 0.91, 0.75, 0.88, 0.70]
b = [0.55, 0.61, 0.49, 0.66, 0.52]
r = stats.ttest_ind(a, b, equal_var=False)
out["welch"] = {"a": a, "b": b, "t": float(r.statistic), "p": float(r.pvalue)}

x = [1.0, 2.0, 3.0, 4.0, 5.0]
lo, hi = stats.t.interval(0.95, len(x) - 1, loc=np.mean(x), scale=stats.sem(x))
out["mean_ci"] = {"values": x, "level": 0.95, "mean": float(np.mean(x)), "lo": float(lo), "hi": float(hi)}

m = [[5, 0, 0], [2, 3, 0], [1, 1, 3], [0, 4, 1]]
out["fleiss"] = {"matrix": m, "kappa": float(fleiss_kappa(np.array(m), method="fleiss"))}

# class 0 = machine, class 1 = original
X = np.array([[0.0, 0.0], [1.0, 0.5], [0.5, 1.0], [3.0, 3.0], [2.5, 4.0], [4.0, 3.5]])
y = np.array([0, 0, 0, 1, 1, 1])
nb = GaussianNB(var_smoothing=0.0).fit(X, y)
queries = [[1.0, 1.0], [2.5, 2.5], [3.0, 1.0]]
jll = nb.predict_joint_log_proba(np.array(queries))
proba = nb.predict_proba(np.array(queries))
out["gaussian_nb"] = {
    "points": X.tolist(),
    "labels": y.tolist(),
    "means": nb.theta_.tolist(),
    "variances": nb.var_.tolist(),
    "queries": queries,
    "log_joint": jll.tolist(),
    "posterior": proba.tolist(),
}

path = pathlib.Path(__file__).with_name("stats_oracle.json")
path.write_text(json.dumps(out, indent=2) + "\n")
print(json.dumps(out, indent=2))
