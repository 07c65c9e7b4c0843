"""One-pass reference analysis of data/annotations.jsonl.

Definitions: a participant's accuracy is correct / non-neutral answers;
per system, each participant's accuracy on that system's items is one
sample; every system except the control and the originals gets a Welch
test against the control with Bonferroni correction over those tests;
duration outliers fall outside mean +- 2 population sd of per-participant
mean durations."""
import json
import math
import pathlib
from collections import defaultdict

from scipy import stats

CONTROL = "spinnerchief"
here = pathlib.Path(__file__).resolve()
records = [json.loads(l) for l in (here.parents[2] / "data" / "annotations.jsonl").read_text().splitlines() if l.strip()]

overall = defaultdict(lambda: [0, 0, 0])  # correct, wrong, dont_know
per_system = defaultdict(lambda: defaultdict(lambda: [0, 0, 0]))
dk_system = defaultdict(lambda: [0, 0])
dur = defaultdict(list)
likert = defaultdict(lambda: defaultdict(list))
for r in records:
    dur[r["participant_id"]].append(r["duration_minutes"])
    if "likert" in r:
        for dim, v in r["likert"].items():
            likert[r["system"]][dim].append(v)
    if "answer" not in r:
        continue
    truth = "original" if r["system"] == "original" else "machine"
    slot = 2 if r["answer"] == "dont_know" else (0 if r["answer"] == truth else 1)
    overall[r["participant_id"]][slot] += 1
    per_system[r["system"]][r["participant_id"]][slot] += 1
    dk_system[r["system"]][0] += slot == 2
    dk_system[r["system"]][1] += 1

participants = {}
for p, (c, w, d) in sorted(overall.items()):
    if c + w:
        participants[p] = {"accuracy": c / (c + w), "dont_know_ratio": d / (c + w + d)}

samples = {}
for s, by_p in per_system.items():
    samples[s] = [c / (c + w) for p, (c, w, d) in sorted(by_p.items()) if c + w]
tested = [s for s in samples if s not in (CONTROL, "original")]
systems = {}
for s, xs in sorted(samples.items()):
    n = len(xs)
    mean = sum(xs) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in xs) / (n - 1))
    half = stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n)
    entry = {"mean": mean, "lo": mean - half, "hi": mean + half, "dont_know_ratio": dk_system[s][0] / dk_system[s][1]}
    if s in tested:
        t = stats.ttest_ind(samples[CONTROL], xs, equal_var=False)
        entry["t"] = float(t.statistic)
        entry["p"] = float(t.pvalue)
        entry["p_bonferroni"] = min(1.0, float(t.pvalue) * len(tested))
    systems[s] = entry

means = {p: sum(v) / len(v) for p, v in dur.items()}
mu = sum(means.values()) / len(means)
sigma = math.sqrt(sum((v - mu) ** 2 for v in means.values()) / len(means))
outliers = sorted(p for p, v in means.items() if v < mu - 2 * sigma or v > mu + 2 * sigma)

out = {
    "control": CONTROL,
    "participants": participants,
    "mean_participant_accuracy": sum(v["accuracy"] for v in participants.values()) / len(participants),
    "systems": systems,
    "duration_outliers": outliers,
    "likert": {
        s: {d: {"mean": sum(v) / len(v), "std": math.sqrt(sum((x - sum(v) / len(v)) ** 2 for x in v) / (len(v) - 1)), "n": len(v)}
            for d, v in sorted(dims.items())}
        for s, dims in sorted(likert.items())
    },
}
here.with_name("annotations_oracle.json").write_text(json.dumps(out, indent=2) + "\n")
print(json.dumps({k: out[k] for k in ("mean_participant_accuracy", "duration_outliers")}, indent=2))
print(json.dumps(systems, indent=2))
