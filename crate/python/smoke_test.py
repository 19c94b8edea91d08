"""Smoke test for the `aspire` extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml
Then run:                  python python/smoke_test.py
"""

import json
import math
import pathlib
import tempfile

import aspire

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "fixtures" / "synthetic"


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


check(aspire.parse_cell("m") is None, "missing marker parses to None")
check(aspire.parse_cell(" 3.5 ") == 3.5, "numeric cell parses")
check(aspire.normalize_country("Korea*") == "Korea", "footnote marks are stripped")
check(math.isclose(aspire.compute_delta(1.0, 3.5), 2.5), "delta is 2022 minus 2018")

z = aspire.zscore([1.0, 2.0, 3.0])
check(math.isclose(sum(z), 0.0, abs_tol=1e-12), "z-scores are centred")
check(math.isclose(aspire.pearson([1, 2, 3], [2, 4, 6]), 1.0), "pearson of a line is 1")

xs, ys = [1, 2, 3, 4, 5], [2, 3, 5, 5, 7]
d = [a - b for a, b in zip(xs, ys)]
mean = sum(d) / len(d)
sd = math.sqrt(sum((v - mean) ** 2 for v in d) / (len(d) - 1))
t = aspire.paired_t_test(xs, ys)
check(t["degrees_of_freedom"] == 4 and math.isclose(t["t_statistic"], mean / (sd / math.sqrt(len(d)))), "paired t-test")
check(aspire.quantile_bins([1, 2, 3, 4, 5, 6]) == ["low", "low", "medium", "medium", "high", "high"], "tertile bins")

ds = aspire.Dataset({
    "career_deltas": str(FIXTURE / "career_deltas.csv"),
    "domain_math": str(FIXTURE / "domain_math.csv"),
})
m = ds.matrix("math")
rows = [(c, r) for c, r in zip(m["countries"], m["values"]) if all(v is not None for v in r)]
check(len(rows) >= 40, f"dataset loads ({len(ds)} countries, {len(rows)} complete)")
countries = [c for c, _ in rows]
x = [r[:3] for _, r in rows]
y = [r[3] for _, r in rows]

km = aspire.kmeans(countries, x, k=3, seed=1)
check(sorted(set(km["assignments"])) == [0, 1, 2], "kmeans uses every cluster")

ols = aspire.fit_ols(x, y, standardization="both")
check(0.0 <= ols["r_squared"] <= 1.0, f"ols r^2 = {ols['r_squared']:.3f}")

lda = aspire.fit_lda(x, y, threshold="median", folds=5, seed=1)
check(0.0 <= lda["cv"]["accuracy"] <= 1.0, f"lda cv accuracy = {lda['cv']['accuracy']:.3f}")

vae = aspire.train_vae(countries, x, seed=3, epochs=200)
check(len(vae["embeddings"]) == len(countries) and vae["losses"], "vae trains and embeds")

cols = []
fields = ("delta_health", "delta_sci_eng", "delta_sci_tech", "delta_ict")
deltas = [d for d in ds.deltas() if all(d[k] is not None for k in fields)]
for k in fields:
    cols.append(aspire.quantile_bins([d[k] for d in deltas]))
net = aspire.BayesNet.learn(list(fields), cols, seed=5)
post = net.query("delta_ict", {"delta_sci_eng": "low"})
check(math.isclose(sum(post.values()), 1.0), f"bnet posterior sums to 1 ({net!r})")

with tempfile.TemporaryDirectory() as out:
    manifest = aspire.run_pipeline(str(FIXTURE / "pipeline.toml"), out=out, seed=11)
    statuses = {s["stage"]: s["status"] for s in manifest["stages"]}
    check(all(v == "ok" for v in statuses.values()), f"pipeline stages ok: {sorted(statuses)}")
    check((pathlib.Path(out) / "manifest.json").exists(), "manifest written")

print("smoke test passed")
