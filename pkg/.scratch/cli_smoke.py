import json
import subprocess
import sys

import numpy as np

from ambit.bundle import EmbeddingSet, ModelBundle, ModelHead, save_bundle

rng = np.random.default_rng(11)
n, f = 3, 4
head = ModelHead(rng.standard_normal((n, f)), rng.standard_normal(n),
                 [f"c{k}" for k in range(n)])
centers = rng.standard_normal((n, f)) * 2.5
xs, ys = [], []
for k in range(n):
    xs.append(centers[k] + 0.4 * rng.standard_normal((30, f)))
    ys.append(np.full(30, k, dtype=np.int64))
train = EmbeddingSet(np.vstack(xs), np.concatenate(ys))
ev = EmbeddingSet(centers[rng.integers(0, n, 12)]
                  + 0.4 * rng.standard_normal((12, f)))
bundle = ModelBundle(head, train, ev)
save_bundle(bundle, "/tmp/smokebundle")

def run(*argv):
    r = subprocess.run([sys.executable, "-m", "ambit.cli", *argv],
                       capture_output=True, text=True)
    return r.returncode, r.stdout, r.stderr

rc, out, err = run("score", "--bundle", "/tmp/smokebundle")
assert rc == 0, err
assert len(out.strip().splitlines()) == 12
rc2, out2, _ = run("score", "--bundle", "/tmp/smokebundle")
assert out2 == out, "score not deterministic"
print("score ok")

rc, out, err = run("gate", "--bundle", "/tmp/smokebundle", "--percentile", "90")
assert rc == 0, err
decs = [json.loads(l) for l in out.strip().splitlines()]
print("gate ok, abstained:", sum(d["abstained"] for d in decs), "/", len(decs))

rc, out, err = run("bounds", "--bundle", "/tmp/smokebundle")
assert rc == 0, err
assert out.startswith("tau,delta"), out[:50]
print("bounds ok")

rc, out, err = run("regions", "--bundle", "/tmp/smokebundle",
                   "--seed", "3", "--mc-samples", "20000")
assert rc == 0, err
rep = json.loads(out)
rc2, out2, _ = run("regions", "--bundle", "/tmp/smokebundle",
                   "--seed", "3", "--mc-samples", "20000")
assert out2 == out, "regions not deterministic"
print("regions ok:", list(rep["polytopes"]))

rc, _, err = run("regions", "--bundle", "/tmp/smokebundle")
assert rc == 2 and "seed" in err, (rc, err)
print("seed guard ok")

rc, _, err = run("score", "--bundle", "/tmp/nosuchbundle")
assert rc == 2, (rc, err)
print("missing bundle -> 2 ok")

# detector round trip via profile files
rc, out, _ = run("score", "--bundle", "/tmp/smokebundle")
lines = out.strip().splitlines()
with open("/tmp/sm_pos.jsonl", "w") as fh:
    fh.write("\n".join(lines[:6]) + "\n")
with open("/tmp/sm_neg.jsonl", "w") as fh:
    fh.write("\n".join(lines[6:]) + "\n")
rc, out, err = run("detector", "train", "--positive", "/tmp/sm_pos.jsonl",
                   "--negative", "/tmp/sm_neg.jsonl", "--out", "/tmp/sm_model.json")
assert rc == 0, err
rc, out, err = run("detector", "eval", "--model", "/tmp/sm_model.json",
                   "--positive", "/tmp/sm_pos.jsonl", "--negative", "/tmp/sm_neg.jsonl")
assert rc == 0, err
print("detector ok:", out.strip())

rc, _, err = run("detector", "train", "--positive", "/tmp/sm_pos.jsonl",
                 "--negative", "/tmp/missing.jsonl")
assert rc == 2, (rc, err)
print("missing negatives -> 2 ok")
print("CLI SMOKE OK")
