"""Writes the synthetic demo corpus under demo/ (vectors, texts, manifest)."""
import pathlib
import numpy as np

rng = np.random.default_rng(7)
DIM = 12
root = pathlib.Path(__file__).resolve().parent.parent / "demo"

metric = "index citation citations researcher productivity impact scientist papers hirsch ranking".split()
field = "bibliometric journal publication network collaboration patent funding database analysis scholarly".split()
other = "recipe weather river football garden music painting ocean travel kitchen".split()
common = "propose show measure study results method data number use new".split()

e = np.eye(DIM)
centers = {
    "metric": e[0],
    "field": 0.55 * e[0] + 0.835 * e[1],
    "other": e[2],
    "common": 0.4 * e[0] + 0.4 * e[1] + 0.4 * e[2] + 0.72 * e[3],
}
rows = []
for name, words in [("metric", metric), ("field", field), ("other", other), ("common", common)]:
    for w in words:
        v = centers[name] + 0.25 * rng.standard_normal(DIM)
        rows.append((w, v))

(root / "texts").mkdir(parents=True, exist_ok=True)
with open(root / "vectors.txt", "w") as f:
    f.write(f"{len(rows)} {DIM}\n")
    for w, v in rows:
        f.write(w + " " + " ".join(f"{x:.5f}" for x in v) + "\n")


def sentence(pool, n):
    words = list(rng.choice(pool, size=n))
    return " ".join(words).capitalize() + "."


def text(pools, sentences=4):
    out = []
    for _ in range(sentences):
        pool = pools[rng.integers(len(pools))]
        out.append(sentence(pool + common, int(rng.integers(6, 11))))
    return " ".join(out) + "\n"


(root / "texts" / "query.txt").write_text(
    "We propose an index for the productivity and impact of a researcher. "
    "The number of papers with citations at least equal to that number ranks each scientist. "
    "Football and weather are not discussed. "
    "We show the index measure of citation impact is robust.\n"
)

groups = {"h-index": [metric], "scientometrics": [field, metric + field], "random": [other]}
manifest = [
    "[query]", 'id = "query"', 'path = "texts/query.txt"', "",
    "[embedding]", 'path = "vectors.txt"', f"expected_dim = {DIM}", "",
    "[options]", 'variant = "symmetric-max"', "seed = 42",
]
doc = 1
for group, pools in groups.items():
    for _ in range(8):
        name = f"texts/{group}-{doc}.txt"
        (root / name).write_text(text(pools))
        manifest += ["", "[[documents]]", f'id = "{doc}"', f'group = "{group}"', f'path = "{name}"']
        doc += 1
(root / "manifest.toml").write_text("\n".join(manifest) + "\n")
