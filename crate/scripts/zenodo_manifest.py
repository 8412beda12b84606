"""Build a claimdist manifest from an unpacked copy of the published corpus.

The record's internal layout is not documented, so this expects one directory
per group (text files inside, any nesting) plus the query text:

    python scripts/zenodo_manifest.py CORPUS_DIR \
        --query CORPUS_DIR/query.txt \
        --group h-index=H-Index --group scientometrics=Scientometrics --group random=Random \
        --embedding glove.6B.300d.txt --dim 300 > corpus.toml

Each --group maps a label to a subdirectory of CORPUS_DIR. Document ids are the
file stems (so doc "7" comes from 7.txt). Paths are written relative to the
manifest's directory when --out is given, otherwise absolute.
"""
import argparse
import pathlib
import sys


def toml_str(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("corpus", type=pathlib.Path)
    p.add_argument("--query", type=pathlib.Path, required=True)
    p.add_argument("--query-id", default="query")
    p.add_argument("--group", action="append", required=True, metavar="LABEL=SUBDIR")
    p.add_argument("--embedding", type=pathlib.Path, required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--variant", default="symmetric-max")
    p.add_argument("--stopwords", type=pathlib.Path)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--glob", default="*.txt")
    p.add_argument("--out", type=pathlib.Path)
    args = p.parse_args()

    base = args.out.resolve().parent if args.out else None

    def path(x):
        x = x.resolve()
        if base is None:
            return x
        try:
            return x.relative_to(base)
        except ValueError:
            return x

    lines = ["[query]", f"id = {toml_str(args.query_id)}", f"path = {toml_str(path(args.query))}", ""]
    lines += ["[embedding]", f"path = {toml_str(path(args.embedding))}"]
    if args.dim:
        lines.append(f"expected_dim = {args.dim}")
    lines += ["", "[options]", f"variant = {toml_str(args.variant)}", f"seed = {args.seed}"]
    if args.stopwords:
        lines.append(f"stopwords = {toml_str(path(args.stopwords))}")

    seen = set()
    query = args.query.resolve()
    for spec in args.group:
        label, _, sub = spec.partition("=")
        if not sub:
            p.error(f"--group expects LABEL=SUBDIR, got {spec!r}")
        files = sorted(f for f in (args.corpus / sub).rglob(args.glob) if f.resolve() != query)
        if not files:
            p.error(f"no {args.glob} files under {args.corpus / sub}")
        for f in files:
            doc_id = f.stem if f.stem not in seen else f"{label}-{f.stem}"
            seen.add(doc_id)
            lines += ["", "[[documents]]", f"id = {toml_str(doc_id)}", f"group = {toml_str(label)}", f"path = {toml_str(path(f))}"]

    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
