"""Rebuild data/sample_corpus.txt from Python docstrings.

Sources: the CPython standard library (PSF license) and the docstrings of
numpy, scipy, scikit-learn, pandas, networkx, sympy and statsmodels (all
BSD-3-Clause). Keeps prose-like paragraphs only (no doctest/code/list
blocks), joins wrapped lines, deduplicates, and writes paragraphs separated
by blank lines. Output is deterministic for a given installation.
"""
import ast
import pathlib
import re
import sys
import sysconfig

MIN_CHARS = 120
SKIP = {"test", "tests", "site-packages", "dist-packages"}
SITE = pathlib.Path("/usr/local/lib/python3.10/dist-packages")
PACKAGES = ["numpy", "scipy", "sklearn", "pandas", "networkx", "sympy", "statsmodels"]


def prose(par):
    lines = par.splitlines()
    if any(l.lstrip().startswith((">>>", "...", "-", "=", "*", "|", ":", "..")) for l in lines):
        return None
    if len({len(l) - len(l.lstrip()) for l in lines if l.strip()}) > 1:
        return None
    text = " ".join(l.strip() for l in lines)
    if len(text) < MIN_CHARS or not text[0].isupper() or text[-1] not in ".!?":
        return None
    if sum(c.isalpha() or c.isspace() for c in text) / len(text) < 0.9:
        return None
    if re.search(r"[{}\[\]=\\`<>]|::", text):
        return None
    return text


def main(out):
    roots = [pathlib.Path(sysconfig.get_paths()["stdlib"])] + [SITE / p for p in PACKAGES]
    seen = set()
    paras = []
    for root in roots:
        for path in sorted(root.rglob("*.py")):
            if SKIP & set(path.relative_to(root).parts):
                continue
            try:
                tree = ast.parse(path.read_text(encoding="utf-8"))
            except Exception:
                continue
            for node in ast.walk(tree):
                if not isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
                    continue
                doc = ast.get_docstring(node)
                if not doc:
                    continue
                for par in re.split(r"\n\s*\n", doc):
                    text = prose(par)
                    if text and text not in seen:
                        seen.add(text)
                        paras.append(text)
    pathlib.Path(out).write_text("\n\n".join(paras) + "\n", encoding="utf-8")
    print(len(paras), "paragraphs", sum(len(p.split()) for p in paras), "words", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/sample_corpus.txt")
