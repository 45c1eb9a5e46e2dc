"""Regenerate golden files: ``python3 tests/make_golden.py`` (review the diff!)."""

from golden_util import BENCH_CASES, GOLDEN, RUN_CASES, render

if __name__ == "__main__":
    (GOLDEN / "five.csv").write_text("0\n1\n2\n3\n10\n")
    for name in list(RUN_CASES) + list(BENCH_CASES):
        (GOLDEN / name).write_text(render(name))
        print("wrote", name)
