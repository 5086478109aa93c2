"""Smoke test for the pyfpgp extension module.

Build the module and put it on the path first, e.g.

    cargo build --release -p fingerprint-gp-python --features extension-module
    cp target/release/libpyfpgp.so python/pyfpgp.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyfpgp  # noqa: E402


def check_tree():
    t = pyfpgp.ProgramTree.parse("(* x angle)", ["x", "angle"])
    assert math.isclose(t.evaluate([147, -1.05]), -154.35)
    assert t.depth == 2 and t.node_count == 3
    assert str(pyfpgp.ProgramTree.parse(t.to_prefix(), t.variables)) == "(* x angle)"
    try:
        pyfpgp.ProgramTree.parse("(+ x", ["x"])
    except ValueError:
        pass
    else:
        raise AssertionError("unbalanced text parsed")


def check_evolve():
    cfg = pyfpgp.EvolutionConfig(population_size=500, max_generations=50, seed=4)
    xs = [[float(x)] for x in range(1, 11)]
    ys = [x[0] + 3 for x in xs]
    tree, fitness, _ = pyfpgp.evolve(xs, ys, cfg)
    assert fitness < 1e-6, (tree, fitness)
    assert all(math.isclose(tree.evaluate(x), y) for x, y in zip(xs, ys))


def check_matching(tmp):
    names = [n for n, _ in pyfpgp.write_fixtures(tmp)]
    assert len(names) == 8
    query = pyfpgp.fixture_set()
    assert query.endings[0] == (147, -1.05, 48)
    cfg = pyfpgp.EvolutionConfig(population_size=300, max_generations=60, seed=1)
    template = pyfpgp.Template.build(query, cfg)
    path = os.path.join(tmp, "template.txt")
    template.save(path)
    loaded = pyfpgp.Template.load(path)
    assert loaded.to_text() == template.to_text()
    assert loaded.formula("end") is not None

    report = loaded.decide(pyfpgp.fixture_set(3))
    assert report["decision"] == "NON_MATCH"
    assert report["end"]["status"] == "count_mismatch"
    own = template.decide(query, threshold=1e9)
    assert own["decision"] == "MATCH"
    end_rmse, _ = template.training_rmse()
    assert math.isclose(own["end"]["mse"], end_rmse**2, rel_tol=1e-9, abs_tol=1e-9)
    # the file keeps nine significant digits
    saved_rmse, _ = loaded.training_rmse()
    assert math.isclose(saved_rmse, end_rmse, rel_tol=1e-8)


def check_extract(tmp):
    size, c = 41, 20
    grid = [[0] * size for _ in range(size)]
    grid[c][c] = 1
    for i in range(1, 10):
        grid[c][c - i] = 1
        grid[c - i][c + i] = 1
        grid[c + i][c + i] = 1
    path = os.path.join(tmp, "y.pbm")
    with open(path, "w") as f:
        f.write(f"P1\n{size} {size}\n")
        for row in grid:
            f.write(" ".join(map(str, row)) + "\n")
    found = pyfpgp.extract_minutiae(path)
    assert len(found.endings) == 3 and len(found.bifurcations) == 1
    assert found.bifurcations[0] == (c, 3.14, 0.79, -0.79, c)
    end_csv, _ = found.save_csv(os.path.join(tmp, "y"))
    again = pyfpgp.MinutiaeSet.load_csv(end_csv=end_csv)
    assert again.endings == found.endings
    try:
        pyfpgp.extract_minutiae(os.path.join(tmp, "missing.pbm"))
    except OSError:
        pass
    else:
        raise AssertionError("missing image loaded")


def main():
    check_tree()
    check_evolve()
    with tempfile.TemporaryDirectory() as tmp:
        check_matching(tmp)
        check_extract(tmp)
    print("pyfpgp smoke test: ok")


if __name__ == "__main__":
    main()
