"""Quick check that the compiled extension imports and its main entry points work."""

import math
import tempfile
from pathlib import Path

import se3kit


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    y = se3kit.spherical_harmonics(0, 1.0, 2.0)
    assert len(y) == 1 and close(y[0], 0.5 / math.sqrt(math.pi))

    d = se3kit.wigner_d(1, 0.0, 0.0, 0.0)
    assert all(close(d[i][j], float(i == j)) for i in range(3) for j in range(3))

    q = se3kit.basis_q(1, 1, 1)
    assert len(q) == 3 and len(q[0]) == 9

    (h2,) = se3kit.featurize("2\nhydrogen\nH 0 0 0\nH 0 0 0.74\n")
    assert (h2.num_nodes, h2.num_edges) == (2, 2)
    assert se3kit.graphs_from_json(se3kit.graphs_to_json([h2]))[0].edges == h2.edges

    graphs = se3kit.synthetic_graphs(24, 2, 5, seed=1)
    model, metrics = se3kit.train(graphs[:20], ["pair_decay"], validation=graphs[20:], epochs=3, channels=4)
    assert [m[0] for m in metrics] == [1, 2, 3]
    preds = model.predict(graphs)
    assert len(preds) == 24 and all(math.isfinite(p[0]) for p in preds)

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "params.json"
        model.save(str(path))
        assert se3kit.Model.load(str(path)).predict(graphs) == preds

    passed, stages, report = se3kit.check_equivariance(atoms=5, degrees=2, channels=4, heads=2, trials=3)
    assert passed, report
    assert stages[0][0] == "pairwise_conv"

    fresh = se3kit.Model(["energy"], model="tfn", channels=4)
    assert fresh.num_params > 0 and fresh.targets == ["energy"]

    print("python smoke test passed")


if __name__ == "__main__":
    main()
