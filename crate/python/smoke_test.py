"""Exercises the Python bindings end to end; exits nonzero on failure."""

import math

import mmot_py as m


def close(a, b, tol=1e-8):
    return abs(a - b) <= tol


def main():
    p = m.Distribution([0.0, 1.0])
    q = m.Distribution([2.0, 3.0])
    assert close(m.wasserstein(p, q), 2.0)
    assert close(m.wasserstein(p, q, ell=2), 2.0)

    r = m.pairwise_mmot([p, q, m.Distribution([1.0])])
    assert close(r["value"], 2.0 + 1.0 + 1.0), r
    assert len(r["per_pair_terms"]) == 3

    v = m.planar_values(0.01)
    assert close(v["w123"], 0.5) and close(v["w124"], 0.125)
    assert close(v["w134"], 0.1275) and close(v["w234"], 0.1275)
    assert v["violation_margin"] > 0

    audit = m.hash_audit(4)
    assert audit["pair_map"]["passes"] and audit["triple_map"]["passes"]

    t = m.DistanceTensor(2, 4)
    for i in range(4):
        for j in range(i + 1, 4):
            t.set([i, j], 1.0 + 0.1 * (i + j))
    assert t.sampled_count() == 6
    assert t.audit(1.0)["empirical_c"] >= 1.0 - 1e-12
    back = m.DistanceTensor.from_csv(t.to_csv())
    assert back.to_csv() == t.to_csv()
    assert t.inject(seed=3, fraction=0.2).audit(1.0)["empirical_c"] < 1.0

    sig = m.graph_signature(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    assert len(sig) == 6 and all(close(math.hypot(*z), 1.0) for z in sig)

    assert m.clustering_error([1, 1, 0, 0], [0, 0, 1, 1]) == 0.0
    assert m.verify()["passed"]
    print("python smoke test passed")


if __name__ == "__main__":
    main()
