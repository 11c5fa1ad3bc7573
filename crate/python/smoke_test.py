"""Smoke test for the pytrialcraft extension.

Build first with `cargo build -p trialcraft-py --release`, then run
`python3 python/smoke_test.py [path/to/libpytrialcraft.so]`.
"""

import importlib.util
import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load(lib_path=None):
    candidates = [pathlib.Path(lib_path)] if lib_path else [
        ROOT / "target" / profile / "libpytrialcraft.so" for profile in ("release", "debug")
    ]
    lib = next((c for c in candidates if c.exists()), None)
    if lib is None:
        sys.exit("libpytrialcraft.so not found; run cargo build -p trialcraft-py first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "pytrialcraft.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("pytrialcraft", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    tc = load(sys.argv[1] if len(sys.argv) > 1 else None)

    d = tc.TrialDataset([1.0, 0.0, 3.0, 2.0], [1, 0, 1, 0], [[], [], [], []], [])
    unadjusted = json.dumps(
        {"estimator": "unadjusted", "family": "gaussian", "pi": {"mode": "estimated_overall"}, "seed": 1}
    )
    r = tc.estimate(d, unadjusted)
    assert r.theta_hat == 1.0, r
    assert r.method == "unadjusted"
    lo, hi = r.ci
    assert lo <= 1.0 <= hi

    dgp = {"name": "smoke", "n": 300, "p": 3, "pi": 0.5, "outcome_kind": "continuous",
           "mechanism": "linear", "effect_size": 0.5}
    sim = tc.generate_dataset(json.dumps(dgp), 7)
    assert (sim.n, sim.p) == (300, 3)
    assert sim.column_names == ["x1", "x2", "x3"]
    cfg = {"estimator": "crossfit_aipw", "family": "gaussian", "pi": {"mode": "known", "pi": 0.5},
           "seed": 3, "learner": "wrong_model"}
    cf = tc.estimate(sim, json.dumps(cfg))
    assert abs(cf.theta_hat - 0.5) < 5 * cf.se, cf
    assert abs(sum(cf.if_mu1)) < 1e-8
    assert json.loads(cf.to_json())["method"] == "crossfit_aipw"

    assert tc.true_theta(json.dumps(dgp)) == (0.5, "analytic")

    try:
        tc.validate_config(json.dumps(dict(cfg, folds={"k": 1})))
    except tc.ConfigError as e:
        assert "folds.k" in str(e)
    else:
        raise AssertionError("K = 1 should be rejected")

    try:
        tc.TrialDataset([1.0, 2.0], [1, 1], [[0.0], [1.0]])
    except tc.DataError:
        pass
    else:
        raise AssertionError("single-arm data should be rejected")

    spec = {"dgp": dgp, "replicates": 100, "master_seed": 5,
            "estimators": [{"label": "cf", "config": cfg}]}
    one = tc.run_monte_carlo(json.dumps(spec), 1)
    two = tc.run_monte_carlo(json.dumps(spec), 2)
    assert one == two
    report = json.loads(one)
    assert report["estimators"][0]["relative_efficiency_vs_unadjusted"] > 1.0

    m = json.loads(tc.compute_metrics([1.0, 1.0, 1.0], [0.1, 0.1, 0.1], 1.0))
    assert m["bias"] == 0.0 and m["coverage_95"] == 1.0

    print("pytrialcraft smoke test passed")


if __name__ == "__main__":
    main()
