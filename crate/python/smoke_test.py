"""Smoke test for the anf_py extension module.

Build first with `cargo build -p anf-py` (or `--release`), then run
`python3 python/smoke_test.py`. The script copies the built library next to a
temporary import path under the module name Python expects.
"""

import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_module():
    for profile in ("release", "debug"):
        lib = os.path.join(ROOT, "target", profile, "libanf_py.so")
        if os.path.exists(lib):
            tmp = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(tmp, "anf_py.so"))
            sys.path.insert(0, tmp)
            import anf_py

            return anf_py
    sys.exit("libanf_py.so not found; run `cargo build -p anf-py` first")


def main():
    anf = import_module()

    assert anf.ene_dim(376, 0.99) == 37600
    assert anf.ene_dim(11, 0.8) == 55
    assert "toy_anf_td3" in anf.presets()
    assert "static-ablation" in anf.suites()
    assert "agent.lr" in anf.config_reference()

    assert anf.final_score(list(range(1, 101)), [float(i) for i in range(1, 101)], 100) == 95.5
    mean, half = anf.mean_ci([0.0, 2.0])
    assert mean == 1.0 and abs(half - 1.96) < 1e-12

    r = anf.conjecture(mu=4.0)
    assert r["passed"] and abs(r["w1"] - 1.0) < 1e-2
    try:
        anf.conjecture(lr=10.0)
        raise AssertionError("divergence not reported")
    except ArithmeticError:
        pass

    overrides = [
        "agent.hidden_dims=[16, 16]",
        "agent.initial_collect=200",
        "run.total_steps=1000",
        "run.eval_interval=100",
        "run.eval_episodes=2",
        "sparsity.topology_period=100",
    ]
    t = anf.Trainer("toy_anf_td3", seed=1, overrides=overrides)
    assert t.state_dim == 80 and t.original_dim == 8
    t.run_until(500)
    saved = t.checkpoint()
    t.run_until(1000)
    resumed = anf.Trainer.restore(saved)
    resumed.run_until(1000)
    assert t.evals() == resumed.evals()
    assert t.final_score() == resumed.final_score()
    c = t.connectivity("critic1")
    assert c["steps"][0] == 0 and len(c["steps"]) == 11
    action = t.act([0.0] * t.state_dim)
    assert len(action) == 4 and all(-1.0 <= a <= 1.0 for a in action)

    try:
        anf.Trainer("no_such_preset")
        raise AssertionError("bad config accepted")
    except ValueError:
        pass

    with tempfile.TemporaryDirectory() as out:
        s = anf.execute_run("toy_dense_td3", seed=0, overrides=overrides, output=out)
        assert s["d_ene"] == 80
        assert os.path.exists(os.path.join(s["run_dir"], "metrics.csv"))

    print("anf_py smoke test passed")


if __name__ == "__main__":
    main()
