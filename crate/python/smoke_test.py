"""Smoke test for the skeleton_control extension module.

Build and install first:

    pip install --no-build-isolation -e crates/python

then run `python python/smoke_test.py`.
"""

import math

import skeleton_control as sc


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []

    price = sc.bs_call_price(49.0, 55.0, 0.2, 1.0)
    results.append(check("bs price", abs(price - 1.811209) < 5e-7, f"{price:.7f}"))

    results.append(check("epsilon", sc.epsilon_schedule(3) == 0.125))
    results.append(check("steps", sc.steps_horizon(3, 1.0) == 64))
    results.append(check("chi_1", sc.chi(1) == (1.0, 0.0)))

    path = sc.sample_path(3, 10_000, seed=1)
    n = len(path["signs"])
    ups = sum(s > 0 for s in path["signs"]) / n
    mean_wait = sum(path["waiting_times"]) / n
    results.append(check("sign frequency", abs(ups - 0.5) < 3 * 0.5 / math.sqrt(n), f"{ups:.4f}"))
    results.append(check("mean wait", abs(mean_wait - 0.015625) < 1e-3, f"{mean_wait:.6f}"))
    st = path["stop_times"]
    results.append(check("stop times increase", all(b > a for a, b in zip(st, st[1:]))))

    dev = [sc.clock_deviation(k, n_paths=2_000, seed=2)[0] for k in (2, 3, 4)]
    results.append(check("clock deviation shrinks", dev[0] > dev[1] > dev[2], str(dev)))

    report = sc.run_table1(k=3, n_mc=2_000, seed=7)
    results.append(
        check("hedged premium", abs(report["result_mean"] - 1.811209) < 0.02, f"{report['result_mean']:.6f}")
    )
    results.append(check("no clamping", report["clamp_events"] == 0))
    results.append(check("replicates", len(report["replicates"]) == 2_000))
    again = sc.run_table1(k=3, n_mc=2_000, seed=7)
    results.append(check("reproducible", again["replicates"] == report["replicates"]))

    tree = sc.solve_hedging(k=1, horizon=0.5, engine="exact-tree", eval_paths=2_000)
    reg = sc.solve_hedging(k=1, horizon=0.5, n_paths=5_000, eval_paths=2_000)
    results.append(check("engines agree", abs(tree["v0"] - reg["v0"]) < 1e-3, f"{tree['v0']:.5f} {reg['v0']:.5f}"))

    try:
        sc.bs_call_price(-1.0, 55.0, 0.2, 1.0)
        results.append(check("bad input raises", False))
    except ValueError:
        results.append(check("bad input raises", True))

    if not all(results):
        raise SystemExit(1)
    print("all checks passed")


if __name__ == "__main__":
    main()
