"""Smoke test for the `nsp` extension module.

Build and install it first (`maturin develop -m crates/py/Cargo.toml` or
`pip install --no-build-isolation ./crates/py`), then run this file.
"""

import json

import nsp


def main():
    inst = nsp.generate(2, seed=5, days=3, past_days=0, compact=True)
    assert inst.nurse_count == 2 and inst.horizon_days == 3
    assert nsp.Instance.from_json(inst.to_json()).hash() == inst.hash()

    best = nsp.oracle(inst, soften=True)
    assert best["optimal_count"] >= 1 and best["rosters"]

    run = nsp.solve(inst, "LNPS-10", time_limit=2.0, seed=1, soften=True, evals_per_second=20000)
    roster = run["roster"]
    assert roster is not None, run["status"]
    assert run["penalty_vector"] == best["optimum"], (run["penalty_vector"], best["optimum"])
    assert [r["sequence"] for r in run["incumbents"]] == list(range(1, len(run["incumbents"]) + 1))

    report = nsp.evaluate(roster, inst, soften=True)
    assert report["penalty_vector"] == run["penalty_vector"]
    assert nsp.Roster.from_json(roster.to_json(inst), inst) == roster

    again = nsp.solve(inst, "LNPS-10", time_limit=2.0, seed=1, soften=True, evals_per_second=20000)
    assert again["roster"] == roster

    edited, directives = nsp.make_scenario(inst, roster, "entire_retained", seed=2, extra_density=0.3)
    assert len(directives["prioritized"]) == 6
    rerun = nsp.solve(edited, "MP+IS-Low", time_limit=1.0, soften=True, evals_per_second=20000, directives=directives)
    assert rerun["modification_rate"] is not None

    for bad in ["{", json.dumps({"format_version": 1})]:
        try:
            nsp.Instance.from_json(bad)
        except ValueError:
            pass
        else:
            raise AssertionError("accepted a malformed instance")
    try:
        nsp.solve(inst, "LNPS-fast")
    except ValueError:
        pass
    else:
        raise AssertionError("accepted an unknown strategy")

    print("smoke ok:", run["status"], run["penalty_vector"])


if __name__ == "__main__":
    main()
