"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import math
import sys

import nelson


def main():
    grid = nelson.Grid(4.0, 16)
    assert len(grid) == 16**3

    psi = nelson.Wave.gaussian(grid, 0.4)
    assert abs(psi.norm() - 1.0) < 1e-12

    phi = nelson.Field.slaved(psi)
    e, lambda1, gap, ground = nelson.ground_state_of(phi)
    assert e < 0.0 and gap > 0.0, (e, gap)
    assert abs(ground.norm() - 1.0) < 1e-10
    print(f"ground state: e = {e:.6f}, gap = {gap:.6f}")

    header, rows, final = nelson.akg_trajectory(phi, 0.02, 1e-3, output_every=10)
    columns = header.split(",")
    energy = [r[columns.index("E_field")] for r in rows]
    drift = max(abs(x - energy[0]) for x in energy) / abs(energy[0])
    assert drift < 1e-6, drift
    print(f"aKG: {len(rows)} rows, relative energy drift {drift:.2e}")

    kb, cross, combination, reference = nelson.dressing_scalars(2.0, 8.0)
    assert abs(combination - reference) < 5e-3 * abs(reference)
    assert abs(reference - 4 * math.pi * math.log(2.0 / 8.0)) < 1e-12

    out = nelson.run_experiment("dressing-check")
    assert out["passed"], out["assertions"]
    assert "dressing" in out["tables"]

    config = "[grid]\nlength = 4.0\npoints = 16\n"
    check = nelson.run_experiment("selfcheck", config)
    failed = [a["name"] for a in check["assertions"] if not a["pass"]]
    assert not failed, failed

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
