"""Smoke test for the vslq_py extension module.

Build first (see README), then run: python3 python/smoke_test.py
"""
import math
import sys

import vslq_py as v


def main():
    p = v.Params(t1p=64.0)
    assert abs(p.w - 25.0) < 1e-12 and abs(p.delta - 300.0) < 1e-12
    print(p)

    base = v.bare_two_qubit_error(40.0, 64.0)
    assert abs(base - (1.0 - math.exp(-40.0 / 64000.0))) < 1e-15
    assert abs(v.bare_single_qubit_error(20.0, 64.0) - (1.0 - math.exp(-20.0 / 128000.0))) < 1e-15

    t = [8.0, 16.0, 32.0, 64.0]
    a, b, rms = v.fit_power_law(t, [0.01 / x + 0.3 / x**2 for x in t])
    assert abs(a - 0.01) < 1e-9 and abs(b - 0.3) < 1e-9, (a, b, rms)

    transparent, bare = v.transparency_check()
    assert transparent < 1e-12 and bare > 0.5, (transparent, bare)

    table = [[0.0, 0.1, 0.3], [0.2, 0.4, 0.9], [0.5, 1.0, 2.0]]
    d = v.decompose_shift_table(table, 0.25)
    assert set(d) >= {"c0", "c1", "cz", "czz", "c11", "residual"}

    trace = v.synthesize_noise(1e-3, 10.0, 0.05, 7, 2000.0, 1.0)
    assert len(trace) >= 2000 and all(math.isfinite(x) for x in trace)

    cfg = v.RunConfig.defaults("measure")
    assert cfg.validate() == [], cfg.validate()
    cfg.set(["params.t1p=32.0"])
    again = v.RunConfig.from_toml(cfg.to_toml())
    assert "t1p = 32.0" in again.to_toml()

    amp, fid = v.calibrate_ec_amplitude(p)
    assert fid > 0.9, fid
    err = v.coherent_error("idle", p, n_cycles=1, pulse=f"[ec]\namplitude = {amp!r}\n")
    assert 0.0 <= err < 1e-6, err
    print(f"EC amplitude {amp:.4f} MHz, fidelity {fid:.4f}, idle coherent error {err:.2e}")
    print("smoke test ok")


if __name__ == "__main__":
    sys.exit(main())
