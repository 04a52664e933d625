"""Smoke test for the jsfr extension. Build first:

    cd crates/python && maturin develop --release
"""

import math

import jsfr


def close(a, b, tol=1e-9):
    return all(abs(x - y) < tol for x, y in zip(a, b))


def main():
    assert close(jsfr.cspr_2x2(math.pi / 4, math.pi / 3), [0.5, 1.5, 0.25, 1.75])
    for a, t in [(0.1, 0.2), (1.0, 2.5)]:
        c = jsfr.cspr_hybrid(a, t)
        assert abs(c[0] + c[1] - 2) < 1e-12 and abs(c[2] + c[3] - 2) < 1e-12
    assert abs(jsfr.second_max(jsfr.cspr_3x3(0.0, 0.0)) - 0.5) < 1e-12
    assert abs(jsfr.net_rate(22400, 512, 80, 0.14) - 382.8) < 0.1

    ok, checks = jsfr.verify_identities()
    assert ok, [c for c in checks if not c[3]]

    assert "fig2b" in jsfr.preset_names()
    cfg = jsfr.default_config().replace("payload_len = 8192", "payload_len = 2048")
    m = jsfr.run_trial(cfg, seed=3)
    assert m.ber < 1e-2 and m.converged, m
    assert len(m.per_branch_cspr) == 4

    sweep_cfg = cfg.replace("axes = []", 'axes = [{ axis = "osnr_db", values = [20.0, 30.0] }]')
    columns, rows = jsfr.sweep(sweep_cfg, workers=2)
    assert columns == ["osnr_db"] and len(rows) == 2
    assert rows[0].metrics.ber > rows[1].metrics.ber

    try:
        jsfr.preset("fig9")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
