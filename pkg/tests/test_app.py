import json
from pathlib import Path

import numpy as np
import pytest

from pnpfermi.app import (
    ConfigError,
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    load_problem,
    main,
    parse_config_text,
    read_config,
    run_ell_sweep,
    run_scenario,
    run_weak_strong,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def decay_cfg(**overrides):
    cfg = read_config(CONFIG_DIR / "decay.cfg")
    cfg.update(overrides)
    return cfg


def test_parse_key_value_text():
    cfg = parse_config_text("a.b = 1\n# comment\n\nc = hello  # trailing\n")
    assert cfg == {"a.b": "1", "c": "hello"}


def test_parse_json_nested_and_flat():
    nested = parse_config_text('{"mesh": {"n_cells": 10}, "seed": 3}')
    assert nested == {"mesh.n_cells": 10, "seed": 3}
    flat = parse_config_text('{"mesh.n_cells": 10}')
    assert flat == {"mesh.n_cells": 10}


def test_parse_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_config_text("just some words\n")
    with pytest.raises(ConfigError):
        parse_config_text("{not json")


def test_load_problem_roundtrip():
    problem = load_problem(decay_cfg())
    assert problem.mesh.n_cells == 100
    assert problem.params.n == 2
    assert problem.opts.tau == pytest.approx(1e-3)
    assert problem.bd.equilibrium_flag


@pytest.mark.parametrize(
    "key,value,fragment",
    [
        ("boundary.left.u", "0.5, 0.3, 0.3", "boundary.left.u"),
        ("species.D", "1.0", "species.D"),
        ("stepping.tau", "-1", "stepping"),
        ("mesh.n_cells", "1", "mesh"),
        ("initial.profile", "vortex", "initial.profile"),
        ("output.stride", "0", "output.stride"),
        ("reaction.type", "fusion", "reaction.type"),
    ],
)
def test_validation_errors_name_the_field(key, value, fragment):
    cfg = decay_cfg(**{key: value})
    with pytest.raises(ConfigError) as err:
        load_problem(cfg)
    assert fragment in str(err.value)


def test_neumann_endpoint_rejects_boundary_values():
    cfg = decay_cfg(**{"mesh.right_bc": "neumann"})
    with pytest.raises(ConfigError) as err:
        load_problem(cfg)
    assert "boundary.right" in str(err.value)


def test_run_scenario_decay(tmp_path):
    cfg = decay_cfg(**{"stepping.t_end": "0.02"})
    code, summary = run_scenario(cfg, out_dir=tmp_path, quiet=True)
    assert code == EXIT_OK
    assert summary["violations"]["bounds"] == 0
    assert summary["violations"]["energy"] == 0
    assert summary["final_H"] < summary["initial_H"]

    header, *rows = (tmp_path / "timeseries.csv").read_text().splitlines()
    cols = header.split(",")
    assert cols[:4] == ["step", "time", "H", "dissipation"]
    assert len(rows) == summary["n_steps"] + 1
    # H column non-increasing up to the Newton slack
    h_idx = cols.index("H")
    H = [float(r.split(",")[h_idx]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(H, H[1:]))
    # replaying the bound invariants from the file alone
    for r in rows:
        vals = dict(zip(cols, r.split(",")))
        for i in range(3):
            assert 0.0 < float(vals[f"min_u_{i}"]) <= float(vals[f"max_u_{i}"]) < 1.0
        assert float(vals["max_saturation_err"]) <= 1e-12

    snaps = sorted((tmp_path / "snapshots").glob("snap_*.csv"))
    assert snaps
    snap_header = snaps[0].read_text().splitlines()[0].split(",")
    assert snap_header == ["x", "u_0", "u_1", "u_2", "Phi", "w_1", "w_2",
                           "phi_split"]

    summary_file = json.loads((tmp_path / "summary.json").read_text())
    assert summary_file["n_steps"] == summary["n_steps"]


def test_run_scenario_equilibrium_constant_H(tmp_path):
    cfg = read_config(CONFIG_DIR / "equilibrium.cfg")
    cfg["stepping.t_end"] = "0.02"
    code, summary = run_scenario(cfg, out_dir=tmp_path, quiet=True)
    assert code == EXIT_OK
    assert abs(summary["final_H"] - summary["initial_H"]) <= 1e-10
    assert summary["violations"]["energy"] == 0


def test_run_scenario_reproducible(tmp_path):
    cfg = decay_cfg(**{"stepping.t_end": "0.01"})
    run_scenario(cfg, out_dir=tmp_path / "a", quiet=True)
    run_scenario(cfg, out_dir=tmp_path / "b", quiet=True)
    for name in ["timeseries.csv", "snapshots/snap_000000.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes()


def test_cli_exit_codes(tmp_path):
    good = str(CONFIG_DIR / "decay.cfg")
    assert main(["check", good, "--quiet"]) == EXIT_OK

    bad = tmp_path / "bad.cfg"
    bad.write_text("mesh.n_cells = 100\n")
    assert main(["check", str(bad), "--quiet"]) == EXIT_VALIDATION
    assert main(["run", str(tmp_path / "missing.cfg"), "--quiet"]) == EXIT_VALIDATION
    assert main(["mms", good, "--case", "bogus", "--quiet"]) == EXIT_VALIDATION
    assert main(["ell-sweep", good, "--ell", "0.1,0.01", "--quiet"]) == EXIT_VALIDATION


def test_cli_solver_failure_exit_code(tmp_path):
    # an unresolvable step (huge tau, starved Newton, no halvings allowed)
    # surfaces as the solver-failure exit code
    cfg_text = (Path(CONFIG_DIR / "decay.cfg").read_text()
                + "\nstepping.newton_max_iter = 2"
                + "\nstepping.max_step_halvings = 0\n")
    cfg = tmp_path / "stiff.cfg"
    cfg.write_text(cfg_text.replace("stepping.tau = 1e-3", "stepping.tau = 1.0"))
    code = main(["run", str(cfg), "--out", str(tmp_path / "out"), "--quiet"])
    assert code == EXIT_SOLVER


def test_weak_strong_rejects_pinned_species(tmp_path):
    cfg = read_config(CONFIG_DIR / "weak_strong.cfg")
    cfg["stepping.t_end"] = "0.002"
    # pin species 2 to (numerically) zero across the domain
    cfg["initial.profile"] = "constant"
    cfg["initial.u"] = "0.3, 1e-13"
    from pnpfermi.stepper import StepFailureError

    with pytest.raises(StepFailureError):
        run_weak_strong(cfg, [0.0], out_dir=tmp_path, quiet=True)


def test_weak_strong_small_run(tmp_path):
    cfg = read_config(CONFIG_DIR / "weak_strong.cfg")
    cfg["mesh.n_cells"] = "40"
    cfg["stepping.t_end"] = "0.01"
    code, report = run_weak_strong(cfg, [0.0, 1e-2], out_dir=tmp_path, quiet=True)
    assert code == EXIT_OK
    assert report["floor_max"] < 1e-6
    text = (tmp_path / "weak_strong.csv").read_text().splitlines()
    assert text[0] == "delta,time,rel_entropy"
    assert len(text) == 1 + 2 * (report["coarse_steps"] + 1)


def test_ell_sweep_requires_zero(tmp_path):
    cfg = read_config(CONFIG_DIR / "ell_sweep.cfg")
    with pytest.raises(ConfigError):
        run_ell_sweep(cfg, [0.1, 0.01], out_dir=tmp_path, quiet=True)


def test_ell_sweep_orders(tmp_path):
    cfg = read_config(CONFIG_DIR / "ell_sweep.cfg")
    code, summary = run_ell_sweep(cfg, [0.0, 0.1, 0.01, 0.001],
                                  out_dir=tmp_path, quiet=True)
    assert code == EXIT_OK
    assert summary["monotone_decreasing"]
    assert summary["fitted_order"] >= 1.8
    rows = (tmp_path / "ell_sweep.csv").read_text().splitlines()
    assert rows[0] == "ell,l2_diff_vs_ell0,order_vs_prev,fitted_order"
    # the ell = 0 row has exactly zero difference
    zero_row = [r for r in rows[1:] if r.startswith("0,")]
    assert zero_row and float(zero_row[0].split(",")[1]) == 0.0
