"""
Configuration, experiment drivers, file output, and the command line.

Configs are flat key-value text files with dotted section keys
(``mesh.n_cells = 100``), or equivalently JSON (nested objects are
flattened to dotted keys).  All numeric output uses 17 significant
digits so invariant checks can be replayed from the files alone; runs
are reproducible byte for byte except for the runtime field confined to
summary.json.

Exit codes: 0 success, 1 validation error, 2 solver failure,
3 invariant violation detected.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mms as mms_mod
from .diagnostics import energy_inequality_check, relative_entropy
from .linalg import NewtonOptions
from .mesh import DIRICHLET, MeshError, build_mesh
from .model import (
    BinaryAnnihilation,
    SpeciesParams,
    entropy_variables,
    make_boundary_data,
)
from .poisson_fermi import solve_helmholtz, solve_poisson
from .stepper import (
    FIXED_POINT,
    FULLY_COUPLED,
    StepFailureError,
    StepperOptions,
    run,
    solve_equilibrium,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3


class ConfigError(ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


# -- config reading ----------------------------------------------------------


def _flatten(obj, prefix=""):
    out = {}
    for key, value in obj.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, dotted + "."))
        else:
            out[dotted] = value
    return out


def parse_config_text(text):
    """Parse either the key-value grammar or JSON into a flat dict."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return _flatten(json.loads(text))
        except json.JSONDecodeError as err:
            raise ConfigError("<json>", f"invalid JSON config: {err}") from err
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"<line {lineno}>", f"expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def read_config(path):
    return parse_config_text(Path(path).read_text())


class ConfigView:
    """Typed access to a flat config dict with field-named errors."""

    def __init__(self, data):
        self.data = dict(data)
        self.used = set()

    def _raw(self, key, default, required):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(key, "missing required key")
            return default
        return self.data[key]

    def str_(self, key, default=None, required=False, choices=None):
        value = self._raw(key, default, required)
        if value is None:
            return None
        value = str(value).strip().lower()
        if choices is not None and value not in choices:
            raise ConfigError(key, f"expected one of {sorted(choices)}, got {value!r}")
        return value

    def float_(self, key, default=None, required=False):
        value = self._raw(key, default, required)
        if value is None:
            return None
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a number, got {value!r}")

    def int_(self, key, default=None, required=False):
        value = self._raw(key, default, required)
        if value is None:
            return None
        try:
            out = int(str(value))
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return out

    def floats(self, key, default=None, required=False, length=None):
        value = self._raw(key, default, required)
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [v for v in str(value).replace(",", " ").split() if v]
        try:
            arr = np.array([float(v) for v in items])
        except ValueError:
            raise ConfigError(key, f"expected a list of numbers, got {value!r}")
        if length is not None and arr.size != length:
            raise ConfigError(key, f"expected {length} values, got {arr.size}")
        return arr

    def bool_(self, key, default=None):
        value = self._raw(key, default, False)
        if value is None or value == "auto":
            return None
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("true", "yes", "1"):
            return True
        if text in ("false", "no", "0"):
            return False
        if text == "auto":
            return None
        raise ConfigError(key, f"expected true/false/auto, got {value!r}")


# -- problem assembly --------------------------------------------------------


@dataclass
class Problem:
    mesh: object
    params: object
    bd: object
    U0: np.ndarray
    opts: StepperOptions
    t_end: float
    out_dir: Path
    stride: int
    seed: int
    initial_profile: str


def _build_mesh(view):
    n_cells = view.int_("mesh.n_cells", required=True)
    length = view.float_("mesh.length", 1.0)
    left = view.str_("mesh.left_bc", "dirichlet", choices={"dirichlet", "neumann"})
    right = view.str_("mesh.right_bc", "dirichlet", choices={"dirichlet", "neumann"})
    try:
        return build_mesh(length, n_cells, left, right)
    except MeshError as err:
        raise ConfigError("mesh", str(err))


def _build_params(view):
    n = view.int_("species.n", required=True)
    if n < 1:
        raise ConfigError("species.n", "need at least one species")
    D = view.floats("species.D", required=True, length=n)
    z = view.floats("species.z", required=True, length=n)
    lam = view.float_("species.lambda", required=True)
    ell = view.float_("species.ell", required=True)
    reaction = None
    kind = view.str_("reaction.type", "none", choices={"none", "binary_annihilation"})
    if kind == "binary_annihilation":
        reaction = BinaryAnnihilation(
            k=view.float_("reaction.rate", required=True),
            i=view.int_("reaction.i", 1),
            j=view.int_("reaction.j", min(2, n)),
        )
    try:
        return SpeciesParams(n=n, D=D, z=z, lam=lam, ell=ell, reaction=reaction)
    except ValueError as err:
        raise ConfigError("species", str(err))


def _background_field(view, mesh):
    kind = view.str_(
        "background.kind", "none",
        choices={"none", "constant", "gaussian", "sine"},
    )
    x = mesh.cell_centers
    if kind == "none":
        return np.zeros(mesh.n_cells)
    amp = view.float_("background.amplitude", required=True)
    if kind == "constant":
        return np.full(mesh.n_cells, amp)
    if kind == "gaussian":
        center = view.float_("background.center", 0.5 * mesh.length)
        width = view.float_("background.width", 0.1 * mesh.length)
        if width <= 0:
            raise ConfigError("background.width", "must be positive")
        return amp * np.exp(-(((x - center) / width) ** 2))
    mode = view.int_("background.mode", 1)
    return amp * np.sin(mode * np.pi * x / mesh.length)


def _boundary_values(view, mesh, params, side):
    bc = mesh.left_bc if side == "left" else mesh.right_bc
    ukey = f"boundary.{side}.u"
    pkey = f"boundary.{side}.phi"
    if bc != DIRICHLET:
        if view._raw(ukey, None, False) is not None:
            raise ConfigError(ukey, "boundary values given at a Neumann endpoint")
        if view._raw(pkey, None, False) is not None:
            raise ConfigError(pkey, "boundary values given at a Neumann endpoint")
        return None, None
    u = view.floats(ukey, required=True, length=params.n + 1)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ConfigError(ukey, "concentrations must lie strictly in (0, 1)")
    if abs(float(u.sum()) - 1.0) > 1e-9:
        raise ConfigError(ukey, f"components must sum to 1, got {float(u.sum())!r}")
    phi = view.float_(pkey, required=True)
    return u, phi


def _build_boundary(view, mesh, params):
    u_left, phi_left = _boundary_values(view, mesh, params, "left")
    u_right, phi_right = _boundary_values(view, mesh, params, "right")
    f = _background_field(view, mesh)
    override = view.bool_("boundary.equilibrium", None)
    try:
        return make_boundary_data(
            mesh, params,
            u_left=u_left, phi_left=phi_left,
            u_right=u_right, phi_right=phi_right,
            f=f, equilibrium_override=override,
        )
    except ValueError as err:
        raise ConfigError("boundary", str(err))


def _initial_condition(view, mesh, params, bd):
    profile = view.str_(
        "initial.profile", required=True,
        choices={"constant", "step", "gaussian_bump", "equilibrium"},
    )
    x = mesh.cell_centers
    if profile == "equilibrium":
        if not bd.equilibrium_flag:
            raise ConfigError(
                "initial.profile",
                "equilibrium profile needs equilibrium boundary data",
            )
        return solve_equilibrium(bd, params, mesh).U, profile
    if profile == "constant":
        u_ions = view.floats("initial.u", required=True, length=params.n)
        ions = np.repeat(u_ions[:, None], mesh.n_cells, axis=1)
    elif profile == "step":
        left = view.floats("initial.u_left", required=True, length=params.n)
        right = view.floats("initial.u_right", required=True, length=params.n)
        pos = view.float_("initial.interface", 0.5 * mesh.length)
        ions = np.where(x[None, :] < pos, left[:, None], right[:, None])
    else:
        base = view.floats("initial.u", required=True, length=params.n)
        amp = view.floats("initial.amplitude", required=True, length=params.n)
        center = view.float_("initial.center", 0.5 * mesh.length)
        width = view.float_("initial.width", 0.1 * mesh.length)
        if width <= 0:
            raise ConfigError("initial.width", "must be positive")
        bump = np.exp(-(((x - center) / width) ** 2))
        ions = base[:, None] + amp[:, None] * bump[None, :]
    solvent = 1.0 - ions.sum(axis=0)
    U0 = np.vstack([solvent[None, :], ions])
    if np.min(U0) < 0.0 or np.max(U0) > 1.0:
        raise ConfigError("initial", "profile leaves the closed simplex")
    return U0, profile


def _build_stepper_options(view):
    tau = view.float_("stepping.tau", required=True)
    eps = view.float_("stepping.eps", 1e-8)
    coupling = view.str_(
        "stepping.coupling", FULLY_COUPLED, choices={FULLY_COUPLED, FIXED_POINT}
    )
    newton = NewtonOptions(
        abs_tol=view.float_("stepping.newton_tol", 1e-10),
        max_iter=view.int_("stepping.newton_max_iter", 50),
    )
    try:
        return StepperOptions(
            tau=tau, eps=eps, newton=newton, coupling=coupling,
            max_step_halvings=view.int_("stepping.max_step_halvings", 8),
        )
    except ValueError as err:
        raise ConfigError("stepping", str(err))


def load_problem(cfg):
    """Validate a flat config dict and assemble the scenario objects."""
    view = ConfigView(cfg)
    mesh = _build_mesh(view)
    params = _build_params(view)
    bd = _build_boundary(view, mesh, params)
    U0, profile = _initial_condition(view, mesh, params, bd)
    opts = _build_stepper_options(view)
    t_end = view.float_("stepping.t_end", required=True)
    if t_end < 0.0:
        raise ConfigError("stepping.t_end", "must be nonnegative")
    stride = view.int_("output.stride", 10)
    if stride < 1:
        raise ConfigError("output.stride", "must be >= 1")
    out_dir = Path(str(view._raw("output.dir", "out", False)))
    seed = view.int_("seed", 0)
    return Problem(
        mesh=mesh, params=params, bd=bd, U0=U0, opts=opts, t_end=t_end,
        out_dir=out_dir, stride=stride, seed=seed, initial_profile=profile,
    )


# -- output writers ----------------------------------------------------------


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else v if isinstance(v, str) else _fmt(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def timeseries_header(n):
    cols = ["step", "time", "H", "dissipation"]
    for i in range(n + 1):
        cols += [f"min_u_{i}", f"max_u_{i}"]
    cols += ["max_saturation_err", "newton_iterations", "tau_used", "rel_entropy"]
    return cols


def diagnostics_row(k, state, report, H, rel_entropy_value=None):
    row = [k, state.time, H, report.dissipation if report else 0.0]
    for i in range(state.U.shape[0]):
        row += [float(np.min(state.U[i])), float(np.max(state.U[i]))]
    row += [
        float(np.max(np.abs(state.U.sum(axis=0) - 1.0))),
        report.newton_iterations if report else 0,
        report.tau_used if report else 0.0,
        rel_entropy_value if rel_entropy_value is not None else "",
    ]
    return row


def write_snapshot(path, mesh, state):
    n = state.w.shape[0]
    header = ["x"] + [f"u_{i}" for i in range(n + 1)] + ["Phi"] + [
        f"w_{i}" for i in range(1, n + 1)
    ] + ["phi_split"]
    rows = []
    for j in range(mesh.n_cells):
        row = [mesh.cell_centers[j]]
        row += [state.U[i, j] for i in range(n + 1)]
        row.append(state.Phi[j])
        row += [state.w[i, j] for i in range(n)]
        row.append(state.phi_split[j])
        rows.append(row)
    write_csv(path, header, rows)


def write_summary(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- scenario driver ---------------------------------------------------------


def run_scenario(cfg, out_dir=None, quiet=False):
    """Run a time-dependent scenario and write timeseries, snapshots, and
    summary.  Returns (exit_code, summary_dict)."""
    started = time.time()
    problem = load_problem(cfg)
    out = Path(out_dir) if out_dir is not None else problem.out_dir
    mesh, params, bd = problem.mesh, problem.params, problem.bd

    from .model import free_energy

    trajectory = run(problem.U0, bd, params, mesh, problem.opts, problem.t_end)

    slack = 10.0 * problem.opts.newton.abs_tol
    energy_records = energy_inequality_check(trajectory, bd, params, mesh, slack)
    energy_applicable = bd.equilibrium_flag
    energy_violations = (
        sum(r["violation"] for r in energy_records) if energy_applicable else None
    )

    bounds_violations = 0
    saturation_violations = 0
    rows = []
    H0 = free_energy(trajectory.states[0], bd, params, mesh)
    rows.append(diagnostics_row(0, trajectory.states[0], None, H0))
    for k, (state, report) in enumerate(
        zip(trajectory.states[1:], trajectory.reports), start=1
    ):
        if np.min(state.U) <= 0.0 or np.max(state.U) >= 1.0:
            bounds_violations += 1
        if np.max(np.abs(state.U.sum(axis=0) - 1.0)) > 1e-12:
            saturation_violations += 1
        rows.append(diagnostics_row(k, state, report, report.energy_after))

    write_csv(out / "timeseries.csv", timeseries_header(params.n), rows)
    snap_dir = out / "snapshots"
    last = len(trajectory.states) - 1
    for k, state in enumerate(trajectory.states):
        if k % problem.stride == 0 or k == last:
            write_snapshot(snap_dir / f"snap_{k:06d}.csv", mesh, state)

    total_violations = bounds_violations + saturation_violations + (
        energy_violations or 0
    )
    summary = {
        "final_H": free_energy(trajectory.states[-1], bd, params, mesh),
        "initial_H": H0,
        "final_time": trajectory.states[-1].time,
        "n_steps": len(trajectory.reports),
        "violations": {
            "bounds": bounds_violations,
            "saturation": saturation_violations,
            "energy": energy_violations,
        },
        "energy_check_applicable": energy_applicable,
        "seed": problem.seed,
        "runtime_seconds": time.time() - started,
    }
    write_summary(out / "summary.json", summary)
    if not quiet:
        print(f"run: {len(trajectory.reports)} steps to t = {summary['final_time']:g}, "
              f"H {summary['initial_H']:.6g} -> {summary['final_H']:.6g}, "
              f"violations {total_violations}")
    return (EXIT_INVARIANT if total_violations else EXIT_OK), summary


# -- MMS driver --------------------------------------------------------------

MMS_CASES = ("elliptic-only", "parabolic-coupled")

ELLIPTIC_GRIDS = (50, 100, 200)
PARABOLIC_SPACE = ((50, 4e-4), (100, 1e-4), (200, 2.5e-5))
PARABOLIC_SPACE_T_END = 0.02
PARABOLIC_TIME_GRID = 600
PARABOLIC_TIME_TAUS = (8e-3, 4e-3, 2e-3)
PARABOLIC_TIME_T_END = 0.04
# temporal errors are isolated against a small-step run on the same grid,
# so the fixed-grid spatial bias cancels for every field
PARABOLIC_TIME_TAU_REF = 1.25e-4


def _elliptic_rows(params):
    rows = []
    worst = np.inf
    lam, ell = params.lam, params.ell
    if ell <= 0.0:
        raise ConfigError("species.ell", "elliptic MMS needs ell > 0 for the "
                          "Helmholtz and composed stages")
    stages = [
        ("poisson", mms_mod.poisson_case(lam)),
        ("helmholtz", mms_mod.helmholtz_case(ell)),
        ("composed", mms_mod.composed_case(lam, ell)),
    ]
    for stage, case in stages:
        errors = []
        for n_cells in ELLIPTIC_GRIDS:
            mesh = mms_mod.elliptic_mesh(n_cells)
            x = mesh.cell_centers
            rhs = case.rhs(x)
            if stage == "poisson":
                sol = solve_poisson(rhs, mesh, lam, left_value=case.left_value)
            elif stage == "helmholtz":
                sol = solve_helmholtz(rhs, mesh, ell, left_value=case.left_value)
            else:
                phi = solve_poisson(rhs, mesh, lam, left_value=case.left_value)
                sol = solve_helmholtz(phi, mesh, ell, left_value=case.left_value)
            errors.append(mesh.l2_norm(sol - case.exact(x)))
        hs = 1.0 / np.asarray(ELLIPTIC_GRIDS, dtype=float)
        orders = mms_mod.observed_orders(errors, hs)
        fit = mms_mod.fitted_order(errors, hs)
        worst = min(worst, fit)
        for idx, n_cells in enumerate(ELLIPTIC_GRIDS):
            rows.append([
                "elliptic-only", stage, n_cells, "", "Phi", errors[idx],
                "" if idx == 0 else float(orders[idx - 1]), fit,
            ])
    # free-ion stage of the composed solve
    errors = []
    case = mms_mod.composed_case(lam, ell)
    exact_phi = mms_mod.composed_split_exact(ell)
    for n_cells in ELLIPTIC_GRIDS:
        mesh = mms_mod.elliptic_mesh(n_cells)
        x = mesh.cell_centers
        phi = solve_poisson(case.rhs(x), mesh, lam, left_value=case.left_value)
        errors.append(mesh.l2_norm(phi - exact_phi(x)))
    hs = 1.0 / np.asarray(ELLIPTIC_GRIDS, dtype=float)
    orders = mms_mod.observed_orders(errors, hs)
    fit = mms_mod.fitted_order(errors, hs)
    worst = min(worst, fit)
    for idx, n_cells in enumerate(ELLIPTIC_GRIDS):
        rows.append([
            "elliptic-only", "composed_phi", n_cells, "", "phi", errors[idx],
            "" if idx == 0 else float(orders[idx - 1]), fit,
        ])
    return rows, worst


def _parabolic_rows(params, opts):
    case = mms_mod.parabolic_case(params)
    rows = []
    fits = []

    def solve_on(n_cells, tau, t_end):
        mesh = mms_mod.parabolic_mesh(n_cells)
        bd = make_boundary_data(
            mesh, params,
            u_left=case.u_boundary, phi_left=case.phi_boundary,
            u_right=case.u_boundary, phi_right=case.phi_boundary,
        )
        U0 = case.exact_u(mesh.cell_centers, 0.0)
        run_opts = StepperOptions(
            tau=tau, eps=0.0, newton=opts.newton, coupling=opts.coupling,
            max_step_halvings=opts.max_step_halvings,
        )
        traj = run(U0, bd, params, mesh, run_opts, t_end, sources=case.sources)
        return mesh, traj.states[-1]

    fields = [("u_1", 1), ("u_2", 2), ("Phi", None)]
    # spatial study, tau proportional to h^2
    errs = {name: [] for name, _ in fields}
    for n_cells, tau in PARABOLIC_SPACE:
        mesh, state = solve_on(n_cells, tau, PARABOLIC_SPACE_T_END)
        x = mesh.cell_centers
        Uex = case.exact_u(x, PARABOLIC_SPACE_T_END)
        for name, comp in fields:
            if comp is None:
                e = mesh.l2_norm(state.Phi - case.exact_Phi(x, PARABOLIC_SPACE_T_END))
            else:
                e = mesh.l2_norm(state.U[comp] - Uex[comp])
            errs[name].append(e)
    hs = np.array([1.0 / nc for nc, _ in PARABOLIC_SPACE])
    for name, _ in fields:
        orders = mms_mod.observed_orders(errs[name], hs)
        fit = mms_mod.fitted_order(errs[name], hs)
        fits.append(("space", fit))
        for idx, (n_cells, tau) in enumerate(PARABOLIC_SPACE):
            rows.append([
                "parabolic-coupled", "space", n_cells, tau, name,
                errs[name][idx], "" if idx == 0 else float(orders[idx - 1]), fit,
            ])

    # temporal study on a fixed fine grid, against a small-step reference
    mesh_ref, ref = solve_on(
        PARABOLIC_TIME_GRID, PARABOLIC_TIME_TAU_REF, PARABOLIC_TIME_T_END
    )
    errs_t = {name: [] for name, _ in fields}
    for tau in PARABOLIC_TIME_TAUS:
        mesh, state = solve_on(PARABOLIC_TIME_GRID, tau, PARABOLIC_TIME_T_END)
        for name, comp in fields:
            if comp is None:
                e = mesh.l2_norm(state.Phi - ref.Phi)
            else:
                e = mesh.l2_norm(state.U[comp] - ref.U[comp])
            errs_t[name].append(e)
    taus = np.asarray(PARABOLIC_TIME_TAUS)
    for name, _ in fields:
        orders = mms_mod.observed_orders(errs_t[name], taus)
        fit = mms_mod.fitted_order(errs_t[name], taus)
        fits.append(("time", fit))
        for idx, tau in enumerate(PARABOLIC_TIME_TAUS):
            rows.append([
                "parabolic-coupled", "time", PARABOLIC_TIME_GRID, tau, name,
                errs_t[name][idx], "" if idx == 0 else float(orders[idx - 1]), fit,
            ])
    worst_space = min(f for stage, f in fits if stage == "space")
    worst_time = min(f for stage, f in fits if stage == "time")
    return rows, worst_space, worst_time


CONVERGENCE_HEADER = [
    "case", "stage", "n_cells", "tau", "field", "l2_error",
    "order_vs_prev", "fitted_order",
]


def run_mms(cfg, case, out_dir=None, quiet=False):
    """Run a manufactured-solution study; returns (exit_code, summary)."""
    started = time.time()
    if case not in MMS_CASES:
        raise ConfigError("case", f"unknown MMS case {case!r}; "
                          f"choose from {sorted(MMS_CASES)}")
    view = ConfigView(cfg)
    params = _build_params(view)
    out = Path(out_dir) if out_dir is not None else Path(
        str(view._raw("output.dir", "out", False))
    )
    summary = {"case": case}
    if case == "elliptic-only":
        rows, worst = _elliptic_rows(params)
        summary["min_fitted_order"] = worst
    else:
        opts = _build_stepper_options(view)
        rows, worst_space, worst_time = _parabolic_rows(params, opts)
        summary["min_fitted_order_space"] = worst_space
        summary["min_fitted_order_time"] = worst_time
    write_csv(out / "convergence.csv", CONVERGENCE_HEADER, rows)
    summary["runtime_seconds"] = time.time() - started
    write_summary(out / "mms_summary.json", summary)
    if not quiet:
        gates = {k: v for k, v in summary.items()
                 if k.startswith("min_fitted_order")}
        print(f"mms {case}: {gates}")
    return EXIT_OK, summary


# -- weak-strong experiment --------------------------------------------------

REFERENCE_REFINE = 4
REFERENCE_FLOOR = 1e-10


def _restrict_cells(values, factor):
    return values.reshape(values.shape[:-1] + (-1, factor)).mean(axis=-1)


def _perturbed_initial(U0, mesh, delta):
    """Multiplicative interior bump on the ion species, renormalized back
    onto the simplex."""
    if delta == 0.0:
        return U0.copy()
    x = mesh.cell_centers
    g = np.exp(-(((x - 0.5 * mesh.length) / (0.12 * mesh.length)) ** 2))
    U = U0.copy()
    n_ions = U.shape[0] - 1
    for i in range(1, n_ions + 1):
        sign = 1.0 if i % 2 == 1 else -1.0
        U[i] = U[i] * (1.0 + sign * delta * g)
    U = np.clip(U, 1e-12, None)
    return U / U.sum(axis=0)[None, :]


def run_weak_strong(cfg, deltas, out_dir=None, quiet=False):
    """Perturbation experiment against a fine-grid reference trajectory.

    The reference runs on a 4x finer grid with tau/4 and is restricted to
    the coarse grid by cell averaging; each coarse run records the
    relative entropy against the restricted reference over time.
    """
    started = time.time()
    problem = load_problem(cfg)
    out = Path(out_dir) if out_dir is not None else problem.out_dir
    mesh, params, bd = problem.mesh, problem.params, problem.bd
    deltas = [float(d) for d in deltas]

    fine_cfg = dict(cfg)
    fine_cfg["mesh.n_cells"] = mesh.n_cells * REFERENCE_REFINE
    fine_cfg["stepping.tau"] = problem.opts.tau / REFERENCE_REFINE
    fine = load_problem(fine_cfg)
    fine_traj = run(fine.U0, fine.bd, fine.params, fine.mesh, fine.opts,
                    fine.t_end)
    ref_min = min(float(np.min(s.U)) for s in fine_traj.states)
    if ref_min < REFERENCE_FLOOR:
        raise StepFailureError(
            f"reference run touches the simplex boundary (min u = {ref_min:.3e}); "
            "the strong-solution positivity assumption fails"
        )

    # restrict the reference to the coarse grid at the coarse step times
    coarse_steps = int(round(problem.t_end / problem.opts.tau))
    ref_states = []
    for k in range(coarse_steps + 1):
        fs = fine_traj.states[k * REFERENCE_REFINE]
        U = _restrict_cells(fs.U, REFERENCE_REFINE)
        Phi = _restrict_cells(fs.Phi, REFERENCE_REFINE)
        phi = _restrict_cells(fs.phi_split, REFERENCE_REFINE)
        from .model import State

        ref_states.append(State(
            U=U, w=entropy_variables(U, Phi, params), Phi=Phi,
            phi_split=phi, time=fs.time,
        ))

    rows = []
    report = {"deltas": {}, "coarse_steps": coarse_steps}
    for delta in deltas:
        U0 = _perturbed_initial(problem.U0, mesh, delta)
        traj = run(U0, bd, params, mesh, problem.opts, problem.t_end)
        if len(traj.states) != coarse_steps + 1:
            raise StepFailureError(
                "coarse run stepped adaptively; the weak-strong restriction "
                "requires the nominal time step throughout"
            )
        res = []
        for state, ref in zip(traj.states, ref_states):
            if abs(state.time - ref.time) > 1e-10:
                raise StepFailureError("coarse and reference times diverged")
            res.append(relative_entropy(state, ref, params, mesh).total)
        for state, value in zip(traj.states, res):
            rows.append([delta, state.time, value])
        entry = {"re_initial": res[0], "re_max": max(res)}
        if delta > 0.0 and res[0] > 0.0:
            entry["gronwall_ratio"] = max(res) / res[0]
        report["deltas"][_fmt(delta)] = entry

    write_csv(out / "weak_strong.csv", ["delta", "time", "rel_entropy"], rows)
    ratios = [v["gronwall_ratio"] for v in report["deltas"].values()
              if "gronwall_ratio" in v]
    if ratios:
        report["ratio_spread"] = max(ratios) / min(ratios)
    if "0" in {_fmt(d) for d in deltas}:
        report["floor_max"] = report["deltas"][_fmt(0.0)]["re_max"]
    report["runtime_seconds"] = time.time() - started
    write_summary(out / "weak_strong.json", report)
    if not quiet:
        print(f"weak-strong: ratios {ratios}, "
              f"floor {report.get('floor_max', 'n/a')}")
    return EXIT_OK, report


# -- correlation-length sweep -------------------------------------------------


def run_ell_sweep(cfg, ells, out_dir=None, quiet=False):
    """Steady-state potential sweep over the correlation length.

    Needs equilibrium boundary data and no reactions, so the thermal
    equilibrium state (vanishing fluxes) is the exact steady state; the
    table compares each Phi_ell against the ell = 0 field.
    """
    started = time.time()
    ells = [float(e) for e in ells]
    if 0.0 not in ells:
        raise ConfigError("ell", "the sweep list must include 0")
    view = ConfigView(cfg)
    mesh = _build_mesh(view)
    params = _build_params(view)
    if params.reaction is not None:
        raise ConfigError("reaction.type", "ell sweep requires no reactions")
    out = Path(out_dir) if out_dir is not None else Path(
        str(view._raw("output.dir", "out", False))
    )

    fields = {}
    for ell in ells:
        p = SpeciesParams(n=params.n, D=params.D, z=params.z,
                          lam=params.lam, ell=ell, reaction=None)
        bd = _build_boundary(view, mesh, p)
        if not bd.equilibrium_flag:
            raise ConfigError("boundary", "ell sweep requires equilibrium "
                              "Dirichlet data (constant w^D)")
        eq = solve_equilibrium(bd, p, mesh)
        fields[ell] = eq.Phi
    base = fields[0.0]
    rows = []
    diffs = []
    nonzero = sorted([e for e in ells if e > 0.0], reverse=True)
    for ell in sorted(ells, reverse=True):
        d = mesh.l2_norm(fields[ell] - base)
        rows.append([ell, d])
        if ell > 0.0:
            diffs.append(d)
    orders = (
        mms_mod.observed_orders(diffs, nonzero) if len(diffs) >= 2 else []
    )
    fit = mms_mod.fitted_order(diffs, nonzero) if len(diffs) >= 2 else None
    out_rows = []
    k_nonzero = 0
    for ell, d in rows:
        order = ""
        if ell > 0.0 and k_nonzero >= 1:
            order = float(orders[k_nonzero - 1])
        if ell > 0.0:
            k_nonzero += 1
        out_rows.append([ell, d, order, fit if fit is not None else ""])
    write_csv(out / "ell_sweep.csv",
              ["ell", "l2_diff_vs_ell0", "order_vs_prev", "fitted_order"],
              out_rows)
    summary = {
        "fitted_order": fit,
        "monotone_decreasing": bool(np.all(np.diff(diffs) < 0.0)),
        "runtime_seconds": time.time() - started,
    }
    write_summary(out / "ell_sweep.json", summary)
    if not quiet:
        print(f"ell-sweep: fitted order {fit}, monotone "
              f"{summary['monotone_decreasing']}")
    return EXIT_OK, summary


# -- CLI ----------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("config", help="config file (key-value text or JSON)")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress stdout")


def build_cli():
    parser = argparse.ArgumentParser(
        prog="pnpf",
        description="Entropy-stable Poisson-Nernst-Planck-Fermi simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run a scenario"))
    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    _add_common(p)
    p.add_argument("--case", required=True,
                   help="one of: " + ", ".join(MMS_CASES))
    p = sub.add_parser("weak-strong", help="weak-strong uniqueness experiment")
    _add_common(p)
    p.add_argument("--delta", required=True,
                   help="comma-separated perturbation sizes, e.g. 0,1e-2,1e-3")
    p = sub.add_parser("ell-sweep", help="correlation-length sweep")
    _add_common(p)
    p.add_argument("--ell", required=True,
                   help="comma-separated correlation lengths including 0")
    _add_common(sub.add_parser("check", help="validate a config and exit"))
    return parser


def main(argv=None):
    parser = build_cli()
    args = parser.parse_args(argv)
    try:
        cfg = read_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "check":
            load_problem(cfg)
            if not args.quiet:
                print("config ok")
            return EXIT_OK
        if args.command == "run":
            code, _ = run_scenario(cfg, out_dir=args.out, quiet=args.quiet)
            return code
        if args.command == "mms":
            code, _ = run_mms(cfg, args.case, out_dir=args.out, quiet=args.quiet)
            return code
        if args.command == "weak-strong":
            deltas = [float(v) for v in args.delta.split(",") if v != ""]
            code, _ = run_weak_strong(cfg, deltas, out_dir=args.out,
                                      quiet=args.quiet)
            return code
        deltas = [float(v) for v in args.ell.split(",") if v != ""]
        code, _ = run_ell_sweep(cfg, deltas, out_dir=args.out, quiet=args.quiet)
        return code
    except (ConfigError, MeshError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StepFailureError, np.linalg.LinAlgError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


def cli_entry():
    raise SystemExit(main())
