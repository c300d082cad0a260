"""Scenario execution: simulation artifacts and the verification suite."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..controller import (GesobcGains, PidGains, make_finite_horizon_law, make_gesobc_law,
                          make_infinite_horizon_law, make_pid_law, make_pseudo_inverse_law,
                          make_receding_horizon_law)
from ..errors import MdrcError, NonFiniteState, ScenarioInvalid
from ..feedforward import solve_feedforward, steady_state_feedforward
from ..model import assemble_Q
from ..riccati import check_detectability, grde_fd_residual, solve_gare, solve_grde
from ..simulator import evaluate_cost, fbde_residuals, simulate, write_log_csv
from . import checks
from .svg import line_plot

logger = logging.getLogger(__name__)

SETTLE_BAND = 0.02
GARE_TOL = 1e-8
GRDE_FD_TOL = 1e-6
SCALAR_TOL = 1e-6
FBDE_TOL = 1e-4
COST_GAP_TOL = 1e-2
SQUARES_TOL = 1e-2
ORACLE_TOL = 1e-2
ORACLE_RATIO = 1.7


@dataclass
class SummaryRow:
    controller: str
    kind: str
    status: str
    J_sim: float = float("nan")
    ise: float = float("nan")
    settle_time: float = float("nan")
    max_abs_u: float = float("nan")
    message: str = ""


@dataclass
class RunResult:
    scenario: str
    rows: list
    logs: dict = field(default_factory=dict)
    files: list = field(default_factory=list)


def _sim_cost(s):
    return s.cost.with_horizon(s.T)


def _steady_state_x0(s):
    g = solve_gare(s.plant, s.cost)
    d0 = s.disturbance(0.0)
    f_ss, h_ss = steady_state_feedforward(g, d0)
    return make_infinite_horizon_law(g, f_ss, h_ss).equilibrium(d0)


def build_law(s, spec, step=None):
    """Instantiate the control law described by ``spec`` for scenario ``s``."""
    step = s.step if step is None else step
    p, kind = spec.params, spec.kind
    if kind in ("finite_horizon", "pseudo_inverse"):
        rt = solve_grde(s.plant, _sim_cost(s), step)
        ft = solve_feedforward(rt, s.disturbance)
        make = make_finite_horizon_law if kind == "finite_horizon" else make_pseudo_inverse_law
        return make(rt, ft)
    if kind == "infinite_horizon":
        g = solve_gare(s.plant, s.cost)
        f_ss, h_ss = steady_state_feedforward(g, s.disturbance(0.0))
        return make_infinite_horizon_law(g, f_ss, h_ss)
    if kind == "receding_horizon":
        return make_receding_horizon_law(s.plant, s.cost, float(p["tau"]),
                                         float(p.get("inner_step", 1e-3)))
    if kind == "pid":
        gains = PidGains(float(p["K_p"]), float(p["K_i"]), float(p["K_d"]))
        return make_pid_law(gains, s.target, s.plant, step)
    if kind == "gesobc":
        return make_gesobc_law(GesobcGains(p["K_x"], p["K_d"]), s.plant)
    raise ScenarioInvalid(f"unknown controller kind {kind!r}")


def initial_state(s, spec):
    if spec.x0 is None:
        return s.x0
    if isinstance(spec.x0, str):
        if spec.x0 != "steady_state":
            raise ScenarioInvalid(f"unknown initial-state keyword {spec.x0!r}")
        return _steady_state_x0(s)
    return np.asarray(spec.x0, dtype=float)


def settle_time(t, y, target, band=SETTLE_BAND):
    """First time after which ``|y - target|`` stays inside the band.

    The band is ``band * |target|``, or ``band`` times the peak deviation
    when the target is zero. Returns ``nan`` if the last sample is outside.
    """
    err = np.abs(np.asarray(y, float) - target)
    scale = abs(target) if target != 0 else float(np.max(err))
    tol = band * scale
    outside = np.nonzero(~(err <= tol))[0]
    if len(outside) == 0:
        return float(t[0])
    if outside[-1] == len(t) - 1:
        return float("nan")
    return float(t[outside[-1] + 1])


def summarize(s, name, kind, lg):
    cost = _sim_cost(s)
    e = lg.y[:, 0] - s.target[0]
    ise = float(np.sum(0.5 * lg.step * (e[1:] ** 2 + e[:-1] ** 2)))
    J = evaluate_cost(lg, s.plant, cost).J_sim
    return SummaryRow(name, kind, "ok", J, ise, settle_time(lg.grid, lg.y[:, 0], s.target[0]),
                      float(np.max(np.abs(lg.u))))


def run_scenario(s, out_dir=None, step=None):
    """Simulate every controller and write CSV, SVG and summary artifacts."""
    if not s.controllers:
        raise ScenarioInvalid(f"scenario {s.name!r} lists no controllers")
    step = s.step if step is None else step
    root = (s.out_dir if out_dir is None else out_dir) / s.name
    root.mkdir(parents=True, exist_ok=True)
    result = RunResult(s.name, [])
    cost = _sim_cost(s)
    for spec in s.controllers:
        logger.info("%s: simulating %s (%s)", s.name, spec.name, spec.kind)
        csv_path = root / f"{spec.name}.csv"
        marker = root / f"{spec.name}.failed"
        try:
            law = build_law(s, spec, step)
            x0 = initial_state(s, spec)
            lg = simulate(s.plant, law, s.disturbance, x0, s.T, step, cost)
        except NonFiniteState as exc:
            lg = exc.log
            write_log_csv(lg, csv_path)
            marker.write_text(f"diverged: {exc}\n")
            result.rows.append(SummaryRow(spec.name, spec.kind, "diverged", message=str(exc)))
            result.files += [csv_path, marker]
            result.logs[spec.name] = lg
            continue
        except MdrcError as exc:
            marker.write_text(f"{type(exc).__name__}: {exc}\n")
            result.rows.append(SummaryRow(spec.name, spec.kind, "failed",
                                          message=f"{type(exc).__name__}: {exc}"))
            result.files.append(marker)
            continue
        if marker.exists():
            marker.unlink()
        write_log_csv(lg, csv_path)
        result.files.append(csv_path)
        result.logs[spec.name] = lg
        result.rows.append(summarize(s, spec.name, spec.kind, lg))
    if result.logs:
        for ch_name, getter, label in (("output", lambda g: g.y[:, 0], "regulated output"),
                                       ("control", lambda g: g.u[:, 0], "control u1")):
            series = [(n, g.grid, getter(g)) for n, g in result.logs.items()]
            path = root / f"{ch_name}.svg"
            line_plot(series, path, title=f"{s.name}: {label}", ylabel=label)
            result.files.append(path)
    summary = root / "summary.csv"
    write_summary(result.rows, summary)
    result.files.append(summary)
    return result


def write_summary(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["controller", "kind", "status", "J_sim", "ise", "settle_time", "max_abs_u",
                    "message"])
        for r in rows:
            w.writerow([r.controller, r.kind, r.status, repr(r.J_sim), repr(r.ise),
                        repr(r.settle_time), repr(r.max_abs_u), r.message])


def format_summary(rows):
    head = f"{'controller':<12} {'status':<9} {'J_sim':>14} {'ISE':>14} {'settle[s]':>10} " \
           f"{'max|u|':>12}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.controller:<12} {r.status:<9} {r.J_sim:>14.6g} {r.ise:>14.6g} "
                     f"{r.settle_time:>10.4g} {r.max_abs_u:>12.6g}")
    return "\n".join(lines)


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass", "fail" or "skip"
    detail: str

    @property
    def passed(self):
        return self.status != "fail"


@dataclass
class VerifyReport:
    scenario: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [f"[{c.status.upper():4}] {c.name}: {c.detail}" for c in self.checks]


def _check(out, name, ok, detail):
    out.append(Check(name, "pass" if ok else "fail", detail))


def verify(s, seed=0, samples=None):
    """Run the property suite on ``s``; every check reports pass, fail or skip."""
    out = []
    plant, cost, d = s.plant, s.cost, s.disturbance
    cfg = s.verify
    step = float(cfg.get("riccati_step", 1e-3))
    samples = int(cfg.get("cos_samples", 5) if samples is None else samples)
    x0 = s.x0

    det = check_detectability(plant, assemble_Q(plant, cost))
    _check(out, "detectability", det.passed,
           "all unstable modes visible" if det.passed else f"undetectable modes {det.offending}")

    try:
        g = solve_gare(plant, cost)
        _check(out, "gare", g.residual <= GARE_TOL,
               f"residual {g.residual:.3e} (tol {GARE_TOL:g}), stabilizing")
    except MdrcError as exc:
        _check(out, "gare", False, f"{type(exc).__name__}: {exc}")

    try:
        rt = solve_grde(plant, cost, step)
    except MdrcError as exc:
        _check(out, "grde", False, f"{type(exc).__name__}: {exc}")
        return VerifyReport(s.name, out)
    fd = grde_fd_residual(rt)
    _check(out, "grde_residual", fd <= GRDE_FD_TOL,
           f"relative finite-difference residual {fd:.3e} (tol {GRDE_FD_TOL:g})")
    if plant.n == 1 and plant.m == 1:
        exact = checks.scalar_riccati(plant.A[0, 0], plant.B[0, 0], rt.Q[0, 0], cost.R[0, 0],
                                      cost.P_T[0, 0], cost.T)
        err = abs(rt.P[0, 0, 0] - exact)
        _check(out, "scalar_closed_form", err <= SCALAR_TOL,
               f"|P_0 - exact| = {err:.3e} (tol {SCALAR_TOL:g})")

    try:
        ft = solve_feedforward(rt, d)
        law = make_finite_horizon_law(rt, ft)
    except MdrcError as exc:
        for name in ("fbde", "cost_gap", "completion_of_squares", "oracle"):
            out.append(Check(name, "skip", f"no optimal law: {exc}"))
        return VerifyReport(s.name, out)
    lg = simulate(plant, law, d, x0, cost.T, step, cost)
    fb = fbde_residuals(lg, rt, ft, cost)
    for name, val in (("stationarity", fb.stationarity_residual),
                      ("adjoint", fb.adjoint_ode_residual), ("terminal", fb.terminal_residual)):
        _check(out, f"fbde_{name}", val <= FBDE_TOL, f"{val:.3e} (tol {FBDE_TOL:g})")
    rep = evaluate_cost(lg, plant, cost, rt, ft)
    _check(out, "cost_gap", rep.gap <= COST_GAP_TOL,
           f"J_sim {rep.J_sim:.8g} vs formula {rep.J_formula:.8g}, gap {rep.gap:.3e}")

    rng = np.random.default_rng(seed)
    cos_step = float(cfg.get("cos_step", step))
    trials = checks.completion_of_squares(plant, cost, d, x0, cos_step, rng, samples)
    worst = max(t.rel_error for t in trials)
    _check(out, "completion_of_squares", worst <= SQUARES_TOL,
           f"worst relative error {worst:.3e} over {samples} perturbations (tol {SQUARES_TOL:g})")

    oc = checks.oracle_comparison(plant, cost, d, x0, step)
    ok = oc.gaps[0] <= ORACLE_TOL and oc.ratio >= ORACLE_RATIO
    _check(out, "oracle", ok, f"gap {oc.gaps[0]:.3e} at dt={oc.steps[0]:g}, "
                              f"refinement ratio {oc.ratio:.3f} (need <= {ORACLE_TOL:g}, "
                              f">= {ORACLE_RATIO:g})")
    return VerifyReport(s.name, out)
