"""Scenario runner: dispatch a config to the library and write CSV artifacts.

Each scenario produces deterministic CSV files plus a ``summary.csv`` of
pass/fail check records.  Exit codes: 0 all checks pass, 2 configuration
error (nothing written), 3 numerical failure (partial artifacts retained),
4 golden-file mismatch.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import csvio, flow, graphs, holonomy, lichnerowicz, minkowski, models
from .config import ConfigError, RunConfig, get_float, get_floats, get_int, load_config

SUMMARY_HEADER = ("name", "measured", "expected", "tolerance", "pass")

EXIT_PASS = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_GOLDEN = 4


def _check(name: str, measured: float, expected: float, tolerance: float):
    ok = abs(measured - expected) <= tolerance
    return (name, float(measured), float(expected), float(tolerance), bool(ok))


def _write_artifact(out_dir: str, artifacts: list, name: str, header, rows) -> None:
    path = os.path.join(out_dir, name)
    csvio.write_csv(path, header, rows)
    artifacts.append(name)


def _bound_violation(trace: flow.HamTrace, ndim: int):
    """Dimensionless worst violation of 1/tau^2 <= N <= n/tau^2 along a trace."""
    tau = trace.column("tau")
    lo = 1.0 / tau**2
    hi = ndim / tau**2
    low_viol = np.max((lo - trace.column("lapse_min")) / lo)
    high_viol = np.max((trace.column("lapse_max") - hi) / hi)
    return max(0.0, float(low_viol)), max(0.0, float(high_viol))


def _flow_trace_checks(prefix: str, trace: flow.HamTrace, ndim: int):
    lo_viol, hi_viol = _bound_violation(trace, ndim)
    return [
        _check(prefix + "_lapse_lower_bound_violation", lo_viol, 0.0, 1e-12),
        _check(prefix + "_lapse_upper_bound_violation", hi_viol, 0.0, 1e-12),
        _check(prefix + "_max_gauss_residual",
               float(np.max(trace.column("gauss_residual"))), 0.0, 1e-8),
        _check(prefix + "_max_codazzi_residual",
               float(np.max(trace.column("codazzi_residual"))), 0.0, 1e-8),
    ]


def _flow_range(opts) -> tuple:
    tau_start = get_float(opts, "tau_start", -10.0)
    tau_end = get_float(opts, "tau_end", -0.1)
    steps = get_int(opts, "steps", 10000)
    if not (tau_start < tau_end < 0.0):
        raise ConfigError("require tau_start < tau_end < 0")
    if steps < 2:
        raise ConfigError("steps must be at least 2")
    return tau_start, tau_end, steps


def scenario_cone_flow(opts, out_dir, artifacts):
    ndim = get_int(opts, "dim", 3)
    if not 2 <= ndim <= 4:
        raise ConfigError("dim must be 2, 3, or 4")
    base_volume = get_float(opts, "base_volume", 1.0)
    if base_volume <= 0:
        raise ConfigError("base_volume must be positive")
    tau_start, tau_end, steps = _flow_range(opts)

    model = models.ConeModel(ndim, base_volume)
    state = flow.state_from_slice(models.slice_at_tau(model, tau_start))
    trace = flow.run_flow(state, tau_end, steps)
    _write_artifact(out_dir, artifacts, "cone_flow_trace.csv", flow.TRACE_COLUMNS, trace.data)

    expected = float(ndim) ** ndim * base_volume
    drift = float(np.max(np.abs(trace.column("ham") / expected - 1.0)))
    checks = [_check("cone_ham_rel_drift", drift, 0.0, 1e-8)]
    checks += _flow_trace_checks("cone", trace, ndim)
    return checks


def scenario_kasner_flow(opts, out_dir, artifacts):
    ndim = get_int(opts, "dim", 3)
    if not 3 <= ndim <= 4:
        raise ConfigError("dim must be 3 or 4 (needs a hyperbolic factor of dim >= 2)")
    sigma_volume = get_float(opts, "sigma_volume", 1.0)
    circle_length = get_float(opts, "circle_length", 1.0)
    if sigma_volume <= 0 or circle_length <= 0:
        raise ConfigError("sigma_volume and circle_length must be positive")
    tau_start, tau_end, steps = _flow_range(opts)

    model = models.KasnerModel(ndim, sigma_volume, circle_length)
    state = flow.state_from_slice(models.slice_at_tau(model, tau_start))
    trace = flow.run_flow(state, tau_end, steps)
    _write_artifact(out_dir, artifacts, "kasner_flow_trace.csv", flow.TRACE_COLUMNS, trace.data)

    ham = trace.column("ham")
    closed = np.array([models.ham_closed_form(model, t) for t in trace.column("tau")])
    match = float(np.max(np.abs(ham / closed - 1.0)))
    report = flow.ham_monotonicity_check(trace)
    checks = [
        _check("kasner_closed_form_rel_err", match, 0.0, 1e-6),
        _check("kasner_ham_increases", float(report.n_increases), 0.0, 0.0),
        _check("kasner_monotonicity_identity", report.max_identity_mismatch, 0.0, 1e-4),
    ]
    checks += _flow_trace_checks("kasner", trace, ndim)
    return checks


def scenario_lichnerowicz_sweep(opts, out_dir, artifacts):
    ndim = get_int(opts, "dim", 3)
    if ndim not in (3, 4):
        raise ConfigError("dim must be 3 or 4")
    volume = get_float(opts, "volume", 1.0)
    if volume <= 0:
        raise ConfigError("volume must be positive")
    grid_points = get_int(opts, "grid_points", 0)
    tau_values = get_floats(opts, "tau_values", (-1.0, -2.0, -3.0, -4.0, -5.0))
    sigma_values = get_floats(opts, "sigma_sq_values", (0.0, 4.0, 8.0, 12.0))
    if any(t >= 0 for t in tau_values):
        raise ConfigError("tau_values must be negative")
    if any(s < 0 for s in sigma_values):
        raise ConfigError("sigma_sq_values must be non-negative")
    if 0.0 not in sigma_values:
        raise ConfigError("sigma_sq_values must include 0 for the exact-root check")

    if grid_points:
        bg = lichnerowicz.ConformalBackground(ndim, volume, grid_points=grid_points)
    else:
        bg = lichnerowicz.ConformalBackground(ndim, volume)
    rows = lichnerowicz.sweep_constant_sigma(bg, tau_values, sigma_values)
    _write_artifact(out_dir, artifacts, "lichnerowicz_sweep.csv",
                    lichnerowicz.SWEEP_COLUMNS, rows)

    data = np.asarray(rows, dtype=float)
    tau_col, sig_col = data[:, 0], data[:, 1]
    u_min, u_max = data[:, 2], data[:, 3]
    ham, bound = data[:, 4], data[:, 5]

    refs = np.array([lichnerowicz.reference_factor(ndim, t) for t in tau_col])
    zero = sig_col == 0.0
    exact_err = float(np.max(np.maximum(np.abs(u_min[zero] - refs[zero]),
                                        np.abs(u_max[zero] - refs[zero]))))
    barrier_viol = max(0.0, float(np.max((refs - u_min) / refs)))
    ham_viol = max(0.0, float(np.max((bound - ham) / bound)))
    report = lichnerowicz.sigma_report(ham, ndim)
    report_expected = -((ndim - 1.0) / ndim) * (float(ndim) ** ndim * volume) ** (2.0 / ndim)

    return [
        _check("lich_zero_sigma_exact_err", exact_err, 0.0, 1e-12),
        _check("lich_barrier_violation", barrier_viol, 0.0, 1e-12),
        _check("lich_ham_bound_violation", ham_viol, 0.0, 1e-12),
        _check("lich_sigma_report", report, report_expected, 1e-9),
    ]


def scenario_riccati(opts, out_dir, artifacts):
    seed = get_int(opts, "seed", 2024)
    trials = get_int(opts, "trials", 5)
    steps = get_int(opts, "steps", 2000)
    t_values = get_floats(opts, "t_values", (0.3, 0.9, 1.5))
    if trials < 1:
        raise ConfigError("trials must be positive")
    if any(t <= 0 for t in t_values):
        raise ConfigError("t_values must be positive")

    rng = np.random.default_rng(seed)
    rows = []
    worst_int = 0.0
    worst_semi = 0.0
    for trial in range(trials):
        dim = 2 + trial % 3
        a = rng.normal(size=(dim, dim))
        k0 = -(a @ a.T) - 0.1 * np.eye(dim)
        for t in t_values:
            exact = models.riccati_propagate(k0, t)
            numeric = models.riccati_integrate(k0, t, steps=steps)
            int_err = float(np.max(np.abs(numeric - exact)))
            two_leg = models.riccati_propagate(models.riccati_propagate(k0, 0.4 * t), 0.6 * t)
            semi_err = float(np.max(np.abs(two_leg - exact)))
            rows.append((trial, dim, t, int_err, semi_err))
            worst_int = max(worst_int, int_err)
            worst_semi = max(worst_semi, semi_err)
    _write_artifact(out_dir, artifacts, "riccati_checks.csv",
                    ("trial", "dim", "t", "integration_err", "semigroup_err"), rows)

    return [
        _check("riccati_integration_err", worst_int, 0.0, 1e-8),
        _check("riccati_semigroup_err", worst_semi, 0.0, 1e-10),
    ]


def scenario_bolza_check(opts, out_dir, artifacts):
    seed = get_int(opts, "seed", 7)
    n_words = get_int(opts, "words", 20)
    # Boost factors amplify rounding by ~cosh(l)+sinh(l) per letter, so the
    # random-word length and translation size are kept where the exact
    # cocycle rule is still resolvable at the 1e-9 scale.
    word_length = get_int(opts, "word_length", 5)
    if n_words < 1 or word_length < 2:
        raise ConfigError("words must be >= 1 and word_length >= 2")

    pres = holonomy.bolza_presentation()
    eye = np.eye(pres.ndim + 1)
    relator_res = max(
        float(np.max(np.abs(holonomy.evaluate_word(pres, rel) - eye)))
        for rel in pres.relators
    )
    area = holonomy.octagon_area()

    rng = np.random.default_rng(seed)
    deformed = holonomy.HolonomyRep(
        pres, holonomy.Cocycle(tuple(rng.normal(scale=0.25, size=pres.ndim + 1)
                                     for _ in range(pres.n_generators)))
    )
    cocycle_err = 0.0
    for _ in range(n_words):
        word = [int(i) for i in rng.integers(1, 9, size=word_length) * rng.choice((-1, 1), size=word_length)]
        split = int(rng.integers(1, word_length))
        alpha, beta = word[:split], word[split:]
        lhs = holonomy.extend_cocycle(deformed, word)
        rhs = holonomy.extend_cocycle(deformed, alpha) + \
            holonomy.evaluate_word(pres, alpha) @ holonomy.extend_cocycle(deformed, beta)
        cocycle_err = max(cocycle_err, float(np.max(np.abs(lhs - rhs))))

    base_point = rng.normal(size=pres.ndim + 1)
    cob_rep = holonomy.HolonomyRep(pres, holonomy.coboundary_cocycle(pres, base_point))
    coboundary_res = max(
        float(np.max(np.abs(holonomy.extend_cocycle(cob_rep, rel))))
        for rel in pres.relators
    )

    # Gauss-map equivariance on the exact hyperboloid: the unit normal at a
    # hyperboloid point is the point itself, so for each linear generator A
    # the normal at the mapped point must be A applied to the normal.
    pts = rng.uniform(-0.8, 0.8, size=(64, pres.ndim))
    lifted = minkowski.hyperboloid_lift(pts)
    equiv_err = 0.0
    for k in range(pres.n_generators):
        gen = pres.generators[k]
        mapped = lifted @ gen.T
        renormal = minkowski.hyperboloid_lift(mapped[:, 1:])
        in_patch = np.max(np.abs(mapped[:, 1:]), axis=1) <= 6.4
        if np.any(in_patch):
            equiv_err = max(equiv_err, float(np.max(np.abs(mapped - renormal)[in_patch])))

    rows = [
        ("relator_residual", relator_res),
        ("octagon_area", area),
        ("octagon_inradius", holonomy.octagon_inradius()),
        ("octagon_circumradius", holonomy.octagon_circumradius()),
        ("cocycle_rule_err", cocycle_err),
        ("coboundary_relator_residual", coboundary_res),
        ("gauss_equivariance_err", equiv_err),
    ]
    _write_artifact(out_dir, artifacts, "bolza_quantities.csv", ("quantity", "value"), rows)

    return [
        _check("bolza_relator_residual", relator_res, 0.0, 1e-9),
        _check("bolza_octagon_area", area, 4.0 * math.pi, 1e-3),
        _check("bolza_cocycle_rule_err", cocycle_err, 0.0, 1e-9),
        _check("bolza_coboundary_relator_residual", coboundary_res, 0.0, 1e-9),
        _check("bolza_gauss_equivariance_err", equiv_err, 0.0, 1e-9),
    ]


def scenario_limit_experiment(opts, out_dir, artifacts):
    scale = get_float(opts, "cocycle_scale", 0.002)
    lambdas = get_floats(opts, "lambdas", (1.0, 2.0, 4.0, 8.0))
    extent = get_float(opts, "extent", 6.4)
    nodes = get_int(opts, "nodes", 321)
    word_length = get_int(opts, "word_length", 3)
    relax_tol = get_float(opts, "relax_tol", 1e-8)
    coboundary_size = get_float(opts, "coboundary_size", 0.15)
    if scale <= 0 or coboundary_size <= 0:
        raise ConfigError("cocycle_scale and coboundary_size must be positive")
    if any(lam <= 0 for lam in lambdas) or len(lambdas) < 2:
        raise ConfigError("lambdas must be positive and at least two values")
    if relax_tol <= 0:
        raise ConfigError("relax_tol must be positive")

    rep = holonomy.bolza_rep(holonomy.bolza_nontrivial_cocycle(scale))
    rows, base_volume = graphs.limit_experiment(
        rep, lambdas, extent=extent, nodes=nodes,
        word_length=word_length, relax_tol=relax_tol)
    _write_artifact(out_dir, artifacts, "limit_experiment.csv", graphs.LIMIT_COLUMNS, rows)

    devs = [abs(r[3] - 1.0) for r in rows]
    increases = sum(1 for i in range(len(devs) - 1) if devs[i + 1] >= devs[i])
    worst_resid = max(r[4] for r in rows)

    # Pure-gauge control: a coboundary sized to the same orbit-translation
    # magnitude must not move the volume ratio beyond quadrature noise.
    pres = rep.presentation
    b_unit = np.array([1.0, 0.6, -0.8])
    unit_rep = holonomy.HolonomyRep(pres, holonomy.coboundary_cocycle(pres, b_unit))
    amp = max(float(np.max(np.abs(iso.translation)))
              for iso in holonomy.orbit_isometries(unit_rep, word_length))
    cob = holonomy.coboundary_cocycle(pres, (coboundary_size / amp) * b_unit)
    cob_rows, _ = graphs.limit_experiment(
        holonomy.HolonomyRep(pres, cob), (1.0,), extent=extent, nodes=nodes,
        word_length=word_length, relax_tol=relax_tol)
    _write_artifact(out_dir, artifacts, "coboundary_control.csv",
                    graphs.LIMIT_COLUMNS, cob_rows)

    return [
        _check("limit_dev_increases", float(increases), 0.0, 0.0),
        _check("limit_relax_residual", worst_resid, 0.0, 10.0 * relax_tol),
        _check("limit_baseline_volume", base_volume, 4.0 * math.pi, 5e-3),
        _check("limit_coboundary_ratio", cob_rows[0][3], 1.0, 2e-4),
    ]


def scenario_graph_check(opts, out_dir, artifacts):
    ndim = get_int(opts, "dim", 2)
    if not 2 <= ndim <= 4:
        raise ConfigError("dim must be 2, 3, or 4")
    s = get_float(opts, "hyperboloid_s", 1.0)
    if s <= 0:
        raise ConfigError("hyperboloid_s must be positive")
    extent = get_float(opts, "extent", 2.0)
    nodes_list = [int(v) for v in get_floats(opts, "refinement_nodes", (81, 161, 321))]
    if len(nodes_list) < 3 or any(n < 9 for n in nodes_list):
        raise ConfigError("refinement_nodes needs at least three sizes of 9+ nodes")
    if ndim >= 3:
        nodes_list = [min(n, 81) for n in nodes_list]

    target = -ndim / s
    conv_rows = []
    errs = []
    det_err = 0.0
    for nodes in nodes_list:
        field = graphs.hyperboloid_field(s, extent, nodes, ndim=ndim)
        geom = graphs.graph_geometry(field)
        err = float(np.max(np.abs(geom.mean_curvature[geom.interior] - target)))
        errs.append(err)
        metric = geom.induced_metric
        det = np.linalg.det(metric)
        w2 = geom.volume_density**2
        det_err = max(det_err, float(np.max(np.abs(det - w2)[geom.interior])))
        conv_rows.append((nodes, field.spacing, err))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    _write_artifact(out_dir, artifacts, "graph_convergence.csv",
                    ("nodes", "spacing", "max_mean_curvature_err"), conv_rows)

    checks = [_check(f"graph_convergence_order_{i}", order, 2.0, 0.2)
              for i, order in enumerate(orders)]
    checks.append(_check("graph_det_identity_err", det_err, 0.0, 1e-12))

    fine_nodes = get_int(opts, "energy_nodes", 2401)
    fine_extent = get_float(opts, "energy_extent", 6.0)
    field = graphs.hyperboloid_field(1.0, fine_extent, fine_nodes, ndim=2)
    report = graphs.quotient_energy(field, graphs.bolza_domain_level)
    tau, chi = -2.0, -2
    identity = report.energy - (4.0 * math.pi * chi + tau**2 * report.volume)
    _write_artifact(out_dir, artifacts, "graph_energy.csv",
                    ("energy", "volume", "tau_mean", "identity_residual"),
                    [(report.energy, report.volume, report.tau_mean, identity)])
    checks.append(_check("graph_energy_identity", identity, 0.0, 1e-3))
    return checks


SCENARIOS = {
    "cone-flow": scenario_cone_flow,
    "kasner-flow": scenario_kasner_flow,
    "lichnerowicz-sweep": scenario_lichnerowicz_sweep,
    "riccati": scenario_riccati,
    "bolza-check": scenario_bolza_check,
    "limit-experiment": scenario_limit_experiment,
    "graph-check": scenario_graph_check,
}


def compare_golden(artifact_path: str, golden_path: str, rel_tol: float) -> bool:
    """Elementwise relative comparison of two CSV files.

    Headers must match exactly (ValueError otherwise).  Numeric cells pass
    when |a - b| <= rel_tol * max(|a|, |b|); NaN never passes; non-numeric
    cells must be equal strings.
    """
    header_a, rows_a = csvio.read_csv(artifact_path)
    header_b, rows_b = csvio.read_csv(golden_path)
    if header_a != header_b:
        raise ValueError(f"header mismatch: {header_a!r} vs {header_b!r}")
    if len(rows_a) != len(rows_b):
        return False
    for row_a, row_b in zip(rows_a, rows_b):
        if len(row_a) != len(row_b):
            return False
        for cell_a, cell_b in zip(row_a, row_b):
            try:
                x, y = float(cell_a), float(cell_b)
            except ValueError:
                if cell_a != cell_b:
                    return False
                continue
            if math.isnan(x) or math.isnan(y):
                return False
            if abs(x - y) > rel_tol * max(abs(x), abs(y)):
                return False
    return True


def _run(scenario: str, opts: dict, out_dir: str):
    """Returns (summary_rows, artifact_names); raises ConfigError before any write."""
    runner = SCENARIOS.get(scenario)
    if runner is None:
        raise ConfigError(f"unknown scenario {scenario!r}; see --list-scenarios")
    artifacts: list = []
    os.makedirs(out_dir, exist_ok=True)
    summary = runner(opts, out_dir, artifacts)
    return summary, artifacts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cmcflat",
        description="Run CMC-flow scenarios and write deterministic CSV artifacts.")
    parser.add_argument("--config", help="key=value config file with [scenario] sections")
    parser.add_argument("--out", default="cmcflat_out", help="output directory")
    parser.add_argument("--scenario", help="scenario name (overrides the config)")
    parser.add_argument("--list-scenarios", action="store_true")
    parser.add_argument("--check-golden", metavar="DIR",
                        help="after the run, compare artifacts against this directory")
    args = parser.parse_args(argv)

    if args.list_scenarios:
        for name in SCENARIOS:
            print(name)
        return EXIT_PASS

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        scenario = args.scenario or cfg.options.get("scenario")
        if not scenario:
            raise ConfigError("no scenario selected: pass --scenario or set scenario= in the config")
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; see --list-scenarios")
        opts = cfg.scoped(scenario)
        golden_tol = get_float(opts, "golden_rel_tol", 1e-10)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    artifacts: list = []
    try:
        summary, artifacts = _run(scenario, opts, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {scenario}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    summary_rows = [(n, m, e, t, "true" if ok else "false") for n, m, e, t, ok in summary]
    csvio.write_csv(os.path.join(args.out, "summary.csv"), SUMMARY_HEADER, summary_rows)
    artifacts.append("summary.csv")

    all_pass = all(ok for *_, ok in summary)
    for name, measured, expected, tol, ok in summary:
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}: measured={csvio.format_value(measured)} "
              f"expected={csvio.format_value(expected)} tol={csvio.format_value(tol)}")

    if args.check_golden:
        mismatches = []
        for name in artifacts:
            golden_path = os.path.join(args.check_golden, name)
            if not os.path.exists(golden_path):
                mismatches.append(f"{name}: no golden counterpart")
                continue
            try:
                same = compare_golden(os.path.join(args.out, name), golden_path, golden_tol)
            except ValueError as exc:
                mismatches.append(f"{name}: {exc}")
                continue
            if not same:
                mismatches.append(f"{name}: differs beyond rel_tol {golden_tol}")
        if mismatches:
            for line in mismatches:
                print(f"golden mismatch: {line}", file=sys.stderr)
            return EXIT_GOLDEN
        print(f"golden check: {len(artifacts)} artifacts match")

    return EXIT_PASS if all_pass else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
