"""``tmwave`` command line: convergence studies, the resonator chain and projection rates.

    tmwave <convergence|resonators|projection-study> --config <path|bundled-name>
           [--out DIR] [--levels 16,32,64] [--seed-check] [--jobs N]

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(divergence, loss of positive definiteness, or a failed ``--seed-check``).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import hashlib
import logging
import os
import sys

import numpy as np

from tmwave import analysis, config, fem1d, projection, stepping
from tmwave.coefficients import ResonatorChain
from tmwave.linalg import LinAlgError

log = logging.getLogger("tmwave")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(RuntimeError):
    pass


def _space(sc, model, n):
    mesh = fem1d.build_mesh(sc.domain[0], sc.domain[1], n,
                            config.required_vertices(sc, model))
    return fem1d.FeSpace(mesh)


def _initial_data(sc):
    if sc.solution == "standing_wave":
        def u0(x):
            return np.sin(np.pi * x)

        def v0(x):
            return np.zeros_like(np.asarray(x, float))
        return u0, v0, None
    return config.pulse_functions(sc.pulse, *sc.domain)


def solve_level(sc, n):
    """Final-time FE solution of one mesh level; ``(n, dt, dofs)``."""
    model = config.build_model(sc)
    sp = _space(sc, model, n)
    dt = config.dt_for(sc, sp.mesh, sp, model)
    u0, v0, bnd = _initial_data(sc)
    solver = stepping.WaveSolver(sp, model, sc.gain_loss, lumped=sc.lumped, boundary=bnd)
    traj = stepping.run(solver, u0, v0, dt, sc.T)
    st = traj.final_state
    return n, st.dt, st.u_curr


def _map(fn, args, jobs):
    if jobs <= 1 or len(args) <= 1:
        return [_guard(fn, a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_guard, [fn] * len(args), args))


def _guard(fn, a):
    try:
        return fn(*a)
    except (stepping.Diverged, LinAlgError, stepping.StepError) as exc:
        return exc


def convergence_table(sc, jobs=1):
    """Rate table over ``sc.mesh_levels``; failed levels are reported and skipped."""
    model = config.build_model(sc)
    levels = sorted(sc.mesh_levels)
    analytic = sc.solution == "standing_wave"
    tasks = [(sc, n) for n in levels]
    if not analytic:
        tasks.append((sc, levels[-1] * sc.reference_factor))
    results = _map(solve_level, tasks, jobs)
    failures = [(t[1], r) for t, r in zip(tasks, results) if isinstance(r, Exception)]
    table = analysis.RateTable()
    ref = None
    if not analytic:
        if isinstance(results[-1], Exception):
            raise NumericalFailure(f"reference level failed: {results[-1]}")
        _, _, ref_dofs = results[-1]
        ref = fem1d.FeFunction(_space(sc, model, tasks[-1][1]), ref_dofs)
    for n, res in zip(levels, results):
        if isinstance(res, Exception):
            continue
        _, dt, dofs = res
        f = fem1d.FeFunction(_space(sc, model, n), dofs)
        if analytic:
            c = np.cos(np.pi * sc.T)
            l2, h1 = analysis.error_vs_callable(
                f, lambda x: np.sin(np.pi * x) * c, lambda x: np.pi * np.cos(np.pi * x) * c)
        else:
            l2, h1 = analysis.error_vs_reference(f, ref)
        table.add(f.space.mesh.h, dt, l2, h1)
    return table, failures


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _header(sc, command, extra=()):
    return [f"tmwave {command}"] + sc.header_lines() + list(extra)


def cmd_convergence(sc, jobs=1):
    table, failures = convergence_table(sc, jobs)
    extra = [f"reference_factor={sc.reference_factor}"]
    if sc.solution == "standing_wave":
        extra = ["reference=analytic sin(pi x) cos(pi t)"]
    for n, exc in failures:
        extra.append(f"failed level n={n}: {exc}")
        print(f"level n={n} failed: {exc}", file=sys.stderr)
    path = os.path.join(sc.output_dir, "rates.csv")
    if len(table) >= 2:
        text = table.to_csv(_header(sc, "convergence", extra))
    else:
        text = "\n".join(f"# {x}" for x in _header(sc, "convergence", extra)) + "\n"
    _write(path, text)
    if len(table) >= 3 and not table.exact:
        print(f"slope_l2={analysis.fmt(table.slope_l2)} slope_h1={analysis.fmt(table.slope_h1)}")
    if failures:
        raise NumericalFailure(f"{len(failures)} level(s) failed")
    return [path]


def _snapshot_name(t):
    if float(t).is_integer():
        return f"snapshot_t{int(t):04d}.csv"
    return "snapshot_t" + ("%.6g" % t).replace(".", "p") + ".csv"


def resonator_run(sc, n=None):
    """Integrate the chain scenario; returns ``(space, model, trajectory, failure)``.

    The monitor records ``(max |u| over chain dofs, max |u| over the domain)``.
    On divergence or loss of positive definiteness ``failure`` holds the
    exception and the trajectory is whatever was recorded before it.
    """
    model = config.build_model(sc)
    sp = _space(sc, model, n or sc.mesh_levels[-1])
    dt = config.dt_for(sc, sp.mesh, sp, model)
    u0, v0, bnd = _initial_data(sc)
    solver = stepping.WaveSolver(sp, model, sc.gain_loss, lumped=sc.lumped, boundary=bnd)
    x = sp.dof_coords
    inside = np.zeros(x.size, dtype=bool)
    if isinstance(model, ResonatorChain):
        inside = (x >= model.intervals[0, 0]) & (x <= model.intervals[-1, 1])

    def monitor(st):
        u = np.abs(st.u_curr)
        return float(np.max(u[inside])) if inside.any() else 0.0, float(np.max(u))

    try:
        traj = stepping.run(solver, u0, v0, dt, sc.T, snapshot_times=sc.snapshot_times,
                            monitor=monitor, monitor_every=sc.amplitude_every)
    except (stepping.Diverged, LinAlgError) as exc:
        if getattr(exc, "partial", None) is None:
            raise
        return sp, model, exc.partial, exc
    return sp, model, traj, None


def cmd_resonators(sc, jobs=1):
    sp, model, traj, failure = resonator_run(sc)
    extra = [f"n_elements={sp.mesh.n_elements}"]
    if failure is not None:
        t_fail = failure.step * traj.final_state.dt
        extra.append(f"stopped at step {failure.step} (t={analysis.fmt(t_fail)}): {failure}")
    head = "\n".join(f"# {x}" for x in _header(sc, "resonators", extra)) + "\n"
    paths = []
    taken = {}
    for t, f in traj.snapshots:
        taken.setdefault(t, f)
    step_times = sorted(taken)
    for want in sorted(sc.snapshot_times):
        if not step_times:
            break
        t = min(step_times, key=lambda s: abs(s - want))
        if abs(t - want) > traj.final_state.dt:
            continue
        f = taken[t]
        lines = [f"# requested_t={analysis.fmt(want)} step_t={analysis.fmt(t)}", "x,u"]
        lines += [f"{analysis.fmt(a)},{analysis.fmt(b)}" for a, b in zip(sp.dof_coords, f.dofs)]
        p = os.path.join(sc.output_dir, _snapshot_name(want))
        _write(p, head + "\n".join(lines) + "\n")
        paths.append(p)
    lines = ["t,max_abs_u_chain,max_abs_u_domain"]
    lines += [f"{analysis.fmt(t)},{analysis.fmt(a)},{analysis.fmt(b)}"
              for t, (a, b) in traj.monitor_series]
    p = os.path.join(sc.output_dir, "amplitude.csv")
    _write(p, head + "\n".join(lines) + "\n")
    paths.append(p)
    if failure is not None:
        missing = [t for t in sc.snapshot_times if t > t_fail]
        raise NumericalFailure(f"{failure}; snapshots not reached: {missing}; "
                               f"partial output in {sc.output_dir}")
    return paths


def _exact(sc):
    return {"sin_cos": projection.sin_cos_solution,
            "quadratic": projection.quadratic_solution}[sc.solution]()


def projection_table(sc):
    rule = sc.dt_rule
    model = config.build_model(sc)
    dt0 = rule.get("dt0", 0.0)
    if rule["kind"] == "cfl":
        raise config.ValidationError(["dt_rule: projection-study needs an h_power rule"])
    return projection.projection_rate_study(
        model, _exact(sc), sc.mesh_levels, sc.T, dt0, h0=rule.get("h0"),
        exponent=rule.get("exponent", 2.0), domain=sc.domain)


def cmd_projection_study(sc, jobs=1):
    table, deriv, info = projection_table(sc)
    extra = [f"gamma={analysis.fmt(info['gamma'])}",
             "lambda_hat=" + ",".join(analysis.fmt(v) for v in info["lambda_hat"])]
    print(f"gamma={analysis.fmt(info['gamma'])}")
    p1 = os.path.join(sc.output_dir, "projection_rates.csv")
    _write(p1, table.to_csv(_header(sc, "projection-study", extra)))
    p2 = os.path.join(sc.output_dir, "projection_deriv_rates.csv")
    _write(p2, deriv.to_csv(_header(sc, "projection-study",
                                    extra + ["errors of the centred time derivative"])))
    if table.exact:
        print("exact=true")
    else:
        print(f"slope_l2={analysis.fmt(table.slope_l2)} slope_h1={analysis.fmt(table.slope_h1)}")
        print(f"deriv_slope_h1={analysis.fmt(deriv.slope_h1)}")
    return [p1, p2]


COMMANDS = {
    "convergence": cmd_convergence,
    "resonators": cmd_resonators,
    "projection-study": cmd_projection_study,
}


def _digest(paths):
    h = hashlib.sha256()
    for p in sorted(paths):
        with open(p, "rb") as fh:
            h.update(os.path.basename(p).encode() + b"\0" + fh.read())
    return h.hexdigest()


def build_parser():
    ap = argparse.ArgumentParser(prog="tmwave", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True,
                    help="scenario JSON file or bundled name (%s)" % ", ".join(
                        config.bundled_names()))
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--levels", help="comma separated element counts (overrides mesh_levels)")
    ap.add_argument("--seed-check", action="store_true",
                    help="run twice and fail unless the outputs are byte-identical")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for mesh levels")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        sc = config.parse_scenario(args.config)
        levels = None
        if args.levels:
            try:
                levels = [int(v) for v in args.levels.split(",")]
            except ValueError:
                raise config.ValidationError([f"--levels: not a list of integers: {args.levels}"])
        config.apply_overrides(sc, out=args.out, levels=levels)
        if sc.command != args.command:
            raise config.ValidationError(
                [f"command: scenario is for '{sc.command}', not '{args.command}'"])
    except (config.ParseError, config.ValidationError) as exc:
        print(f"tmwave: {exc}", file=sys.stderr)
        return EXIT_INVALID
    run = COMMANDS[args.command]
    try:
        paths = run(sc, args.jobs)
        if args.seed_check:
            first = _digest(paths)
            paths = run(sc, args.jobs)
            second = _digest(paths)
            if first != second:
                print("seed-check: outputs differ between runs", file=sys.stderr)
                return EXIT_NUMERIC
            print(f"seed-check: identical sha256={first}")
    except config.ValidationError as exc:
        print(f"tmwave: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, stepping.Diverged, stepping.StepError, LinAlgError,
            projection.GammaSearchFailed) as exc:
        print(f"tmwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
