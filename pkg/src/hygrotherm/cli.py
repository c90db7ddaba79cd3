"""Command-line driver.

Runs one scenario and writes, into the output directory,

* ``scenario.toml``: the fully resolved configuration that was run,
* ``snapshot_XXXXXX.csv`` / ``.vtk``: nodal fields at every snapshot,
* ``figures/fields_XXXXXX.png``: rendered field maps,
* with ``--spalling``: ``spalling.csv`` and ``figures/zones_XXXXXX.png``,
  plus the zone map as cell data in the VTK snapshots.

The per-step diagnostics (step, time, Newton iterations, residual) go to
standard output as tab-separated lines; messages and errors go to
standard error.  Command-line flags override configuration values, which
override the built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import golden
from . import materials as mt
from .io import write_snapshot
from .scenario import ConfigError, Scenario, parse_scenario, serialize_scenario
from .solver import SolverConfig, StepFailure, initial_state, run
from .spalling import SpallingTracker, Zone, write_report

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 3
EXIT_STEP = 4
EXIT_IO = 5

DIAGNOSTICS_HEADER = "step\ttime_s\titerations\tresidual"

log = logging.getLogger("hygrotherm")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hygrotherm",
        description="Coupled heat and moisture transport in concrete exposed to fire.",
    )
    p.add_argument("--config", type=Path, help="scenario file (TOML with dotted keys)")
    p.add_argument("--out", type=Path, default=Path("hygrotherm-out"), help="output directory")
    p.add_argument("--duration", type=float, help="simulated time [s] (solver.t_end)")
    p.add_argument("--dt", type=float, help="time step [s] (solver.dt)")
    p.add_argument("--mesh", type=int, nargs=2, metavar=("NX", "NY"), help="element counts")
    p.add_argument("--snapshot-every", type=float, help="snapshot cadence [s]")
    p.add_argument("--spalling", action="store_true", help="write spalling reports and zone maps")
    p.add_argument("--no-figures", action="store_true", help="skip rendering PNG figures")
    p.add_argument("--validate-materials", action="store_true",
                   help="compare the material laws with the golden fixtures and exit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    return p


def load_scenario(args: argparse.Namespace) -> Scenario:
    """Scenario from ``--config`` (or defaults) with command-line overrides applied."""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {args.config}: {exc.strerror or exc}") from None
        scenario = parse_scenario(text)
    else:
        scenario = Scenario()
    solver = {}
    if args.duration is not None:
        solver["t_end"] = args.duration
    if args.dt is not None:
        solver["dt"] = args.dt
    top = {}
    if args.mesh is not None:
        top["nx"], top["ny"] = args.mesh
        if min(args.mesh) < 1:
            raise ConfigError(f"--mesh: element counts must be >= 1, got {args.mesh}")
    if args.snapshot_every is not None:
        if not args.snapshot_every > 0:
            raise ConfigError(f"--snapshot-every: must be positive, got {args.snapshot_every}")
        top["snapshot_every"] = args.snapshot_every
    try:
        cfg: SolverConfig = replace(scenario.solver, **solver)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    scenario = replace(scenario, solver=cfg, **top)
    if scenario.side_tags is None:
        raise ConfigError("boundary.sides: the fire-exposed and ambient sides must be given explicitly")
    return scenario


def validate_materials() -> int:
    results = golden.compare_all()
    print("law\tpoints\tmax_rel_error\tstatus")
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_VALIDATION


class _Writer:
    """Snapshot callback: files, figures and the optional spalling tracker."""

    def __init__(self, scenario: Scenario, mesh, out: Path, spalling: bool, figures: bool):
        self.mesh = mesh
        self.out = out
        self.figures = figures
        self.reports = []
        self.tracker = None
        if spalling:
            self.tracker = SpallingTracker(mesh, mat=scenario.material)
        if figures:
            (out / "figures").mkdir(exist_ok=True)

    def __call__(self, t, state):
        cell_data = None
        report = None
        if self.tracker is not None:
            report = self.tracker.update(t, state)
            self.reports.append(report)
            cell_data = {"zone": report.zones, "margin_Pa": report.margins}
        write_snapshot(state, self.mesh, t, self.out, cell_data)
        if self.figures:
            # matplotlib is imported only when figures are requested; it is slow to load.
            from .plotting import plot_fields, plot_zones

            tag = f"{int(round(t)):06d}"
            plot_fields(state, self.mesh, t, self.out / "figures" / f"fields_{tag}.png")
            if report is not None:
                plot_zones(report, self.mesh, self.out / "figures" / f"zones_{tag}.png")
        log.info("snapshot written at t = %g s", t)

    def finish(self):
        if self.tracker is not None:
            write_report(self.reports, self.out / "spalling.csv")
            last = self.reports[-1]
            print(f"spalling at t = {last.time:g} s: A={last.count(Zone.A_SPALLED)} "
                  f"B={last.count(Zone.B_UNSTABLE)} C={last.count(Zone.C_STABLE)} elements", file=sys.stderr)


def simulate(scenario: Scenario, out: Path, spalling: bool = False, figures: bool = True,
             stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    mesh = scenario.build_mesh()
    mat = scenario.material
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.toml").write_text(serialize_scenario(scenario))
        writer = _Writer(scenario, mesh, out, spalling, figures)
    except OSError as exc:
        print(f"error: cannot prepare output directory {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    rh0 = float(mt.relative_humidity(scenario.theta_0, scenario.P_0)[0])
    print(f"initial relative humidity {rh0:.4f}", file=sys.stderr)
    print(DIAGNOSTICS_HEADER, file=stream, flush=True)
    initial = initial_state(mesh, scenario.theta_0, scenario.P_0, mat)
    try:
        run(mesh, mat, scenario.boundary_conditions(), scenario.solver, initial,
            snapshot_every=scenario.snapshot_every, diagnostics=stream, callback=writer)
        writer.finish()
    except StepFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STEP
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.validate_materials:
        return validate_materials()
    try:
        scenario = load_scenario(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return simulate(scenario, args.out, spalling=args.spalling, figures=not args.no_figures)


if __name__ == "__main__":
    sys.exit(main())
