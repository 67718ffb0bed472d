import sys
import os
import logging
import math
sys.path.append(os.path.dirname(__file__))

from pocketflow import Node, BatchNode
from utils.dynamics import ClosedLoop, LieBracketSystem, NUSSBAUM_FUNCTIONS, ControllerVariant
from utils.averaging import Box, check_assumptions, make_dither, proposed_affine_system, swapped_affine_system
from utils.integrate import Method, chen_fliess_simulate, simulate
from utils.analysis import (
    approximation_sweep,
    convergence_report,
    is_strictly_decreasing,
    lbs_limit_point,
    nussbaum_type_check,
    trajectory_distance,
)
from utils.config import resolve_step
from utils.initial_conditions import resolve_initial_states
from utils.export import write_comparison_csv, write_json, write_sweep_csv, write_trajectory
from utils.report_generator import generate_report, markdown_table

logger = logging.getLogger(__name__)


def _plant_meta(config):
    return {"a": config.plant.a, "b": config.plant.b}


def _controller_meta(controller):
    return {
        "variant": controller.variant.value,
        "omega": controller.omega if controller.is_dithered else None,
    }


def _lbs_step(config):
    span = config.time.tf - config.time.t0
    return min(config.lbs.step, span) if span > 0 else config.lbs.step


def _orbit_directory(out_dir, index, count):
    return out_dir if count == 1 else os.path.join(out_dir, f"orbit_{index:03d}")


class ResolveInitialStatesNode(Node):
    def prep(self, shared):
        return shared["config"].initial, shared["options"].get("seed")

    def exec(self, inputs):
        initial, seed = inputs
        return resolve_initial_states(initial, seed)

    def post(self, shared, prep_res, exec_res):
        shared["runs"]["initial_states"] = exec_res
        logger.debug(f"Resolved {len(exec_res)} initial states")
        return "default"


class SimulateOrbitsBatchNode(BatchNode):
    def prep(self, shared):
        config = shared["config"]
        return [(config, state) for state in shared["runs"]["initial_states"]]

    def exec(self, item):
        config, state = item
        controller = config.controller
        return simulate(
            ClosedLoop(config.plant, controller),
            state,
            config.time.t0,
            config.time.tf,
            config.h,
            config.integrator.method,
            meta={**_controller_meta(controller), **_plant_meta(config)},
        )

    def post(self, shared, prep_res, exec_res_list):
        shared["runs"]["orbits"] = exec_res_list
        return "default"


class LieBracketOrbitsBatchNode(BatchNode):
    """Companion Lie-bracket runs from the same initial states."""

    def prep(self, shared):
        config = shared["config"]
        if not shared["options"].get("with_lbs"):
            return []
        return [(config, state) for state in shared["runs"]["initial_states"]]

    def exec(self, item):
        config, state = item
        return simulate(
            LieBracketSystem(config.plant),
            state,
            config.time.t0,
            config.time.tf,
            _lbs_step(config),
            config.lbs.method,
            meta={"system": "lbs", **_plant_meta(config)},
        )

    def post(self, shared, prep_res, exec_res_list):
        shared["runs"]["lbs"] = exec_res_list
        return "default"


class ConvergenceReportBatchNode(BatchNode):
    def prep(self, shared):
        config = shared["config"]
        band = config.outputs.band
        items = []
        for traj in shared["runs"]["orbits"] + shared["runs"]["lbs"]:
            predicted = None
            if traj.meta.y0 != 0:
                predicted = lbs_limit_point(config.plant, (traj.meta.y0, traj.meta.k0))
            items.append((traj, band, predicted))
        return items

    def exec(self, item):
        traj, band, predicted = item
        return convergence_report(traj, band, predicted)

    def post(self, shared, prep_res, exec_res_list):
        shared["analysis"]["convergence"] = [
            (traj.meta, report) for (traj, _, _), report in zip(prep_res, exec_res_list)
        ]
        return "default"


class ExportTrajectoriesNode(Node):
    def prep(self, shared):
        return shared["runs"]["orbits"], shared["runs"]["lbs"], shared["options"]["out_dir"]

    def exec(self, inputs):
        orbits, lbs_runs, out_dir = inputs
        files = []
        for index, traj in enumerate(orbits):
            files.extend(write_trajectory(traj, _orbit_directory(out_dir, index, len(orbits))))
        for index, traj in enumerate(lbs_runs):
            files.extend(write_trajectory(traj, _orbit_directory(out_dir, index, len(lbs_runs)), stem="lbs"))
        return files

    def post(self, shared, prep_res, exec_res):
        shared["exports"]["files"].extend(exec_res)
        return "default"


class CompareControllersBatchNode(BatchNode):
    def prep(self, shared):
        config = shared["config"]
        state = shared["runs"]["initial_states"][0]
        return [(config, entry, state) for entry in config.compare]

    def exec(self, item):
        config, entry, state = item
        controller = entry.controller()
        h = resolve_step(controller, entry.step)
        traj = simulate(
            ClosedLoop(config.plant, controller),
            state,
            config.time.t0,
            config.time.tf,
            h,
            entry.method,
            meta={**_controller_meta(controller), **_plant_meta(config)},
        )
        return entry.name, traj

    def post(self, shared, prep_res, exec_res_list):
        shared["runs"]["compare"] = dict(exec_res_list)
        shared["runs"]["orbits"] = [traj for _, traj in exec_res_list]
        return "default"


class ExportComparisonNode(Node):
    def prep(self, shared):
        return shared["runs"]["compare"], shared["runs"]["lbs"], shared["options"]["out_dir"]

    def exec(self, inputs):
        runs, lbs_runs, out_dir = inputs
        files = [write_comparison_csv(runs, os.path.join(out_dir, "compare.csv"))]
        for name, traj in runs.items():
            files.extend(write_trajectory(traj, os.path.join(out_dir, name)))
        for traj in lbs_runs[:1]:
            files.extend(write_trajectory(traj, out_dir, stem="lbs"))
        return files

    def post(self, shared, prep_res, exec_res):
        shared["exports"]["files"].extend(exec_res)
        return "default"


class ApproximationSweepNode(Node):
    def prep(self, shared):
        config = shared["config"]
        return config, shared["runs"]["initial_states"][0]

    def exec(self, inputs):
        config, state = inputs
        return approximation_sweep(
            config.plant, state, config.time.tf, config.sweep.omegas, t0=config.time.t0
        )

    def post(self, shared, prep_res, exec_res):
        shared["analysis"]["sweep"] = exec_res
        if len(exec_res) > 1 and not is_strictly_decreasing(exec_res):
            logger.warning("Approximation error does not decrease strictly with omega")
        return "default"


class ExportSweepNode(Node):
    def prep(self, shared):
        return shared["analysis"]["sweep"], shared["options"]["out_dir"]

    def exec(self, inputs):
        points, out_dir = inputs
        return write_sweep_csv(points, os.path.join(out_dir, "sweep.csv"))

    def post(self, shared, prep_res, exec_res):
        shared["exports"]["files"].append(exec_res)
        return "default"


class CheckAssumptionsNode(Node):
    def prep(self, shared):
        return shared["config"]

    def exec(self, config):
        settings = config.check
        dithers = [make_dither(name) for name in settings.dithers]
        if config.controller.variant is ControllerVariant.SWAPPED:
            system = swapped_affine_system(config.plant, dithers)
        else:
            system = proposed_affine_system(config.plant, dithers)
        y_min, y_max, k_min, k_max = settings.box
        region = Box(lower=[y_min, k_min], upper=[y_max, k_max])
        return check_assumptions(system, region, settings.grid, settings.time_samples)

    def post(self, shared, prep_res, exec_res):
        shared["analysis"]["assumptions"] = exec_res
        return "default"


class NussbaumCheckNode(Node):
    def prep(self, shared):
        config = shared["config"]
        return config.controller.nussbaum_fn, config.check

    def exec(self, inputs):
        name, settings = inputs
        return nussbaum_type_check(
            NUSSBAUM_FUNCTIONS[name], settings.nussbaum_k0, settings.nussbaum_k_max, settings.nussbaum_grid
        )

    def post(self, shared, prep_res, exec_res):
        shared["analysis"]["nussbaum"] = exec_res
        if not exec_res.is_nussbaum:
            logger.warning(f"Gain function '{prep_res[0]}' failed the Nussbaum-type check")
        return "default"


class ExportCheckNode(Node):
    def prep(self, shared):
        config = shared["config"]
        return (
            shared["analysis"]["assumptions"],
            shared["analysis"]["nussbaum"],
            config.controller.nussbaum_fn,
            shared["options"]["out_dir"],
        )

    def exec(self, inputs):
        assumptions, nussbaum, name, out_dir = inputs
        payload = {
            "assumptions": {**assumptions.model_dump(mode="json"), "passed": assumptions.passed},
            "nussbaum": {"function": name, **nussbaum.model_dump(mode="json")},
        }
        return write_json(payload, os.path.join(out_dir, "check.json"))

    def post(self, shared, prep_res, exec_res):
        shared["exports"]["files"].append(exec_res)
        return "default"


class ChenFliessBatchNode(BatchNode):
    def prep(self, shared):
        config = shared["config"]
        state = shared["runs"]["initial_states"][0]
        return [(config, state, order) for order in config.chenfliess.orders]

    def exec(self, item):
        config, state, order = item
        settings = config.chenfliess
        omega = config.controller.omega
        T = 2.0 * math.pi * settings.periods_per_step / omega
        n_steps = int(math.floor((config.time.tf - config.time.t0) / T + 1e-9))
        traj = chen_fliess_simulate(
            config.plant, state, omega, settings.periods_per_step, n_steps, order, t0=config.time.t0
        )
        return order, traj

    def post(self, shared, prep_res, exec_res_list):
        shared["runs"]["chen_fliess"] = dict(exec_res_list)
        return "default"


class ReferenceOrbitNode(Node):
    """Euler orbit of the proposed closed loop and the Lie-bracket orbit to compare against."""

    def prep(self, shared):
        config = shared["config"]
        return config, shared["runs"]["initial_states"][0]

    def exec(self, inputs):
        config, state = inputs
        controller = config.controller
        reference = simulate(
            ClosedLoop(config.plant, controller),
            state,
            config.time.t0,
            config.time.tf,
            config.h,
            Method.EULER,
            meta={**_controller_meta(controller), **_plant_meta(config)},
        )
        lbs = simulate(
            LieBracketSystem(config.plant),
            state,
            config.time.t0,
            config.time.tf,
            _lbs_step(config),
            config.lbs.method,
            meta={"system": "lbs", **_plant_meta(config)},
        )
        return reference, lbs

    def post(self, shared, prep_res, exec_res):
        reference, lbs = exec_res
        shared["runs"]["reference"] = reference
        shared["runs"]["lbs"] = [lbs]
        shared["analysis"]["chen_fliess"] = {
            order: {
                "to_reference": trajectory_distance(traj, reference),
                "to_lbs": trajectory_distance(traj, lbs),
                "status": traj.meta.status,
            }
            for order, traj in shared["runs"]["chen_fliess"].items()
        }
        return "default"


class ExportChenFliessNode(Node):
    def prep(self, shared):
        runs = shared["runs"]
        return runs["chen_fliess"], runs["reference"], runs["lbs"][0], shared["options"]["out_dir"]

    def exec(self, inputs):
        chen_fliess, reference, lbs, out_dir = inputs
        files = []
        for order, traj in chen_fliess.items():
            files.extend(write_trajectory(traj, out_dir, stem=f"chenfliess_d{order}"))
        files.extend(write_trajectory(reference, out_dir, stem="reference"))
        files.extend(write_trajectory(lbs, out_dir, stem="lbs"))
        return files

    def post(self, shared, prep_res, exec_res):
        shared["exports"]["files"].extend(exec_res)
        return "default"


class GenerateReportNode(Node):
    def prep(self, shared):
        return (
            shared["options"]["command"],
            shared["config"],
            shared["analysis"],
            shared["options"]["out_dir"],
        )

    def exec(self, inputs):
        command, config, analysis, out_dir = inputs
        if not config.outputs.report:
            return None
        sections = [("Plant and controller", _setup_section(config))]
        if analysis.get("convergence"):
            sections.append(("Convergence", _convergence_section(analysis["convergence"])))
        if analysis.get("sweep"):
            sections.append(("Approximation error", _sweep_section(analysis["sweep"])))
        if analysis.get("assumptions") is not None:
            sections.append(("Assumptions", _assumption_section(analysis["assumptions"])))
        if analysis.get("nussbaum") is not None:
            sections.append(("Nussbaum-type check", _nussbaum_section(analysis["nussbaum"])))
        if analysis.get("chen_fliess"):
            sections.append(("Chen-Fliess integration", _chen_fliess_section(analysis["chen_fliess"])))
        return generate_report(f"Adaptive stabilization: {command}", sections, out_dir)

    def post(self, shared, prep_res, exec_res):
        if exec_res:
            shared["exports"]["report_path"] = exec_res[1]
            shared["exports"]["files"].extend(exec_res)
        return "default"


def _setup_section(config):
    controller = config.controller
    rows = [
        ["a", config.plant.a],
        ["b", config.plant.b],
        ["variant", controller.variant.value],
        ["omega", controller.omega if controller.is_dithered else None],
        ["step", config.h],
        ["t0 .. tf", f"{config.time.t0} .. {config.time.tf}"],
    ]
    return markdown_table(["parameter", "value"], rows)


def _convergence_section(entries):
    rows = [
        [meta.system, meta.variant, meta.y0, meta.k0, report.converged, report.y_final,
         report.k_final, report.predicted_limit_k, report.time_to_band, report.radius_drift]
        for meta, report in entries
    ]
    header = ["system", "variant", "y0", "k0", "converged", "y(tf)", "k(tf)",
              "predicted k", "time to band", "radius drift"]
    return markdown_table(header, rows)


def _sweep_section(points):
    table = markdown_table(["omega", "sup error", "h", "samples"],
                           [[p.omega, p.error, p.h, p.samples] for p in points])
    trend = "decreases strictly" if is_strictly_decreasing(points) else "does not decrease strictly"
    return f"{table}\n\nThe error {trend} with omega."


def _assumption_section(report):
    rows = [[c.assumption, c.subject, "pass" if c.passed else "FAIL", c.value,
             "vacuous" if c.vacuous else (c.witness or "")] for c in report.checks]
    table = markdown_table(["assumption", "subject", "result", "value", "witness"], rows)
    return f"Box {report.box.lower} .. {report.box.upper}, bound M = {report.bound_M:.6g}\n\n{table}"


def _nussbaum_section(report):
    rows = [["(k0, k_max]", report.running_sup, report.running_inf, report.crossings],
            ["doubled", report.doubled_sup, report.doubled_inf, None]]
    table = markdown_table(["horizon", "sup", "inf", "crossings"], rows)
    verdict = "is" if report.is_nussbaum else "is not"
    return f"{table}\n\nThe gain function {verdict} of Nussbaum type on the sampled horizons."


def _chen_fliess_section(errors):
    rows = [[order, e["to_reference"], e["to_lbs"], e["status"]] for order, e in sorted(errors.items())]
    return markdown_table(["order", "sup distance to Euler orbit", "sup distance to LBS", "status"], rows)
