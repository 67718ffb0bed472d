import sys
import os
sys.path.append(os.path.dirname(__file__))

from pocketflow import Flow
from nodes import (
    ResolveInitialStatesNode,
    SimulateOrbitsBatchNode,
    LieBracketOrbitsBatchNode,
    ConvergenceReportBatchNode,
    ExportTrajectoriesNode,
    CompareControllersBatchNode,
    ExportComparisonNode,
    ApproximationSweepNode,
    ExportSweepNode,
    CheckAssumptionsNode,
    NussbaumCheckNode,
    ExportCheckNode,
    ChenFliessBatchNode,
    ReferenceOrbitNode,
    ExportChenFliessNode,
    GenerateReportNode,
)


def create_simulate_flow():
    """Closed-loop orbits per initial state, optional Lie-bracket companions, exports"""
    resolve_states = ResolveInitialStatesNode()
    simulate_orbits = SimulateOrbitsBatchNode()
    lbs_orbits = LieBracketOrbitsBatchNode()
    convergence = ConvergenceReportBatchNode()
    export = ExportTrajectoriesNode()
    report = GenerateReportNode()

    resolve_states >> simulate_orbits
    simulate_orbits >> lbs_orbits
    lbs_orbits >> convergence
    convergence >> export
    export >> report

    return Flow(start=resolve_states)


def create_compare_flow():
    """Every configured controller from the shared initial state"""
    resolve_states = ResolveInitialStatesNode()
    compare = CompareControllersBatchNode()
    lbs_orbits = LieBracketOrbitsBatchNode()
    convergence = ConvergenceReportBatchNode()
    export = ExportComparisonNode()
    report = GenerateReportNode()

    resolve_states >> compare
    compare >> lbs_orbits
    lbs_orbits >> convergence
    convergence >> export
    export >> report

    return Flow(start=resolve_states)


def create_sweep_flow():
    resolve_states = ResolveInitialStatesNode()
    sweep = ApproximationSweepNode()
    export = ExportSweepNode()
    report = GenerateReportNode()

    resolve_states >> sweep
    sweep >> export
    export >> report

    return Flow(start=resolve_states)


def create_check_flow():
    assumptions = CheckAssumptionsNode()
    nussbaum = NussbaumCheckNode()
    export = ExportCheckNode()
    report = GenerateReportNode()

    assumptions >> nussbaum
    nussbaum >> export
    export >> report

    return Flow(start=assumptions)


def create_chenfliess_flow():
    resolve_states = ResolveInitialStatesNode()
    chen_fliess = ChenFliessBatchNode()
    reference = ReferenceOrbitNode()
    export = ExportChenFliessNode()
    report = GenerateReportNode()

    resolve_states >> chen_fliess
    chen_fliess >> reference
    reference >> export
    export >> report

    return Flow(start=resolve_states)


FLOW_FACTORIES = {
    "simulate": create_simulate_flow,
    "compare": create_compare_flow,
    "sweep": create_sweep_flow,
    "check": create_check_flow,
    "chenfliess": create_chenfliess_flow,
}


def create_shared_store(config, options=None):
    """Create initial shared store for one command run"""

    default_options = {
        "command": "simulate",
        "out_dir": config.outputs.directory,
        "with_lbs": config.outputs.with_lbs,
        "seed": None,
    }

    if options:
        default_options.update({key: value for key, value in options.items() if value is not None})

    return {
        # --- Inputs ---
        "config": config,
        "options": default_options,

        # --- Intermediate/Output Data ---
        "runs": {
            "initial_states": [],
            "orbits": [],
            "lbs": [],
            "compare": {},
            "chen_fliess": {},
            "reference": None,
        },
        "analysis": {
            "convergence": [],
            "sweep": [],
            "assumptions": None,
            "nussbaum": None,
            "chen_fliess": {},
        },
        "exports": {
            "files": [],
            "report_path": "",
        },
    }


if __name__ == "__main__":
    from utils.config import load_preset

    config, _ = load_preset("fig1")
    flow = create_simulate_flow()
    shared = create_shared_store(config)

    print("Simulate flow created successfully!")
    print(f"Shared store initialized with options: {shared['options']}")
