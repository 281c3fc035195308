"""ucopt: unit commitment modeling, solving and learning-guided search.

The package splits into layers that can be used independently:

    instance     -- generator/system data model, validation, JSON files
    formulation  -- 1-bin and 3-bin MIP builders plus dispatch evaluation
    mip          -- bounded simplex, branch and bound, MPS files
    trigraph     -- tripartite graph encoding of a built MIP
    policy       -- commitment scoring (message passing, LP, score files)
    restore      -- score rounding and feasibility restoration
    search       -- freeze-window local search and the neighborhood LNS
    datagen      -- training-set construction around solver runs
    bench        -- solver-arm pipeline, metrics, report records

The most common entry points are re-exported here; the ``ucopt`` console
script (see ``ucopt.cli``) wraps the same calls for the shell.
"""

from .bench import (METHODS, RunRecord, compute_metrics, default_cuts,
                    generate_system, ingest_loads, policy_scores, run_pipeline)
from .errors import UcoptError
from .formulation import (ONE_BIN, THREE_BIN, DispatchEvaluator, build_mip,
                          evaluate_commitment, extract_commitment)
from .instance import (UcpInstance, UnitParams, derive_constants,
                       load_instance, packaged_instance_path, save_instance,
                       validate_instance)
from .mip import (MipProblem, MipSolution, SimplexEngine, export_mps,
                  import_mps, solve_lp, solve_mip)
from .policy import (load_weights, lp_fractional_policy, random_weights,
                     rgcn_forward, save_weights)
from .restore import heuristic_restore
from .search import LnsConfig, lns_run, local_search
from .trigraph import attach_solution_features, deserialize, encode, serialize

__version__ = "0.1.0"

__all__ = [
    "METHODS", "RunRecord", "compute_metrics", "default_cuts",
    "generate_system", "ingest_loads", "policy_scores", "run_pipeline",
    "UcoptError",
    "ONE_BIN", "THREE_BIN", "DispatchEvaluator", "build_mip",
    "evaluate_commitment", "extract_commitment",
    "UcpInstance", "UnitParams", "derive_constants", "load_instance",
    "packaged_instance_path", "save_instance", "validate_instance",
    "MipProblem", "MipSolution", "SimplexEngine", "export_mps", "import_mps",
    "solve_lp", "solve_mip",
    "load_weights", "lp_fractional_policy", "random_weights", "rgcn_forward",
    "save_weights",
    "heuristic_restore",
    "LnsConfig", "lns_run", "local_search",
    "attach_solution_features", "deserialize", "encode", "serialize",
    "__version__",
]
