"""Self-similar sets, cograph Hilbert bimodules and their classification.

The main entry points are re-exported here; see the submodules for the
full API.
"""

from .bimodule import (
    CographFunction,
    FiniteRankOperator,
    PathFunction,
    PathOperator,
    PathSpace,
    SampledFunction,
    compact_approx,
    inner_product,
    left_action,
    norm2,
    path_inner_product,
    right_action,
    sup_norm,
    tensor_inner_product,
    tensor_to_path,
    xi0,
)
from .classify import (
    ClassificationReport,
    CuntzAlgebra,
    NotGraphSeparated,
    Undetermined,
    classify,
    finite_projectivity_flag,
    get_entry,
    get_system,
    load_registry,
    registry_verify,
)
from .cograph import (
    CographSample,
    Verdict,
    branch_index,
    branch_scan,
    branch_solve,
    check_graph_separation,
    check_open_set_condition,
    check_strong_separation,
    index_set,
)
from .exceptions import (
    HullViolationError,
    InconsistencyError,
    InvalidInputError,
    ResourceError,
    SelfSimError,
)
from .ifs import (
    ContractionMap,
    IfsSystem,
    SampleGrid,
    attractor_cells,
    chaos_game,
    coding_point,
    point_in_attractor,
    verify_proper,
)
from .regions import Ball, Box, Polytope, Union, region_from_dict
from .transfer import (
    InvariantFunction,
    amplify,
    beta,
    certify_invariant,
    commutation_check,
    normalize_witness,
    separating_function,
    transfer_op,
)

__all__ = [
    "Ball",
    "Box",
    "ClassificationReport",
    "CographFunction",
    "CographSample",
    "ContractionMap",
    "CuntzAlgebra",
    "FiniteRankOperator",
    "HullViolationError",
    "IfsSystem",
    "InconsistencyError",
    "InvalidInputError",
    "InvariantFunction",
    "NotGraphSeparated",
    "PathFunction",
    "PathOperator",
    "PathSpace",
    "Polytope",
    "ResourceError",
    "SampleGrid",
    "SampledFunction",
    "SelfSimError",
    "Undetermined",
    "Union",
    "Verdict",
    "amplify",
    "attractor_cells",
    "beta",
    "branch_index",
    "branch_scan",
    "branch_solve",
    "certify_invariant",
    "chaos_game",
    "check_graph_separation",
    "check_open_set_condition",
    "check_strong_separation",
    "classify",
    "coding_point",
    "commutation_check",
    "compact_approx",
    "finite_projectivity_flag",
    "get_entry",
    "get_system",
    "index_set",
    "inner_product",
    "left_action",
    "load_registry",
    "norm2",
    "normalize_witness",
    "path_inner_product",
    "point_in_attractor",
    "region_from_dict",
    "registry_verify",
    "right_action",
    "separating_function",
    "sup_norm",
    "tensor_inner_product",
    "tensor_to_path",
    "transfer_op",
    "verify_proper",
    "xi0",
]
