"""Parameter learning for discrete Bayesian networks from incomplete data.

Closed-form deletion learners (listwise, direct, factored, informed, and the
two-variable MNAR cross estimator) alongside an EM baseline with exact
jointree or loopy-BP inference, plus simulation and benchmarking tools.
"""

from .dataset import (
    MISSING,
    OBSERVED,
    UNOBSERVED,
    DataDistribution,
    IncompleteDataset,
    Mech,
    augment,
    contributing_rows,
    estimate_probability,
    observed_instantiations,
)
from .em import EmConfig, EmTrace, em_iteration, em_learn
from .estimators import (
    AGGREGATION_METHODS,
    EstimateTable,
    aggregate,
    direct_deletion_mar,
    direct_deletion_mcar,
    extract_parameters,
    factored_deletion_mar,
    factored_deletion_mcar,
    listwise_deletion,
    mnar_cross_estimate,
)
from .inference import (
    Jointree,
    brute_force_marginals,
    build_jointree,
    jointree_marginals,
    kl_divergence,
    loopy_bp_marginals,
    test_log_likelihood,
)
from .io import (
    parse_missingness_graph,
    parse_network,
    read_dataset,
    serialize_missingness_graph,
    serialize_network,
    write_dataset,
)
from .lattice import FactorizationLattice, build_lattice
from .learners import (
    LEARNER_NAMES,
    CrossMechanismLearner,
    DirectDeletionLearner,
    EmLearner,
    FactoredDeletionLearner,
    ListwiseLearner,
    make_learner,
)
from .missingness import (
    MAR,
    MCAR,
    MNAR,
    MechanismSpec,
    MissingnessGraph,
    classify,
    simulate_informed_mar,
    simulate_mar,
    simulate_mcar,
    simulate_mnar_cross,
)
from .network import (
    BayesianNetwork,
    Variable,
    family_of,
    forward_sample,
    joint_probability,
    topological_order,
    validate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
