"""Quantum ergodicity experiments on graphs and trees of finite cone type."""

from ._core import (
    ConeError,
    ConeSystem,
    ConfigError,
    ExperimentError,
    GeneratorError,
    Graph,
    GraphError,
    biregular,
    bst_statistic,
    check_c1,
    check_c2,
    complete_graph,
    cover_cone_matrix,
    cycle_graph,
    detect_spectrum,
    eigensystem,
    experiment_names,
    injectivity_radius,
    inverse_moment,
    neighbour_to_cone,
    petersen_graph,
    qe_discrepancy,
    random_lift,
    random_regular,
    reduce_cone_system,
    regular_tree_cone,
    regular_tree_zeta,
    report,
    rho_p_bound,
    run,
    solve_green,
    spherical_matrix,
    spherical_phi,
    validate_config,
    walk_spectral_gap,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
