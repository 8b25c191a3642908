"""Distributed fusion of labeled random-finite-set posteriors.

The main entry points are re-exported here; see the submodules for the rest.
"""
from types import ModuleType as _ModuleType

from .assignment import kbest_assignments, murty
from .diagnostics import (
    DiagnosticsReport,
    DiscreteMultiObjectDensity,
    DiscreteSpace,
    corollary2_check,
    discretize,
    expected_label_coefficient,
    gci_divergence,
    gci_fuse_discrete,
    indicator_threshold,
    label_inconsistency_indicator,
    marginalize,
    total_variation,
    yes_probability_from_indicator,
)
from .fusion import (
    FusionConfig,
    FusionMap,
    classical_gci_lmb_fuse,
    construct_labeled_fused,
    enumerate_fusion_maps,
    gci_fuse_gmb_pair,
    gmb_to_mb_moment_match,
    r_gci_glmb_fuse,
)
from .gaussian import (
    DegenerateMixtureError,
    Gaussian,
    GaussianMixture,
    IncompatibleDensitiesError,
    gci_fuse_gaussian_mixtures,
    gm_prune_merge,
)
from .labeled_rfs import (
    BernoulliComponent,
    GlmbDensity,
    GmbDensity,
    Label,
    LmbDensity,
    MbDensity,
    cardinality_distribution,
    glmb_to_gmb,
    glmb_to_lmb,
    lmb_to_glmb,
    lmb_to_mb,
    phd,
)
from .lmb_filter import BirthModel, FilterParams, LmbFilter, MotionModel, SensorModel, extract_estimates
from .ospa import OspaParams, ospa_distance
from .sim import (
    ConfigError,
    MonteCarloResult,
    Scenario,
    build_scenario,
    bundled_fixture,
    bundled_scenario,
    load_scenario,
    monte_carlo,
    run_network,
)

__version__ = "0.1.0"

__all__ = [name for name, obj in list(globals().items()) if not name.startswith("_") and not isinstance(obj, _ModuleType)]
