"""Testers for distributions over long bit strings, billed per probed bit.

Samples are free to request but opaque: every looked-at bit position of
every drawn sample is metered.  The package provides the billed sampling
oracle, distance computations (earth mover under relative Hamming,
total variation, distance to small-support), collision-based decision
rules on projected values, the projection-based testers built from them,
instance generators, and an experiment harness with calibration support.
"""

from .constants import DEFAULT_CONSTANTS, Constants
from .core import (
    BilledOracle,
    BitString,
    FiniteDistribution,
    ImplicitDistribution,
    SampleBatch,
    SampleHandle,
    SampleView,
    TesterReport,
    new_rng,
    pack_rows,
    random_subset,
)
from .distances import (
    TransportPlan,
    dist_to_support_m,
    emd,
    emd_with_plan,
    grain_round,
    hamming_rel,
    tv,
)
from .generators import (
    LinearCode,
    code_lift,
    coordinate_noise_dist,
    hadamard_code,
    inside_outside_mixture,
    iso_copies_dist,
    mixture,
    perturb_dist,
    random_linear_code,
    relabel,
    shift_dist,
    uniform_random_subset,
)
from .harness import (
    CalibrationResult,
    ExperimentReport,
    ExperimentSpec,
    TrialRecord,
    calibrate_constant,
    calibrate_tester,
    load_distribution,
    run_experiment,
    save_distribution,
    wilson_interval,
)
from .std_testers import (
    GrainedInner,
    SupportInner,
    collision_pattern,
    std_equality_tester,
    std_grained_tester,
    std_support_tester,
)
from .strings import (
    ConstantTester,
    CorrectableProperty,
    ExactIsomorphismTester,
    FullReadTester,
    HadamardCorrector,
    LinearityTester,
    hadamard_property,
)
from .testers import (
    cyclic_shift_tester,
    equality_sample_mean,
    graph_copies_tester,
    grained_tester,
    membership_tester,
    noisy_membership_tester,
    pair_equality_tester,
    perturbation_tester,
    projection_tester,
    self_correcting_tester,
    shift_law_tester,
    support_tester,
    uniformity_tester,
)

__version__ = "0.1.0"

__all__ = [
    "BilledOracle",
    "BitString",
    "CalibrationResult",
    "ConstantTester",
    "Constants",
    "CorrectableProperty",
    "DEFAULT_CONSTANTS",
    "ExactIsomorphismTester",
    "ExperimentReport",
    "ExperimentSpec",
    "FiniteDistribution",
    "FullReadTester",
    "GrainedInner",
    "HadamardCorrector",
    "ImplicitDistribution",
    "LinearCode",
    "LinearityTester",
    "SampleBatch",
    "SampleHandle",
    "SampleView",
    "SupportInner",
    "TesterReport",
    "TransportPlan",
    "TrialRecord",
    "calibrate_constant",
    "calibrate_tester",
    "code_lift",
    "collision_pattern",
    "coordinate_noise_dist",
    "cyclic_shift_tester",
    "dist_to_support_m",
    "emd",
    "emd_with_plan",
    "equality_sample_mean",
    "grain_round",
    "grained_tester",
    "graph_copies_tester",
    "hadamard_code",
    "hadamard_property",
    "hamming_rel",
    "inside_outside_mixture",
    "iso_copies_dist",
    "load_distribution",
    "membership_tester",
    "mixture",
    "new_rng",
    "noisy_membership_tester",
    "pack_rows",
    "pair_equality_tester",
    "perturb_dist",
    "perturbation_tester",
    "projection_tester",
    "random_linear_code",
    "random_subset",
    "relabel",
    "run_experiment",
    "save_distribution",
    "self_correcting_tester",
    "shift_dist",
    "shift_law_tester",
    "std_equality_tester",
    "std_grained_tester",
    "std_support_tester",
    "support_tester",
    "tv",
    "uniform_random_subset",
    "uniformity_tester",
    "wilson_interval",
]
