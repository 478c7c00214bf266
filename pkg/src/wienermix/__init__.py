"""wienermix: measure-preserving transformations of discretized Wiener space.

Construct unitary kernel shifts, second-quantized rotations, and
matrix-modulated integrators on a uniform grid; verify measure preservation
exactly (orthogonality, renormalized determinants, density reports) and
statistically (moment suites with named random streams); and classify the
long-run behaviour of a transform through the atoms of its spectral measure.
"""

__version__ = "0.1.0"

from . import _accel, errors, gamma, harness, hilbert, rotations, sampling, shifts
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InputFormatError,
    NonUnitaryOperatorError,
    SingularShiftError,
    UnsupportedOrderError,
    WienermixError,
)
from .gamma import (
    GammaProcess,
    HBundle,
    PathBundle,
    apply_gamma,
    as_block_rotation,
    build_gamma,
    flatten_bundle,
    gamma_constant,
    gamma_ergodicity,
    gamma_from_csv,
    gamma_piecewise_planar,
    gamma_random,
    gamma_sweep,
    gamma_to_csv,
    level_distribution,
    level_to_csv,
    pi_theta_norm,
    sample_bundle,
)
from .hilbert import (
    ChaosKernel,
    Grid,
    HVector,
    Kernel2,
    hs_norm,
    hvector_from_csv,
    hvector_to_csv,
    inner_h,
    kernel_apply,
    kernel_compose,
    kernel_from_csv,
    kernel_to_csv,
)
from .rotations import (
    ChaosRep,
    RotationOp,
    SpectralMeasure,
    TruncatedBasisShift,
    apply_rotation,
    apply_rotation_batch,
    autocorrelation,
    basis_shift_operator,
    birkhoff_average,
    chaos_pushforward,
    classify,
    complementary_phase_pairs,
    find_invariant_chaos2,
    mixing_correlation,
    mixing_correlation_truncated,
    periodogram_spectrum,
    rotation_from_matrix,
    spectral_measure,
    truncated_autocorrelation,
    unitary_eigensystem,
)
from .sampling import (
    AmplitudeObservable,
    Path,
    WickObservable,
    chaos_power_integral,
    divergence,
    divergence_batch,
    hermite,
    multiple_integral,
    multiple_integral_batch,
    path_from_csv,
    path_to_csv,
    sample_batch,
    sample_wiener,
    stream,
    wick_batch,
    wick_exponential,
)
from .shifts import (
    apply_chaos_shift,
    apply_chaos_shift_batch,
    apply_shift,
    apply_shift_batch,
    carleman_det2,
    carleman_det2_log,
    check_unitary_shift,
    invariant_observable,
    invert_shift,
    log_radon_nikodym,
    log_radon_nikodym_batch,
    shift_coordinate_matrix,
)
from .harness import (
    RunManifest,
    as_transform,
    calibration_study,
    default_probes,
    ergodic_average_study,
    file_sha256,
    gaussianity_suite,
    identity_transform,
    mixing_decay_study,
)
