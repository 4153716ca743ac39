"""High-gain adaptive output feedback on mixed continuous/discrete time domains.

Library layout:

* ``timescale``   points, graininess, delta integrals, generalized exponential
* ``matfun``      matrix exponential, expc series, spectra, Lyapunov, zeros
* ``plant``       LTI truth model, exact sampled stepping, dense-run integration
* ``controller``  gain adaptation, graininess policies, wiggles, blocking
* ``analysis``    stability sets, certificates, detectability, envelope fits
* ``cli``         simulate / check / analyze commands over JSON scenarios
"""

from .analysis import (
    AssumptionReport,
    CertificateResult,
    DecayEstimate,
    DetectabilityReport,
    EnvelopeFit,
    IntegralComparison,
    PositiveRealReport,
    Regressivity,
    StabilityReport,
    check_assumptions,
    classify_regressivity,
    contraction_certificate,
    decay_exponent,
    detectability_check,
    envelope_fit,
    generalized_lyapunov_residual,
    hilger_contains,
    integral_comparison,
    positive_real_diagnostic,
)
from .controller import (
    BlockingSchedule,
    ControllerState,
    FixedGraininess,
    IlchmannTownley,
    MimoBound,
    RandomWiggle,
    RepeatingWiggle,
    SisoBound,
    default_eps1,
    gain_update_scattered,
    make_repeating_wiggle,
    mu_bar,
    next_graininess,
    wiggle_next,
)
from .errors import AssumptionError, ConfigError, TraceFormatError
from .matfun import (
    SigmaDecomposition,
    expc,
    mat_exp,
    sigma_decomposition,
    solve_lyapunov_continuous,
    spectrum,
    transmission_zeros,
)
from .plant import (
    DenseRunResult,
    DiscretizedPlant,
    LTIPlant,
    discretize,
    run_dense,
    step_scattered,
)
from .scenario import (
    ScenarioConfig,
    SimulationResult,
    load_config,
    parse_config,
    run_scenario,
)
from .timescale import (
    Dense,
    Gap,
    RealizedGrid,
    TimePoint,
    TimeScaleProgram,
    delta_integral,
    realize,
    ts_exponential,
)
from .trace import SimulationTrace, TraceRecord

__version__ = "0.1.0"
