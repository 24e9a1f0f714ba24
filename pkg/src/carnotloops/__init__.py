"""Free Carnot groups, truncated path signatures, Brownian loop samplers,
and Monte Carlo estimation of loop-driven holonomy operators."""

__version__ = "0.1.0"

from .carnot import CarnotGroup, HeisenbergMatrix, get_group, heisenberg_roundtrip
from .freelie import (
    LieSeries,
    LyndonBasis,
    bch,
    generate_basis,
    get_basis,
    lie_bracket,
    lyndon_words,
    witt_dimension,
)
from .holonomy import (
    HolonomyEstimate,
    MomentMatrix,
    Observable,
    SlopeFit,
    delta_apply,
    estimate_holonomy,
    estimate_holonomy_many,
    loop_moment_matrix,
    sinh_determinant,
    slope_fit,
)
from .loops import (
    LoopSample,
    SamplerConfig,
    loop_logsig,
    sample_bridge,
    sample_loop_mcmc,
    sample_loop_rejection,
)
from .paths import PiecewiseLinearPath, from_values, read_path_file, write_path_file
from .polynomials import Polynomial, parse_polynomial
from .sde import (
    FlowResult,
    VectorFieldSpec,
    bracket_span_rank,
    graded_dimension,
    heisenberg_fields,
    integrate_flow,
    iterated_bracket,
    lie_bracket_vf,
    read_vector_field_file,
)
from .tensoralg import (
    TensorSeries,
    chen_concat,
    iterated_integral,
    log_series,
    log_signature,
    path_signature,
    project_to_lie,
    segment_signature,
    strichartz_lambda,
    strichartz_lambda_raw,
)
