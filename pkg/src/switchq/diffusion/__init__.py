"""Heavy-traffic diffusion approximation of the switching queue."""

from .compare import ScaledComparison, compare_scaled
from .kernels import (
    WienerKernel,
    absorbed_wiener_density,
    reflected_wiener_density,
    wiener_fpt_density,
)
from .one_way import (
    LaplaceRootsDiffusion,
    absorbed_transient_density,
    absorption_probability,
    fpt_density,
    fpt_laplace,
    fpt_mean,
    laplace_roots,
    transient_density,
)
from .steady import (
    CubicRootsDiffusion,
    SteadyDensitySolution,
    characteristic_polynomial,
    conditional_mean,
    diffusion_roots,
    marginal_density,
    mean,
    mgf,
    solve_steady_density,
    steady_density,
)
