"""spinvmc: a ground-up VMC optimization lab for small lattice spin systems.

Cross-validated implementations of the stochastic-reconfiguration optimizer
family (SGD, SR, MinSR, momentum SR in sampled and noise-free form, and the
adaptive-momentum variant driven by effective spectral dimension and
principal-subspace overlap), together with exact-diagonalization oracles,
direct and Metropolis samplers, the fixed-SR-matrix kernel-drift harness and
an experiment runner that emits reproducible CSV metric streams.
"""

from .estimator import (
    FullBatchQuantities,
    SampleBatch,
    build_batch,
    clip_local_energies,
    full_batch_gradient,
    full_batch_quantities,
    gradient_estimate,
    kernel_residual,
)
from .hamiltonian import (
    ConnectedElement,
    LatticeModel,
    NodeHitError,
    RatioOverflowError,
    TableWavefunction,
    UniformWavefunction,
    connected_elements,
    dense_hamiltonian,
    enumerate_configs,
    exact_ground_state,
    local_energies,
    local_energy,
)
from .optimizer import (
    OptimizerState,
    apply_update,
    full_spring_direction,
    minsr_direction,
    sgd_direction,
    spring_direction,
    sr_direction,
    step_size,
)
from .prime import (
    PrimeState,
    SpectralSnapshot,
    adaptive_mu,
    prime_step,
    spectral_snapshot,
    subspace_overlap,
)
from .counterexample import (
    FixedKernelProblem,
    divergence_report,
    gaussian_problem,
    kernel_projector,
    phase_problem,
    run_fixed_spring,
)
from .runner import (
    RunConfig,
    fit_sampling_floor,
    min_grad_curve,
    parse_config_text,
    relative_energy_error,
    resolve_config,
    run_experiment,
    run_report,
    sliding_window,
    sweep_experiment,
)
from .sampler import (
    MetropolisWalkers,
    SamplerConfig,
    direct_sample,
    gaussian_sample,
    metropolis_sample,
)
from .wavefunction import (
    GaussianShiftAnsatz,
    PhaseAnsatz,
    RBMAnsatz,
    counterexample_score,
    load_checkpoint,
    log_cosh,
    save_checkpoint,
)

__version__ = "0.1.0"
