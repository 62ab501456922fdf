"""Track reconstruction by relaxing an Ising-like Hamiltonian over doublets.

Typical use::

    from isingtrack import ToyConfig, generate_event, build_graph, assemble, solve_least_squares

    event = generate_event(ToyConfig(n_layers=3, n_particles=5, rng_seed=1))
    graph = build_graph(event, epsilon=1e-5)
    system = assemble(graph)
    solution = solve_least_squares(system).thresholded(0.45)
"""

from .classical_solver import (
    RelaxedSolution,
    apply_threshold,
    calibrate_threshold,
    solve_least_squares,
)
from .doublet_graph import (
    Doublet,
    DoubletGraph,
    TripletCoupling,
    angular_step,
    build_couplings,
    build_doublets,
    build_graph,
    dp_angular_weight,
)
from .event_model import Event, Hit, TruthParticle, read_event, write_event
from .hhl_simulator import (
    HHLResult,
    RegisterPlan,
    plan_registers,
    prepare_b_state,
    resource_report,
    solve_full_circuit,
    solve_spectral_oracle,
)
from .ising_model import (
    Hyperparams,
    IsingSystem,
    assemble,
    bifurcation_penalty,
    brute_force_ground_state,
    evaluate_h,
    gradient_h,
    pad_system,
)
from .metrics import MetricsReport, acceptance_filter, compute_report, match_tracks, segment_metrics
from .studies import StudyRecord, run_kappa_study, run_sparsity_study
from .toy_detector import DetectorGeometry, ToyConfig, generate_batch, generate_event
from .track_builder import TrackCandidate, build_tracks

__version__ = "0.1.0"
