"""Residual-diffusion heatmap solver for TSP and maximum independent set.

A label solution x0 and a cheap degraded solution X_d define a residue
x_res = X_d - x0.  A forward process mixes the residue and Gaussian noise
into x_t; a small graph network learns to predict (x_res, eps) from x_t;
reverse steps with closed-form means turn noisy mixtures back into
near-label heatmaps that greedy/2-opt decoders harden into feasible
solutions.  Large instances are handled by overlapping-subgraph search.
"""

from .decoding import (
    Heatmap,
    greedy_decode_mis,
    greedy_decode_tsp,
    sample_decode,
    two_opt,
    two_opt_with_trace,
)
from .diffusion import (
    AlreadyTerminalError,
    DegenerateScheduleError,
    DiffusionState,
    ResiduePair,
    SamplerConfig,
    Schedule,
    ShapeError,
    forward_decoupled,
    forward_residual,
    linear_schedule,
    reverse_decoupled_step,
    reverse_residual_step,
    sample_heatmap,
)
from .instances import (
    MisInstance,
    SolutionVector,
    Tour,
    TspInstance,
    build_mis_instance,
    build_tsp_instance,
    degraded_solution,
    generate_er,
    generate_tsp,
    tour_length,
    tour_to_solution,
    solution_to_tour,
)
from .metrics import EvalRecord, compute_gap
from .nets import (
    DenoiserOutput,
    NetParams,
    gnn_forward,
    init_params,
    load_params,
    make_oracle,
    oracle_denoiser,
    save_params,
)
from .oracles import (
    TooLargeError,
    exact_mis,
    farthest_insertion,
    greedy_mis,
    held_karp,
    label_mis,
    label_tour,
    label_tsp,
)
from .search import (
    ConsistencyError,
    Occurrence,
    SearchConfig,
    Subgraph,
    decompose,
    merge_heatmaps,
    multi_modal_search,
)
from .training import (
    GnnDenoiser,
    TrainConfig,
    TrainingDivergedError,
    grad_check,
    loss,
    train,
)
from .tsplib import ParseError, UnsupportedFormatError, parse_tsplib

__version__ = "0.1.0"
