"""Benchmark kit for gradient-based coreset selection.

Implements Random, CRAIG, GradMatch, and GLISTER selectors over per-sample
gradient proxies, an SSI-scheduled training loop for small differentiable
classifiers, and the benchmarking protocol around them (EDPE, selection
time, total time, per-class budgets, coreset-churn analysis).
"""

from .data import (
    Dataset,
    Split,
    combination_count,
    generate_blobs,
    generate_composite_sum,
    load_csv,
    save_csv,
    split,
)
from .kernels import current_backend, set_backend
from .metrics import (
    ChurnReport,
    MetricsRecord,
    aggregate_times,
    churn_analysis,
    compute_edpe,
    read_results,
    total_dropped_keys,
    write_results,
)
from .model import (
    GradientMatrix,
    Model,
    OptimizerState,
    clip_global_norm,
    cosine_lr,
    forward,
    init_model,
    loss_and_grad,
    make_optimizer,
    per_sample_gradients,
    sgd_step,
)
from .selectors import (
    BudgetSpec,
    Coreset,
    GlisterConfig,
    allocate_budgets,
    craig_objective,
    omp_select,
    select_craig,
    select_glister,
    select_gradmatch,
    select_random,
)
from .trainer import (
    RunConfig,
    RunResult,
    evaluate_accuracy,
    evaluate_quadratic_kappa,
    resolve_dataset,
    run,
    run_full_baseline,
    selection_epochs,
    train_split,
)

__version__ = "0.1.0"
