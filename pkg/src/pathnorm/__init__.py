"""Training toolkit for RELU networks over DAGs with path-normalized SGD.

Builds feedforward DAG networks from scratch, computes group and path norms
(with brute-force oracles), applies function-preserving rescalings, and
trains with SGD, AdaGrad or Path-SGD under a reproducible experiment
harness.
"""

from .data import (Dataset, MetricRecord, load_mnist_idx, make_synthetic,
                   read_metrics, split_validation, write_idx_images,
                   write_idx_labels, write_metrics)
from .errors import (ConfigError, ConvergenceError, GraphError, IdxFormatError,
                     NumericError, PathnormError)
from .graph import (LevelSets, NetworkGraph, build_layered, compute_levels,
                    count_paths, format_graph_file, parse_arch, parse_graph_file)
from .harness import (ExperimentConfig, compare_report, load_datasets,
                      run_training, select_step_size)
from .initialization import (DropoutMask, draw_dropout_mask, init_balanced,
                             init_unbalanced)
from .network import (Batch, LossReport, evaluate, forward, forward_batch,
                      loss_and_grad)
from .norms import (Lemma1Report, group_norm, group_norm_max, lemma1_check,
                    path_norm_dp, path_vector_bruteforce)
from .optimizers import (OptimizerState, PathScalars, adagrad_step,
                         compute_gamma, optimizer_step, pathsgd_step, sgd_step)
from .rescaling import (EquivalenceReport, RescalingOp, RescalingPlan,
                        apply_rescaling, balance_oracle,
                        check_rescaling_equivalent, random_plan, unbalance)

__version__ = "0.1.0"
