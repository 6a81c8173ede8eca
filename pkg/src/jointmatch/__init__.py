"""Joint distribution matching across several data domains.

An ensemble of per-domain encoder/decoder pairs shares one latent feature
space. Critics score (data, feature) pairs, and a mixture term re-decodes
features inferred from every domain so the marginals over the shared space
line up. Cycle and condition penalties keep individual samples on
corresponding points across domains.

Everything runs on a small reverse-mode autodiff core over numpy arrays;
there is no framework dependency.
"""

from .autodiff import Tensor, backward
from .data import (DomainSpec, ground_truth_transfer, load_dataset,
                   make_dataset, make_domains, sample_domain, sample_prior,
                   save_dataset)
from .ensemble import generate_from_prior, reconstruct, transfer, transfer_all
from .losses import (LossReport, ObjectiveConfig, ali_loss, condition_loss,
                     cycle_loss_cross, cycle_loss_data, cycle_loss_feature,
                     domain_mixture_loss, full_objective, regularizer,
                     report_columns)
from .metrics import (evaluate_ensemble, interaction_information, mmd2,
                      mse_cycle, mse_ground_truth, param_scale_table)
from .nets import (ArchConfig, EnsembleParams, criticize, decode, encode,
                   encode_mean, identity_ensemble, param_count)
from .persistence import (RunConfig, load_checkpoint, load_run_config,
                          restore_train_state, save_checkpoint)
from .training import TrainConfig, TrainSink, init_train_state, train

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "ArchConfig",
    "EnsembleParams",
    "encode",
    "encode_mean",
    "decode",
    "criticize",
    "param_count",
    "identity_ensemble",
    "transfer",
    "transfer_all",
    "reconstruct",
    "generate_from_prior",
    "DomainSpec",
    "make_domains",
    "make_dataset",
    "sample_domain",
    "sample_prior",
    "ground_truth_transfer",
    "save_dataset",
    "load_dataset",
    "ObjectiveConfig",
    "LossReport",
    "report_columns",
    "ali_loss",
    "domain_mixture_loss",
    "condition_loss",
    "cycle_loss_data",
    "cycle_loss_feature",
    "cycle_loss_cross",
    "regularizer",
    "full_objective",
    "mmd2",
    "mse_cycle",
    "mse_ground_truth",
    "interaction_information",
    "param_scale_table",
    "evaluate_ensemble",
    "TrainConfig",
    "TrainSink",
    "init_train_state",
    "train",
    "RunConfig",
    "load_run_config",
    "save_checkpoint",
    "load_checkpoint",
    "restore_train_state",
    "__version__",
]
