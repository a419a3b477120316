"""Physics-informed neural networks trained end-to-end in tensor-train format."""

from .jets import Jet2, jet_add, jet_const, jet_mul, jet_scale, jet_sin, jet_x, jet_y
from .network import Mlp, MlpSpec, ParamStore, TTHidden, apply_hard_bc, forward, init
from .optim import Adam, LrSchedule, lr_at
from .problem import HelmholtzProblem, Metrics, SamplingConfig, evaluate, sample_collocation
from .tape import Tape
from .tensor import DenseTensor, SizeError, contract, fold, unfold_matrix
from .ttlinear import (
    RankPlan,
    TTLinear,
    plan_ranks,
    reconstruct,
    tt_init,
    tt_matvec,
    tt_matvec_vjp,
    tt_param_count,
)

__version__ = "0.1.0"
