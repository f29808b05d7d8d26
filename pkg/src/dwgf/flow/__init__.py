from dwgf.flow.drift import data_drift, reg_drift
from dwgf.flow.engine import DWGFSampler, FlowConfig, FlowResult, Problem, TimeSampling, run
from dwgf.flow.ensemble import ParticleEnsemble, kde_score, log_kde
from dwgf.flow.optim import AdamState, LRSchedule, OptimizerConfig, OptimizerName, ParticleOptimizer

__all__ = [
    "AdamState",
    "DWGFSampler",
    "FlowConfig",
    "FlowResult",
    "LRSchedule",
    "OptimizerConfig",
    "OptimizerName",
    "ParticleEnsemble",
    "ParticleOptimizer",
    "Problem",
    "TimeSampling",
    "data_drift",
    "kde_score",
    "log_kde",
    "reg_drift",
    "run",
]
