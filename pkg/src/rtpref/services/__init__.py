"""Services: closed forms, samplers, estimators, evaluation and the experiment manager"""

from .experiment_manager import ExperimentManager, experiment_manager, fit_agent

__all__ = ["ExperimentManager", "experiment_manager", "fit_agent"]
