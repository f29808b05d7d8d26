from dwgf.data.io_utils import load_matrix, load_vector, save_matrix, save_records
from dwgf.data.problem import Experiment, build_problem, load_config

__all__ = ["Experiment", "build_problem", "load_config", "load_matrix", "load_vector", "save_matrix", "save_records"]
