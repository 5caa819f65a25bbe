from .config_loader import RunConfig, load_config, parse_config
from .experiment_service import ExperimentService
from .export_service import ExportService, dump_matrix

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "ExperimentService",
    "ExportService",
    "dump_matrix",
]
