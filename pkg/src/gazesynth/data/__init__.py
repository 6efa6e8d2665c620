from .config import (ConfigError, RunConfig, coerce_dataclass, config_from_mapping, dump_config,
                     load_config, parse_key_values)
from .io import (RecordingFormatError, list_recordings, load_recording_csv, load_velocity_csv,
                 write_recording_csv, write_velocity_csv)
from .simulator import (TASKS, SimulatorProfile, TaskSettings, default_profiles, simulate_recording,
                        target_schedule)

__all__ = [
    "ConfigError", "RunConfig", "coerce_dataclass", "config_from_mapping", "dump_config",
    "load_config", "parse_key_values", "RecordingFormatError", "list_recordings",
    "load_recording_csv", "load_velocity_csv", "write_recording_csv", "write_velocity_csv", "TASKS",
    "SimulatorProfile", "TaskSettings", "default_profiles", "simulate_recording", "target_schedule",
]
