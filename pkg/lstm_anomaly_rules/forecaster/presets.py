from typing import Dict

from lstm_anomaly_rules.dto.forecaster import ForecasterConfig
from lstm_anomaly_rules.errors import DataError

# Architectures per dataset family; every preset trains 100 epochs with batch size 64.
PRESETS: Dict[str, ForecasterConfig] = {
    "travel_time": ForecasterConfig(
        recurrent_layer_sizes=[20], dropout_rate=0.2, learning_rate=0.01, l_b=1, l_a=1
    ),
    "speed": ForecasterConfig(
        recurrent_layer_sizes=[60], dropout_rate=0.19, learning_rate=0.0001, l_b=1, l_a=1
    ),
    "occupancy": ForecasterConfig(
        recurrent_layer_sizes=[50], dropout_rate=0.23, learning_rate=0.0001, l_b=1, l_a=1
    ),
    "nyc_taxi": ForecasterConfig(
        recurrent_layer_sizes=[50, 20], dropout_rate=0.4, learning_rate=0.0001, l_b=5760, l_a=24
    ),
    "bengaluru_taxi": ForecasterConfig(
        recurrent_layer_sizes=[20, 10], dropout_rate=0.25, learning_rate=0.0001, l_b=5760, l_a=24
    ),
    "ecg": ForecasterConfig(
        recurrent_layer_sizes=[60, 30], dropout_rate=0.1, learning_rate=0.05, l_b=8, l_a=5
    ),
    "machine_temperature": ForecasterConfig(
        recurrent_layer_sizes=[80, 20], dropout_rate=0.1, learning_rate=0.1, l_b=24, l_a=12
    ),
}


def get_preset(name: str, **overrides) -> ForecasterConfig:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise DataError(f"unknown preset {name!r}, choose one of {sorted(PRESETS)}")
    return ForecasterConfig(**{**preset.model_dump(), **overrides})
