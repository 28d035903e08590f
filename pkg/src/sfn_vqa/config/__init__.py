from .config import (
    AppConfig,
    DataConfig,
    MetricsConfig,
    ModelConfig,
    SyntheticSpec,
    TrainingConfig,
    STAGES,
    config_to_dict,
    echo_config,
    fingerprint,
    get_config,
    print_config_help,
)
from .loader import (
    load_question_templates,
    templates_of_kind,
    load_synthetic_labels,
    load_data_layout,
    write_data_layout,
    clear_cache,
    validate_all_configs,
)
