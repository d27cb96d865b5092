"""Declare all global constants."""

CONFIG_FILE_NAME = "ddgcn.config.json"
CONFIG_ENV_VAR_NAME = "DDGCN_CONFIG"

ERROR_PREFIX = "ddgcn-error"

# shipped files inside ddgcn.resources
VOCAB_RESOURCE = "conditions.txt"
GROUPS_RESOURCE = "differential_groups.json"

# model and training defaults
DEFAULT_T = 0.05
DEFAULT_D0 = 700
DEFAULT_D1 = 1024
DEFAULT_D_FEAT = 2048
DEFAULT_LR = 0.0003
DEFAULT_EPOCHS = 300
DEFAULT_SLOPE = 0.2

TRAIN_MASK = {1: 0.817, 2: 0.155, 3: 0.028}
TEST_MASK = {1: 0.460, 2: 0.381, 3: 0.127}

REPORT_RANKS = (1, 3, 5)

RUN_RECORD_SUFFIX = ".run.json"
HISTORY_SUFFIX = ".history.json"
