"""Constants for the aadkit package."""

VERSION = "2024.1.0"

# Sample rates
EEG_RATE = 64.0
MIN_AUDIO_RATE = 8000.0
GAMMATONE_WORK_RATE = 16000.0

# EEG band-pass
EEG_LO_HZ = 0.5
EEG_HI_HZ = 32.0

# Envelope extraction
ENVELOPE_GAMMATONE = "gammatone"
ENVELOPE_HILBERT = "hilbert"
ENVELOPE_METHODS = (ENVELOPE_GAMMATONE, ENVELOPE_HILBERT)
GAMMATONE_FMIN = 150.0
GAMMATONE_FMAX = 4000.0
GAMMATONE_BANDS = 28
GAMMATONE_BW_SCALE = 1.5
GAMMATONE_ORDER = 4
GAMMATONE_EXPONENT = 0.6
HILBERT_LP_HZ = 50.0
ENVELOPE_LP_FRACTION = 0.4

# Linear decoders (samples at 64 Hz)
LSR_LAGS = 17
CCA_EEG_LAGS = 17
CCA_ENV_LAGS = 80
RIDGE_LAMBDAS = tuple(10.0**exp for exp in range(-2, 11))
CCA_SHRINKAGE = 1e-6
INNER_FOLDS = 4

# Stream / label convention: label = index of the attended stream
STREAM_A = 0
STREAM_B = 1
STREAM_KEYS = ("a", "b")

# Network layer defaults
BN_MOMENTUM = 0.1
BN_EPS = 1e-5
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
ELU_ALPHA = 1.0
POOL_SIZE = 3
MIN_WINDOW_SAMPLES = int(EEG_RATE)
FD_STEP = 1e-5

# Training
LEARNING_RATE = 5e-5
FINETUNE_LR_FACTOR = 0.1
BATCH_SIZES = (32, 64, 128)
WEIGHT_DECAYS = (1e-4, 1e-3, 1e-2, 1e-1)
DROPOUTS = (0.5, 0.4, 0.3, 0.2, 0.1)
HIDDEN_UNITS = (32, 16, 0)
PATIENCE = 5
MAX_EPOCHS = 100
TRAIN_WINDOW_S = 10.0
TRAIN_OVERLAP = 0.0

# Evaluation
N_FOLDS = 8
TRAIN_VAL_RATIO = 4
WINDOW_LENGTHS = (1.0, 2.0, 5.0, 10.0, 20.0, 40.0)
TEST_OVERLAP = 0.5
CHANCE_QUANTILE = 0.95
N_PERMUTATIONS = 10_000
ALPHA = 0.05

# MESD chain
MESD_MIN_STATES = 5
MESD_MAX_STATES = 1000
MESD_CONFIDENCE = 0.8
MESD_COMFORT = 0.65
MESD_CENSOR_S = 100.0
MESD_GRID_POINTS = 1000

# Methods and modes
METHOD_LSR = "lsr"
METHOD_CCA = "cca"
METHOD_AADNET = "aadnet"
METHODS = (METHOD_LSR, METHOD_CCA, METHOD_AADNET)
MODE_SS = "ss"
MODE_SI = "si"
MODES = (MODE_SS, MODE_SI)

# Files
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1
CHECKPOINT_VERSION = 1
CHECKPOINT_HEADER = "__header__"
ARRAY_DTYPE = "<f4"
ENV_PREFIX = "AADKIT_"
ENV_DELIMITER = "__"

# Conf keys
CONF_DATASET = "dataset"
CONF_METHOD = "method"
CONF_MODE = "mode"
CONF_WINDOWS = "windows"
CONF_SEED = "seed"
CONF_OUT = "out"
CONF_WORKERS = "workers"
CONF_ENVELOPE = "envelope"
CONF_TRAIN = "train"
CONF_LINEAR = "linear"
CONF_MESD = "mesd"
CONF_STATS = "stats"
CONF_SYNTH = "synth"

CONF_LR = "lr"
CONF_FINETUNE_LR = "finetune_lr"
CONF_BATCH_SIZE = "batch_size"
CONF_WEIGHT_DECAY = "weight_decay"
CONF_DROPOUT = "dropout"
CONF_HIDDEN = "hidden"
CONF_MAX_EPOCHS = "max_epochs"
CONF_PATIENCE = "patience"
CONF_WINDOW_S = "window_s"
CONF_OVERLAP = "overlap"
CONF_SEARCH_BUDGET = "search_budget"

CONF_LAMBDAS = "lambdas"
CONF_N_COMPONENTS = "n_components"
CONF_INNER_FOLDS = "inner_folds"

CONF_MIN_STATES = "min_states"
CONF_MAX_STATES = "max_states"
CONF_CONFIDENCE = "confidence"
CONF_COMFORT = "comfort"
CONF_CENSOR_S = "censor_s"
CONF_GRID_POINTS = "grid_points"

CONF_N_PERM = "n_perm"
CONF_ALPHA = "alpha"

CONF_N_SUBJECTS = "n_subjects"
CONF_TRIALS = "trials"
CONF_TRIAL_LENGTH = "trial_length"
CONF_N_CHANNELS = "n_channels"
CONF_INFORMATIVE = "informative"
CONF_KERNEL_LENGTH = "kernel_length"
CONF_ATTENDED_GAIN = "attended_gain"
CONF_LEAKAGE_GAIN = "leakage_gain"
CONF_NOISE_STD = "noise_std"
CONF_SHARE_STIMULI = "share_stimuli"
CONF_SUBJECT_GAINS = "subject_gains"

# Report columns
REPORT_COLUMNS = (
    "method",
    "subject",
    "fold",
    "window_s",
    "n_windows",
    "accuracy",
    "chance",
)
MESD_COLUMNS = ("method", "subject", "mesd_s", "tau_opt_s", "censored")
LOCO_COLUMNS = ("channel_label", "accuracy_drop")
TRAIN_LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "checkpoint")
MISSING = "NA"
