"""Adaptive testing toolkit: IRT response models, ability estimation, item
selection with exposure control, an adaptive session engine, an HTTP session
service, and a Monte Carlo simulation lab."""

from .bank import ItemBank, Violation, generate_bank, load_bank, load_bank_file, serialize_bank, validate_bank
from .engine import (
    CutoffBand,
    DemographicField,
    Phase,
    SessionResult,
    SessionState,
    StopDecision,
    StopReason,
    StudyConfig,
    begin_session,
    classify,
    config_from_dict,
    config_to_dict,
    finalize,
    next_item,
    restore_session,
    snapshot_session,
    start_session,
    stop_check,
    submit_response,
    validate_config,
)
from .errors import (
    BankFormatError,
    CatlabError,
    EstimationError,
    NonFiniteMLEError,
    PoolExhaustedError,
    ResponseConflictError,
    SessionStateError,
)
from .estimation import (
    AbilityEstimate,
    Prior,
    QuadratureGrid,
    default_grid,
    estimate_eap,
    estimate_map,
    estimate_ml,
    estimate_wle,
    fallback_chain,
)
from .irt import (
    ItemParameters,
    Response,
    category_probabilities,
    cumulative_probability,
    item_information,
    response_log_likelihood,
    score_function,
    total_information,
)
from .selection import (
    ExposureLedger,
    SelectionWeights,
    constrained_weighted_select,
    mfi_select,
    precision_weighted_mfi,
    record_administration,
    sympson_hetter_filter,
)

__version__ = "0.1.0"
