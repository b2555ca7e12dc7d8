"""Federated learning simulation with IOWA-operator aggregation.

Clients train a small softmax model locally; the server ranks uploads by
validation accuracy and combines them with quantifier-derived weights, so
poorly performing (e.g. label-poisoned) clients can receive zero weight.
"""

from ._accel import BACKEND
from .aggregation import (
    AGGREGATORS,
    AggregationReport,
    AggregatorConfig,
    ClientUpdate,
    al80,
    compute_dynamic_c,
    f_la,
    fed_avg,
    iowa_dq,
    iowa_sq,
    order_by_accuracy,
    w_fed_avg,
)
from .data import (
    Dataset,
    PartitionPlan,
    generate_synthetic,
    load_idx,
    partition_non_iid,
    poison_labels,
    split_validation,
    write_idx,
)
from .errors import FliowaError
from .federation import (
    DataConfig,
    FederationConfig,
    RoundMetrics,
    ScenarioResult,
    detection_report,
    init_state,
    run_federation,
    run_round,
    run_scenario,
)
from .model import (
    ModelSpec,
    ParamVector,
    TrainConfig,
    evaluate_accuracy,
    forward,
    init_model,
    train_local,
)
from .owa import (
    QuantifierParams,
    iowa_aggregate,
    q_dynamic,
    q_standard,
    weights_from_quantifier,
)

__version__ = "0.1.0"
