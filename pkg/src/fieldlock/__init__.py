"""Field-level concurrency control and undo recovery for tuple-based ADTs."""

from .core import (
    AccessVector,
    ControlVectors,
    DimensionError,
    Mode,
    bag_pairwise_commutative,
    compatible,
    control_vectors,
    format_vector,
    lemma1_holds,
    parse_vector,
    vector_leq,
    vectors_commute,
)
from .dsl import AdtSchema, DslError, OperationDef, commutativity_matrix, infer_dav, parse_adt, parse_adts
from .interp import ExecutionFault, ExecutionRecord, InstanceValue, apply_inverse, execute
from .monitor import InstanceMonitor, ProtocolError, Request
from .oracle import Outcome, check_serializable, conflict_graph, serial_outcomes
from .trace import Trace, TraceEvent
from .txn import Transaction, TransactionManager, TransactionRejected
from .workload import OpCall, TxnScript, Workload, load_workload, parse_workload

__version__ = "0.1.0"
