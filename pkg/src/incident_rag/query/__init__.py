"""IOC query library: boolean filters, terms aggregations, search-DSL rendering."""

from .aggregate import (
    AggregationResult,
    AggSpec,
    BadPattern,
    Bucket,
    Classify,
    DuplicateQueryId,
    Extract,
    Field,
    IocQuery,
    QueryError,
    extract_script_key,
    run_library,
    run_query,
)
from .dsl import parse_remote_dsl, to_remote_dsl
from .filters import Bool, FilterExpr, RangeIp, RangeNum, Term, Terms, Wildcard, eval_filter
from .library import dump_library, load_library, parse_library

__all__ = [
    "AggregationResult", "AggSpec", "BadPattern", "Bool", "Bucket", "Classify", "DuplicateQueryId",
    "Extract", "Field", "FilterExpr", "IocQuery", "QueryError", "RangeIp", "RangeNum", "Term", "Terms",
    "Wildcard", "dump_library", "eval_filter", "extract_script_key", "load_library", "parse_library",
    "parse_remote_dsl", "run_library", "run_query", "to_remote_dsl",
]
