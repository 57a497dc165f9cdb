"""Python interface to the mrlab numerics library."""

import json

from ._mrlab import (
    EpsRemovalPlan,
    HypersurfacePatch,
    InvalidArgument,
    LWResult,
    NumericError,
    PartitionReport,
    ResolutionError,
    SparseCollection,
    SparseCollectionSet,
    TypeResult,
    __version__,
    c_factor,
    chain_inequality,
    check_transversality,
    covers,
    eps_removal_exponent,
    experiment_kinds,
    fit_line,
    is_sparse,
    lw_random_ratio,
    partition_check,
    sparse_cover,
)
from ._mrlab import _run_experiment


def run_experiment(kind, params=None, seed=1, jobs=1):
    """Run one experiment kind in memory.

    ``params`` uses the same keys as the TOML config (kind parameters at top level,
    optional ``family`` table or ``surface`` list). Returns a dict with ``run_id``,
    ``tables`` (suffix -> list of row dicts, numeric cells as floats where possible)
    and ``summary``.
    """
    run_id, raw, summary = _run_experiment(kind, json.dumps(params or {}), seed, jobs)
    tables = {}
    for suffix, (header, rows) in raw.items():
        tables[suffix] = [dict(zip(header, map(_cell, row))) for row in rows]
    return {"run_id": run_id, "tables": tables, "summary": json.loads(summary)}


def _cell(text):
    try:
        return float(text)
    except ValueError:
        return text


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
