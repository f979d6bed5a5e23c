"""Blocking methods for record linkage and tools to evaluate them."""

from rlblock.corpus import Dataset, FieldSchema, Record, load_csv, true_pairs
from rlblock.errors import (
    DataError,
    IntegrityError,
    ParameterError,
    ParseError,
    RLBlockError,
    SchemaError,
    SpecError,
)
from rlblock.partition import BlockingPartition, CandidatePairSet

__all__ = [
    "BlockingPartition",
    "CandidatePairSet",
    "DataError",
    "Dataset",
    "FieldSchema",
    "IntegrityError",
    "ParameterError",
    "ParseError",
    "RLBlockError",
    "Record",
    "SchemaError",
    "SpecError",
    "load_csv",
    "true_pairs",
]

__version__ = "0.1.0"
