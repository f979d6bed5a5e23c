"""Named blocking methods with validated parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from rlblock.baselines import canopies, canopy_to_blocks, knn_block, parse_rule, preset_rule, rule_block, tnn_block
from rlblock.baselines.rules import validate_rule
from rlblock.corpus import Dataset, FieldSchema
from rlblock.errors import ParameterError
from rlblock.klsh import klsh_block
from rlblock.tlsh import tlsh_block

# allowed parameters and their defaults (None = required or optional without default)
METHOD_PARAMS = {
    "rule": {"preset": None, "expr": None},
    "tnn": {"threshold": None, "shingle_k": 2},
    "knn": {"kmin": None, "shingle_k": 2},
    "canopy": {"t1": None, "t2": None, "distance": "projection", "shingle_k": 2,
               "projections": 100, "randomize_bases": None},
    "tlsh": {"shingle_k": 5, "permutations": 100, "bands": 26, "max_block": 500},
    "klsh": {"shingle_k": 2, "projections": 100, "num_blocks": None, "avg_block_size": None,
             "max_iter": 100},
}

METHOD_PRESETS = {
    "tlsh-rldata": ("tlsh", {"shingle_k": 5, "permutations": 100, "bands": 26, "max_block": 500}),
    "tlsh-noisy": ("tlsh", {"shingle_k": 5, "permutations": 100, "bands": 22, "max_block": 500}),
    "klsh-rldata": ("klsh", {"shingle_k": 2, "projections": 100}),
    "klsh-noisy": ("klsh", {"shingle_k": 2, "projections": 150}),
}


def _int(params, key, lo=None):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParameterError(f"{key} must be an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ParameterError(f"{key} must be >= {lo}, got {v}")
    return v


def _num(params, key, lo=None):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
        raise ParameterError(f"{key} must be a number, got {v!r}")
    if lo is not None and v < lo:
        raise ParameterError(f"{key} must be >= {lo}, got {v}")
    return float(v)


@dataclass(frozen=True)
class MethodConfig:
    name: str
    params: Mapping = field(default_factory=dict)

    @classmethod
    def preset(cls, name: str, **overrides) -> "MethodConfig":
        if name not in METHOD_PRESETS:
            raise ParameterError(f"unknown method preset {name!r}; choose from {sorted(METHOD_PRESETS)}")
        method, params = METHOD_PRESETS[name]
        return cls(method, {**params, **{k: v for k, v in overrides.items() if v is not None}})

    def resolved(self) -> dict:
        if self.name not in METHOD_PARAMS:
            raise ParameterError(f"unknown method {self.name!r}; choose from {sorted(METHOD_PARAMS)}")
        allowed = METHOD_PARAMS[self.name]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ParameterError(f"method {self.name} does not take {sorted(unknown)}")
        return {**allowed, **{k: v for k, v in self.params.items() if v is not None}}

    def validate(self, schema: FieldSchema | None = None, n: int | None = None) -> dict:
        """Check every parameter before any work starts; returns the full parameter set."""
        p = self.resolved()
        if self.name == "rule":
            if (p["preset"] is None) == (p["expr"] is None):
                raise ParameterError("rule blocking needs exactly one of a preset or an expression")
            rule = preset_rule(p["preset"]) if p["preset"] is not None else parse_rule(p["expr"])
            if schema is not None:
                validate_rule(rule, schema)
            return p
        if "shingle_k" in p:
            _int(p, "shingle_k", 1)
        if self.name == "tnn":
            if p["threshold"] is None:
                raise ParameterError("tnn needs a threshold")
            _num(p, "threshold", 0)
        elif self.name == "knn":
            if p["kmin"] is None:
                raise ParameterError("knn needs kmin")
            _int(p, "kmin", 1)
            if n is not None and p["kmin"] > n:
                raise ParameterError(f"kmin must be <= n ({n}), got {p['kmin']}")
        elif self.name == "canopy":
            if p["t1"] is None or p["t2"] is None:
                raise ParameterError("canopy needs t1 and t2")
            if _num(p, "t2", 0) > _num(p, "t1", 0):
                raise ParameterError(f"need t2 <= t1, got t1={p['t1']}, t2={p['t2']}")
            if p["distance"] not in ("projection", "tfidf"):
                raise ParameterError(f"unknown canopy distance {p['distance']!r}")
            _int(p, "projections", 1)
            if p["randomize_bases"] is not None:
                _int(p, "randomize_bases", 0)
        elif self.name == "tlsh":
            _int(p, "permutations", 1)
            _int(p, "bands", 1)
            _int(p, "max_block", 1)
            if p["bands"] > p["permutations"]:
                raise ParameterError(f"bands ({p['bands']}) cannot exceed permutations ({p['permutations']})")
        elif self.name == "klsh":
            _int(p, "projections", 1)
            _int(p, "max_iter", 1)
            c, a = p["num_blocks"], p["avg_block_size"]
            if (c is None) == (a is None):
                raise ParameterError("klsh needs exactly one of num_blocks or avg_block_size")
            if c is not None and c != "sqrt":
                _int(p, "num_blocks", 1)
                if n is not None and c > n:
                    raise ParameterError(f"num_blocks must be <= n ({n}), got {c}")
            if a is not None and _num(p, "avg_block_size") <= 0:
                raise ParameterError("avg_block_size must be positive")
        return p


def run_method(ds: Dataset, cfg: MethodConfig, seed: int = 0, threads: int = 1):
    """Run one blocking method; returns a partition or, for rules, a pair set."""
    p = cfg.validate(ds.schema, ds.n)
    name = cfg.name
    if name == "rule":
        rule = preset_rule(p["preset"]) if p["preset"] is not None else parse_rule(p["expr"])
        return rule_block(ds, rule, threads=threads)
    if name == "tnn":
        return tnn_block(ds, p["threshold"], k=p["shingle_k"])
    if name == "knn":
        return knn_block(ds, p["kmin"], k=p["shingle_k"])
    if name == "canopy":
        cover = canopies(ds, p["t1"], p["t2"], distance=p["distance"], k=p["shingle_k"],
                         p=p["projections"], seed=seed, randomize_bases=p["randomize_bases"])
        out = canopy_to_blocks(cover)
        out.info["canopies"] = len(cover.canopies)
        return out
    if name == "tlsh":
        return tlsh_block(ds, k=p["shingle_k"], p=p["permutations"], b=p["bands"], t=p["max_block"], seed=seed)
    c = p["num_blocks"]
    if c == "sqrt":
        c = max(1, round(math.sqrt(ds.n)))
    return klsh_block(ds, k=p["shingle_k"], p=p["projections"], c=c, seed=seed,
                      avg_block_size=p["avg_block_size"], max_iter=p["max_iter"])

