"""JSON Schemas for the files the CLI emits."""

_number_list = {"type": "array", "items": {"type": "number"}}

ENVELOPE = {
    "type": "object",
    "required": ["command", "version", "config", "timestamp"],
    "properties": {
        "command": {"type": "string"},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "timestamp": {"type": "string"},
        "report": {"type": "object"},
    },
}

REPORTS = {
    "pool": {
        "type": "object",
        "required": ["n", "dim", "output"],
        "properties": {"n": {"type": "integer", "minimum": 1}, "dim": {"type": "integer", "minimum": 1},
                       "output": {"type": "string"}},
    },
    "fit-cca": {
        "type": "object",
        "required": ["dim_left", "dim_right", "k", "epsilon", "correlations", "model_path"],
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "epsilon": {"type": "number", "minimum": 0},
            "correlations": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        },
    },
    "eval-retrieval": {
        "type": "object",
        "required": ["k_values", "recalls", "n_queries", "n_candidates", "cca_k", "epsilon", "direction"],
        "properties": {
            "k_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "recalls": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 100}},
            "direction": {"enum": ["text-to-image", "image-to-text"]},
            "canonical_correlations": {"anyOf": [_number_list, {"type": "null"}]},
        },
    },
    "eval-sts": {
        "type": "object",
        "required": ["spearman", "n_pairs", "mode"],
        "properties": {
            "spearman": {"type": "number", "minimum": -1, "maximum": 1},
            "n_pairs": {"type": "integer", "minimum": 2},
            "mode": {"enum": ["raw", "cca_projected"]},
        },
    },
    "dcorr-matrix": {
        "type": "object",
        "required": ["labels", "values", "n"],
        "properties": {
            "labels": {"type": "array", "items": {"type": "string"}},
            "values": {"type": "array",
                       "items": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}},
            "n": {"type": "integer", "minimum": 2},
            "subsample": {"anyOf": [{"type": "object"}, {"type": "null"}]},
        },
    },
    "correlate-metrics": {
        "type": "object",
        "required": ["correlations", "entries", "scatter"],
        "properties": {
            "correlations": {"type": "object",
                             "additionalProperties": {"type": "object",
                                                      "additionalProperties": {"type": "number"}}},
            "entries": {"type": "array", "items": {
                "type": "object", "required": ["group", "x", "y", "key", "pearson", "n"]}},
            "scatter": {"type": "array", "items": {
                "type": "object", "required": ["x", "y", "label"]}},
        },
    },
    "synth": {
        "type": "object",
        "required": ["kind", "spec", "files", "version"],
        "properties": {
            "spec": {"type": "object", "required": ["n", "seed", "generator"]},
            "files": {"type": "object", "additionalProperties": {"type": "string"}},
        },
    },
}


def report_schema(command: str) -> dict:
    """Envelope schema with the command's report body filled in."""
    schema = {**ENVELOPE, "properties": {**ENVELOPE["properties"], "report": REPORTS[command]}}
    return schema
