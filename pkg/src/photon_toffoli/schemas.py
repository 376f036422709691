"""JSON schemas for every document the package emits.

Plain dicts in JSON-Schema draft 2020-12 form; validation is left to the
caller (the tests use ``jsonschema``).
"""

_NUMBER = {"type": "number"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUMBER}}

MODE_LABEL = {
    "type": "object",
    "required": ["pol", "path", "l"],
    "properties": {
        "pol": {"enum": ["H", "V"]},
        "path": {"type": "integer", "minimum": 0},
        "l": {"type": "integer"},
    },
    "additionalProperties": False,
}

STATE_VECTOR = {
    "type": "object",
    "required": ["space", "amplitudes"],
    "properties": {
        "space": {
            "type": "object",
            "required": ["paths", "l_max"],
            "properties": {
                "paths": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "l_max": {"type": "integer", "minimum": 0},
            },
        },
        "amplitudes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mode", "amp"],
                "properties": {
                    "mode": MODE_LABEL,
                    "amp": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                },
            },
        },
    },
}

DENSITY_MATRIX = {
    "type": "object",
    "required": ["dim", "re", "im"],
    "properties": {"dim": {"type": "integer", "minimum": 1}, "re": _MATRIX, "im": _MATRIX},
    "additionalProperties": False,
}

CROSSTALK_MATRIX = {
    "type": "object",
    "required": ["rows", "cols", "counts", "rates"],
    "properties": {
        "rows": {"type": "array", "items": {"type": "string"}},
        "cols": {"type": "array", "items": {"type": "string"}},
        "counts": _MATRIX,
        "rates": _MATRIX,
        "global_rates": _MATRIX,
        "effective_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "stddev": {"type": "number", "minimum": 0},
    },
}

CNOT_CROSSTALK = {
    "type": "object",
    "required": ["1", "0", "+"],
    "additionalProperties": CROSSTALK_MATRIX,
}

CALIBRATION_REPORT = {
    "type": "object",
    "required": ["phases", "process_fidelity", "sweeps"],
    "properties": {
        "phases": {"type": "object", "additionalProperties": _NUMBER},
        "process_fidelity": {"type": "number", "minimum": 0, "maximum": 1 + 1e-9},
        "sweeps": {"type": "integer", "minimum": 0},
    },
}

TOMOGRAPHY_REPORT = {
    "type": "object",
    "required": ["state", "fidelity", "stddev", "iterations", "settings", "counts_total"],
    "properties": {
        "state": DENSITY_MATRIX,
        "fidelity": {"type": "number", "minimum": 0, "maximum": 1 + 1e-9},
        "stddev": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "settings": {"type": "integer", "minimum": 1},
        "counts_total": {"type": "integer", "minimum": 0},
        "input": {"type": "string"},
        "expected": {"type": "string"},
    },
}

BELL_REPORT = {"type": "array", "minItems": 4, "maxItems": 4, "items": TOMOGRAPHY_REPORT}

FIDELITY_GRID = {
    "type": "object",
    "required": ["rows", "cols", "fidelity", "stddev"],
    "properties": {
        "rows": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 3},
        "cols": {"type": "array", "items": {"type": "string"}, "minItems": 8, "maxItems": 8},
        "fidelity": _MATRIX,
        "stddev": _MATRIX,
    },
}

VERIFY_REPORT = {
    "type": "object",
    "required": ["checks", "max_entry_error", "ok"],
    "properties": {
        "checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "max_entry_error": _NUMBER,
        "ok": {"type": "boolean"},
    },
}

BY_SCENARIO = {
    "truth-table": CROSSTALK_MATRIX,
    "cnot-crosstalk": CNOT_CROSSTALK,
    "bell": BELL_REPORT,
    "fidelity-grid": FIDELITY_GRID,
    "tomography": TOMOGRAPHY_REPORT,
    "calibrate": CALIBRATION_REPORT,
    "verify": VERIFY_REPORT,
}
