from typing import Any, Dict, Sequence

import numpy as np


def validate_positive(value: Any) -> bool:
    """Validate a strictly positive finite number."""
    try:
        value_float = float(value)
        return bool(np.isfinite(value_float)) and value_float > 0
    except (ValueError, TypeError):
        return False


def validate_resolution(n: Any) -> bool:
    """Validate lattice resolution: even integer >= 4."""
    try:
        return int(n) == float(n) and int(n) >= 4 and int(n) % 2 == 0
    except (ValueError, TypeError):
        return False


def validate_window_schedule(windows: Sequence[float]) -> Dict[str, str]:
    """Validate a window schedule T_1 < ... < T_M."""
    errors = {}
    if not windows:
        errors["windows"] = "At least one averaging window is required"
        return errors
    if not all(validate_positive(w) for w in windows):
        errors["windows"] = "Windows must be positive numbers"
    elif any(b <= a for a, b in zip(windows, windows[1:])):
        errors["windows"] = "Windows must be strictly increasing"
    return errors


def validate_set_spec(spec: Dict[str, Any]) -> Dict[str, str]:
    """Validate a box predicate specification for recurrence/accretion."""
    errors = {}

    # Check required fields
    required_fields = ["observables", "lower", "upper"]
    for field in required_fields:
        if field not in spec:
            errors[field] = f"Missing required field: {field}"
    if errors:
        return errors

    observables = spec["observables"]
    if not isinstance(observables, list) or not observables:
        errors["observables"] = "Observables must be a non-empty list"
        return errors

    for i, obs in enumerate(observables):
        kind = obs.get("kind") if isinstance(obs, dict) else None
        if kind not in ("energy", "enstrophy", "projection"):
            errors[f"observables[{i}]"] = "Kind must be 'energy', 'enstrophy' or 'projection'"
        elif kind == "projection" and len(obs.get("mode", [])) != 3:
            errors[f"observables[{i}].mode"] = "Projection needs an integer wavevector of length 3"

    for bound in ("lower", "upper"):
        if len(spec[bound]) != len(observables):
            errors[bound] = f"{bound} must have one entry per observable"
    if "lower" not in errors and "upper" not in errors:
        if any(float(lo) > float(hi) for lo, hi in zip(spec["lower"], spec["upper"])):
            errors["bounds"] = "Lower bounds must not exceed upper bounds"

    return errors
