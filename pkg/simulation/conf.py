"""
Simulation Settings Access

Reads the SIMULATION block of the Django settings, falling back to the
toolkit defaults when a key (or the whole block) is missing.
"""

from typing import Any, Dict

DEFAULT_SIMULATION_SETTINGS: Dict[str, Any] = {
    'TOOLKIT_VERSION': '1.0.0',
    'DEFAULT_SEED': 20240611,
    'DEFAULT_WORKERS': 1,
    'OUTPUT_DIR': 'results',
    'PATH_BLOCK_SIZE': 2048,
    'MIN_PATHS': 1000,
    'GRID_POINTS': 512,
    'SMALL_JUMP_CUT': 1e-4,
    'RARE_EVENT_MIN_HITS': 100,
    'QUADRATURE_EPSABS': 1e-10,
    'QUADRATURE_EPSREL': 1e-8,
    'QUADRATURE_LIMIT': 400,
    'POINTS_PER_DECADE': 512,
    'CONDITION_EPSILON': 0.1,
    'Q_MARGINAL_A': 4.0,
    'ENVELOPE_LOWER_THRESHOLD': 0.01,
    'ENVELOPE_UPPER_THRESHOLD': 0.02,
}


def get_simulation_setting(key: str) -> Any:
    """
    Look up one simulation setting.

    Args:
        key: Name inside settings.SIMULATION

    Returns:
        Configured value, or the toolkit default
    """
    try:
        from django.conf import settings
        configured = getattr(settings, 'SIMULATION', {})
    except Exception:
        # settings not configured (bare worker process)
        configured = {}
    if key in configured:
        return configured[key]
    return DEFAULT_SIMULATION_SETTINGS[key]
