from typing import Any

from django.conf import settings


def setting(name: str, default: Any = None) -> Any:
    """Project setting, or the default when Django settings are not configured"""
    if not settings.configured:
        return default
    return getattr(settings, name, default)


def default(key: str, fallback: Any) -> Any:
    """Entry of SELFSIM_DEFAULTS"""
    return setting('SELFSIM_DEFAULTS', {}).get(key, fallback)
