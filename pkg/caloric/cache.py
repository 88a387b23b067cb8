import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, Tuple

from django.core.cache import cache

from fields.dumps import decode_profile, encode_profile
from fields.exceptions import DumpFormatError
from fields.grid import GridSpec
from fields.traces import SphericalTrace
from selfsim.conf import setting

from .services import DEFAULT_REFINEMENTS, DEFAULT_TOLERANCE, CaloricProfile, caloric_profile

logger = logging.getLogger(__name__)

CACHE_TTL = setting('CALORIC_CACHE_TTL', 60 * 60)  # 1 hour in process memory


def _quadrature_settings(tol: Optional[float], max_refinements: Optional[int]) -> Tuple[float, int]:
    if tol is None:
        tol = setting('SELFSIM_CALORIC_TOLERANCE', DEFAULT_TOLERANCE)
    if max_refinements is None:
        max_refinements = setting('SELFSIM_CALORIC_REFINEMENTS', DEFAULT_REFINEMENTS)
    return float(tol), int(max_refinements)


def cache_key(trace: SphericalTrace, grid: GridSpec, tol: Optional[float] = None,
              max_refinements: Optional[int] = None) -> str:
    tol, max_refinements = _quadrature_settings(tol, max_refinements)
    h = hashlib.sha256()
    h.update(trace.digest.encode())
    h.update(repr((grid.half_width, grid.n, grid.sphere_polar, grid.sphere_azimuth, grid.mask_radius)).encode())
    h.update(repr((tol, max_refinements)).encode())
    return f'caloric_{h.hexdigest()[:24]}'


def _cache_dir() -> Path:
    return Path(setting('SELFSIM_CACHE_DIR', '.selfsim_cache'))


def _paths(key: str) -> Tuple[Path, Path]:
    directory = _cache_dir()
    return directory / f'{key}.ssvf', directory / f'{key}.json'


def _read_entry(key: str) -> Optional[dict]:
    entry = cache.get(key)
    if entry is not None:
        return entry
    dump, meta = _paths(key)
    if not (dump.exists() and meta.exists()):
        return None
    try:
        return {'field': dump.read_bytes(), **json.loads(meta.read_text())}
    except (OSError, ValueError) as e:
        logger.warning(f'Discarding unreadable caloric cache entry {dump}: {e}')
        return None


def _write_entry(key: str, profile: CaloricProfile):
    raw = encode_profile(profile.field)
    meta = {'error_estimate': profile.error_estimate, 'c_star': profile.c_star}
    cache.set(key, {'field': raw, **meta}, CACHE_TTL)
    dump, meta_path = _paths(key)
    try:
        dump.parent.mkdir(parents=True, exist_ok=True)
        dump.write_bytes(raw)
        meta_path.write_text(json.dumps(meta))
    except OSError as e:
        logger.warning(f'Could not write caloric cache {dump}: {e}')


def get_cached_caloric_profile(trace: SphericalTrace, grid: GridSpec, gamma: float = 0.5,
                               tol: Optional[float] = None,
                               max_refinements: Optional[int] = None) -> CaloricProfile:
    """
    Get W0 for a trace from memory, then from the SSVF1 cache directory, else compute it.

    Entries are keyed by the trace, the grid and the quadrature tolerance and
    refinement depth; the error estimate is stored next to the field.
    """
    tol, max_refinements = _quadrature_settings(tol, max_refinements)
    if not trace.value_shape:
        return caloric_profile(trace, grid, gamma, tol=tol, max_refinements=max_refinements)

    key = cache_key(trace, grid, tol, max_refinements)
    entry = _read_entry(key)
    if entry is not None:
        try:
            field = decode_profile(entry['field'], grid, gamma)
            cache.set(key, entry, CACHE_TTL)
            logger.debug(f'Caloric cache hit {key}')
            return CaloricProfile(field=field, c_star=trace.c_star,
                                  error_estimate=float(entry.get('error_estimate', 0.0)),
                                  trace_digest=trace.digest)
        except DumpFormatError:
            logger.warning(f'Discarding unreadable caloric cache entry {key}')

    profile = caloric_profile(trace, grid, gamma, tol=tol, max_refinements=max_refinements)
    _write_entry(key, profile)
    return profile


def invalidate_caloric_cache(trace: SphericalTrace = None, grid: GridSpec = None, tol: Optional[float] = None,
                             max_refinements: Optional[int] = None):
    """Drop one cached profile, or every cached profile when no trace is given"""
    if trace is not None and grid is not None:
        key = cache_key(trace, grid, tol, max_refinements)
        cache.delete(key)
        for path in _paths(key):
            path.unlink(missing_ok=True)
        return
    cache.clear()
    directory = _cache_dir()
    if directory.exists():
        for pattern in ('caloric_*.ssvf', 'caloric_*.json'):
            for path in directory.glob(pattern):
                path.unlink()
