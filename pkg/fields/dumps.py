"""
SSVF1 binary field dumps.

Layout: header (magic 'SSVF1', u32 n, f64 L, u8 rank, u8 mask flag),
then little-endian f64 samples, x1 fastest, component-major for tensors.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .exceptions import DumpFormatError
from .grid import GridSpec
from .profiles import TensorProfile, VectorProfile

logger = logging.getLogger(__name__)

MAGIC = b'SSVF1'
HEADER = np.dtype([('magic', 'S5'), ('n', '<u4'), ('L', '<f8'), ('rank', 'u1'), ('masked', 'u1')])


def _ordered(data: np.ndarray) -> np.ndarray:
    """Reverse the three spatial axes so C order runs x1 fastest"""
    lead = data.ndim - 3
    return np.ascontiguousarray(np.transpose(data, tuple(range(lead)) + (lead + 2, lead + 1, lead)))


def encode_profile(profile: Union[VectorProfile, TensorProfile]) -> bytes:
    if profile.rank not in (1, 2):
        raise DumpFormatError(f'SSVF1 stores rank 1 or 2 fields, got rank {profile.rank}')
    header = np.array(
        [(MAGIC, profile.grid.n, profile.grid.half_width, profile.rank, int(profile.masked))],
        dtype=HEADER,
    )
    return header.tobytes() + _ordered(profile.data).astype('<f8').tobytes()


def write_profile(path: Union[str, Path], profile: Union[VectorProfile, TensorProfile]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_profile(profile))
    logger.debug(f'Wrote SSVF1 dump {path}')
    return path


def decode_profile(raw: bytes, grid: Optional[GridSpec] = None, gamma: float = 0.5):
    if len(raw) < HEADER.itemsize:
        raise DumpFormatError('file shorter than the SSVF1 header')
    header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
    if header['magic'] != MAGIC:
        raise DumpFormatError(f"bad magic {header['magic']!r}")
    n, half_width, rank = int(header['n']), float(header['L']), int(header['rank'])
    if rank not in (1, 2):
        raise DumpFormatError(f'unsupported rank {rank}')

    if grid is None:
        grid = GridSpec(half_width=half_width, n=n)
    elif grid.n != n or not np.isclose(grid.half_width, half_width):
        raise DumpFormatError(f'dump grid (n={n}, L={half_width}) does not match {grid}')

    lead = (3,) if rank == 1 else (3, 3)
    count = int(np.prod(lead)) * n ** 3
    body = np.frombuffer(raw[HEADER.itemsize:], dtype='<f8')
    if body.size != count:
        raise DumpFormatError(f'expected {count} samples, found {body.size}')
    reordered = body.reshape(lead + (n, n, n))
    k = len(lead)
    data = np.transpose(reordered, tuple(range(k)) + (k + 2, k + 1, k)).astype(float)

    cls = VectorProfile if rank == 1 else TensorProfile
    return cls(grid, data, gamma, masked=bool(header['masked']))


def read_profile(path: Union[str, Path], grid: Optional[GridSpec] = None, gamma: float = 0.5):
    return decode_profile(Path(path).read_bytes(), grid, gamma)
