import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from .decay import DecayFit
from .exceptions import NonFiniteReport


@dataclass(frozen=True)
class DiagnosticsReport:
    """
    Collected diagnostics of one solution.

    profile_residual maps each equation block to its max-abs residual;
    Y_values holds (radius, Y) per cylinder. `passes` records the
    acceptance checks that were evaluated, by name.
    """
    profile_residual: Dict[str, float] = field(default_factory=dict)
    energy_residual: Optional[float] = None
    Y_values: Tuple[Tuple[float, float], ...] = ()
    smallness_lhs: Optional[float] = None
    local_energy: Optional[float] = None
    decay_fit: Optional[DecayFit] = None
    self_similarity_error: Optional[float] = None
    divergence: Dict[str, float] = field(default_factory=dict)
    passes: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.flat().items():
            if isinstance(value, float) and not math.isfinite(value):
                raise NonFiniteReport(f'report entry {key} is {value}')

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def flat(self) -> Dict[str, object]:
        """Single-level mapping of every entry, keys joined by dots"""
        out: Dict[str, object] = {}
        for block, value in self.profile_residual.items():
            out[f'profile_residual.{block}'] = float(value)
        if self.energy_residual is not None:
            out['energy_residual'] = float(self.energy_residual)
        for i, (radius, value) in enumerate(self.Y_values):
            out[f'Y.{i}.radius'] = float(radius)
            out[f'Y.{i}.value'] = float(value)
        if self.smallness_lhs is not None:
            out['smallness_lhs'] = float(self.smallness_lhs)
        if self.local_energy is not None:
            out['local_energy'] = float(self.local_energy)
        if self.decay_fit is not None:
            for key, value in asdict(self.decay_fit).items():
                out[f'decay_fit.{key}'] = value
        if self.self_similarity_error is not None:
            out['self_similarity_error'] = float(self.self_similarity_error)
        for key, value in self.divergence.items():
            out[f'divergence.{key}'] = float(value)
        for key, value in self.passes.items():
            out[f'pass.{key}'] = bool(value)
        return out

    def as_text(self) -> str:
        """key = value lines, in a stable order"""
        lines: List[str] = []
        for key, value in self.flat().items():
            rendered = repr(value) if isinstance(value, float) else str(value).lower()
            lines.append(f'{key} = {rendered}')
        return '\n'.join(lines) + '\n'

    def as_rows(self) -> List[Tuple[str, str]]:
        return [(key, repr(value) if isinstance(value, float) else str(value)) for key, value in self.flat().items()]
