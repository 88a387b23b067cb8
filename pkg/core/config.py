"""
Run configuration: YAML with one mapping per section.

    datum:
      amplitude: 0.01
    grid:
      half_width: 16.0
      n: 64

Every key except datum.amplitude has a default. Environment variables
SELFSIM_<SECTION>__<KEY> override the file, their values typed as YAML
scalars.
"""
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from evolver.integrator import EvolveConfig
from fields.grid import GridSpec
from fields.traces import POTENTIAL_FAMILIES, DatumSpec
from profiles.solver import SolveConfig
from selfsim.conf import default, setting

from .exceptions import BadValue, MissingKey, UnreadableConfig

logger = logging.getLogger(__name__)

OPTIONAL = object()


def _floats(value):
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise TypeError('expected a list of numbers')
    return tuple(_float(v) for v in value)


def _float(value):
    if isinstance(value, bool):
        raise TypeError('expected a number, got a boolean')
    return float(value)


def _int(value):
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise TypeError(f'expected an integer, got {value!r}')
    return int(value)


def _bool(value):
    if not isinstance(value, bool):
        raise TypeError(f'expected true or false, got {value!r}')
    return value


def _str(value):
    if not isinstance(value, str):
        raise TypeError(f'expected a string, got {value!r}')
    return value


# section -> key -> (parser, default); OPTIONAL marks keys that may be null.
# A null solve.damping picks 1 or 0.5 from the size of the datum.
SCHEMA: Dict[str, Dict[str, Tuple[Any, Any]]] = {
    'datum': {
        'velocity_potential': (_str, 'axial'),
        'deformation_potential': (_str, 'axial'),
        'amplitude': (_float, None),
        'deformation_ratio': (_float, 1.0),
        'trace_file': (_str, OPTIONAL),
    },
    'grid': {
        'half_width': (_float, default('half_width', 16.0)),
        'n': (_int, default('n', 64)),
        'origin_mask_radius': (_float, OPTIONAL),
        'sphere_polar': (_int, default('sphere_polar', 32)),
        'sphere_azimuth': (_int, default('sphere_azimuth', 64)),
        'duhamel_nodes': (_int, default('duhamel_nodes', 64)),
    },
    'solve': {
        'gamma': (_float, default('gamma', 0.5)),
        'sigma_schedule': (_floats, (0.0, 0.5, 1.0)),
        'damping': (_float, OPTIONAL),
        'tol_fixed_point': (_float, default('tol_fixed_point', 1e-8)),
        'max_iters': (_int, default('max_iters', 30)),
        'anderson_depth': (_int, default('anderson_depth', 0)),
        'norm_ceiling': (_float, default('norm_ceiling', 1e3)),
        'max_bisections': (_int, 3),
    },
    'evolve': {
        't0': (_float, default('t0', 1.0)),
        't1': (_float, default('t1', 2.0)),
        'dt': (_float, default('dt', 0.01)),
        'picard_iters': (_int, 8),
        'picard_tol': (_float, 1e-12),
        'dt_floor': (_float, 1e-6),
        'lebesgue_m': (_float, default('lebesgue_m', 3.0)),
        'window': (_float, OPTIONAL),
        'trials': (_int, 3),
        'monitor': (_bool, True),
    },
    'output': {
        'directory': (_str, 'runs'),
        'seed': (_int, 0),
        'workers': (_int, 1),
    },
}

REQUIRED = (('datum', 'amplitude'),)


@dataclass(frozen=True)
class RunConfig:
    datum: DatumSpec
    grid: GridSpec
    gamma: float
    solve: SolveConfig
    evolve: EvolveConfig
    t0: float = 1.0
    t1: float = 2.0
    output: str = 'runs'
    seed: int = 0
    workers: int = 1

    @property
    def sigma(self) -> float:
        """Final sigma of the continuation"""
        return self.solve.sigma_schedule[-1]

    def with_overrides(self, output: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                       workers: Optional[int] = None) -> 'RunConfig':
        """Apply command-line flags on top of the file"""
        cfg = self
        if output is not None:
            cfg = replace(cfg, output=str(output))
        if seed is not None:
            if seed < 0:
                raise BadValue('seed must be nonnegative', key='--seed')
            cfg = replace(cfg, seed=int(seed), evolve=replace(cfg.evolve, seed=int(seed)))
        if workers is not None:
            if workers < 1:
                raise BadValue('workers must be at least 1', key='--workers')
            cfg = replace(cfg, workers=int(workers))
        return cfg

    def as_sections(self) -> Dict[str, Dict[str, Any]]:
        """The config as the nested mapping its YAML holds"""
        grid = {f.name: getattr(self.grid, f.name) for f in fields(self.grid) if f.init}
        solve = asdict(self.solve)
        solve.pop('duhamel_tol', None)
        evolve = {key: getattr(self.evolve, key) for key in SCHEMA['evolve'] if hasattr(self.evolve, key)}
        sections = {
            'datum': asdict(self.datum),
            'grid': grid,
            'solve': dict(gamma=self.gamma, **solve),
            'evolve': dict(evolve, t0=self.t0, t1=self.t1),
            'output': {'directory': self.output, 'seed': self.seed, 'workers': self.workers},
        }
        return {
            section: {key: _plain(sections[section][key]) for key in SCHEMA[section]}
            for section in SCHEMA
        }


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def emit_config(cfg: RunConfig) -> str:
    """Canonical YAML of a config; the run's config hash is taken over this text"""
    return yaml.safe_dump(cfg.as_sections(), sort_keys=False, default_flow_style=False)


def _line_numbers(text: str) -> Dict[Tuple[str, ...], int]:
    """1-based line of every section and section key"""
    root = yaml.compose(text, Loader=yaml.SafeLoader)
    lines: Dict[Tuple[str, ...], int] = {}
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key_node, value_node in root.value:
        lines[(key_node.value,)] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for inner_key, _ in value_node.value:
                lines[(key_node.value, inner_key.value)] = inner_key.start_mark.line + 1
    return lines


def environment_overrides(environ=None) -> Dict[Tuple[str, str], Any]:
    """(section, key) -> value for every SELFSIM_<SECTION>__<KEY> variable naming a known section"""
    environ = os.environ if environ is None else environ
    prefix = setting('SELFSIM_ENV_PREFIX', 'SELFSIM_')
    overrides = {}
    for name in sorted(environ):
        if not name.startswith(prefix) or '__' not in name:
            continue
        section, key = name[len(prefix):].lower().split('__', 1)
        if section not in SCHEMA:
            continue
        try:
            overrides[(section, key)] = yaml.safe_load(environ[name])
        except yaml.YAMLError as e:
            raise BadValue(f'cannot parse the value of {name}: {e}', key=name) from e
    return overrides


class _Reader:
    """Typed access to the raw sections with key and line in every error"""

    def __init__(self, raw: Dict[str, Any], lines: Dict[Tuple[str, ...], int], env: Dict[Tuple[str, str], Any]):
        self.raw = raw
        self.lines = lines
        self.env = env

    def where(self, section: str, key: Optional[str] = None):
        name = f'{section}.{key}' if key else section
        if key and (section, key) in self.env:
            return name, None
        return name, self.lines.get((section, key) if key else (section,))

    def section(self, section: str) -> Dict[str, Any]:
        values = self.raw.get(section)
        if values is None:
            values = {}
        if not isinstance(values, dict):
            name, line = self.where(section)
            raise BadValue('expected a mapping of keys', key=name, line=line)
        values = dict(values)
        for (env_section, key), value in self.env.items():
            if env_section == section:
                values[key] = value

        unknown = sorted(set(values) - set(SCHEMA[section]))
        if unknown:
            name, line = self.where(section, unknown[0])
            raise BadValue(f'unknown key, expected one of {", ".join(SCHEMA[section])}', key=name, line=line)

        parsed = {}
        for key, (parse, fallback) in SCHEMA[section].items():
            name, line = self.where(section, key)
            value = values.get(key)
            if value is None:
                if fallback is OPTIONAL:
                    parsed[key] = None
                    continue
                if fallback is None:
                    raise MissingKey('required key is missing', key=name, line=line or self.lines.get((section,)))
                value = fallback
            try:
                parsed[key] = parse(value)
            except (TypeError, ValueError) as e:
                raise BadValue(str(e), key=name, line=line) from e
        return parsed

    def build(self, section: str, factory, **kwargs):
        name, line = self.where(section)
        try:
            return factory(**kwargs)
        except ValueError as e:
            raise BadValue(str(e), key=name, line=line) from e


def load_config(text: str, source: str = '<config>', environ=None) -> RunConfig:
    """Parse and validate config text; `source` only names the input in messages"""
    try:
        raw = yaml.safe_load(text)
        lines = _line_numbers(text)
    except yaml.YAMLError as e:
        raise UnreadableConfig(f'{source} is not valid YAML: {e}') from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise UnreadableConfig(f'{source} must hold a mapping of sections')

    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise BadValue(f'unknown section, expected one of {", ".join(SCHEMA)}',
                       key=unknown[0], line=lines.get((unknown[0],)))
    env = environment_overrides(environ)
    for section, key in REQUIRED:
        if section not in raw and (section, key) not in env:
            raise MissingKey('required section is missing', key=section)

    reader = _Reader(raw, lines, env)
    datum = reader.section('datum')
    grid = reader.section('grid')
    solve = reader.section('solve')
    evolve = reader.section('evolve')
    output = reader.section('output')

    for family in ('velocity_potential', 'deformation_potential'):
        if datum[family] not in POTENTIAL_FAMILIES:
            name, line = reader.where('datum', family)
            raise BadValue(f'unknown potential family {datum[family]!r}, expected one of '
                           f'{", ".join(POTENTIAL_FAMILIES)}', key=name, line=line)
    if datum['amplitude'] < 0:
        name, line = reader.where('datum', 'amplitude')
        raise BadValue('amplitude must be nonnegative', key=name, line=line)
    if datum['trace_file'] and not Path(datum['trace_file']).is_file():
        name, line = reader.where('datum', 'trace_file')
        raise UnreadableConfig(f'trace file {datum["trace_file"]} does not exist', key=name, line=line)

    gamma = solve.pop('gamma')
    if not 0.0 < gamma <= 1.0:
        name, line = reader.where('solve', 'gamma')
        raise BadValue('gamma must lie in (0,1]', key=name, line=line)

    t0, t1 = evolve.pop('t0'), evolve.pop('t1')
    if not 0.0 < t0 < t1:
        name, line = reader.where('evolve', 't1')
        raise BadValue(f'need 0 < t0 < t1, got t0={t0}, t1={t1}', key=name, line=line)

    for key in ('seed', 'workers'):
        if output[key] < (1 if key == 'workers' else 0):
            name, line = reader.where('output', key)
            raise BadValue(f'{key} out of range: {output[key]}', key=name, line=line)

    grid_spec = reader.build('grid', GridSpec, **grid)
    if grid_spec.n & (grid_spec.n - 1):
        logger.warning(f'n={grid_spec.n} is not a power of two; FFTs will be slower')

    return RunConfig(
        datum=reader.build('datum', DatumSpec, **datum),
        grid=grid_spec,
        gamma=gamma,
        solve=reader.build('solve', SolveConfig, **solve),
        evolve=reader.build('evolve', EvolveConfig, seed=output['seed'], **evolve),
        t0=t0,
        t1=t1,
        output=output['directory'],
        seed=output['seed'],
        workers=output['workers'],
    )


def parse_config(path: Union[str, Path], environ=None) -> RunConfig:
    """Read a YAML run config; errors name the offending key and line"""
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadableConfig(f'cannot read {path}: {e}') from e
    return load_config(text, str(path), environ)
