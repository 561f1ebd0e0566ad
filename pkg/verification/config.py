"""
Run configuration: a JSON config file, overridden by command-line flags,
with every remaining default taken from the Django settings.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Optional

from django.conf import settings

from . import __version__
from .catalog import (
    Dilation,
    Ellipsoid,
    GraphPatch,
    Inversion,
    MobiusTransform,
    Sphere,
    TorusOfRevolution,
    Translation,
    mobius_apply,
)
from .energies import get_preset
from .exceptions import ConfigError, DomainError
from .identities import HELD_OUT, SECTIONS, default_family
from .noether import get_lagrangian

logger = logging.getLogger(__name__)

COMMANDS = ('energy', 'invariants', 'verify', 'discover', 'noether', 'exterior-suite', 'report')
DEFAULT_SURFACES = ('sphere:1', 'torus:2,1', 'ellipsoid:1,1.3,0.8,1.1,0.9')
SURFACE_SEPARATOR = ';'
MIN_GRID = 4

COMMON_KEYS = {'seed', 'grid', 'chunk_size', 'tolerance', 'out', 'csv', 'runs_dir'}
ALLOWED_KEYS = {
    'energy': COMMON_KEYS | {'surfaces', 'preset', 'acceptance'},
    'invariants': {'seed', 'surfaces', 'random_points', 'csv'},
    'verify': COMMON_KEYS | {'surfaces', 'random_points', 'exterior_samples', 'variation', 'variation_grid',
                             'sections', 'acceptance'},
    'discover': COMMON_KEYS | {'family', 'held_out'},
    'noether': COMMON_KEYS | {'surfaces', 'lagrangian', 'random_points', 'variation', 'variation_grid'},
    'exterior-suite': COMMON_KEYS | {'exterior_samples'},
    'report': {'runs_dir'},
}
# output locations do not change the computation
UNHASHED_KEYS = ('out', 'csv', 'runs_dir')


# surfaces


def _numbers(text, count=None, what='surface'):
    try:
        values = tuple(float(x) for x in text.split(',')) if text else ()
    except ValueError:
        raise ConfigError(f"Malformed numbers {text!r} in {what}")
    if count is not None and len(values) != count:
        raise ConfigError(f"{what} needs {count} numbers, got {len(values)} in {text!r}")
    return values


def _base_surface(text):
    head, _, tail = text.partition(':')
    head = head.strip().lower()
    if head == 'sphere':
        return Sphere(*_numbers(tail, 1, 'sphere:rho'))
    if head == 'ellipsoid':
        return Ellipsoid(_numbers(tail, 5, 'ellipsoid:a1,..,a5'))
    if head == 'torus':
        return TorusOfRevolution(*_numbers(tail, 2, 'torus:R,r'))
    if head == 'graph':
        return GraphPatch(*_numbers(tail, 1, 'graph:amplitude')) if tail else GraphPatch()
    raise ConfigError(f"Unknown surface {text!r}; use sphere:, ellipsoid:, torus: or graph")


def _generator(text):
    head, _, tail = text.partition(':')
    if head == 'inv':
        return Inversion(_numbers(tail, 5, '@inv:c1,..,c5'))
    if head == 'dil':
        return Dilation(*_numbers(tail, 1, '@dil:s'))
    if head == 'tr':
        return Translation(_numbers(tail, 5, '@tr:v1,..,v5'))
    raise ConfigError(f"Unknown Moebius generator @{text!r}; use @inv:, @dil: or @tr:")


def parse_surface(text):
    """``torus:2,1@inv:0,0,0,0,6@dil:1.7`` and the like; generators apply left to right."""
    base, *suffixes = text.strip().split('@')
    try:
        spec = _base_surface(base)
        if suffixes:
            spec = mobius_apply(MobiusTransform(tuple(_generator(s) for s in suffixes)), spec)
    except (ValueError, DomainError) as e:
        raise ConfigError(f"Invalid surface {text!r}: {e}")
    return spec


def surface_strings(value):
    """Normalise a surface list (string separated by ';' or list) and expand ``default``."""
    if value is None:
        return ()
    items = value.split(SURFACE_SEPARATOR) if isinstance(value, str) else list(value)
    out = []
    for item in items:
        item = str(item).strip()
        if not item:
            continue
        out.extend(DEFAULT_SURFACES if item == 'default' else (item,))
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    command: str
    surfaces: tuple = DEFAULT_SURFACES
    preset: Optional[str] = None
    lagrangian: Optional[str] = None
    grid: int = 32
    seed: int = 20240601
    tolerance: Optional[float] = None
    random_points: int = 100
    exterior_samples: int = 500
    variation: bool = False
    variation_grid: int = 12
    chunk_size: int = 2048
    sections: tuple = SECTIONS
    family: tuple = ('default',)
    held_out: tuple = ()
    out: Optional[str] = None
    csv: Optional[str] = None
    runs_dir: Optional[str] = None

    @cached_property
    def surface_specs(self):
        return [parse_surface(text) for text in self.surfaces]

    @cached_property
    def family_specs(self):
        specs = []
        for text in self.family:
            specs.extend(default_family(self.seed) if text == 'default' else [parse_surface(text)])
        return specs

    @cached_property
    def held_out_specs(self):
        return [parse_surface(text) for text in self.held_out] if self.held_out else list(HELD_OUT)

    @property
    def runs_path(self):
        return Path(self.runs_dir or settings.VERIFY_RUNS_DIR)

    def identity(self):
        """Fields that determine the computed values."""
        data = asdict(self)
        for key in UNHASHED_KEYS:
            data.pop(key)
        data['version'] = __version__
        return data


def config_hash(config):
    canonical = json.dumps(config.identity(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


# loading


def read_config_file(path):
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return {key.replace('-', '_'): value for key, value in data.items()}


def _defaults(command):
    return {
        'grid': settings.VERIFY_DISCOVERY_GRID if command == 'discover' else settings.VERIFY_GRID,
        'seed': settings.VERIFY_SEED,
        'random_points': settings.VERIFY_RANDOM_POINTS,
        'exterior_samples': settings.VERIFY_EXTERIOR_SAMPLES,
        'variation_grid': settings.VERIFY_VARIATION_GRID,
        'chunk_size': settings.VERIFY_CHUNK_SIZE,
    }


def _integer(values, key, minimum):
    try:
        value = int(values[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {values[key]!r}")
    if value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {value}")
    return value


def _validate(command, values):
    for key, minimum in (('grid', MIN_GRID), ('random_points', 1), ('exterior_samples', 1),
                         ('variation_grid', MIN_GRID), ('chunk_size', 1)):
        if key in values:
            values[key] = _integer(values, key, minimum)
    if 'seed' in values:
        values['seed'] = _integer(values, 'seed', 0)
    if values.get('tolerance') is not None:
        try:
            values['tolerance'] = float(values['tolerance'])
        except (TypeError, ValueError):
            raise ConfigError(f"tolerance must be a number, got {values['tolerance']!r}")
        if not values['tolerance'] > 0:
            raise ConfigError(f"tolerance must be positive, got {values['tolerance']}")
    for key in ('surfaces', 'family', 'held_out'):
        if key in values:
            values[key] = surface_strings(values[key])
    if 'family' in values and not values['family']:
        values['family'] = ('default',)
    if 'sections' in values:
        sections = values['sections']
        sections = tuple(s.strip() for s in sections.split(',')) if isinstance(sections, str) else tuple(sections)
        unknown = sorted(set(sections) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown sections {unknown}; choose from {list(SECTIONS)}")
        values['sections'] = tuple(s for s in SECTIONS if s in sections)
    if 'variation' in values:
        values['variation'] = bool(values['variation'])

    if command == 'energy' and not values.get('preset'):
        raise ConfigError("energy needs a preset (--preset)")
    if values.get('preset'):
        get_preset(values['preset'])
    if values.get('lagrangian'):
        get_lagrangian(values['lagrangian'])
    elif command == 'noether':
        raise ConfigError("noether needs a Lagrangian (--lagrangian)")
    return values


def load_run_config(command, options=None, config_file=None):
    """RunConfig for ``command``: settings defaults < config file < flags."""
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command {command!r}; choose one of {list(COMMANDS)}")
    allowed = ALLOWED_KEYS[command]
    values = {key: value for key, value in _defaults(command).items() if key in allowed}
    explicit = {}

    if config_file:
        from_file = read_config_file(config_file)
        unknown = sorted(set(from_file) - allowed)
        if unknown:
            raise ConfigError(f"Unknown keys for {command}: {unknown}; allowed {sorted(allowed)}")
        explicit.update(from_file)

    for key, value in (options or {}).items():
        if key in allowed and value is not None:
            explicit[key] = value

    values.update(explicit)
    # acceptance runs integrate on the finer grid unless one is given
    if values.pop('acceptance', False) and 'grid' not in explicit:
        values['grid'] = settings.VERIFY_ACCEPTANCE_GRID

    values = _validate(command, values)
    known = {f.name for f in fields(RunConfig)}
    config = RunConfig(command=command, **{k: v for k, v in values.items() if k in known})
    for attribute, key in (('surface_specs', 'surfaces'), ('family_specs', 'family'),
                           ('held_out_specs', 'held_out')):
        if key in allowed:
            getattr(config, attribute)
    logger.debug(f"Loaded {command} config {config_hash(config)[:16]}")
    return config
