"""
Experiment Configuration Module

Loads INI experiment configs ([boundary], [run] and one section per
command), applies command-line overrides and validates every section.
The canonical form is sorted-key compact JSON; its SHA-256 is the config
hash that keys the result cache.
"""

import configparser
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from simulation.boundary import BoundaryFunction, BoundaryKind, load_tabulated, make_family
from simulation.conf import get_simulation_setting
from simulation.exceptions import ConfigurationError
from simulation.random_streams import StreamFactory

from .serializers import BoundarySerializer, COMMAND_SERIALIZERS, RunSerializer

logger = logging.getLogger(__name__)

# [run] keys that never change results
HASH_EXCLUDED_RUN_KEYS = ('workers', 'out', 'cache')


def _file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _format_errors(section: str, errors: Dict) -> str:
    parts = []
    for key, messages in errors.items():
        text = '; '.join(str(m) for m in messages) if isinstance(messages, list) else str(messages)
        parts.append(f"[{section}] {key}: {text}")
    return ', '.join(parts)


def _validate(section: str, serializer_class, data: Dict) -> Dict:
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise ConfigurationError(f"invalid config: {_format_errors(section, serializer.errors)}")
    unknown = sorted(set(data) - set(serializer.fields))
    if unknown:
        raise ConfigurationError(f"invalid config: [{section}] unknown keys {', '.join(unknown)}")
    return dict(serializer.validated_data)


@dataclass
class ExperimentConfig:
    """Validated experiment config for one command"""
    command: str
    boundary: Dict
    run: Dict
    params: Dict
    source: Optional[str] = None
    table_checksum: Optional[str] = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return int(self.run['seed'])

    @property
    def workers(self) -> int:
        return int(self.run['workers'])

    @property
    def output_dir(self) -> Path:
        return Path(self.run['out'])

    @property
    def use_cache(self) -> bool:
        return bool(self.run['cache'])

    def canonical(self) -> Dict:
        """Everything that determines the outputs"""
        boundary = dict(self.boundary)
        if self.table_checksum:
            boundary['table_sha256'] = self.table_checksum
        return {
            'command': self.command,
            'boundary': boundary,
            'run': {k: v for k, v in self.run.items() if k not in HASH_EXCLUDED_RUN_KEYS},
            self.command: self.params,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(',', ':'), allow_nan=True)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()

    def to_dict(self) -> Dict:
        data = self.canonical()
        data['run'] = dict(self.run)
        return data

    def streams(self) -> StreamFactory:
        """Root random stream of this experiment"""
        return StreamFactory(seed=self.seed, stream=self.command)

    def build_boundary(self) -> BoundaryFunction:
        """Boundary of the [boundary] section"""
        spec = self.boundary
        if spec['family'] == BoundaryKind.TABULATED.value:
            return load_tabulated(
                spec['table'], tail_exponent=spec['tail_exponent'], horizon=spec['horizon']
            )
        return make_family(spec['family'], spec['parameter'], f0=spec['f0'], horizon=spec['horizon'])


def parse_overrides(items: Sequence[str]) -> List[tuple]:
    """'section.key=value' strings as (section, key, value)"""
    parsed = []
    for item in items or []:
        target, sep, value = item.partition('=')
        section, dot, key = target.strip().partition('.')
        if not sep or not dot or not section or not key:
            raise ConfigurationError(f"bad override '{item}', expected section.key=value")
        parsed.append((section, key.strip(), value.strip()))
    return parsed


def read_config_file(path: Optional[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if path is None:
        return parser
    if not Path(path).is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        parser.read(path, encoding='utf-8')
    except configparser.Error as e:
        raise ConfigurationError(f"cannot parse {path}: {e}")
    return parser


def load_experiment_config(
    command: str,
    path: Optional[str] = None,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    out: Optional[str] = None,
    cache: Optional[bool] = None,
) -> ExperimentConfig:
    """
    Build the validated config of one command.

    Precedence: explicit flags > --set overrides > config file > defaults.

    Args:
        command: Command name (classify, survival, ...)
        path: INI config file
        overrides: 'section.key=value' strings
        seed: --seed
        workers: --workers
        out: --out
        cache: False for --no-cache

    Returns:
        ExperimentConfig

    Raises:
        ConfigurationError: unreadable file, unknown keys or invalid values
    """
    if command not in COMMAND_SERIALIZERS:
        raise ConfigurationError(f"unknown command '{command}'")
    parser = read_config_file(path)
    for section, key, value in parse_overrides(overrides):
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)

    known = {'boundary', 'run'} | set(COMMAND_SERIALIZERS)
    stray = sorted(set(parser.sections()) - known)
    if stray:
        raise ConfigurationError(f"invalid config: unknown sections {', '.join(stray)}")
    if not parser.has_section('boundary'):
        raise ConfigurationError("invalid config: missing [boundary] section")

    run = dict(parser.items('run')) if parser.has_section('run') else {}
    run.setdefault('seed', get_simulation_setting('DEFAULT_SEED'))
    run.setdefault('workers', get_simulation_setting('DEFAULT_WORKERS'))
    run.setdefault('out', get_simulation_setting('OUTPUT_DIR'))
    for key, value in (('seed', seed), ('workers', workers), ('out', out), ('cache', cache)):
        if value is not None:
            run[key] = value

    params = dict(parser.items(command)) if parser.has_section(command) else {}
    config = ExperimentConfig(
        command=command,
        boundary=_validate('boundary', BoundarySerializer, dict(parser.items('boundary'))),
        run=_validate('run', RunSerializer, run),
        params=_validate(command, COMMAND_SERIALIZERS[command], params),
        source=str(path) if path else None,
    )
    if config.boundary['family'] == BoundaryKind.TABULATED.value:
        table = Path(config.boundary['table'])
        if not table.is_file():
            raise ConfigurationError(f"boundary table not found: {table}")
        config.table_checksum = _file_sha256(table)

    logger.debug(f"Loaded {command} config {config.config_hash[:12]} from {path or 'flags'}")
    return config
