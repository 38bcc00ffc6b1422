import json
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from clusterFX.errors import ConfigError
from clusterFX.Book.instruments import InstrumentSpec, markets, rate_to_ticks
from clusterFX.Flow.agents import AgentMix, SignPersistence, VolumeModel
from clusterFX.Flow.arrivals import ArrivalModel

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'Configs'
OUTPUT_ENV = 'CLUSTERFX_OUTPUT'
SECONDS_PER_DAY = 86400


@dataclass
class PipelineConfig:
    name: str
    instrument: InstrumentSpec
    agents: AgentMix
    arrivals: ArrivalModel
    volumes: VolumeModel
    signs: SignPersistence
    seed_price: int
    duration: float = SECONDS_PER_DAY
    seed: int = 0
    outputs: str = 'output'
    include_total_volume: bool = True
    emit_svg: bool = False

    @property
    def n_slices(self) -> int:
        return int(round(self.duration * 10))

    def validate(self):
        '''Checks every section and raises ConfigError naming the first offending field.'''
        self.agents.validate('agents')
        self.arrivals.validate('arrivals')
        self.volumes.validate('volumes')
        self.signs.validate('signs')
        if not isinstance(self.seed_price, int) or self.seed_price <= self.instrument.pip_in_ticks:
            raise ConfigError('seed_price', f'the seed price must be a whole number of ticks above one pip, got {self.seed_price!r}')
        if not self.duration > 0:
            raise ConfigError('duration', f'the duration must be strictly positive, got {self.duration!r}')
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError('seed', f'the seed must be a nonnegative integer, got {self.seed!r}')
        return self


def _section(cls, values:dict, prefix:str):
    if not isinstance(values, dict):
        raise ConfigError(prefix, f'expected an object, got {type(values).__name__}')
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f'{prefix}.{key}', f'unknown field, expected one of {sorted(known)}')
    try:
        return cls(**values)
    except (TypeError, ValueError) as err:
        raise ConfigError(prefix, str(err))


def _instrument(value) -> InstrumentSpec:
    if isinstance(value, str):
        value = {'key': value}
    if not isinstance(value, dict):
        raise ConfigError('instrument', 'expected a registry key or an object')
    value = dict(value)
    key = value.pop('key', None)
    base = {}
    if key is not None:
        if key not in markets:
            raise ConfigError('instrument.key', f'unknown instrument {key!r}, known: {sorted(markets)}')
        base = dict(markets[key])
    base.update(value)
    known = {f.name for f in fields(InstrumentSpec)}
    for name in known:
        if name not in base and name != 'min_quote_life':
            raise ConfigError(f'instrument.{name}', 'missing field')
    for name in base:
        if name not in known:
            raise ConfigError(f'instrument.{name}', 'unknown field')
    checks = {
        'tick_value': lambda v: v > 0,
        'pip_in_ticks': lambda v: v in (1, 10),
        'reference_price': lambda v: v > 0,
        'min_quote_life': lambda v: v >= 0,
    }
    for name, check in checks.items():
        if name in base and not check(base[name]):
            raise ConfigError(f'instrument.{name}', f'invalid value {base[name]!r}')
    return InstrumentSpec(**base)


def config_from_dict(data:dict, **overrides) -> PipelineConfig:
    '''This function builds and validates a PipelineConfig from a parsed JSON document.

    :param data: The parsed document.
    :param overrides: Top-level fields (seed, duration, outputs, ...) replacing the document values.
    :return: The validated PipelineConfig.
    '''
    assert isinstance(data, dict), 'The (data) parameter must be a dict parsed from a JSON config.'
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    required = ('instrument', 'agents', 'arrivals', 'volumes', 'signs')
    for name in required:
        if name not in data:
            raise ConfigError(name, 'missing section')
    spec = _instrument(data.pop('instrument'))
    sections = {
        'agents': _section(AgentMix, data.pop('agents'), 'agents'),
        'arrivals': _section(ArrivalModel, data.pop('arrivals'), 'arrivals'),
        'volumes': _section(VolumeModel, data.pop('volumes'), 'volumes'),
        'signs': _section(SignPersistence, data.pop('signs'), 'signs'),
    }
    data.setdefault('name', spec.name)
    data.setdefault('seed_price', spec.reference_ticks)
    known = {f.name for f in fields(PipelineConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, 'unknown field')
    config = PipelineConfig(instrument=spec, **sections, **data)
    return config.validate()


def config_path(name:str) -> Path:
    '''Resolves (name) to a config file: an existing path, or the name of a packaged config.'''
    path = Path(name)
    if path.exists():
        return path
    packaged = CONFIG_DIR / (name if name.endswith('.json') else f'{name}.json')
    if packaged.exists():
        return packaged
    raise ConfigError('config', f'no config file {name!r} (packaged configs: {sorted(p.name for p in CONFIG_DIR.glob("*.json"))})')


def load_config(name:str, **overrides) -> PipelineConfig:
    '''This function reads a JSON config file (or a packaged config by name) and validates it. The output
    directory is taken, in order, from the (outputs) override, the CLUSTERFX_OUTPUT environment variable and the
    file itself.

    :param name: A path or the name of a packaged config such as 'eurusd_decimal'.
    :return: The validated PipelineConfig.
    '''
    path = config_path(name)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError('config', f'{path} is not valid JSON: {err}')
    if overrides.get('outputs') is None and os.environ.get(OUTPUT_ENV):
        overrides['outputs'] = os.environ[OUTPUT_ENV]
    config = config_from_dict(data, **overrides)
    logger.info('Loaded config %s from %s (seed %d, %.0f s).', config.name, path, config.seed, config.duration)
    return config


def with_regime(config:PipelineConfig, regime:str) -> PipelineConfig:
    '''Returns (config) moved to the pip or decimal pricing regime of its instrument. Prices are rescaled through
    the reference exchange rate. The agent mix comes from the packaged config of the target regime when one exists
    (eurusd_decimal to eurusd_pip); every other parameter is kept.'''
    assert regime in ('pip', 'decimal'), 'The (regime) parameter must be "pip" or "decimal".'
    key = f'{config.instrument.name} {regime}'
    if key not in markets:
        raise ConfigError('instrument', f'no {regime} regime registered for {config.instrument.name}')
    spec = InstrumentSpec(**markets[key])
    if spec == config.instrument:
        return config
    other = 'decimal' if regime == 'pip' else 'pip'
    name = config.name.replace(other, regime) if other in config.name else f'{config.name}_{regime}'
    packaged = CONFIG_DIR / f'{name}.json'
    if packaged.exists():
        agents = _section(AgentMix, json.loads(packaged.read_text()).get('agents', {}), 'agents')
        logger.info('Taking the %s agent mix from %s.', regime, packaged.name)
    else:
        agents = replace(config.agents, half_pip_prob=0.0) if regime == 'pip' else config.agents
    return replace(config, name=name, instrument=spec, agents=agents,
                   seed_price=rate_to_ticks(spec.reference_price, spec)).validate()
