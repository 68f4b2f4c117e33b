'''
    Loads conf.yml parameters as environment variables.

    Every SECTION: PARAM: value entry of conf.yml is exported as the
    environment variable SECTION_PARAM (variables already set in the
    environment win). The file can be redirected with CLFSTAB_CONF.

    Methods:
    --------
    load(path): Load a YAML configuration file into the environment.

    get_float(name, default), get_int(name, default), get_bool(name, default),
    get_str(name, default): Typed getters that warn and fall back to default
    when the parameter is invalid or missing.
'''


from os import environ, getenv
from os.path import dirname, abspath, isfile
from logging import warning
from yaml import safe_load

from clfstab.errors import ConfigError


ROOT_PATH = dirname(dirname(abspath(__file__)))
CONF = getenv('CLFSTAB_CONF', ROOT_PATH + '/conf.yml')


def load(path: str = CONF, override: bool = False):
    '''
        Load a YAML configuration file into the environment.

        Raises ConfigError if the file cannot be parsed.
    '''

    try:
        with open(path, 'r') as f:
            config = safe_load(f) or {}
        for sect, params in config.items():
            for param, value in (params or {}).items():
                if value is None:
                    continue
                key = sect + '_' + str(param)
                if override or key not in environ:
                    environ[key] = str(value)
    except Exception as e:
        raise ConfigError('cannot load %s (%s: %s)' % (
            path, e.__class__.__name__, e)) from e


def _get(name: str, default, cast):
    raw = getenv(name, None)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError):
        warning(' *** WARNING in config: %s parameter invalid in conf.yml. '
                'Defaulting to %s.', name.replace('_', ':', 1), default)
        return default


def get_float(name: str, default: float) -> float:
    return _get(name, default, float)


def get_int(name: str, default: int) -> int:
    return _get(name, default, lambda v: int(float(v)))


def _to_bool(raw: str) -> bool:
    if raw.strip().lower() in ('true', '1', 'yes', 'on'):
        return True
    if raw.strip().lower() in ('false', '0', 'no', 'off'):
        return False
    raise ValueError(raw)


def get_bool(name: str, default: bool) -> bool:
    return _get(name, default, _to_bool)


def get_str(name: str, default: str) -> str:
    return _get(name, default, str)


if isfile(CONF):
    load(CONF)
