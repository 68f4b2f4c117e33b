'''
    Shared helpers: thread pool sizing, order-preserving parallel map, vector
    validation and artifact writers (CSV through pandas, canonical JSON).
'''


from os import getenv
from json import dumps
from math import isfinite
from concurrent.futures import ThreadPoolExecutor
from logging import warning

import numpy as np
import pandas as pd
from psutil import cpu_count

from clfstab.consts import CSV_FLOAT_FORMAT
from clfstab.errors import DimensionMismatch, InvalidParams
from clfstab import config


def get_threads() -> int:
    '''
        Number of worker threads: CLFSTAB_THREADS, else RUN:THREADS, else
        the number of physical cores.
    '''

    raw = getenv('CLFSTAB_THREADS', None)
    threads = 0
    if raw is not None:
        try:
            threads = int(raw)
        except ValueError:
            warning(' *** WARNING in utils: CLFSTAB_THREADS invalid (%s). '
                    'Ignoring it.', raw)
    if threads <= 0:
        threads = config.get_int('RUN_THREADS', 0)
    if threads <= 0:
        threads = cpu_count(logical=False) or cpu_count() or 1
    return max(1, threads)


def parallel_map(fn, items, threads: int = None) -> list:
    '''
        Applies fn to every item; results keep the order of items.
    '''

    items = list(items)
    threads = get_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def as_vector(value, dim: int, what: str = 'vector') -> np.ndarray:
    '''
        Converts value to a float vector of length dim.

        Raises DimensionMismatch if the length differs.
    '''

    vec = np.atleast_1d(np.asarray(value, dtype=float)).reshape(-1)
    if vec.shape[0] != dim:
        raise DimensionMismatch('%s has dimension %d, expected %d' % (
            what, vec.shape[0], dim), expected=dim, got=int(vec.shape[0]))
    return vec


def parse_vector(text: str) -> np.ndarray:
    '''
        Comma-separated floats: "1,0.5".

        Raises InvalidParams on malformed text.
    '''

    try:
        return np.array([float(v) for v in str(text).split(',')
                         if v.strip()])
    except ValueError:
        raise InvalidParams('malformed vector %r' % text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, 'as_dict'):
        return obj.as_dict()
    raise TypeError('%s is not JSON serializable' % type(obj).__name__)


def _finite(obj):
    # JSON has no inf/nan: they are written as strings
    if isinstance(obj, float) and not isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    plain = _json_default(obj) if not isinstance(
        obj, (dict, list, str, int, float, bool, type(None))) else obj
    plain = _finite(_to_plain(plain))
    return dumps(plain, sort_keys=True, indent=2) + '\n'


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, (np.ndarray, np.generic)) or hasattr(obj, 'as_dict'):
        return _to_plain(_json_default(obj))
    return obj


def write_text(path: str, text: str):
    with open(path, 'w', newline='\n') as f:
        f.write(text)


def write_csv(frame: pd.DataFrame, path: str = None):
    '''
        Writes frame with 17 significant digits and LF line endings. Returns
        the CSV text when path is None.
    '''

    return frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT,
                        lineterminator='\n')
