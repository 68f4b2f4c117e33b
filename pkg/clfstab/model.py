'''
    Base model class shared by every report and value object that is written
    as a JSON or CSV artifact.

    Classes:
    --------
    Model: Base class for all model classes.
'''


from copy import copy
from json import loads

import numpy as np


class Model:
    '''
        Base class for all model classes.

        Methods:
        --------
        as_dict(flat): Converts object to dictionary and returns it. If flat
        is False, nested objects will become nested dictionaries; otherwise,
        all attributes in nested objects will be in root dictionary.

        from_dict(d): Rebuilds an object from the output of as_dict.

        to_json(): JSON text of as_dict() (sorted keys, numpy aware).

        from_json(text): Inverse of to_json().
    '''

    # attributes never serialized (callables, caches, locks)
    _transient = ()

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        '''
            Converts object to a dictionary and returns it. If flat is False,
            nested objects will become nested dictionaries; otherwise, all
            attributes in nested objects will be in root dictionary.

            To avoid name conflicts when flat is True, nested attribute name
            will be prefixed: <parent_attribute_name>_<nested_attribute_name>
            (example: sandwich_lower will hold sandwich.lower).
        '''

        if flat and _prefix:
            _prefix += '_'
        d = {}
        for key, val in self.__dict__.items():
            if key.startswith('_') or key in self._transient:
                continue
            if isinstance(val, Model):
                if flat:
                    d.update(val.as_dict(flat, _prefix=_prefix + key))
                    continue
                val = val.as_dict()
            else:
                val = _plain(val)
            d[_prefix + str(key)] = val
        return d

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)

    def to_json(self):
        from clfstab.utils import dumps_json
        return dumps_json(self.as_dict())

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(loads(text))

    def __eq__(self, other):
        return (type(self) is type(other)
                and self.to_json() == other.to_json())

    def __hash__(self):
        return hash(self.to_json())


def _plain(val):
    if isinstance(val, Model):
        return val.as_dict()
    if isinstance(val, np.ndarray):
        return val.tolist()
    if isinstance(val, np.generic):
        return val.item()
    if isinstance(val, (list, tuple)):
        return [_plain(v) for v in val]
    if isinstance(val, dict):
        return {str(k): _plain(v) for k, v in val.items()}
    return copy(val)
