'''
    Result store for sweep rows, a facade hiding the database-specific
    library used. Currently supports SQLite through pandas.

    Rows are written by a single writer (one lock per store) in the order
    they are given, so a sweep stored cell by cell reads back in cell order.

    Methods:
    --------
    ResultStore.insert(table, rows, run): Append rows to table, tagged with
    a run identifier.

    ResultStore.select(table, fields, **filters): Select rows as a
    DataFrame.

    ResultStore.as_csv(table, path, **filters): Export a table to CSV.
'''


from os import makedirs
from os.path import dirname, abspath, isabs
from threading import Lock
from sqlite3 import connect, Error as SQLiteError
from logging import info, warning

import pandas as pd

from clfstab.errors import InvalidParams
from clfstab.utils import write_csv
from clfstab import config


ROOT_PATH = dirname(dirname(abspath(__file__)))

_db_path = config.get_str('DATABASE_PATH', ':memory:')
if _db_path != ':memory:' and not isabs(_db_path):
    _db_path = ROOT_PATH + '/' + _db_path
DB_PATH = _db_path

# known tables and their key columns
TABLES = {
    'robustness': ('run', 'cell'),
    'gain': ('run', 'input'),
    'cascade': ('run', 'row'),
}

_OPS = ('=', '!=', '<', '<=', '>', '>=')


class ResultStore:
    '''
        SQLite-backed store of sweep rows.

        Attributes:
        -----------
        path: Database file path, or ':memory:'.
    '''

    def __init__(self, path: str = None):
        self.path = path or DB_PATH
        if self.path != ':memory:':
            folder = dirname(abspath(self.path))
            if folder:
                makedirs(folder, exist_ok=True)
        self._lock = Lock()
        self._connection = connect(self.path, check_same_thread=False)

    def close(self):
        with self._lock:
            self._connection.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def insert(self, table: str, rows, run: str) -> int:
        '''
            Appends rows (list of dicts or DataFrame) to table, each tagged
            with run. Nested values are stored as their string form.

            Returns the number of rows written.
        '''

        _check_table(table)
        frame = rows.copy() if isinstance(rows, pd.DataFrame) \
            else pd.DataFrame(list(rows))
        if frame.empty:
            return 0
        frame.insert(0, 'run', run)
        for col in frame.columns:
            if frame[col].map(lambda v: isinstance(v, (list, dict,
                                                       tuple))).any():
                frame[col] = frame[col].map(str)
        with self._lock:
            try:
                frame.to_sql(table, self._connection, if_exists='append',
                             index=False)
                self._connection.commit()
            except (SQLiteError, ValueError) as e:
                warning(' *** WARNING in dblib.insert: %s %s',
                        e.__class__.__name__, e)
                raise
        info('dblib: %d rows into %s (run %s)', len(frame), table, run)
        return len(frame)

    def select(self, table: str, fields: tuple = ('*',), **filters
               ) -> pd.DataFrame:
        '''
            Select rows of table. Filters take the form
            column=(operator, value), for example:

                >>> store.select('robustness', run=('=', 'r1'))
        '''

        _check_table(table)
        where, vals = _get_where_str(**filters)
        keys = ', '.join(TABLES[table])
        sql = 'select {} from {} {} order by {}'.format(
            _get_fields_str(fields), table, where, keys)
        with self._lock:
            exists = self._connection.execute(
                "select name from sqlite_master where type='table' and "
                'name=?', (table,)).fetchone()
            if exists is None:
                return pd.DataFrame()
            return pd.read_sql_query(sql, self._connection, params=vals)

    def as_csv(self, table: str, path: str = None, fields: tuple = ('*',),
               **filters):
        '''
            Export table (filtered) to CSV; returns the text when path is
            None.
        '''

        return write_csv(self.select(table, fields, **filters), path)


def _check_table(table: str):
    if table not in TABLES:
        raise InvalidParams('unknown result table %r' % table)


def _get_fields_str(fields: tuple):
    for field in fields:
        if field != '*' and not field.replace('_', '').isalnum():
            raise InvalidParams('invalid field name %r' % field)
    return ', '.join(fields)


def _get_where_str(**kwargs):
    where, vals = [], []
    for key, (op, val) in kwargs.items():
        if op not in _OPS or not key.replace('_', '').isalnum():
            raise InvalidParams('invalid filter %s %s' % (key, op))
        where.append('{} {} ?'.format(key, op))
        vals.append(val)
    return ('where ' + ' and '.join(where)) if where else '', vals
