import pytest

from tests.context import clfstab  # noqa: F401
from clfstab.dblib import ResultStore
from clfstab.errors import InvalidParams


ROWS = [{'cell': 1, 'x0': [1.0, 0.0], 'final_norm': 0.25, 'escaped': 0},
        {'cell': 0, 'x0': [0.0, 1.0], 'final_norm': 0.5, 'escaped': 0},
        {'cell': 2, 'x0': [1.0, 1.0], 'final_norm': 3.0, 'escaped': 1}]


@pytest.fixture
def store():
    with ResultStore(':memory:') as s:
        yield s


class TestInsert:

    def test_rows_tagged_with_run(self, store):
        assert store.insert('robustness', ROWS, 'abc') == 3
        frame = store.select('robustness')
        assert list(frame.columns)[:2] == ['run', 'cell']
        assert set(frame['run']) == {'abc'}

    def test_nested_values_as_text(self, store):
        store.insert('robustness', ROWS, 'abc')
        frame = store.select('robustness', ('cell', 'x0'))
        assert frame['x0'].iloc[0] == '[0.0, 1.0]'

    def test_empty(self, store):
        assert store.insert('gain', [], 'abc') == 0
        assert store.select('gain').empty

    def test_unknown_table(self, store):
        with pytest.raises(InvalidParams):
            store.insert('trajectories', ROWS, 'abc')


class TestSelect:

    def test_ordered_by_key(self, store):
        store.insert('robustness', ROWS, 'abc')
        assert list(store.select('robustness')['cell']) == [0, 1, 2]

    def test_filters(self, store):
        store.insert('robustness', ROWS, 'r1')
        store.insert('robustness', ROWS[:1], 'r2')
        assert len(store.select('robustness', run=('=', 'r1'))) == 3
        frame = store.select('robustness', ('cell',), run=('=', 'r1'),
                             final_norm=('<', 1.0))
        assert list(frame['cell']) == [0, 1]

    def test_missing_table_is_empty(self, store):
        assert store.select('cascade').empty

    @pytest.mark.parametrize('fields, filters', [
        (('cell; drop table robustness',), {}),
        (('*',), {'cell': ('like', 1)}),
    ])
    def test_rejects_bad_sql(self, store, fields, filters):
        store.insert('robustness', ROWS, 'abc')
        with pytest.raises(InvalidParams):
            store.select('robustness', fields, **filters)


class TestExport:

    def test_csv_text(self, store):
        store.insert('gain', [{'input': 0, 'limsup': 0.5}], 'abc')
        text = store.as_csv('gain')
        assert text.splitlines()[0] == 'run,input,limsup'
        assert text.endswith('\n')

    def test_file_database(self, tmp_path):
        path = str(tmp_path / 'sub' / 'results.db')
        with ResultStore(path) as s:
            s.insert('cascade', [{'row': 0, 'tail_max': 1e-6}], 'abc')
        with ResultStore(path) as s:
            s.as_csv('cascade', str(tmp_path / 'out.csv'))
            assert len(s.select('cascade')) == 1
        assert (tmp_path / 'out.csv').read_text().startswith('run,row,')

    def test_configured_default_path(self, tmp_path, monkeypatch):
        path = str(tmp_path / 'default.db')
        monkeypatch.setattr('clfstab.dblib.DB_PATH', path)
        with ResultStore() as s:
            assert s.path == path
            s.insert('gain', [{'input': 0, 'limsup': 1.0}], 'abc')
        with ResultStore(path) as s:
            assert len(s.select('gain')) == 1
