from json import loads, dumps

import numpy as np
import pandas as pd
import pytest

from tests.context import clfstab  # noqa: F401
from clfstab.cli import main
from clfstab.dblib import ResultStore


SWEEP = ['sweep-robustness', '--system', 'single-integrator',
         '--param', 'n=2', '--control-set', 'box:-1:1:5', '--alpha', '0.5',
         '--r', '0.5', '--R', '2.0', '--c', '1', '--m', '1.5',
         '--delta-hi', '0.1', '--delta-lo', '0.05', '--t-bound', '2',
         '--x0-grid', '1,0;0,-1', '--substeps', '4']


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (loads(out) if out.strip() else None), \
        (loads(err) if err.strip() else None)


def write_json(path, data):
    path.write_text(dumps(data))
    return str(path)


class TestZoo:

    def test_list(self, capsys):
        code, out, _ = run(capsys, 'zoo', 'list')
        assert code == 0
        names = [s['name'] for s in out['systems']]
        assert 'nonholonomic-integrator' in names
        assert names == sorted(names)

    def test_show(self, capsys):
        code, out, _ = run(capsys, 'zoo', 'show', 'linear-1d', '--param',
                           'a=-2')
        assert code == 0
        assert out['params']['a'] == -2.0

    def test_show_needs_name(self, capsys):
        code, _, err = run(capsys, 'zoo', 'show')
        assert code == 2
        assert err['kind'] == 'invalid_params'


class TestSimulate:

    def test_classical(self, capsys, tmp_path):
        csv = str(tmp_path / 'traj.csv')
        code, out, _ = run(capsys, 'simulate', '--system', 'cubic-1d',
                           '--x0', '1', '--horizon', '2', '--step', '1e-3',
                           '--csv', csv)
        assert code == 0
        assert not out['sampled']
        assert out['final_norm'] == pytest.approx(np.exp(-2.0), rel=1e-6)
        frame = pd.read_csv(csv)
        assert list(frame.columns) == ['t', 'x1', 'u1', 'is_sample']
        assert len(frame) == out['rows'] == 2001

    def test_sampled(self, capsys, tmp_path):
        csv = str(tmp_path / 'pi.csv')
        code, out, _ = run(capsys, 'simulate', '--system', 'cubic-1d',
                           '--x0', '1', '--horizon', '1', '--schedule',
                           'uniform:0.05', '--csv', csv)
        assert code == 0
        assert out['sampled']
        assert out['final_time'] == pytest.approx(1.0)
        assert out['final_norm'] < 1.0
        assert pd.read_csv(csv)['is_sample'].sum() >= 20

    def test_escape_exits_3(self, capsys):
        code, out, _ = run(capsys, 'simulate', '--system', 'gas-not-iss',
                           '--feedback', 'constant:1', '--x0', '0.5',
                           '--horizon', '5')
        assert code == 3
        assert out['escaped']
        assert out['escape_time'] < 5.0

    def test_perturbation_needs_schedule(self, capsys):
        code, _, err = run(capsys, 'simulate', '--system', 'cubic-1d',
                           '--e', 'constant:0.1')
        assert code == 2
        assert err['kind'] == 'invalid_params'

    def test_out_is_trajectory_csv(self, capsys, tmp_path):
        csv = tmp_path / 'traj.csv'
        code, out, _ = run(capsys, 'simulate', '--system', 'cubic-1d',
                           '--horizon', '0.5', '--step', '1e-2',
                           '--out', str(csv))
        assert code == 0
        assert out['system'] == 'cubic-1d'
        frame = pd.read_csv(csv)
        assert list(frame.columns) == ['t', 'x1', 'u1', 'is_sample']
        assert len(frame) == out['rows']

    def test_short_perturbation_flags(self, capsys, tmp_path):
        csv = tmp_path / 'pi.csv'
        code, out, _ = run(capsys, 'simulate', '--system', 'cubic-1d',
                           '--x0', '1', '--horizon', '1', '--schedule',
                           'uniform:0.05', '--e', 'constant:0.01',
                           '--d', 'constant:0', '--out', str(csv))
        assert code == 0
        assert out['final_norm'] < 1.0
        assert pd.read_csv(csv)['is_sample'].sum() >= 20
        _, clean, _ = run(capsys, 'simulate', '--system', 'cubic-1d',
                          '--x0', '1', '--horizon', '1', '--schedule',
                          'uniform:0.05')
        assert out['final_state'] != pytest.approx(clean['final_state'])

    def test_expression_feedback(self, capsys):
        code, out, _ = run(capsys, 'simulate', '--system', 'linear-1d',
                           '--feedback=-2*x1', '--x0', '1',
                           '--horizon', '2', '--step', '1e-3')
        assert code == 0
        assert out['feedback']['provenance'] == 'user'
        assert out['final_norm'] == pytest.approx(np.exp(-2.0), rel=1e-6)
        code, out, _ = run(capsys, 'simulate', '--system', 'linear-1d',
                           '--feedback', 'expr:-2*x1', '--x0', '1',
                           '--horizon', '1')
        assert code == 0

    @pytest.mark.parametrize('feedback', ['-2*x2', '-x1;-x1', 'bogus'])
    def test_bad_expression_feedback(self, capsys, feedback):
        code, _, err = run(capsys, 'simulate', '--system', 'linear-1d',
                           '--feedback=' + feedback)
        assert code == 2
        assert err['kind'] == 'invalid_params'


class TestSynthesis:

    def test_universal(self, capsys, tmp_path):
        csv = str(tmp_path / 'k.csv')
        code, out, _ = run(capsys, 'synthesize', '--system', 'linear-1d',
                           '--control-set', 'box:-3:3:61', '--csv', csv)
        assert code == 0
        assert out['verification']['passed']
        assert [r[0] for r in out['small_control_profile']] == \
            [0.1, 0.01, 0.001]
        frame = pd.read_csv(csv)
        assert list(frame.columns) == ['x1', 'u1']
        assert len(frame) == 41

    def test_pointwise(self, capsys):
        code, out, _ = run(capsys, 'synthesize', '--system', 'linear-1d',
                           '--method', 'pointwise', '--control-set',
                           'box:-3:3:61')
        assert code == 0
        assert out['small_control_profile'] is None

    def test_clf_verify_strict(self, capsys):
        argv = ['clf-verify', '--system', 'linear-1d', '--control-set',
                'box:-0.5:0.5:11', '--clf-expr', 'x1**2/2', '--W',
                '0.1*x1**2']
        code, out, _ = run(capsys, *argv)
        assert code == 0
        assert not out['passed']
        code, _, _ = run(capsys, *argv, '--strict')
        assert code == 4

    def test_unknown_clf(self, capsys):
        code, _, err = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--clf', 'cosh')
        assert code == 2
        assert err['kind'] == 'invalid_clf'

    def test_region_and_grid(self, capsys):
        code, out, _ = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--control-set', 'box:-3:3:61', '--region',
                           '0.2:1.5', '--grid', '11')
        assert code == 0
        assert out['passed']
        assert out['region'] == {'r': 0.2, 'R': 1.5, 'grid_resolution': 11}
        assert out['checked'] == 10

    @pytest.mark.parametrize('region', ['0.2', '1.5:0.2', 'a:b'])
    def test_bad_region(self, capsys, region):
        code, _, err = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--region', region)
        assert code == 2
        assert err['kind'] == 'invalid_params'

    def test_clf_file(self, capsys, tmp_path):
        path = write_json(tmp_path / 'clf.json', {
            'schema': 1, 'V': 'x1**2/2', 'W': '0.1*x1**2'})
        code, out, _ = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--control-set', 'box:-0.5:0.5:11', '--clf',
                           path, '--strict')
        assert code == 4
        assert not out['passed']
        code, out, _ = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--control-set', 'box:-3:3:61', '--clf', path,
                           '--region', '0.2:1.5')
        assert code == 0
        assert out['passed']

    @pytest.mark.parametrize('data', [{'schema': 1, 'V': 'cosh(y)'},
                                      {'schema': 1, 'W': 'x1**2'}])
    def test_bad_clf_file(self, capsys, tmp_path, data):
        path = write_json(tmp_path / 'clf.json', data)
        code, _, err = run(capsys, 'clf-verify', '--system', 'linear-1d',
                           '--clf', path)
        assert code == 2
        assert err['kind'] == 'invalid_clf'


class TestBrockett:

    def test_nonholonomic(self, capsys):
        code, out, _ = run(capsys, 'check-brockett', '--system',
                           'nonholonomic-integrator', '--no-probe')
        assert code == 0
        assert out['status'] == 'fails_necessary_condition'
        assert out['witness']['p'] == pytest.approx([0.0, 0.0, 1.0])
        code, _, _ = run(capsys, 'check-brockett', '--system',
                         'nonholonomic-integrator', '--no-probe', '--strict')
        assert code == 4

    def test_with_reachability_check(self, capsys):
        code, out, _ = run(capsys, 'check-brockett', '--system',
                           'nonholonomic-integrator', '--targets', '8')
        assert code == 0
        assert out['status'] == 'fails_necessary_condition'
        assert out['strength'] == 'exact'
        assert set(out['tests']) == {'driftless', 'probe'}

    def test_inconclusive_is_not_a_failure(self, capsys):
        code, out, _ = run(capsys, 'check-brockett', '--system',
                           'bilinear-diag', '--no-probe', '--strict')
        assert code == 0
        assert out['status'] == 'inconclusive'


class TestIss:

    def test_gain_fit_with_db(self, capsys, tmp_path):
        db = str(tmp_path / 'results.db')
        code, out, _ = run(capsys, 'iss-fit', '--system', 'linear-1d',
                           '--param', 'a=-1', '--input', 'constant:1',
                           '--input', 'constant:2', '--x0-grid', '1;-1',
                           '--horizon', '20', '--db', db)
        assert code == 0
        assert [r['limsup'] for r in out['rows']] == \
            pytest.approx([1.0, 2.0], rel=1e-5)
        with ResultStore(db) as store:
            frame = store.select('gain')
        assert list(frame['input']) == [0, 1]
        assert frame['run'].nunique() == 1

    def test_bare_db_flag_uses_configured_path(self, capsys, tmp_path,
                                               monkeypatch):
        db = str(tmp_path / 'configured.db')
        monkeypatch.setattr('clfstab.cli.DB_PATH', db)
        code, _, _ = run(capsys, 'iss-fit', '--system', 'linear-1d',
                         '--param', 'a=-1', '--input', 'constant:1',
                         '--x0-grid', '1', '--horizon', '10', '--db')
        assert code == 0
        with ResultStore(db) as store:
            assert len(store.select('gain')) == 1

    def test_inputs_file(self, capsys, tmp_path):
        path = write_json(tmp_path / 'inputs.json',
                          {'schema': 1, 'inputs': ['constant:0.5']})
        csv = str(tmp_path / 'gain.csv')
        code, out, _ = run(capsys, 'iss-fit', '--system', 'linear-1d',
                           '--param', 'a=-1', '--inputs', path,
                           '--x0-grid', '1', '--horizon', '20', '--csv', csv)
        assert code == 0
        assert len(out['rows']) == 1
        assert 'limsup' in pd.read_csv(csv).columns

    def test_escape_under_strict(self, capsys):
        code, out, _ = run(capsys, 'iss-fit', '--system', 'gas-not-iss',
                           '--input', 'constant:1', '--x0-grid', '0',
                           '--horizon', '10', '--strict')
        assert code == 4
        assert out['rows'][0]['escaped']

    def test_empty_grid(self, capsys):
        code, _, err = run(capsys, 'iss-fit', '--system', 'linear-1d',
                           '--x0-grid', '1')
        assert code == 2
        assert 'empty' in err['message']

    def test_lyapunov_candidate(self, capsys, tmp_path):
        candidate = {'schema': 1, 'system': 'arctan-iiss',
                     'V': 'log(1 + x1**2)/2', 'form': 'iiss',
                     'alpha': 'r*atan(r)/(1 + r**2)', 'gamma': 'r/2',
                     'states': {'lo': -3, 'hi': 3, 'resolution': 13},
                     'inputs': {'lo': -2, 'hi': 2, 'resolution': 9}}
        path = write_json(tmp_path / 'cand.json', candidate)
        code, out, _ = run(capsys, 'lyap-verify', '--candidate', path)
        assert code == 0
        assert out['passed']
        assert out['checked'] == 117

        del candidate['form']
        path = write_json(tmp_path / 'bad.json', candidate)
        code, _, err = run(capsys, 'lyap-verify', '--candidate', path)
        assert code == 2
        assert 'form' in err['message']

    def test_iss_form_rejected(self, capsys, tmp_path):
        path = write_json(tmp_path / 'cand.json', {
            'schema': 1, 'system': 'arctan-iiss', 'V': 'log(1 + x1**2)/2',
            'form': 'iss', 'alpha': 'r*atan(r)/(1 + r**2)', 'gamma': 'r/2'})
        code, _, err = run(capsys, 'lyap-verify', '--candidate', path)
        assert code == 2
        assert err['kind'] == 'invalid_candidate'


class TestSweep:

    def test_compliant_sweep(self, capsys, tmp_path):
        csv = str(tmp_path / 'cells.csv')
        db = str(tmp_path / 'results.db')
        code, out, _ = run(capsys, *SWEEP, '--csv', csv, '--db', db)
        assert code == 0
        assert out['summary']['cells'] == 2
        assert out['summary']['passed'] == 2
        assert out['constants']['overridden'] == \
            ['c', 'delta_hi', 'delta_lo', 'm', 't_bound']
        assert len(pd.read_csv(csv)) == 2
        with ResultStore(db) as store:
            assert list(store.select('robustness')['cell']) == [0, 1]

    def test_deterministic(self, capsys, tmp_path):
        first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
        assert main(SWEEP + ['--csv', str(first)]) == 0
        assert main(SWEEP + ['--csv', str(second)]) == 0
        capsys.readouterr()
        assert first.read_bytes() == second.read_bytes()

    def test_empty_x0_grid(self, capsys):
        code, _, err = run(capsys, *SWEEP[:-4], '--x0-grid', ';')
        assert code == 2
        assert err['message'] == 'empty sweep grid'

    def test_unknown_band(self, capsys):
        code, _, err = run(capsys, *SWEEP, '--bands', 'wide')
        assert code == 2
        assert err['kind'] == 'invalid_params'


class TestErrors:

    def test_unknown_system(self, capsys):
        code, _, err = run(capsys, 'simulate', '--system', 'pendulum')
        assert code == 2
        assert err['kind'] == 'unknown_system'

    def test_missing_system(self, capsys):
        code, _, err = run(capsys, 'clf-verify')
        assert code == 2
        assert '--system' in err['message']

    def test_no_command(self, capsys):
        code, _, err = run(capsys)
        assert code == 2

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, 'zoo', 'list', '--colour')
        assert code == 2
        assert err['kind'] == 'invalid_params'

    @pytest.mark.parametrize('argv', [
        ['simulate', '--system', 'cubic-1d', '--x0', 'abc'],
        ['simulate', '--system', 'cubic-1d', '--feedback', 'constant:1,x'],
        ['iss-fit', '--system', 'linear-1d', '--input', 'constant:1',
         '--x0-grid', '1;zz'],
        SWEEP[:-4] + ['--x0-grid', '1,0;0,q']])
    def test_malformed_vectors(self, capsys, argv):
        code, out, err = run(capsys, *argv)
        assert code == 2
        assert out is None
        assert err['kind'] == 'invalid_params'

    def test_inputs_file_without_inputs(self, capsys, tmp_path):
        path = write_json(tmp_path / 'inputs.json', {'schema': 1})
        code, _, err = run(capsys, 'iss-fit', '--system', 'linear-1d',
                           '--inputs', path, '--x0-grid', '1')
        assert code == 2
        assert err['kind'] == 'invalid_params'


class TestConfig:

    def test_flags_override_config(self, capsys, tmp_path):
        path = write_json(tmp_path / 'conf.json', {
            'schema': 1, 'system': 'cubic-1d', 'x0': '1', 'horizon': 1.0})
        code, out, _ = run(capsys, 'simulate', '--config', path)
        assert code == 0
        assert out['final_time'] == pytest.approx(1.0)
        code, out, _ = run(capsys, 'simulate', '--config', path,
                           '--horizon', '0.5')
        assert out['final_time'] == pytest.approx(0.5)

    def test_strict_from_config(self, capsys, tmp_path):
        path = write_json(tmp_path / 'conf.json', {
            'schema': 1, 'system': 'nonholonomic-integrator',
            'no-probe': True, 'strict': True})
        code, _, _ = run(capsys, 'check-brockett', '--config', path)
        assert code == 4

    @pytest.mark.parametrize('data', [{'schema': 1, 'speed': 3},
                                      {'schema': 2, 'system': 'cubic-1d'},
                                      {'system': 'cubic-1d'}])
    def test_rejected(self, capsys, tmp_path, data):
        path = write_json(tmp_path / 'conf.json', data)
        code, _, err = run(capsys, 'simulate', '--config', path)
        assert code == 2
        assert err['kind'] == 'invalid_params'

    def test_malformed_config_writes_nothing(self, capsys, tmp_path):
        path = tmp_path / 'conf.json'
        path.write_text('{"schema": 1, "system": ')
        csv = tmp_path / 'traj.csv'
        code, _, err = run(capsys, 'simulate', '--config', str(path),
                           '--csv', str(csv))
        assert code == 2
        assert err['kind'] == 'invalid_params'
        assert not csv.exists()
