from pytwoscale.make_report import load_template, render_report
from pytwoscale.run_info import RunInfo, write_json
import json
import numpy as np
import pandas as pd
import pytest

argv = ['fit2d', '--infile', 'data.csv', '--nseg-u', '10']
settings = {'nseg_u': 10, 'rho_u': None, 'threads': 1}


def test_manifest_round_trip(tmp_path):
    info = RunInfo('fit2d', argv, settings, inputs=['data.csv'])
    info.add_output(tmp_path / 'a.csv')
    info.finish(3)
    path = info.write(tmp_path / 'run_manifest.json')
    manifest = RunInfo.read(path)
    assert(manifest['argv'] == argv)
    assert(manifest['command'] == 'fit2d')
    assert(manifest['settings'] == settings)
    assert(manifest['outputs'] == [str(tmp_path / 'a.csv')])
    assert(manifest['exit_code'] == 3)
    assert(manifest['wall_clock_seconds'] >= 0)
    return


def test_read_rejects_other_json(tmp_path):
    path = write_json({'command': 'fit2d'}, tmp_path / 'other.json')
    with pytest.raises(ValueError, match="not a pytwoscale run manifest"):
        RunInfo.read(path)
    return


def test_write_json_numpy_values(tmp_path):
    path = write_json({'ed': np.float64(0.1), 'n': np.int64(4),
                       'rhos': np.array([1.5, 2.5]),
                       'pair': (np.bool_(True), 1)},
                      tmp_path / 'values.json')
    with open(path, encoding='utf-8') as f:
        values = json.load(f)
    assert(values == {'ed': 0.1, 'n': 4, 'rhos': [1.5, 2.5],
                      'pair': [True, 1]})
    return


def test_load_template():
    template = load_template()
    text = template.render(command='fit1d', version='0', settings={},
                           summary={}, tables={}, files=[])
    assert("# command: fit1d" in text)
    return


def test_render_report(tmp_path):
    table = pd.DataFrame({'name': ['treat'], 'beta': [0.25]})
    path = render_report({'command': 'fitph',
                          'version': '0.1',
                          'settings': {'nseg_u': 10},
                          'summary': {'aic': 12.5,
                                      'penalty': {'rho_u': 10.0}},
                          'files': ['out_beta.csv'],
                          'tables': {'regression coefficients': table}},
                         tmp_path / 'report.txt')
    text = path.read_text(encoding='utf-8')
    assert("nseg_u = 10" in text)
    assert("aic = 12.5" in text)
    assert("    rho_u = 10.0" in text)
    assert("# regression coefficients" in text)
    assert("treat" in text)
    assert("out_beta.csv" in text)
    return
