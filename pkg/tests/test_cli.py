import csv
import json
import os
from pathlib import Path

import numpy as np
import pytest

from fairadj.cli import RunConfig, build_parser, load_config, main
from fairadj.data_model import (
    AdjustmentDataset, ColumnSchema, load_dataset, write_dataset,
)
from fairadj.policy import AdjustmentPolicy


def data_path(name):
    return str((Path(os.path.realpath(__file__)) / Path('../data') /
                name).resolve())


def read_csv(path):
    with open(path, newline='') as ifile:
        return list(csv.DictReader(ifile))


class TestConfig:
    def test_defaults_and_flags(self):
        parser = build_parser()
        args = parser.parse_args([
            'adjust', '--input', 'x.csv', '--policy', 'p.json',
            '--epsilon', '0.2', '--criterion', 'parity',
        ])
        assert args.subcommand == 'adjust'
        assert args.epsilon == 0.2
        assert args.objective is None

    def test_ini_values(self, tmp_path):
        path = tmp_path / 'custom.ini'
        path.write_text('[fairadj]\nepsilon: 0.1\nfolds: 3\n')
        values = load_config(str(path))
        assert values['epsilon'] == 0.1
        assert values['folds'] == 3
        assert values['criterion'] == 'term-by-term'
        with pytest.raises(ValueError):
            load_config(str(tmp_path / 'missing.ini'))

    def test_run_config_validation(self):
        with pytest.raises(ValueError):
            RunConfig('adjust', epsilon=1.5)
        with pytest.raises(ValueError):
            RunConfig('crossval', folds=1)
        with pytest.raises(ValueError):
            RunConfig('adjust', criterion='calibration')
        assert RunConfig('adjust', folds=1).folds == 1


class TestCommands:
    def test_adjust_predict_evaluate(self, tmp_path, capsys):
        policy = str(tmp_path / 'policy.json')
        report = str(tmp_path / 'report.json')
        assert main(['adjust', '--input', data_path('biased.csv'),
                     '--policy', policy, '--report', report]) == 0
        assert 'adjusted' in capsys.readouterr().out
        loaded = AdjustmentPolicy.load(policy)
        assert loaded.meta['criterion'] == 'term-by-term'
        with open(report) as ifile:
            data = json.load(ifile)
        assert data['adjusted']['disparity'] <= 1e-6
        assert data['blackbox']['disparity'] > 0.05

        output = str(tmp_path / 'adjusted.csv')
        assert main(['predict', '--input', data_path('biased.csv'),
                     '--policy', policy, '--output', output,
                     '--seed', '7']) == 0
        first = read_csv(output)
        assert len(first) == 30
        assert set(first[0]) == {'y', 'y_hat', 'a', 'y_adj'}
        assert main(['predict', '--input', data_path('biased.csv'),
                     '--policy', policy, '--output', output,
                     '--seed', '7']) == 0
        assert read_csv(output) == first

        holdout = str(tmp_path / 'holdout.json')
        assert main(['evaluate', '--input', data_path('biased.csv'),
                     '--policy', policy, '--report', holdout]) == 0
        with open(holdout) as ifile:
            data = json.load(ifile)
        assert set(data) == {'blackbox', 'adjusted'}

    def test_adjust_fair_perfect(self, tmp_path):
        path = tmp_path / 'perfect.csv'
        write_dataset(AdjustmentDataset.from_counts([
            [[3, 0], [0, 2]], [[1, 0], [0, 4]],
        ], ('neg', 'pos'), ('f', 'm')), path)
        report = str(tmp_path / 'report.json')
        assert main(['adjust', '--input', str(path), '--policy',
                     str(tmp_path / 'p.json'), '--report', report,
                     '--criterion', 'opportunity']) == 0
        with open(report) as ifile:
            data = json.load(ifile)
        assert np.isclose(data['adjusted']['accuracy'], 1.0)
        assert np.isclose(data['adjusted']['disparity'], 0.0)

    def test_config_file_and_flags(self, tmp_path):
        config = tmp_path / 'custom.ini'
        config.write_text('[fairadj]\nepsilon: 0.1\nobjective: unweighted\n')
        policy = str(tmp_path / 'p.json')
        assert main(['adjust', '--input', data_path('biased.csv'),
                     '--policy', policy, '--config', str(config)]) == 0
        meta = AdjustmentPolicy.load(policy).meta
        assert meta['epsilon'] == 0.1
        assert meta['objective'] == 'unweighted'
        assert main(['adjust', '--input', data_path('biased.csv'),
                     '--policy', policy, '--config', str(config),
                     '--epsilon', '0']) == 0
        assert AdjustmentPolicy.load(policy).meta['epsilon'] == 0.0

    def test_renamed_columns(self, tmp_path):
        path = tmp_path / 'renamed.csv'
        write_dataset(load_dataset(data_path('biased.csv')), path,
                      ColumnSchema('truth', 'pred', 'group'))
        policy = str(tmp_path / 'p.json')
        assert main(['adjust', '--input', str(path),
                     '--policy', policy, '--y-col', 'truth', '--yhat-col',
                     'pred', '--a-col', 'group', '--smoothing', '1']) == 0
        assert AdjustmentPolicy.load(policy).class_names == ('a', 'b', 'c')

    def test_crossval(self, tmp_path, capsys):
        report = str(tmp_path / 'cv.json')
        assert main(['crossval', '--input', data_path('biased.csv'),
                     '--folds', '5', '--report', report]) == 0
        assert 'Percent change' in capsys.readouterr().out
        with open(report) as ifile:
            data = json.load(ifile)
        assert data['folds'] == 5
        assert data['fold_sizes'] == [6] * 5

    def test_sweep(self, tmp_path):
        output = str(tmp_path / 'sweep.csv')
        assert main(['sweep', '--input', data_path('biased.csv'),
                     '--criterion', 'parity', '--criterion', 'opportunity',
                     '--steps', '4', '--output', output]) == 0
        rows = read_csv(output)
        assert len(rows) == 12
        assert rows[5]['criterion'] == 'blackbox:parity'
        assert float(rows[4]['epsilon']) == 1.0

    def test_synth(self, tmp_path):
        output = str(tmp_path / 'synth.csv')
        assert main(['synth', '--groups', '3', '--class-balance', 'two-rare',
                     '--group-balance', 'one-strong', '--pred-bias',
                     'high-one', '--n', '400', '--output', output,
                     '--seed', '5']) == 0
        rows = read_csv(output)
        assert len(rows) == 400
        assert {row['a'] for row in rows} <= {'g0', 'g1', 'g2'}
        again = str(tmp_path / 'again.csv')
        main(['synth', '--groups', '3', '--class-balance', 'two-rare',
              '--group-balance', 'one-strong', '--pred-bias', 'high-one',
              '--n', '400', '--output', again, '--seed', '5'])
        assert read_csv(again) == rows

    def test_experiment(self, tmp_path):
        output = str(tmp_path / 'grid.csv')
        report = str(tmp_path / 'regression.txt')
        assert main(['experiment', '--groups', '2', '--n', '1000',
                     '--output', output, '--report', report]) == 0
        assert len(read_csv(output)) == 216
        with open(report) as ifile:
            text = ifile.read()
        assert text.startswith('Groups: 2\nOutcome: acc_change')
        assert 'Outcome: tdr_change' in text
        assert 'Pred Bias' in text


class TestReruns:
    def twice(self, tmp_path, build, names):
        outputs = []
        for run in ('first', 'second'):
            paths = [tmp_path / '{}_{}'.format(run, name) for name in names]
            assert main(build(*[str(path) for path in paths])) == 0
            outputs.append([path.read_bytes() for path in paths])
        assert outputs[0] == outputs[1]
        assert all(len(data) > 0 for data in outputs[0])

    def test_adjust(self, tmp_path):
        self.twice(tmp_path, lambda policy, report: [
            'adjust', '--input', data_path('biased.csv'), '--policy', policy,
            '--report', report, '--criterion', 'classwise',
            '--epsilon', '0.05',
        ], ['policy.json', 'report.json'])

    def test_crossval(self, tmp_path):
        self.twice(tmp_path, lambda report: [
            'crossval', '--input', data_path('biased.csv'), '--folds', '3',
            '--report', report,
        ], ['cv.json'])

    def test_sweep(self, tmp_path):
        self.twice(tmp_path, lambda output: [
            'sweep', '--input', data_path('biased.csv'), '--criterion',
            'opportunity', '--steps', '3', '--output', output,
        ], ['sweep.csv'])

    def test_experiment(self, tmp_path):
        self.twice(tmp_path, lambda output, report: [
            'experiment', '--groups', '2', '--n', '1000',
            '--output', output, '--report', report,
        ], ['grid.csv', 'regression.txt'])


class TestExitCodes:
    def test_missing_input(self, tmp_path):
        assert main(['adjust', '--input', str(tmp_path / 'none.csv'),
                     '--policy', str(tmp_path / 'p.json')]) == 3

    def test_single_group(self, tmp_path):
        assert main(['adjust', '--input', data_path('constant_group.csv'),
                     '--policy', str(tmp_path / 'p.json')]) == 3

    def test_empty_cell(self, tmp_path):
        path = tmp_path / 'sparse.csv'
        path.write_text('y,y_hat,a\na,a,f\nb,b,f\na,a,m\na,b,m\n')
        assert main(['adjust', '--input', str(path),
                     '--policy', str(tmp_path / 'p.json')]) == 4

    def test_space_mismatch(self, tmp_path):
        policy = str(tmp_path / 'p.json')
        assert main(['adjust', '--input', data_path('toy.csv'),
                     '--policy', policy, '--smoothing', '0.5']) == 0
        assert main(['evaluate', '--input', data_path('biased.csv'),
                     '--policy', policy]) == 7

    def test_usage_errors(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(['adjust', '--input', data_path('toy.csv'), '--policy',
                  str(tmp_path / 'p.json'), '--epsilon', '2'])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(['crossval', '--input', data_path('toy.csv'),
                  '--folds', '1'])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(['adjust', '--input', data_path('toy.csv'), '--policy',
                  str(tmp_path / 'p.json'), '--config',
                  str(tmp_path / 'missing.ini')])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(['transmogrify'])
        assert info.value.code == 2
