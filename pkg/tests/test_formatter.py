import json

import numpy as np

from fairadj.data_model import AdjustmentDataset
from fairadj.evaluation import crossval, evaluate_blackbox
from fairadj.formatter import (
    ConsoleFormatter, FormatterFactory, JsonFormatter,
)
from fairadj.synth import ols


def small_dataset():
    return AdjustmentDataset.from_counts([
        [[6, 1], [2, 5]], [[4, 3], [1, 6]],
    ], ('no', 'yes'), ('f', 'm'))


def regression():
    design = np.column_stack([np.ones(5), [0, 1, 0, 1, 1]])
    target = np.array([0.1, 0.3, 0.2, 0.5, 0.4])
    return ols(design, target, [('Intercept', ''), ('Loss', 'Weighted')],
               {'Loss': 'Unweighted'}, 'acc_change')


class TestFormatter:
    def test_formatter_factory(self):
        formatter = FormatterFactory.get_formatter()
        assert isinstance(formatter, ConsoleFormatter)
        formatter = FormatterFactory.get_formatter('console')
        assert isinstance(formatter, ConsoleFormatter)
        formatter = FormatterFactory.get_formatter('json')
        assert isinstance(formatter, JsonFormatter)
        formatter = FormatterFactory.get_formatter('__no_existing__')
        assert isinstance(formatter, ConsoleFormatter)

    def test_console_report(self):
        report = evaluate_blackbox(small_dataset())
        response = ConsoleFormatter().format_report(
            report, 'Blackbox'
        ).split('\n')
        assert len(response) == 9
        assert response[0] == 'Blackbox'
        assert response[1] == '  accuracy       {:.4f}'.format(
            report.accuracy
        )
        assert response[6] == '  trivial        False'
        assert response[7].startswith('  group 0: TDR ')

    def test_console_reports(self):
        report = evaluate_blackbox(small_dataset())
        response = ConsoleFormatter().format_reports(
            {'blackbox': report, 'again': report}
        )
        assert response.startswith('blackbox\n')
        assert '\n\nagain\n' in response

    def test_console_crossval(self):
        result = crossval(small_dataset(), folds=2, seed=0)
        response = ConsoleFormatter().format_crossval(result).split('\n')
        assert response[0] == 'Cross-validation over 2 folds (seed 0)'
        assert response[1].startswith('  fold 0: accuracy ')
        assert response[-5] == 'Percent change'
        assert response[-4].startswith('  accuracy')

    def test_console_regression(self):
        response = ConsoleFormatter().format_regression(
            regression()
        ).split('\n')
        assert len(response) == 4
        assert response[0].startswith('Outcome: acc_change (R^2 ')
        assert response[1].split()[:2] == ['Intercept', '--']
        assert response[2].split() == ['Loss', 'Unweighted', '--']
        assert response[3].split()[0] == 'Weighted'

    def test_json_formatter(self):
        formatter = JsonFormatter()
        report = evaluate_blackbox(small_dataset())
        data = json.loads(formatter.format_report(report, 'Blackbox'))
        assert data['title'] == 'Blackbox'
        assert data['report']['accuracy'] == report.accuracy
        data = json.loads(formatter.format_reports({'blackbox': report}))
        assert list(data) == ['blackbox']
        data = json.loads(formatter.format_regression(regression()))
        assert data['outcome'] == 'acc_change'
        assert [term['level'] for term in data['terms']] == ['', 'Weighted']
        data = json.loads(formatter.format_crossval(
            crossval(small_dataset(), folds=2, seed=0)
        ))
        assert data['folds'] == 2
