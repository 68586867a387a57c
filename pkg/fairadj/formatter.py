'''Collection of built-in formatters

All formatters inherit from Formatter class. For any further output format
simply inherit from Formatter and register with the `register_formatter`
decorator.
'''
import json

import numpy as np


_formatters = {}


def register_formatter(formatter_type):
    '''Register a formatter with a type name. Retrieve via FormatterFactory
    '''
    def wrapper(cls):
        if formatter_type in _formatters:
            raise ValueError(
                'The formatter type {} has been taken'.format(formatter_type)
            )
        _formatters[formatter_type] = cls
        return cls
    return wrapper


class FormatterFactory:
    '''Factory for getting different types of formatter
    '''
    @staticmethod
    def get_formatter(formatter_type=None):
        if formatter_type is None:
            return ConsoleFormatter()
        return _formatters.get(formatter_type, ConsoleFormatter)()


class Formatter:
    def format_report(self, report, title=None):
        raise NotImplementedError('To be implemented')

    def format_reports(self, reports):
        '''reports: dict of name to EvaluationReport
        '''
        raise NotImplementedError('To be implemented')

    def format_crossval(self, result):
        raise NotImplementedError('To be implemented')

    def format_regression(self, result):
        raise NotImplementedError('To be implemented')


def _fmt(value, digits=4):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    return '{:.{}f}'.format(value, digits)


@register_formatter('console')
class ConsoleFormatter(Formatter):
    def format_report(self, report, title=None):
        lines = []
        if title:
            lines.append(title)
        lines.extend([
            '  accuracy       {}'.format(_fmt(report.accuracy)),
            '  mean TDR       {}'.format(_fmt(report.mean_tdr)),
            '  disparity      {}'.format(_fmt(report.disparity)),
            '  Brier          {}'.format(_fmt(report.brier)),
            '  sweep measure  {} ({})'.format(
                _fmt(report.sweep_measure), report.criterion
            ),
            '  trivial        {}'.format(_fmt(report.trivial)),
        ])
        for a, (tdr, fdr) in enumerate(zip(report.tdr, report.fdr)):
            lines.append('  group {}: TDR {} FDR {}'.format(
                a,
                ' '.join(_fmt(value, 3) for value in tdr),
                ' '.join(_fmt(value, 3) for value in fdr),
            ))
        return '\n'.join(lines)

    def format_reports(self, reports):
        return '\n\n'.join(
            self.format_report(report, name)
            for name, report in reports.items()
        )

    def format_crossval(self, result):
        lines = ['Cross-validation over {} folds (seed {})'.format(
            result.plan.folds, result.plan.seed
        )]
        for fold, (pre, post) in enumerate(
                zip(result.fold_pre, result.fold_post)):
            lines.append(
                '  fold {}: accuracy {} -> {}, disparity {} -> {}'.format(
                    fold, _fmt(pre.accuracy), _fmt(post.accuracy),
                    _fmt(pre.disparity), _fmt(post.disparity),
                )
            )
        lines.append(self.format_report(result.pooled_pre, 'Pooled blackbox'))
        lines.append(self.format_report(result.pooled_post, 'Pooled adjusted'))
        lines.append('Percent change')
        for name, change in result.changes().items():
            lines.append('  {:<14} {:.0f}%'.format(name, change))
        return '\n'.join(lines)

    def format_regression(self, result):
        '''Aligned table: factor, level, coefficient (95% CI)
        '''
        lines = ['Outcome: {} (R^2 {:.3f}, dof {})'.format(
            result.outcome, result.r_squared, result.dof
        )]
        width = max(len(level) for _, level in result.terms)
        width = max([width] + [
            len(level) for level in result.reference_levels.values()
        ])
        row = '{:<14} {:<' + str(width) + '}  {}'

        def estimate(term):
            index = result.terms.index(term)
            return '{:.2f} ({:.2f}, {:.2f})'.format(
                result.coefficients[index], result.ci_low[index],
                result.ci_high[index],
            )

        lines.append(row.format('Intercept', '--',
                                estimate(('Intercept', ''))))
        for factor, reference in result.reference_levels.items():
            lines.append(row.format(factor, reference, '--'))
            for term in result.terms:
                if term[0] == factor:
                    lines.append(row.format('', term[1], estimate(term)))
        return '\n'.join(lines)


@register_formatter('json')
class JsonFormatter(Formatter):
    def format_report(self, report, title=None):
        data = report.to_dict()
        if title:
            data = {'title': title, 'report': data}
        return json.dumps(data, indent=2)

    def format_reports(self, reports):
        return json.dumps(
            {name: report.to_dict() for name, report in reports.items()},
            indent=2,
        )

    def format_crossval(self, result):
        return json.dumps(result.to_dict(), indent=2)

    def format_regression(self, result):
        return json.dumps(result.to_dict(), indent=2)
