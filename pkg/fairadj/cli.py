'''Command line entry point: adjust, predict, evaluate, crossval, sweep,
synth and experiment subcommands

Defaults come from the `[fairadj]` section of an ini file (./fairadj.ini
unless --config says otherwise); explicit flags win over the file.
'''
import argparse
import logging
import os
import sys
from configparser import ConfigParser
from dataclasses import dataclass, field

from .adjuster import FairAdjuster
from .criteria import CriterionKind
from .data_model import (
    ColumnSchema, dataset_to_csv, load_dataset, write_dataset,
)
from .estimation import fit_empirical
from .evaluation import (
    SWEEP_COLUMNS, crossval, evaluate_analytic, evaluate_blackbox,
    evaluate_sampled, rows_to_csv, run_sweep,
)
from .exceptions import FairAdjError
from .fairness_lp import FairnessSpec
from .formatter import FormatterFactory
from .objectives import ObjectiveKind, ObjectiveSpec
from .policy import AdjustmentPolicy
from .synth import (
    ClassBalance, GroupBalance, PredBias, RegimeSpec, generate, ols_fit,
    run_grid, table_to_csv,
)
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = './fairadj.ini'
DEFAULTS = {
    'criterion': CriterionKind.TERM_BY_TERM.value,
    'objective': ObjectiveKind.WEIGHTED.value,
    'epsilon': 0.0,
    'smoothing': 0.0,
    'folds': 5,
    'seed': 0,
    'tol': 1e-9,
    'max_iter': 10000,
    'y_col': 'y',
    'yhat_col': 'y_hat',
    'a_col': 'a',
    'sweep_steps': 100,
    'workers': 1,
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    input: str = None
    output: str = None
    policy: str = None
    report: str = None
    criterion: CriterionKind = CriterionKind.TERM_BY_TERM
    objective: ObjectiveKind = ObjectiveKind.WEIGHTED
    epsilon: float = 0.0
    smoothing: float = 0.0
    folds: int = 5
    seed: int = 0
    tol: float = 1e-9
    max_iter: int = 10000
    schema: ColumnSchema = field(default_factory=ColumnSchema)
    sweep_steps: int = 100
    workers: int = 1
    criteria: tuple = ()
    groups: tuple = (2, 3)
    regime: RegimeSpec = None
    n: int = 1000
    criterion_given: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'criterion', CriterionKind(self.criterion))
        object.__setattr__(self, 'objective', ObjectiveKind(self.objective))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError('epsilon must be in [0, 1], got {}'.format(
                self.epsilon
            ))
        if self.subcommand == 'crossval' and self.folds < 2:
            raise ValueError('folds must be at least 2, got {}'.format(
                self.folds
            ))
        if self.smoothing < 0:
            raise ValueError('smoothing must be nonnegative')
        if self.sweep_steps < 1:
            raise ValueError('sweep steps must be positive')
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError('seed must be an unsigned 64-bit integer')

    @property
    def fairness(self):
        return FairnessSpec(self.criterion, self.epsilon)

    @property
    def objective_spec(self):
        return ObjectiveSpec(self.objective)


def load_config(path=None):
    '''Values of the [fairadj] section, falling back to built-in defaults
    '''
    values = dict(DEFAULTS)
    config_path = path or DEFAULT_CONFIG_PATH
    if path and not os.path.exists(path):
        raise ValueError('Config file not found: {}'.format(path))
    if os.path.exists(config_path):
        config = ConfigParser()
        config.read(config_path)
        if config.has_section('fairadj'):
            section = config['fairadj']
            for key, default in DEFAULTS.items():
                if key in section:
                    values[key] = type(default)(section.get(key))
    return values


def _slug(member):
    return member.name.lower().replace('_', '-')


def _from_slug(enum_cls, slug):
    return enum_cls[slug.upper().replace('-', '_')]


def _add_data_flags(parser):
    parser.add_argument('--input', required=True,
                        help='CSV of prediction triples')
    parser.add_argument('--y-col', dest='y_col')
    parser.add_argument('--yhat-col', dest='yhat_col')
    parser.add_argument('--a-col', dest='a_col')


def _add_method_flags(parser):
    parser.add_argument('--criterion',
                        choices=[kind.value for kind in CriterionKind])
    parser.add_argument('--objective', choices=[
        ObjectiveKind.UNWEIGHTED.value, ObjectiveKind.WEIGHTED.value
    ])
    parser.add_argument('--epsilon', type=float)
    parser.add_argument('--smoothing', type=float)
    parser.add_argument('--tol', type=float)
    parser.add_argument('--max-iter', dest='max_iter', type=int)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='ini file with [fairadj] defaults')
    common.add_argument('--seed', type=int)
    common.add_argument('--workers', type=int)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true')
    verbosity.add_argument('--quiet', action='store_true')

    parser = argparse.ArgumentParser(
        prog='fairadj',
        description='Fair post-processing of multiclass predictions',
    )
    commands = parser.add_subparsers(dest='subcommand', required=True)

    adjust = commands.add_parser('adjust', parents=[common],
                                 help='solve for a fair adjustment policy')
    _add_data_flags(adjust)
    _add_method_flags(adjust)
    adjust.add_argument('--policy', required=True,
                        help='policy JSON to write')
    adjust.add_argument('--report', help='in-sample report JSON to write')

    predict = commands.add_parser('predict', parents=[common],
                                  help='sample adjusted predictions')
    _add_data_flags(predict)
    predict.add_argument('--policy', required=True)
    predict.add_argument('--output', required=True)

    evaluate = commands.add_parser('evaluate', parents=[common],
                                   help='sampled report of a stored policy')
    _add_data_flags(evaluate)
    evaluate.add_argument('--policy', required=True)
    evaluate.add_argument('--report', help='report JSON to write')
    evaluate.add_argument('--criterion',
                          choices=[kind.value for kind in CriterionKind])

    cross = commands.add_parser('crossval', parents=[common],
                                help='k-fold out-of-sample evaluation')
    _add_data_flags(cross)
    _add_method_flags(cross)
    cross.add_argument('--folds', type=int)
    cross.add_argument('--report', help='report JSON to write')

    sweep = commands.add_parser('sweep', parents=[common],
                                help='fairness-discrimination sweep over eps')
    _add_data_flags(sweep)
    sweep.add_argument('--criterion', dest='criteria', action='append',
                       choices=[kind.value for kind in CriterionKind],
                       help='repeat for several; default all')
    sweep.add_argument('--objective', choices=[
        ObjectiveKind.UNWEIGHTED.value, ObjectiveKind.WEIGHTED.value
    ])
    sweep.add_argument('--smoothing', type=float)
    sweep.add_argument('--steps', dest='sweep_steps', type=int)
    sweep.add_argument('--tol', type=float)
    sweep.add_argument('--max-iter', dest='max_iter', type=int)
    sweep.add_argument('--output', required=True)

    synth = commands.add_parser('synth', parents=[common],
                                help='generate one synthetic regime')
    synth.add_argument('--groups', type=int, choices=[2, 3], default=2)
    synth.add_argument('--class-balance', dest='class_balance',
                       choices=[_slug(m) for m in ClassBalance],
                       default='balanced')
    synth.add_argument('--group-balance', dest='group_balance',
                       choices=[_slug(m) for m in GroupBalance],
                       default='no-minority')
    synth.add_argument('--pred-bias', dest='pred_bias',
                       choices=[_slug(m) for m in PredBias], default='low')
    synth.add_argument('--n', type=int, default=1000)
    synth.add_argument('--output', required=True)

    experiment = commands.add_parser(
        'experiment', parents=[common],
        help='factorial grid of adjustments plus regressions',
    )
    experiment.add_argument('--groups', type=int, choices=[2, 3],
                            action='append', help='default both')
    experiment.add_argument('--n', type=int, default=1000)
    experiment.add_argument('--output', required=True,
                            help='experiment table CSV')
    experiment.add_argument('--report', help='regression tables text file')
    return parser


def resolve_config(args):
    '''Merge flags over ini values over defaults into a RunConfig
    '''
    values = load_config(args.config)
    flags = vars(args)
    for key in DEFAULTS:
        if flags.get(key) is not None:
            values[key] = flags[key]
    regime = None
    groups = (2, 3)
    if args.subcommand == 'synth':
        regime = RegimeSpec(
            args.groups,
            _from_slug(ClassBalance, args.class_balance),
            _from_slug(GroupBalance, args.group_balance),
            _from_slug(PredBias, args.pred_bias),
            args.n,
            values['seed'],
        )
    if args.subcommand == 'experiment':
        groups = tuple(sorted(set(args.groups))) if args.groups else (2, 3)
    return RunConfig(
        subcommand=args.subcommand,
        input=flags.get('input'),
        output=flags.get('output'),
        policy=flags.get('policy'),
        report=flags.get('report'),
        criterion=values['criterion'],
        objective=values['objective'],
        epsilon=values['epsilon'],
        smoothing=values['smoothing'],
        folds=values['folds'],
        seed=values['seed'],
        tol=values['tol'],
        max_iter=values['max_iter'],
        schema=ColumnSchema(values['y_col'], values['yhat_col'],
                            values['a_col']),
        sweep_steps=values['sweep_steps'],
        workers=values['workers'],
        criteria=tuple(flags.get('criteria') or ()),
        groups=groups,
        regime=regime,
        n=flags.get('n') or 1000,
        criterion_given=flags.get('criterion') is not None,
    )


def _emit(text, path=None):
    if path:
        atomic_write_text(path, text + '\n')
    print(text)


def cmd_adjust(config):
    ds = load_dataset(config.input, config.schema)
    adjuster = FairAdjuster(
        config.fairness, config.objective_spec, config.smoothing,
        config.tol, config.max_iter,
    )
    policy = adjuster.fit(ds, meta={'seed': config.seed})
    policy.save(config.policy)
    reports = {
        'blackbox': evaluate_blackbox(ds, config.criterion),
        'adjusted': evaluate_analytic(policy, adjuster.em),
    }
    if config.report:
        atomic_write_text(
            config.report,
            FormatterFactory.get_formatter('json').format_reports(reports)
            + '\n',
        )
    print(FormatterFactory.get_formatter().format_reports(reports))
    return policy


def cmd_predict(config):
    ds = load_dataset(config.input, config.schema)
    policy = AdjustmentPolicy.load(config.policy)
    _, y_hat, a = policy.align(ds)
    y_adj = policy.predict_many(y_hat, a, config.seed)
    names = [policy.class_names[i] for i in y_adj]
    atomic_write_text(config.output, dataset_to_csv(
        ds, config.schema, extra=[('y_adj', names)]
    ))
    logger.info('Wrote %d adjusted predictions to %s', len(names),
                config.output)
    return y_adj


def cmd_evaluate(config):
    ds = load_dataset(config.input, config.schema)
    policy = AdjustmentPolicy.load(config.policy)
    criterion = config.criterion if config.criterion_given else None
    reports = {
        'blackbox': evaluate_blackbox(ds, criterion),
        'adjusted': evaluate_sampled(policy, ds, config.seed, criterion),
    }
    if config.report:
        atomic_write_text(
            config.report,
            FormatterFactory.get_formatter('json').format_reports(reports)
            + '\n',
        )
    print(FormatterFactory.get_formatter().format_reports(reports))
    return reports


def cmd_crossval(config):
    ds = load_dataset(config.input, config.schema)
    result = crossval(
        ds, config.folds, config.seed, config.objective_spec,
        config.fairness, config.smoothing, config.tol, config.max_iter,
    )
    if config.report:
        atomic_write_text(
            config.report,
            FormatterFactory.get_formatter('json').format_crossval(result)
            + '\n',
        )
    print(FormatterFactory.get_formatter().format_crossval(result))
    return result


def cmd_sweep(config):
    ds = load_dataset(config.input, config.schema)
    em = fit_empirical(ds, config.smoothing)
    rows = run_sweep(
        em, config.criteria or None, config.objective_spec,
        config.sweep_steps, config.tol, config.max_iter, config.workers,
    )
    atomic_write_text(config.output, rows_to_csv(rows, SWEEP_COLUMNS))
    logger.info('Wrote %d sweep rows to %s', len(rows), config.output)
    return rows


def cmd_synth(config):
    ds = generate(config.regime)
    write_dataset(ds, config.output, config.schema)
    logger.info('Wrote %s to %s', ds, config.output)
    return ds


def cmd_experiment(config):
    table = run_grid(
        base_seed=config.seed, groups=config.groups, n=config.n,
        workers=config.workers,
        tol=config.tol, max_iter=config.max_iter,
    )
    atomic_write_text(config.output, table_to_csv(table))
    formatter = FormatterFactory.get_formatter()
    tables = []
    for groups in sorted(config.groups, reverse=True):
        for outcome in ('acc_change', 'tdr_change'):
            result = ols_fit(table, outcome, groups)
            tables.append('Groups: {}\n{}'.format(
                groups, formatter.format_regression(result)
            ))
    _emit('\n\n'.join(tables), config.report)
    return table


COMMANDS = {
    'adjust': cmd_adjust,
    'predict': cmd_predict,
    'evaluate': cmd_evaluate,
    'crossval': cmd_crossval,
    'sweep': cmd_sweep,
    'synth': cmd_synth,
    'experiment': cmd_experiment,
}


def configure_logging(verbose=False, quiet=False):
    level = logging.INFO
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def main(argv=None):
    '''Run one subcommand; returns the process exit code
    '''
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = resolve_config(args)
    except ValueError as error:
        parser.error(str(error))
    try:
        COMMANDS[config.subcommand](config)
    except FairAdjError as error:
        logger.error('%s', error)
        print('Error: {}'.format(error), file=sys.stderr)
        return error.exit_code
    return 0
