"""Command line entry point: ``bdsde run | list-bank | validate``."""

import argparse
import json
import logging
import sys

from bdsde import __version__, bank, runner
from bdsde.config import ExperimentConfig, load_config
from bdsde.exceptions import ConfigurationError, ValidationError
from bdsde.report import to_jsonable

logger = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(prog='bdsde', description="BDSDE solvers and stationary SPDE experiments.")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="log per-iteration diagnostics")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="only log warnings and errors")
    sub = parser.add_subparsers(dest='command')

    run = sub.add_parser('run', help="run the pipeline of an experiment config")
    run.add_argument('--config', metavar='PATH', help="YAML experiment file (defaults apply when omitted)")
    run.add_argument('--out', metavar='DIR', help="output directory override")
    run.add_argument('--seed', type=int, metavar='INT', help="seed override")
    run.add_argument('--force', action='store_true', help="downgrade failed conditions to warnings")

    sub.add_parser('list-bank', help="list the built-in problems")

    validate = sub.add_parser('validate', help="check the structural conditions of a config's problem")
    validate.add_argument('--config', metavar='PATH')
    validate.add_argument('--seed', type=int, metavar='INT')
    return parser


def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _load(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, out=getattr(args, 'out', None))


def cmd_run(args):
    try:
        config = _load(args)
    except ConfigurationError as e:
        logger.error("%s", e)
        return runner.EXIT_CONFIG
    status, report = runner.run(config, force=args.force)
    print("{}: exit {} ({} assertions, {} failed) -> {}".format(
        config.problem.name, status, len(report.assertions), len(report.failures()), config.output.directory))
    return status


def cmd_list_bank(args):
    for entry in bank.list_bank():
        flag = 'oracle' if entry['has_oracle'] else '-'
        horizon = 'infinite' if entry['horizon'] is None else 'T={:g}'.format(entry['horizon'])
        print("{:<18} {:<8} {:<10} {}".format(entry['name'], flag, horizon, entry['description']))
        if entry['oracle']:
            print("{:<18} {}".format('', entry['oracle']))
    return 0


def cmd_validate(args):
    try:
        passed, reports = runner.validate(_load(args))
    except (ConfigurationError, ValidationError) as e:
        logger.error("%s", e)
        return runner.EXIT_CONFIG
    print(json.dumps(to_jsonable({k: r.to_dict() for k, r in reports.items()}), sort_keys=True, indent=2))
    return 0 if passed else runner.EXIT_CONFIG


COMMANDS = {
    'run': cmd_run,
    'list-bank': cmd_list_bank,
    'validate': cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return runner.EXIT_CONFIG
    _configure_logging(args)
    return COMMANDS[args.command](args)


if __name__ == '__main__':
    sys.exit(main())
