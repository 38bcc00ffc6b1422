import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from clusterFX.errors import ClusterFXError, ConfigError, FeedParseError, StatisticError
from clusterFX.Book.instruments import InstrumentSpec
from clusterFX.Flow.config import OUTPUT_ENV, load_config, with_regime
from clusterFX.Flow.session import META_FILE, generate_session, load_session, save_session
from clusterFX.Feed.codec import DealRecord, decode, encode, encode_text, quotes_to_series, read_feed, write_feed
from clusterFX.Reconstruct.reconstruct import (check_stream, read_inferred, reconstruct_stream, truth_events,
                                               write_inferred, write_report)
from clusterFX.Analytics.tables import (DECIMAL_ONLY, STATISTICS, AnalysisInput, acceptance_table, compare, compute,
                                        event_frame, fidelity_table, trade_frame, write_table)
from clusterFX.Draw.draw import Draw

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_THRESHOLD = 5

FEED_FILE = 'feed.txt'
INFERRED_FILE = 'inferred.txt'
REPORT_FILE = 'report.json'
ANALYSIS_DIR = 'analysis'
SOURCES = ('truth', 'inferred')


class UsageError(ClusterFXError):
    '''A command line that argparse accepts but that asks for something that does not exist.'''


def session_dir(config) -> Path:
    return Path(config.outputs) / config.name.replace('/', '').replace(' ', '_')


def _config(args):
    config = load_config(args.config, seed=args.seed, duration=args.duration, outputs=args.outputs)
    if args.regime is not None:
        config = with_regime(config, args.regime)
    return config


def _print_table(title:str, table:pd.DataFrame):
    print(f'---------------- {title} ----------------')
    print(table.to_string())


#################### Inputs of the analyze command ####################

def _meta(directory:Path) -> dict:
    return json.loads((directory / META_FILE).read_text())


def truth_input(directory) -> AnalysisInput:
    session = load_session(directory)
    return AnalysisInput(event_frame(session.events), trade_frame(session.trades), session.snapshots,
                         session.duration, session.instrument.decimal)


def inferred_input(directory) -> AnalysisInput:
    '''The reconstructed events of a session with the visible book rebuilt from its feed.'''
    directory = Path(directory)
    meta = _meta(directory)
    records = read_feed(directory / FEED_FILE)
    inferred = read_inferred(directory / INFERRED_FILE)
    series = quotes_to_series(records, meta['n_slices'])
    return AnalysisInput(event_frame(inferred), trade_frame(inferred), series, meta['duration'],
                         InstrumentSpec(**meta['instrument']).decimal)


def _selection(which:str, decimal:bool) -> list:
    if which == 'all':
        return [name for name in STATISTICS if decimal or name not in DECIMAL_ONLY]
    names = [name.strip() for name in which.split(',') if name.strip()]
    unknown = [name for name in names if name not in STATISTICS]
    if unknown:
        raise UsageError(f'unknown statistic {", ".join(unknown)}; valid names: all, {", ".join(STATISTICS)}')
    return names


def _safe_compute(name:str, data:AnalysisInput):
    try:
        return compute(name, data)
    except StatisticError as err:
        logger.warning('Skipping %s: %s.', name, err)
        return None


def analyze(directory, which:str='all', source:str='truth', compared:tuple=None, svg:bool=False) -> list:
    '''This function computes the selected statistics of a session directory and writes one CSV per statistic
    (and one SVG when asked). With (compared) set to ('truth', 'inferred') every table holds the columns of both
    sources side by side.

    :param directory: A session directory written by simulate (and encode/reconstruct for the inferred source).
    :param which: 'all' or a comma-separated list of statistic names.
    :param source: 'truth' or 'inferred'.
    :param compared: Optional pair of sources to put side by side.
    :param svg: Also draw every table.
    :return: The paths of the CSV files.
    '''
    directory = Path(directory)
    loaders = {'truth': truth_input, 'inferred': inferred_input}
    sources = list(compared) if compared else [source]
    if len(set(sources)) != len(sources):
        raise UsageError('--compare needs two different sources')
    inputs = {name: loaders[name](directory) for name in sources}
    decimal = all(data.decimal for data in inputs.values())
    target = directory / ANALYSIS_DIR / ('_vs_'.join(sources) if compared else source)
    tables = {}
    for name in _selection(which, decimal):
        computed = [_safe_compute(name, data) for data in inputs.values()]
        if any(table is None for table in computed):
            continue
        if compared:
            tables[name] = compare(*computed, labels=sources)
        else:
            tables[name] = computed[0]
    paths = [write_table(table, target / f'{name}.csv') for name, table in tables.items()]
    if svg:
        Draw().draw_tables(tables, target)
    logger.info('Wrote %d statistics to %s.', len(paths), target)
    return paths


#################### Commands ####################

def cmd_simulate(args) -> int:
    config = _config(args)
    session = generate_session(config)
    directory = save_session(session, session_dir(config))
    _print_table(f'{session.name}: events of a {session.duration:.0f} s session', session.summary())
    print(f'Session written to {directory}')
    return EXIT_OK


def cmd_encode(args) -> int:
    directory = Path(args.session)
    session = load_session(directory)
    records = encode(session.snapshots, session.trades, include_total_volume=not args.no_total_volume)
    path = write_feed(records, directory / FEED_FILE)
    deals = sum(1 for r in records if isinstance(r, DealRecord))
    print(f'{len(records)} records ({deals} deal records) written to {path}')
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    feed = Path(args.feed)
    records = read_feed(feed)
    events, report = reconstruct_stream(records, seed=args.seed if args.seed is not None else 0)
    target = Path(args.outputs) if args.outputs else feed.parent
    write_inferred(events, target / INFERRED_FILE)
    write_report(report, target / REPORT_FILE)
    _print_table('reconstruction report', pd.Series(report.to_dict()).drop('inconsistent').to_frame('value'))
    print(f'Case 1 share of trade-bearing slices: {report.case1_share:.1%}')
    return EXIT_OK


def cmd_analyze(args) -> int:
    paths = analyze(args.session, args.which, args.source, tuple(args.compare) if args.compare else None, args.svg)
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_decode_check(args) -> int:
    raw = Path(args.feed).read_bytes()
    again = encode_text(decode(raw)).encode('ascii')
    if again != raw:
        print(f'{args.feed}: re-encoding differs from the file')
        return EXIT_IO
    print(f'{args.feed}: byte-identical round trip')
    return EXIT_OK


def cmd_pipeline(args) -> int:
    '''simulate, encode, reconstruct, analyze both sources, then the fidelity and acceptance tables.'''
    config = _config(args)
    session = generate_session(config)
    directory = save_session(session, session_dir(config))
    _print_table(f'{session.name}: events of a {session.duration:.0f} s session', session.summary())

    records = encode(session.snapshots, session.trades, include_total_volume=config.include_total_volume)
    write_feed(records, directory / FEED_FILE)
    inferred, report = reconstruct_stream(records, seed=config.seed)
    write_inferred(inferred, directory / INFERRED_FILE)
    write_report(report, directory / REPORT_FILE)
    violations = check_stream(records, inferred, report)
    if violations:
        logger.warning('%d prices break volume conservation, first at %s.', len(violations), violations[0])

    svg = config.emit_svg or args.svg
    for source in SOURCES:
        analyze(directory, 'all', source, svg=svg)
    analyze(directory, 'all', compared=SOURCES, svg=False)

    fidelity = fidelity_table(truth_events(session.effects), inferred)
    write_table(fidelity, directory / 'fidelity.csv')
    _print_table('reconstruction fidelity', fidelity)

    truth = AnalysisInput(event_frame(session.events), trade_frame(session.trades), session.snapshots,
                          session.duration, config.instrument.decimal)
    acceptance = acceptance_table(truth, report.case1_share, len(violations))
    write_table(acceptance, directory / 'acceptance.csv')
    _print_table('acceptance', acceptance)
    failed = acceptance.index[~acceptance.passed].tolist()
    if failed:
        logger.warning('Failed checks: %s.', ', '.join(failed))
        return EXIT_THRESHOLD
    return EXIT_OK


def _common(parser:argparse.ArgumentParser):
    parser.add_argument('--config', default='eurusd_decimal', help='config file or packaged config name')
    parser.add_argument('--seed', type=int, default=None, help='overrides the config seed')
    parser.add_argument('--duration', type=float, default=None, help='session length in seconds')
    parser.add_argument('--outputs', default=None, help=f'output directory (overrides ${OUTPUT_ENV})')
    parser.add_argument('--regime', choices=('decimal', 'pip'), default=None, help='pricing regime of the instrument')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='clusterfx', description='FX limit order book price clustering workbench.')
    parser.add_argument('--log-level', default='INFO', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', help='generate a session and its ground truth')
    _common(simulate)
    simulate.set_defaults(run=cmd_simulate)

    encoder = commands.add_parser('encode', help='encode a session directory into a feed')
    encoder.add_argument('session', help='session directory')
    encoder.add_argument('--no-total-volume', action='store_true', help='leave out the signed total of deal records')
    encoder.set_defaults(run=cmd_encode)

    rebuild = commands.add_parser('reconstruct', help='infer the order flow from a feed')
    rebuild.add_argument('feed', help='feed file')
    rebuild.add_argument('--seed', type=int, default=None, help='seed of the Case 2 allocations')
    rebuild.add_argument('--outputs', default=None, help='directory of the inferred events, defaults to the feed directory')
    rebuild.set_defaults(run=cmd_reconstruct)

    analysis = commands.add_parser('analyze', help='compute statistics of a session directory')
    analysis.add_argument('session', help='session directory')
    analysis.add_argument('--which', default='all', help=f'all, or a comma-separated list of: {", ".join(STATISTICS)}')
    analysis.add_argument('--source', choices=SOURCES, default='truth')
    analysis.add_argument('--compare', nargs=2, choices=SOURCES, metavar=('A', 'B'), help='side-by-side columns of two sources')
    analysis.add_argument('--svg', action='store_true', help='also draw every table')
    analysis.set_defaults(run=cmd_analyze)

    pipeline = commands.add_parser('pipeline', help='simulate, encode, reconstruct and analyze in one run')
    _common(pipeline)
    pipeline.add_argument('--svg', action='store_true', help='also draw every table')
    pipeline.set_defaults(run=cmd_pipeline)

    check = commands.add_parser('decode-check', help='check that a feed re-encodes byte for byte')
    check.add_argument('feed', help='feed file')
    check.set_defaults(run=cmd_decode_check)
    return parser


def main(argv=None) -> int:
    '''Entry point of the clusterfx command. Returns the exit code: 0 success, 2 usage, 3 config, 4 I/O or feed,
    5 failed acceptance checks.'''
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return args.run(args)
    except ConfigError as err:
        print(f'config error in {err.field}: {err.message}', file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as err:
        print(f'error: {err}', file=sys.stderr)
        return EXIT_USAGE
    except (FeedParseError, OSError, UnicodeDecodeError, json.JSONDecodeError) as err:
        print(f'I/O error: {err}', file=sys.stderr)
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
