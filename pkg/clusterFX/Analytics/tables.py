import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from clusterFX.errors import StatisticError
from clusterFX.Book.book import EventKind, SnapshotSeries
from clusterFX.Book.instruments import Side
from clusterFX.Analytics.book_stats import (average_gap, average_shape, conditional_histograms, placement_conditional,
                                            placement_distribution, spread_distribution, spread_modes)
from clusterFX.Analytics.digits import (barrier_occupancy, chi2_uniformity, digit_distribution, spread_typology,
                                        uniform_typology)
from clusterFX.Analytics.series import event_count_correlations, sign_memory
from clusterFX.Analytics.volumes import MIN_TAIL, volume_split_fit

logger = logging.getLogger(__name__)

EVENT_FIELDS = ['time', 'slice', 'kind', 'side', 'price', 'volume', 'sign', 'book_side']
TRADE_FIELDS = ['time', 'slice', 'side', 'price', 'volume', 'book_side']
KIND_NAMES = {EventKind.LIMIT: 'limit', EventKind.CANCEL: 'cancel', EventKind.MARKET: 'market', EventKind.TRADE: 'market'}
# Samples per spread of the uniform-quote control next to the typology.
UNIFORM_SAMPLES = 20000


def _sign(side:Side) -> int:
    return 1 if side is Side.BID else -1


def event_frame(events) -> pd.DataFrame:
    '''This function puts generated or reconstructed events in one table so every statistic reads both the same way.
    (side) is the side of the trader, (book_side) the side of the book the event touches, (sign) is +1 for buyers
    and -1 for sellers. Reconstructed trades become market events of the opposite trader side.

    :param events: GroundTruthEvents or InferredEvents.
    :return: A frame with the columns time (ms), slice, kind, side, price, volume, sign and book_side.
    '''
    rows = []
    for e in events:
        if hasattr(e, 'time'):
            book_side = e.side.opposite if e.kind is EventKind.MARKET else e.side
            rows.append((e.time, e.slice, KIND_NAMES[e.kind], e.side.value, e.price, e.volume, _sign(e.side), book_side.value))
        else:
            trader = e.side.opposite if e.kind is EventKind.TRADE else e.side
            rows.append((e.slice * 100, e.slice, KIND_NAMES[e.kind], trader.value, e.price, e.volume, _sign(trader), e.side.value))
    frame = pd.DataFrame(rows, columns=EVENT_FIELDS)
    frame['price'] = frame.price.astype('Int64')
    return frame


def trade_frame(trades) -> pd.DataFrame:
    '''Book trades (aggressor side) or reconstructed trades (book side) as one table. (side) is the aggressor.'''
    rows = []
    for t in trades:
        if hasattr(t, 'time'):
            rows.append((t.time, t.time // 100, t.side.value, t.price, t.volume, t.maker_side.value))
        elif t.kind is EventKind.TRADE:
            rows.append((t.slice * 100, t.slice, t.side.opposite.value, t.price, t.volume, t.side.value))
    return pd.DataFrame(rows, columns=TRADE_FIELDS)


class AnalysisInput(NamedTuple):
    '''What every statistic reads: the event table, the trade table and the visible book.'''
    events: pd.DataFrame
    trades: pd.DataFrame
    snapshots: SnapshotSeries
    duration: float
    decimal: bool = True

    @property
    def n_windows(self) -> int:
        return int(np.ceil(self.duration / 10.0))


def _both_sides(function, data:AnalysisInput, name:str) -> pd.DataFrame:
    return pd.DataFrame({'bid': function(data.snapshots, Side.BID), 'ask': function(data.snapshots, Side.ASK)}).rename_axis(name)


def shape_table(data:AnalysisInput) -> pd.DataFrame:
    return _both_sides(average_shape, data, 'distance')


def gap_table(data:AnalysisInput) -> pd.DataFrame:
    return _both_sides(average_gap, data, 'level')


def spread_table(data:AnalysisInput) -> pd.DataFrame:
    hist = spread_distribution(data.snapshots)
    modes = set(spread_modes(hist))
    return pd.DataFrame({'probability': hist, 'mode': [s in modes for s in hist.index]}).rename_axis('spread')


def placement_table(data:AnalysisInput) -> pd.DataFrame:
    limit, skipped_limit = placement_distribution(data.events, data.snapshots, 'limit')
    cancel, skipped_cancel = placement_distribution(data.events, data.snapshots, 'cancel')
    if skipped_limit or skipped_cancel:
        logger.info('Placement skipped %d limit and %d cancel events with an empty side.', skipped_limit, skipped_cancel)
    return pd.DataFrame({'limit': limit, 'cancel': cancel}).fillna(0.0).rename_axis('delta')


def placement_conditional_table(data:AnalysisInput) -> pd.DataFrame:
    return placement_conditional(data.events, data.snapshots)


def placement_by_digit_table(data:AnalysisInput) -> pd.DataFrame:
    return conditional_histograms(data.events, data.snapshots)


def event_correlation_table(data:AnalysisInput) -> pd.DataFrame:
    return event_count_correlations(data.events, n_windows=data.n_windows).correlation


def event_acf_table(data:AnalysisInput) -> pd.DataFrame:
    stats = event_count_correlations(data.events, n_windows=data.n_windows)
    table = stats.acf.join(stats.cumulative_acf.add_suffix('_cumulative'))
    table['band'] = stats.band
    return table


def sign_memory_table(data:AnalysisInput) -> pd.DataFrame:
    stats = sign_memory(data.events, n_windows=data.n_windows)
    table = stats.acf.copy()
    table['band'] = stats.band
    return table


def sign_horizon_table(data:AnalysisInput) -> pd.DataFrame:
    stats = sign_memory(data.events, n_windows=data.n_windows)
    return pd.DataFrame({'horizon_seconds': pd.Series(stats.horizons)}).rename_axis('kind')


def _digit_columns(frames:dict) -> pd.DataFrame:
    parts = []
    for label, distribution in frames.items():
        parts.append(distribution.to_frame().add_prefix(f'{label}_'))
    return pd.concat(parts, axis=1)


def trade_digit_table(data:AnalysisInput) -> pd.DataFrame:
    trades = data.trades
    columns = {'all': digit_distribution(trades.price, trades.book_side)}
    for side in Side:
        at = trades[trades.book_side == side.value]
        columns[side.name.lower()] = digit_distribution(at.price, side)
    return _digit_columns(columns)


def limit_digit_table(data:AnalysisInput) -> pd.DataFrame:
    limits = data.events[data.events.kind == 'limit']
    columns = {'all': digit_distribution(limits.price.astype('int64'), limits.side)}
    for side in Side:
        at = limits[limits.side == side.value]
        columns[side.name.lower()] = digit_distribution(at.price.astype('int64'), side)
    return _digit_columns(columns)


def barrier_table(data:AnalysisInput) -> pd.DataFrame:
    return _digit_columns({side.name.lower(): barrier_occupancy(data.snapshots, side) for side in Side})


def chi2_table(data:AnalysisInput) -> pd.DataFrame:
    limits = data.events[data.events.kind == 'limit']
    samples = {
        'trades': digit_distribution(data.trades.price, data.trades.book_side),
        'limit_orders': digit_distribution(limits.price.astype('int64'), limits.side),
    }
    rows = {}
    for name, distribution in samples.items():
        try:
            rows[name] = chi2_uniformity(distribution)._asdict()
        except StatisticError as err:
            logger.warning('No chi-square test for %s: %s.', name, err)
    return pd.DataFrame.from_dict(rows, orient='index').rename_axis('sample')


def volume_table(data:AnalysisInput) -> pd.DataFrame:
    split = volume_split_fit(data.events)
    return pd.DataFrame({'integer_price': split.integer_histogram, 'decimal_price': split.decimal_histogram}).fillna(0.0).rename_axis('volume')


def volume_fit_table(data:AnalysisInput) -> pd.DataFrame:
    split = volume_split_fit(data.events)
    rows = []
    if split.power_law is not None:
        fit = split.power_law
        rows.append({'sample': 'integer_price', 'law': 'power_law', 'parameter': fit.alpha, 'xmin': fit.xmin,
                     'n': fit.n_tail, 'low_sample': fit.low_sample, 'peaks': ' '.join(map(str, split.peaks))})
    selected = volume_split_fit(data.events, xmin=None).power_law if split.power_law is not None and split.power_law.n_tail > 1 else None
    if selected is not None:
        rows.append({'sample': 'integer_price_ks_xmin', 'law': 'power_law', 'parameter': selected.alpha, 'xmin': selected.xmin,
                     'n': selected.n_tail, 'low_sample': selected.low_sample, 'peaks': ''})
    if split.geometric is not None:
        fit = split.geometric
        rows.append({'sample': 'decimal_price', 'law': 'geometric', 'parameter': fit.rate, 'xmin': 1,
                     'n': fit.n, 'low_sample': fit.n < MIN_TAIL, 'peaks': ''})
    return pd.DataFrame(rows).set_index('sample') if rows else pd.DataFrame()


def typology_table(data:AnalysisInput) -> pd.DataFrame:
    typology = spread_typology(data.snapshots)
    table = typology.table.copy()
    table['integer_share'] = table.spread.map(typology.integer_share)
    control = uniform_typology(UNIFORM_SAMPLES).table.set_index(['spread', 'config'])
    table = table.set_index(['spread', 'config'])
    table['uniform_share'] = control.share
    table['equal_share'] = control.equal_share
    return table


# Statistics available to the analyze command, by name. Digit statistics only make sense with decimal pricing.
STATISTICS = {
    'shape': shape_table,
    'gap': gap_table,
    'spread': spread_table,
    'placement': placement_table,
    'placement_conditional': placement_conditional_table,
    'placement_by_digit': placement_by_digit_table,
    'event_correlation': event_correlation_table,
    'event_acf': event_acf_table,
    'sign_memory': sign_memory_table,
    'sign_horizon': sign_horizon_table,
    'trade_digits': trade_digit_table,
    'limit_digits': limit_digit_table,
    'barrier': barrier_table,
    'chi2': chi2_table,
    'volumes': volume_table,
    'volume_fit': volume_fit_table,
    'typology': typology_table,
}
DECIMAL_ONLY = {'placement_conditional', 'placement_by_digit', 'trade_digits', 'limit_digits', 'barrier', 'chi2',
                'volumes', 'volume_fit', 'typology'}


def compute(name:str, data:AnalysisInput) -> pd.DataFrame:
    '''This function computes one named statistic.

    :param name: A key of STATISTICS.
    :param data: The AnalysisInput.
    :return: The statistic as a table.
    '''
    if name not in STATISTICS:
        raise KeyError(f'unknown statistic {name!r}, valid names: {", ".join(sorted(STATISTICS))}')
    return STATISTICS[name](data)


def compare(first:pd.DataFrame, second:pd.DataFrame, labels=('truth', 'inferred')) -> pd.DataFrame:
    '''Side-by-side columns of one statistic computed on two sources, ground truth and reconstruction by default.'''
    return first.add_suffix(f'_{labels[0]}').join(second.add_suffix(f'_{labels[1]}'), how='outer')


def write_table(table:pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, lineterminator='\n', float_format='%.6g')
    return path


#################### Reconstruction fidelity ####################

def fidelity_table(truth, inferred) -> pd.DataFrame:
    '''This function compares reconstructed events with the ground-truth book effects aggregated the same way, per
    book side and kind: counts and volumes of both and their relative differences.

    :param truth: InferredEvents from truth_events().
    :param inferred: InferredEvents from reconstruct_stream().
    :return: One row per (side, kind).
    '''
    def totals(events):
        frame = pd.DataFrame([(e.side.name.lower(), e.kind.name.lower(), e.volume) for e in events],
                             columns=['side', 'kind', 'volume'])
        return frame.groupby(['side', 'kind']).volume.agg(['count', 'sum'])

    index = pd.MultiIndex.from_product([['bid', 'ask'], ['limit', 'cancel', 'trade']], names=['side', 'kind'])
    t = totals(truth).reindex(index, fill_value=0)
    i = totals(inferred).reindex(index, fill_value=0)
    table = pd.DataFrame({'truth_count': t['count'], 'inferred_count': i['count'],
                          'truth_volume': t['sum'], 'inferred_volume': i['sum']})
    with np.errstate(divide='ignore', invalid='ignore'):
        table['count_error'] = (table.inferred_count - table.truth_count) / table.truth_count.where(table.truth_count > 0)
        table['volume_error'] = (table.inferred_volume - table.truth_volume) / table.truth_volume.where(table.truth_volume > 0)
    return table


#################### Acceptance ####################

def _check(rows:list, name:str, target:str, measure):
    try:
        value, passed = measure()
    except StatisticError as err:
        logger.warning('Check %s could not be computed: %s.', name, err)
        value, passed = None, False
    rows.append({'check': name, 'value': value, 'target': target, 'passed': bool(passed)})


def acceptance_table(data:AnalysisInput, case1_share:float, violations:int) -> pd.DataFrame:
    '''This function checks a full session against the stylized facts the generator is calibrated to, and the
    reconstruction against its own guarantees. Digit and barrier checks apply to decimal pricing only; a pip
    session is checked for its tight one-tick spread instead.

    :param data: AnalysisInput of the ground-truth session.
    :param case1_share: Share of trade-bearing side-slices reconstructed under Case 1.
    :param violations: Number of (slice, side, price) triples breaking volume conservation.
    :return: One row per check with the measured value, the target and whether it passed.
    '''
    rows = []
    _check(rows, 'conservation_violations', '== 0', lambda: (violations, violations == 0))
    _check(rows, 'case1_share', '[0.6, 0.9]', lambda: (case1_share, 0.6 <= case1_share <= 0.9))
    spread = spread_distribution(data.snapshots)
    if not data.decimal:
        one = float(spread.get(1, 0.0))
        _check(rows, 'spread_one_tick_share', '[0.55, 0.75]', lambda: (one, 0.55 <= one <= 0.75))
        return pd.DataFrame(rows).set_index('check')

    trades = digit_distribution(data.trades.price, data.trades.book_side)
    limits = data.events[data.events.kind == 'limit']
    limit_digits = digit_distribution(limits.price.astype('int64'), limits.side)
    _check(rows, 'trade_digit0_share', '[0.4, 0.6]', lambda: (trades.frequencies[0], 0.4 <= trades.frequencies[0] <= 0.6))
    _check(rows, 'limit_digit0_share', '[0.1, 0.3]',
           lambda: (limit_digits.frequencies[0], 0.1 <= limit_digits.frequencies[0] <= 0.3))
    _check(rows, 'limit_digit_ranking', 'starts 0 1',
           lambda: (' '.join(map(str, limit_digits.ranking()[:3])), limit_digits.ranking()[:2] == [0, 1]))

    def barrier():
        counts = barrier_occupancy(data.snapshots, Side.BID).counts + barrier_occupancy(data.snapshots, Side.ASK).counts
        return int(np.argmax(counts)), int(np.argmax(counts)) == 0
    _check(rows, 'barrier_modal_digit', '== 0', barrier)

    def chi2_rejects():
        result = chi2_uniformity(trades)
        return result.statistic, result.reject
    _check(rows, 'trade_digits_chi2', 'reject uniformity at 1%', chi2_rejects)

    def shape():
        mean = (average_shape(data.snapshots, Side.BID) + average_shape(data.snapshots, Side.ASK)) / 2
        peak = int(mean.loc[1:20].idxmax())
        local = mean.loc[5] > mean.loc[4] and mean.loc[5] > mean.loc[6]
        return peak, peak == 10 and local
    _check(rows, 'shape_peak_distance', '== 10 with a local peak at 5', shape)

    def placement():
        modal = placement_conditional(data.events, data.snapshots).loc[0, 'modal_delta']
        return modal, modal == 10
    _check(rows, 'placement_digit0_modal_delta', '== 10', placement)

    def spread_modes_check():
        modes = spread_modes(spread)
        return ' '.join(map(str, modes)), 9 in modes and any(m > 10 for m in modes)
    _check(rows, 'spread_modes', '9 and one above 10', spread_modes_check)

    def correlations():
        matrix = event_count_correlations(data.events, n_windows=data.n_windows).correlation.to_numpy()
        off = matrix[~np.eye(len(matrix), dtype=bool)]
        return float(off.max()), bool(np.all(off > 0) and off.max() >= 0.5)
    _check(rows, 'count_correlations', 'all positive, max >= 0.5', correlations)

    horizons = {}

    def horizon(kind, lo, hi):
        if not horizons:
            horizons.update(sign_memory(data.events, n_windows=data.n_windows).horizons)
        value = horizons.get(kind)
        return value, value is not None and lo <= value <= hi
    _check(rows, 'market_sign_horizon', '[60, 180] s', lambda: horizon('market', 60, 180))
    _check(rows, 'limit_sign_horizon', '[180, 480] s', lambda: horizon('limit', 180, 480))

    def typology():
        share = float(spread_typology(data.snapshots, spreads=(9,)).integer_share.get(9, 0.0))
        return share, share >= 0.6
    _check(rows, 'spread9_integer_share', '>= 0.6', typology)
    return pd.DataFrame(rows).set_index('check')
