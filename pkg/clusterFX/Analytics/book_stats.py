import logging

import numpy as np
import pandas as pd

from clusterFX.errors import StatisticError
from clusterFX.Book.book import SNAPSHOT_DEPTH, SnapshotSeries
from clusterFX.Book.instruments import Side, last_digit

logger = logging.getLogger(__name__)

# One sample per second on the 0.1 s slice grid.
SECOND = 10


def _weighted(series:SnapshotSeries):
    '''Kept snapshots with the number of slices each one stays in force.'''
    assert isinstance(series, SnapshotSeries), 'The (series) parameter must be a SnapshotSeries.'
    return zip(series.snapshots, series.dwell())


def average_shape(series:SnapshotSeries, side:Side, max_distance:int=20) -> pd.Series:
    '''This function computes the average shape of one side of the book: the visible volume at each distance (in
    ticks) from the same-side best quote, averaged over every slice of the session in which the side had a quote.
    Only ten levels are visible, so distances beyond the tenth level contribute zeros.

    :param series: The snapshot series.
    :param side: The book side.
    :param max_distance: Largest distance reported.
    :return: Mean volume indexed by distance 0..max_distance.
    '''
    assert isinstance(side, Side), 'The (side) parameter must be a Side.'
    assert isinstance(max_distance, int) and max_distance >= 0, 'The (max_distance) parameter must be a nonnegative int.'
    direction = -1 if side is Side.BID else 1
    total = np.zeros(max_distance + 1)
    weight = 0
    for snapshot, dwell in _weighted(series):
        levels = snapshot.levels(side)
        if not levels:
            continue
        best = levels[0][0]
        for price, volume in levels:
            d = (price - best) * direction
            if d <= max_distance:
                total[d] += volume * dwell
        weight += dwell
    if weight == 0:
        raise StatisticError(f'no snapshot with a {side.name.lower()} quote, the average shape is undefined')
    return pd.Series(total / weight, index=pd.RangeIndex(max_distance + 1, name='distance'), name='volume')


def average_gap(series:SnapshotSeries, side:Side) -> pd.Series:
    '''Mean price distance in ticks between visible level k and level k+1, for k = 1..9, weighted by dwell. Slices
    showing fewer than k+1 levels do not enter the mean of gap k.'''
    assert isinstance(side, Side), 'The (side) parameter must be a Side.'
    total = np.zeros(SNAPSHOT_DEPTH - 1)
    weight = np.zeros(SNAPSHOT_DEPTH - 1)
    for snapshot, dwell in _weighted(series):
        prices = np.array([p for p, _ in snapshot.levels(side)], dtype=np.int64)
        if len(prices) < 2:
            continue
        gaps = np.abs(np.diff(prices))
        total[:len(gaps)] += gaps * dwell
        weight[:len(gaps)] += dwell
    mean = np.divide(total, weight, out=np.full_like(total, np.nan), where=weight > 0)
    return pd.Series(mean, index=pd.RangeIndex(1, SNAPSHOT_DEPTH, name='level'), name='gap')


def sampled_quotes(series:SnapshotSeries, sample_period:int=SECOND) -> pd.DataFrame:
    '''Best bid and ask every (sample_period) slices, for samples where both quotes exist.'''
    indices = series.sample_indices(sample_period)
    bids = series.best_prices(Side.BID)
    asks = series.best_prices(Side.ASK)
    valid = indices >= 0
    picked = indices[valid]
    frame = pd.DataFrame({'slice': np.arange(0, series.n_slices, sample_period)[valid],
                          'bid': bids[picked],
                          'ask': asks[picked]})
    return frame[(frame.bid > 0) & (frame.ask > 0)].reset_index(drop=True)


def spread_distribution(series:SnapshotSeries, sample_period:int=SECOND) -> pd.Series:
    '''This function samples the spread (best ask minus best bid, in ticks) every (sample_period) slices and returns
    its normalized histogram. Samples with a missing quote are left out.

    :param series: The snapshot series.
    :param sample_period: Sampling period in slices; the default samples every second.
    :return: Probability of each observed spread, indexed by spread.
    '''
    quotes = sampled_quotes(series, sample_period)
    return _normalized(quotes.ask - quotes.bid, 'spread')


def spread_modes(hist:pd.Series) -> list:
    '''Local modes of a spread histogram: spreads more likely than the spread one tick tighter and at least as
    likely as the spread one tick wider.'''
    if hist.empty:
        return []
    full = hist.reindex(range(int(hist.index.min()) - 1, int(hist.index.max()) + 2), fill_value=0.0)
    values = full.to_numpy()
    return [int(full.index[i]) for i in range(1, len(values) - 1)
            if values[i] > values[i - 1] and values[i] >= values[i + 1]]


def placement_deltas(events:pd.DataFrame, series:SnapshotSeries, kind:str='limit') -> tuple:
    '''This function measures where orders are placed relative to the same-side best quote of the visible book at
    the end of the previous slice. delta = best - price for bids and price - best for asks, so 0 joins the best,
    negative values improve it and positive values sit behind it.

    :param events: An event frame (see tables.event_frame).
    :param series: The snapshot series of the same session.
    :param kind: 'limit' or 'cancel'.
    :return: A frame with the delta, the side and the last digit of the best quote of each event, and the number of
        events skipped because their side of the book was empty.
    '''
    assert kind in ('limit', 'cancel'), 'The (kind) parameter must be "limit" or "cancel".'
    rows = events[events.kind == kind]
    deltas, sides, digits = [], [], []
    skipped = 0
    for slice_index, side_code, price in zip(rows.slice.to_numpy(), rows.side.to_numpy(), rows.price.to_numpy()):
        side = Side(side_code)
        best = series.at(int(slice_index) - 1).best(side)
        if best is None:
            skipped += 1
            continue
        deltas.append(best - int(price) if side is Side.BID else int(price) - best)
        sides.append(side_code)
        digits.append(last_digit(best, side))
    if skipped:
        logger.debug('%d %s events had no same-side best quote and were skipped.', skipped, kind)
    return pd.DataFrame({'delta': np.asarray(deltas, dtype=np.int64), 'side': sides, 'best_digit': digits}), skipped


def _normalized(values:pd.Series, name:str) -> pd.Series:
    if values.empty:
        return pd.Series(dtype=float, name='probability')
    hist = values.value_counts(normalize=True).sort_index()
    hist.index.name = name
    hist.name = 'probability'
    return hist


def placement_distribution(events:pd.DataFrame, series:SnapshotSeries, kind:str='limit') -> tuple:
    '''Normalized histogram of the placement delta and the number of skipped events.'''
    deltas, skipped = placement_deltas(events, series, kind)
    return _normalized(deltas.delta, 'delta'), skipped


def placement_conditional(events:pd.DataFrame, series:SnapshotSeries, kind:str='limit', window:tuple=(1, 20)) -> pd.DataFrame:
    '''This function splits the placement delta by the last digit of the best quote it is measured from. For every
    digit it reports the sample size, the most frequent delta inside (window) and the delta that lands on the
    nearest integer price behind the best quote. When orders target round prices rather than round distances the
    two coincide.

    :return: One row per best-quote digit with columns n, modal_delta and round_delta.
    '''
    deltas, _ = placement_deltas(events, series, kind)
    lo, hi = window
    rows = []
    for digit in range(10):
        sample = deltas.delta[deltas.best_digit == digit]
        inside = sample[(sample >= lo) & (sample <= hi)]
        modal = int(inside.value_counts().idxmax()) if not inside.empty else None
        rows.append({'digit': digit, 'n': int(len(sample)), 'modal_delta': modal, 'round_delta': digit if digit else 10})
    return pd.DataFrame(rows).set_index('digit')


def conditional_histograms(events:pd.DataFrame, series:SnapshotSeries, kind:str='limit') -> pd.DataFrame:
    '''Placement histograms per best-quote digit, one normalized column per digit.'''
    deltas, _ = placement_deltas(events, series, kind)
    columns = {digit: _normalized(deltas.delta[deltas.best_digit == digit], 'delta') for digit in range(10)}
    return pd.DataFrame(columns).fillna(0.0).sort_index()
