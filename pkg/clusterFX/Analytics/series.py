import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from clusterFX.errors import StatisticError

logger = logging.getLogger(__name__)

WINDOW = 10.0
MAX_LAG = 120
EVENT_COLUMNS = ['limit_B', 'limit_A', 'cancel_B', 'cancel_A', 'market_B', 'market_A']


@dataclass
class SeriesStats:
    '''Windowed series with their autocorrelations. (band) is the 95% white-noise half-width 1.96 / sqrt(n).'''
    window: float
    values: pd.DataFrame
    acf: pd.DataFrame
    band: float
    correlation: Optional[pd.DataFrame] = None
    horizons: dict = field(default_factory=dict)

    @property
    def cumulative_acf(self) -> pd.DataFrame:
        '''Running sum of the autocorrelations from lag 1.'''
        return self.acf.iloc[1:].cumsum()


def acf(x, max_lag:int=MAX_LAG) -> np.ndarray:
    '''This function returns the sample autocorrelation of (x) at lags 0..max_lag, normalized so that lag 0 is 1.

    :param x: The series.
    :param max_lag: The largest lag, capped at len(x) - 1.
    :return: The autocorrelations.
    '''
    x = np.asarray(x, dtype=float)
    assert x.ndim == 1, 'The (x) parameter must be one-dimensional.'
    if len(x) < 2:
        raise StatisticError('an autocorrelation needs at least two observations')
    x = x - x.mean()
    c0 = np.dot(x, x)
    if c0 == 0:
        raise StatisticError('the series is constant, its autocorrelation is undefined')
    max_lag = min(max_lag, len(x) - 1)
    return np.array([np.dot(x[:len(x) - k], x[k:]) / c0 for k in range(max_lag + 1)])


def significance_band(n:int) -> float:
    return 1.96 / np.sqrt(n)


def decay_horizon(values, band:float) -> Optional[int]:
    '''First lag L >= 1 such that every autocorrelation at lags L..2L lies inside the band. None when no lag
    qualifies within the computed range.'''
    values = np.asarray(values, dtype=float)
    last = len(values) - 1
    for lag in range(1, last // 2 + 1):
        if np.all(np.abs(values[lag:2 * lag + 1]) <= band):
            return lag
    return None


def _windows(events:pd.DataFrame, window:float, n_windows:int=None) -> tuple:
    assert window > 0, 'The (window) parameter must be strictly positive.'
    index = (events.time // int(round(window * 1000))).astype(np.int64)
    if n_windows is None:
        n_windows = int(index.max()) + 1 if len(index) else 0
    return index, n_windows


def window_counts(events:pd.DataFrame, window:float=WINDOW, n_windows:int=None) -> pd.DataFrame:
    '''Number of events of each kind and side per window. Windows without events count zero.'''
    index, n_windows = _windows(events, window, n_windows)
    label = events.kind + '_' + events.side
    counts = pd.crosstab(index.rename('window'), label.rename('event'))
    return counts.reindex(index=pd.RangeIndex(n_windows, name='window'), columns=pd.Index(EVENT_COLUMNS, name='event'), fill_value=0)


def _acf_frame(values:pd.DataFrame, max_lag:int) -> pd.DataFrame:
    columns = {}
    for name in values.columns:
        try:
            columns[name] = acf(values[name].to_numpy(), max_lag)
        except StatisticError as err:
            logger.warning('No autocorrelation for %s: %s.', name, err)
    frame = pd.DataFrame({k: pd.Series(v) for k, v in columns.items()})
    frame.index.name = 'lag'
    return frame


def event_count_correlations(events:pd.DataFrame, window:float=WINDOW, n_windows:int=None, max_lag:int=MAX_LAG) -> SeriesStats:
    '''This function counts the events of each of the six types (kind and side) in consecutive windows, and
    returns the counts, their autocorrelations and their 6x6 Pearson correlation matrix.

    :param events: An event frame (see tables.event_frame).
    :param window: Window length in seconds.
    :param n_windows: Number of windows in the session; defaults to the window of the last event.
    :param max_lag: Largest autocorrelation lag, in windows.
    :return: SeriesStats with the correlation matrix filled in.
    '''
    counts = window_counts(events, window, n_windows)
    if len(counts) < 2:
        raise StatisticError('at least two windows are needed to correlate event counts')
    return SeriesStats(window, counts, _acf_frame(counts, max_lag), significance_band(len(counts)), counts.corr())


def window_signs(events:pd.DataFrame, window:float=WINDOW, n_windows:int=None) -> pd.DataFrame:
    '''Mean sign (+1 buy, -1 sell) of each event kind per window. Windows without events of a kind get 0.'''
    index, n_windows = _windows(events, window, n_windows)
    frame = pd.DataFrame({'window': index, 'kind': events.kind, 'sign': events.sign})
    means = frame.groupby(['window', 'kind']).sign.mean().unstack('kind')
    return means.reindex(index=range(n_windows), columns=['limit', 'cancel', 'market']).fillna(0.0)


def sign_memory(events:pd.DataFrame, window:float=WINDOW, n_windows:int=None, max_lag:int=MAX_LAG) -> SeriesStats:
    '''This function measures how long the order flow keeps its direction. For every event kind it takes the mean
    sign in consecutive windows, computes its autocorrelation and reports the decay horizon: the first lag from
    which the autocorrelation is statistically zero over the following doubling of the lag.

    :return: SeriesStats whose (horizons) maps each kind to its decay horizon in seconds (None if not reached).
    '''
    signs = window_signs(events, window, n_windows)
    if len(signs) < 2:
        raise StatisticError('at least two windows are needed for a sign autocorrelation')
    band = significance_band(len(signs))
    frame = _acf_frame(signs, max_lag)
    horizons = {}
    for kind in frame.columns:
        lag = decay_horizon(frame[kind].to_numpy(), band)
        horizons[kind] = None if lag is None else lag * window
    return SeriesStats(window, signs, frame, band, horizons=horizons)
