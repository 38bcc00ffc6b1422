import logging
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.stats import chi2

from clusterFX.errors import StatisticError
from clusterFX.Book.book import SnapshotSeries
from clusterFX.Book.instruments import Side

logger = logging.getLogger(__name__)

DIGITS = 10
CHI2_LEVEL = 0.01
LOW_SAMPLE = 100


def side_digits(prices, sides) -> np.ndarray:
    '''Vectorized last digit under the side convention. (sides) is one Side, or an array of Side or side codes.'''
    raw = np.asarray(prices, dtype=np.int64) % 10
    if isinstance(sides, Side):
        return raw if sides is Side.BID else (10 - raw) % 10
    codes = np.array([s.value if isinstance(s, Side) else s for s in sides], dtype='U1')
    return np.where(codes == Side.BID.value, raw, (10 - raw) % 10).astype(np.int64)


@dataclass
class DigitDistribution:
    '''Counts of last digits with their frequencies and 95% half-widths 1.96 * sqrt(p (1 - p) / n).'''
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        assert self.counts.shape == (DIGITS,), 'A digit distribution holds exactly ten counts.'
        assert np.all(self.counts >= 0), 'Digit counts cannot be negative.'

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(DIGITS)
        return self.counts / self.n

    @property
    def half_widths(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(DIGITS)
        p = self.frequencies
        return 1.96 * np.sqrt(p * (1.0 - p) / self.n)

    def ranking(self) -> list:
        '''Digits from most to least frequent.'''
        return [int(d) for d in np.argsort(-self.counts, kind='stable')]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'count': self.counts, 'frequency': self.frequencies, 'half_width': self.half_widths},
                            index=pd.RangeIndex(DIGITS, name='digit'))


def digit_distribution(prices, sides) -> DigitDistribution:
    '''This function counts the last digits of a set of prices under the side convention: bids use the rightmost
    digit of the price in ticks, asks the number of ticks below the next integer price.

    :param prices: Prices in ticks.
    :param sides: The side of every price, or one Side for all of them.
    :return: The DigitDistribution.
    '''
    digits = side_digits(prices, sides)
    return DigitDistribution(np.bincount(digits, minlength=DIGITS))


class Chi2Result(NamedTuple):
    statistic: float
    dof: int
    p_value: float
    critical: float
    reject: bool
    warning: Optional[str] = None


def chi2_uniformity(counts, level:float=CHI2_LEVEL) -> Chi2Result:
    '''This function tests whether the ten last digits are equally likely. The statistic sums
    (n_i - n/10)^2 / (n/10) over the digits and is compared to the chi-square law with 9 degrees of freedom.

    :param counts: The ten digit counts (or a DigitDistribution).
    :param level: Significance level of the test.
    :return: Chi2Result with the statistic, the p-value, the critical value and the decision. Samples under 100
        carry a warning.
    '''
    if isinstance(counts, DigitDistribution):
        counts = counts.counts
    counts = np.asarray(counts, dtype=float)
    assert counts.shape == (DIGITS,), 'The (counts) parameter must hold exactly ten digit counts.'
    n = counts.sum()
    if n <= 0:
        raise StatisticError('the chi-square test needs at least one observation')
    expected = n / DIGITS
    statistic = float(((counts - expected) ** 2 / expected).sum())
    dof = DIGITS - 1
    p_value = float(chi2.sf(statistic, dof))
    critical = float(chi2.ppf(1.0 - level, dof))
    warning = None
    if n < LOW_SAMPLE:
        warning = f'only {int(n)} observations, the chi-square approximation is unreliable below {LOW_SAMPLE}'
        logger.warning('Chi-square uniformity test: %s.', warning)
    return Chi2Result(statistic, dof, p_value, critical, statistic > critical, warning)


def barrier_occupancy(series:SnapshotSeries, side:Side, sample_period:int=1) -> DigitDistribution:
    '''This function records the last digit of the best quote of (side) every (sample_period) slices. With the
    default period every slice counts, which weights each snapshot by the time it stays in force.

    :return: The DigitDistribution of the best-quote digit.
    '''
    assert isinstance(series, SnapshotSeries), 'The (series) parameter must be a SnapshotSeries.'
    assert isinstance(side, Side), 'The (side) parameter must be a Side.'
    best = series.best_prices(side)
    if sample_period == 1:
        weights = series.dwell()
    else:
        picked = series.sample_indices(sample_period)
        weights = np.bincount(picked[picked >= 0], minlength=len(best))
    present = best > 0
    digits = side_digits(best[present], side)
    return DigitDistribution(np.bincount(digits, weights=weights[present], minlength=DIGITS).astype(np.int64))


#################### Small spreads ####################

def _classes(spread:int) -> list:
    '''The configurations of a spread: unordered pairs {bid digit, ask digit}, listed from the bid digit 0 up.'''
    seen = []
    for bid_digit in range(DIGITS):
        ask_digit = (10 - (bid_digit + spread) % 10) % 10
        pair = tuple(sorted((bid_digit, ask_digit)))
        if pair not in seen:
            seen.append(pair)
    return seen


class Typology(NamedTuple):
    table: pd.DataFrame
    integer_share: pd.Series


def _typology(samples:pd.DataFrame, spreads) -> Typology:
    rows, shares = [], {}
    for spread in spreads:
        at = samples[samples.spread == spread]
        pairs = [tuple(sorted(x)) for x in zip(at.bid_digit, at.ask_digit)]
        counts = Counter(pairs)
        n = len(pairs)
        for pair in _classes(spread):
            count = counts.get(pair, 0)
            rows.append({'spread': spread, 'config': f'{pair[0]}|{pair[1]}', 'count': count, 'share': count / n if n else 0.0})
        shares[spread] = float(((at.bid_digit == 0) | (at.ask_digit == 0)).mean()) if n else 0.0
    return Typology(pd.DataFrame(rows), pd.Series(shares, name='integer_share'))


def spread_typology(series:SnapshotSeries, spreads=(8, 9), sample_period:int=1) -> Typology:
    '''This function breaks the samples at small spreads down by the configuration of the best quotes. A
    configuration is the pair of last digits of the best bid and best ask, with mirrored pairs merged, so a spread
    of 9 has five configurations and a spread of 8 has six. It also reports how often at least one of the two
    quotes sits on an integer price.

    :param series: The snapshot series.
    :param spreads: The spreads to break down.
    :param sample_period: Sampling period in slices.
    :return: Typology with the per-configuration table (spread, config, count, share) and the integer share per spread.
    '''
    indices = series.sample_indices(sample_period)
    valid = indices[indices >= 0]
    bids = series.best_prices(Side.BID)[valid]
    asks = series.best_prices(Side.ASK)[valid]
    keep = (bids > 0) & (asks > 0)
    bids, asks = bids[keep], asks[keep]
    samples = pd.DataFrame({'spread': asks - bids, 'bid_digit': side_digits(bids, Side.BID),
                            'ask_digit': side_digits(asks, Side.ASK)})
    return _typology(samples, spreads)


def uniform_typology(n:int, spreads=(8, 9), rng:np.random.Generator=None) -> Typology:
    '''This function is the control for spread_typology(): (n) quotes per spread with the best bid drawn uniformly
    between 10 and 9999 ticks and the best ask (spread) ticks above it. Uniform quotes give every configuration
    of a spread of 9 a share of 20%; at a spread of 8 the two configurations whose quotes mirror each other (1|1 and
    6|6) come out of a single bid digit and get 10%, the other four 20%. The table also carries (equal_share), the
    share every configuration would have if all configurations were equally likely, 16.67% at a spread of 8.

    :param n: Samples per spread.
    :param spreads: The spreads to break down.
    :param rng: The random generator, seeded with 0 when omitted.
    :return: Typology as spread_typology(), its table with the extra equal_share column.
    '''
    rng = rng if rng is not None else np.random.default_rng(0)
    frames = []
    for spread in spreads:
        bids = rng.integers(10, 10000, size=n)
        asks = bids + spread
        frames.append(pd.DataFrame({'spread': spread, 'bid_digit': side_digits(bids, Side.BID),
                                    'ask_digit': side_digits(asks, Side.ASK)}))
    typology = _typology(pd.concat(frames, ignore_index=True), spreads)
    typology.table['equal_share'] = [1.0 / len(_classes(s)) for s in typology.table.spread]
    return typology
