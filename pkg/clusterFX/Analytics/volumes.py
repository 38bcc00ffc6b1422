import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from clusterFX.errors import StatisticError

logger = logging.getLogger(__name__)

MIN_TAIL = 50
ALPHA_BOUNDS = (1.0001, 7.0)


@dataclass
class PowerLawFit:
    '''Discrete power law P(v) = v^-alpha / Z on xmin <= v (<= xmax when truncated).'''
    alpha: float
    xmin: int
    log_likelihood: float
    n_tail: int
    xmax: Optional[int] = None
    ks: Optional[float] = None

    @property
    def low_sample(self) -> bool:
        return self.n_tail < MIN_TAIL


@dataclass
class GeometricFit:
    '''Geometric law on v >= 1: P(v) = p (1 - p)^(v - 1) = (1 - e^-rate) e^(-rate (v - 1)).'''
    p: float
    rate: float
    mean: float
    n: int


def _normalizer(alpha:float, xmin:int, xmax:Optional[int]) -> float:
    z = zeta(alpha, xmin)
    if xmax is not None:
        z -= zeta(alpha, xmax + 1)
    return z


def _tail(values, xmin:int, xmax:Optional[int]) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    keep = values >= xmin
    if xmax is not None:
        keep &= values <= xmax
    return values[keep]


def power_law_log_likelihood(values, alpha:float, xmin:int=1, xmax:int=None) -> float:
    '''Log-likelihood of the values at or above (xmin) under the discrete power law of exponent (alpha).'''
    tail = _tail(values, xmin, xmax)
    return float(-alpha * np.log(tail).sum() - len(tail) * np.log(_normalizer(alpha, xmin, xmax)))


def ks_distance(values, alpha:float, xmin:int=1, xmax:int=None) -> float:
    '''Largest distance between the empirical and the fitted cumulative distributions of the tail.'''
    tail = _tail(values, xmin, xmax)
    support, counts = np.unique(tail, return_counts=True)
    empirical = np.cumsum(counts) / len(tail)
    model = (zeta(alpha, xmin) - zeta(alpha, support + 1)) / _normalizer(alpha, xmin, xmax)
    return float(np.abs(empirical - model).max())


def fit_power_law(values, xmin:int=1, xmax:int=None) -> PowerLawFit:
    '''This function fits a discrete power law to the values at or above (xmin) by maximum likelihood: it minimizes
    alpha * sum(ln v) + n ln Z(alpha) over alpha with a bounded one-dimensional search, Z being the Hurwitz zeta
    normalization (truncated at xmax when given).

    :param values: Positive integer samples.
    :param xmin: Lower bound of the fitted tail.
    :param xmax: Optional upper truncation of the law.
    :return: The PowerLawFit. Fits on fewer than 50 tail values are flagged low-sample.
    '''
    assert isinstance(xmin, (int, np.integer)) and xmin >= 1, 'The (xmin) parameter must be an integer of at least 1.'
    tail = _tail(values, xmin, xmax)
    if len(tail) == 0:
        raise StatisticError(f'no value at or above xmin = {xmin}, the power law cannot be fitted')
    n = len(tail)

    def negative_log_likelihood(alpha):
        return -power_law_log_likelihood(tail, alpha, xmin, xmax)

    solution = minimize_scalar(negative_log_likelihood, bounds=ALPHA_BOUNDS, method='bounded', options={'xatol': 1e-6})
    fit = PowerLawFit(float(solution.x), int(xmin), float(-solution.fun), n, xmax)
    fit.ks = ks_distance(tail, fit.alpha, xmin, xmax)
    if fit.low_sample:
        logger.warning('Power-law fit on %d tail values only (xmin = %d).', n, xmin)
    return fit


def select_xmin(values, candidates=range(1, 11), xmax:int=None) -> PowerLawFit:
    '''Fits every candidate lower bound and keeps the fit whose tail is closest to its law in KS distance.'''
    values = np.asarray(values, dtype=np.int64)
    fits = [fit_power_law(values, int(x), xmax) for x in candidates if np.count_nonzero(values >= x) > 1]
    if not fits:
        raise StatisticError('no candidate xmin leaves enough values to fit')
    return min(fits, key=lambda f: f.ks)


def fit_geometric(values) -> GeometricFit:
    '''Maximum likelihood geometric law on v >= 1: p = 1 / mean and rate = -ln(1 - p).'''
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise StatisticError('no values to fit a geometric law to')
    assert np.all(values >= 1), 'Geometric samples must be positive integers.'
    mean = float(values.mean())
    p = 1.0 / mean
    rate = -np.log1p(-p) if p < 1 else np.inf
    return GeometricFit(p, float(rate), mean, len(values))


def volume_histogram(values) -> pd.Series:
    values = pd.Series(np.asarray(values, dtype=np.int64))
    if values.empty:
        return pd.Series(dtype=float, name='probability')
    hist = values.value_counts(normalize=True).sort_index()
    hist.index.name = 'volume'
    hist.name = 'probability'
    return hist


def round_peaks(values, step:int=5, largest:int=50) -> list:
    '''Round volumes (multiples of (step) up to (largest)) whose frequency exceeds the mean frequency of the two
    neighbouring volumes.'''
    counts = np.bincount(np.asarray(values, dtype=np.int64), minlength=largest + 2)
    return [v for v in range(step, largest + 1, step) if counts[v] > 0.5 * (counts[v - 1] + counts[v + 1])]


class VolumeSplit(NamedTuple):
    integer_histogram: pd.Series
    power_law: Optional[PowerLawFit]
    decimal_histogram: pd.Series
    geometric: Optional[GeometricFit]
    peaks: list


def volume_split_fit(events:pd.DataFrame, xmin:int=1, xmax:int=None) -> VolumeSplit:
    '''This function splits limit orders into those posted at integer prices (last digit 0) and the others, fits
    a discrete power law to the integer-price volumes and a geometric law to the others, and looks for peaks on
    round volumes among the integer-price ones.

    :param events: An event frame (see tables.event_frame) of a decimal-pricing session.
    :param xmin: Lower bound of the power-law fit. None selects it by KS distance.
    :param xmax: Optional upper truncation of the power law.
    :return: VolumeSplit.
    '''
    limits = events[events.kind == 'limit']
    integer = (limits.price.astype('int64') % 10) == 0
    on_grid = limits.volume[integer].to_numpy()
    off_grid = limits.volume[~integer].to_numpy()
    power = None
    if len(on_grid):
        power = fit_power_law(on_grid, xmin, xmax) if xmin is not None else select_xmin(on_grid, xmax=xmax)
    geometric = fit_geometric(off_grid) if len(off_grid) else None
    return VolumeSplit(volume_histogram(on_grid), power, volume_histogram(off_grid), geometric, round_peaks(on_grid))
