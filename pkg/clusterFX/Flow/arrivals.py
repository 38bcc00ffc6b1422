import logging
from dataclasses import dataclass

import numpy as np

from clusterFX.errors import ConfigError
from clusterFX.Book.book import EventKind
from clusterFX.Book.instruments import Side

logger = logging.getLogger(__name__)

# The six event types of the arrival model, in the row/column order of every rate vector and matrix.
EVENT_TYPES = [
    (EventKind.LIMIT, Side.BID),
    (EventKind.LIMIT, Side.ASK),
    (EventKind.CANCEL, Side.BID),
    (EventKind.CANCEL, Side.ASK),
    (EventKind.MARKET, Side.BID),
    (EventKind.MARKET, Side.ASK),
]
EVENT_NAMES = [f'{kind.name.lower()}_{side.name.lower()}' for kind, side in EVENT_TYPES]


def type_index(kind:EventKind, side:Side) -> int:
    return EVENT_TYPES.index((kind, side))


@dataclass
class ArrivalModel:
    '''Mutually exciting arrivals. Entry [i][j] of the excitation matrix is the jump of the intensity of type i
    caused by an event of type j; every jump decays at (decay_rate) per second. (resting_target) scales the
    cancellation intensities by the number of resting orders of the side, so that each resting order carries a
    constant cancellation hazard.'''
    baseline_rates: list
    excitation_matrix: list
    decay_rate: float
    resting_target: float = 0.0

    def __post_init__(self):
        self.baseline_rates = np.asarray(self.baseline_rates, dtype=float)
        self.excitation_matrix = np.asarray(self.excitation_matrix, dtype=float)

    def validate(self, prefix:str='arrivals'):
        '''Raises ConfigError naming the offending field when the model is malformed or not stationary.'''
        n = len(EVENT_TYPES)
        if self.baseline_rates.shape != (n,):
            raise ConfigError(f'{prefix}.baseline_rates', f'expected {n} rates, got shape {self.baseline_rates.shape}')
        if np.any(self.baseline_rates < 0) or self.baseline_rates.sum() <= 0:
            raise ConfigError(f'{prefix}.baseline_rates', 'rates must be nonnegative with a positive total')
        if self.excitation_matrix.shape != (n, n):
            raise ConfigError(f'{prefix}.excitation_matrix', f'expected a {n}x{n} matrix, got shape {self.excitation_matrix.shape}')
        if np.any(self.excitation_matrix < 0):
            raise ConfigError(f'{prefix}.excitation_matrix', 'jump sizes must be nonnegative')
        if not self.decay_rate > 0:
            raise ConfigError(f'{prefix}.decay_rate', 'the decay rate must be strictly positive')
        if self.resting_target < 0:
            raise ConfigError(f'{prefix}.resting_target', 'the resting target cannot be negative')
        radius = self.spectral_radius()
        if radius >= 1:
            raise ConfigError(f'{prefix}.excitation_matrix', f'spectral radius of excitation/decay is {radius:.3f}, the process must stay below 1 to be stationary')

    def branching_matrix(self) -> np.ndarray:
        return self.excitation_matrix / self.decay_rate

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix()))))

    def stationary_rates(self) -> np.ndarray:
        '''Long-run event rates per type, (I - K/beta)^-1 mu, ignoring the book-state scaling of cancels.'''
        n = len(EVENT_TYPES)
        return np.linalg.solve(np.eye(n) - self.branching_matrix(), self.baseline_rates)


class ArrivalProcess(object):
    '''Ogata thinning for the exponential-kernel model. Because every kernel shares one decay rate the intensity
    never increases between events, so the intensity at the current time bounds it until the next acceptance.'''

    def __init__(self, model:ArrivalModel, start:float=0.0):
        self.model = model
        self.t = start
        self.excess = np.zeros(len(EVENT_TYPES))
        self.proposals = 0
        self.accepted = 0

    def intensity(self, modulation:np.ndarray=None) -> np.ndarray:
        lam = self.model.baseline_rates + self.excess
        return lam if modulation is None else lam * modulation

    def next_arrival(self, rng:np.random.Generator, modulation:np.ndarray=None) -> tuple:
        '''This method draws the next event of the process.

        :param rng: The session random generator.
        :param modulation: Optional per-type multipliers, held constant until the next event.
        :return: The event time in seconds and the index of its type in EVENT_TYPES.
        '''
        beta = self.model.decay_rate
        while True:
            bound = self.intensity(modulation).sum()
            assert bound > 0, 'The arrival intensity vanished. Check the baseline rates and the modulation.'
            wait = rng.exponential(1.0 / bound)
            self.t += wait
            self.excess *= np.exp(-beta * wait)
            lam = self.intensity(modulation)
            total = lam.sum()
            self.proposals += 1
            if rng.random() * bound <= total:
                k = int(np.searchsorted(np.cumsum(lam), rng.random() * total, side='right'))
                k = min(k, len(lam) - 1)
                self.excess += self.model.excitation_matrix[:, k]
                self.accepted += 1
                return self.t, k
