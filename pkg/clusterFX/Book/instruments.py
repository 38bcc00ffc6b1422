from dataclasses import dataclass, replace
from math import log10
from enum import Enum

# Registry of the instruments the package knows about. A config may name one of these keys
# instead of spelling the instrument out.
markets = {
    'EUR/USD decimal': {
        'name': 'EUR/USD',
        'tick_value': 1e-5,
        'pip_in_ticks': 10,
        'reference_price': 1.35,
        'min_quote_life': 250
    },
    'EUR/USD pip': {
        'name': 'EUR/USD',
        'tick_value': 1e-4,
        'pip_in_ticks': 1,
        'reference_price': 1.35,
        'min_quote_life': 250
    },
    'USD/JPY decimal': {
        'name': 'USD/JPY',
        'tick_value': 1e-3,
        'pip_in_ticks': 10,
        'reference_price': 82.0,
        'min_quote_life': 250
    },
    'USD/JPY pip': {
        'name': 'USD/JPY',
        'tick_value': 1e-2,
        'pip_in_ticks': 1,
        'reference_price': 82.0,
        'min_quote_life': 250
    },
}


class Side(Enum):
    BID = 'B'
    ASK = 'A'

    @property
    def opposite(self):
        return Side.ASK if self is Side.BID else Side.BID

    @classmethod
    def parse(cls, value:str):
        '''Accepts the one-letter wire code or the full side name.'''
        value = value.strip().upper()
        if value in ('B', 'BID'):
            return cls.BID
        if value in ('A', 'ASK'):
            return cls.ASK
        raise ValueError(f'unknown side {value!r}')


class TraderClass(Enum):
    MANUAL = 'M'
    ALGO = 'A'


class TickPrice(int):
    '''A price expressed as a strictly positive whole number of instrument ticks.'''

    def __new__(cls, ticks:int):
        assert isinstance(ticks, int) and not isinstance(ticks, bool), 'The (ticks) parameter must be of type int. Prices are only ever stored as whole ticks.'
        assert ticks >= 1, f'The (ticks) parameter must be at least 1, got {ticks}.'
        return super().__new__(cls, ticks)


@dataclass(frozen=True)
class InstrumentSpec:
    name: str
    tick_value: float
    pip_in_ticks: int
    reference_price: float
    min_quote_life: int = 0

    def __post_init__(self):
        assert self.tick_value > 0, 'The (tick_value) of an instrument must be strictly positive.'
        assert self.pip_in_ticks in (1, 10), 'The (pip_in_ticks) of an instrument must be 1 (pip pricing) or 10 (decimal pricing).'
        assert self.reference_price > 0, 'The (reference_price) of an instrument must be strictly positive.'
        assert self.min_quote_life >= 0, 'The (min_quote_life) of an instrument cannot be negative.'

    @property
    def decimal(self) -> bool:
        return self.pip_in_ticks == 10

    @property
    def reference_ticks(self) -> int:
        '''The reference exchange rate rounded to the nearest whole tick.'''
        return rate_to_ticks(self.reference_price, self)


def instrument(key:str, **overrides) -> InstrumentSpec:
    '''This function builds an InstrumentSpec from the registry entry named by (key). Keyword arguments
    override individual registry fields.

    :param key: A key of the markets registry, e.g. 'EUR/USD decimal'.
    :return: The instrument specification.
    '''
    assert isinstance(key, str), 'The (key) parameter must be of type string.'
    assert key in markets, f'The instrument {key!r} is not available. Known instruments: {sorted(markets)}.'
    return replace(InstrumentSpec(**markets[key]), **overrides)


def relative_tick(spec:InstrumentSpec) -> float:
    '''This function returns the relative tick size of an instrument, i.e. the tick divided by the price level
    it trades at. A larger relative tick means the price grid is coarse compared to the price itself.

    :param spec: The instrument.
    :return: tick_value / reference_price
    '''
    assert spec.reference_price > 0, 'The reference price must be strictly positive.'
    return spec.tick_value / spec.reference_price


def last_digit(price:int, side:Side) -> int:
    '''This function returns the last digit of a price under the side convention. On the bid side this is the
    rightmost digit of the price in ticks. On the ask side it is the number of ticks separating the price from
    the smallest integer price at or above it, so that a bid one tick above an integer price and an ask one tick
    below an integer price both carry the digit 1. Integer prices map to 0 on both sides.

    :param price: The price in ticks of a decimal-regime instrument.
    :param side: The side of the book the price belongs to.
    :return: The digit, between 0 and 9.
    '''
    assert isinstance(side, Side), 'The (side) parameter must be a Side.'
    raw = int(price) % 10
    if side is Side.BID:
        return raw
    return (10 - raw) % 10


def rate_to_ticks(rate:float, spec:InstrumentSpec) -> int:
    '''Converts an exchange rate into whole ticks of the instrument.'''
    return int(round(rate / spec.tick_value))


def price_to_rate(ticks:int, spec:InstrumentSpec) -> str:
    '''Formats a price in ticks as an exchange rate string with the precision of the instrument tick.'''
    places = max(0, -int(round(log10(spec.tick_value))))
    return f'{ticks * spec.tick_value:.{places}f}'
