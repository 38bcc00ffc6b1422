import logging
from dataclasses import dataclass, field
from math import exp, floor
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import zeta

from clusterFX.errors import ConfigError
from clusterFX.Book.book import Book, EventKind
from clusterFX.Book.instruments import InstrumentSpec, Side, TickPrice, TraderClass, last_digit

logger = logging.getLogger(__name__)


class GroundTruthEvent(NamedTuple):
    '''One generated order event. (side) is the trader's side: a Bid market order buys. (best_before) is the best
    quote the event faces just before it happens: the same-side best for limit orders and cancellations, the
    opposite best for market orders.'''
    time: int
    kind: EventKind
    side: Side
    price: Optional[int]
    volume: int
    trader_class: TraderClass
    order_id: Optional[int] = None
    best_before: Optional[int] = None
    flash: bool = False

    @property
    def slice(self) -> int:
        return self.time // 100


def _check_probability(value:float, name:str):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(name, f'a probability must lie in [0, 1], got {value}')


@dataclass
class AgentMix:
    '''Who sends the orders and how they price them. Manual traders quote on the pip grid (with optional half-pip
    mass) around the round price next to the best quote; algorithmic traders quote at tick resolution and step one
    tick ahead of round best quotes. Resting algorithmic orders are cancelled (algo_cancel_weight) times as often
    as manual ones.'''
    manual_fraction: float = 0.5
    half_pip_prob: float = 0.0
    manual_inside_prob: float = 0.1
    manual_join_prob: float = 0.3
    manual_depth_prob: float = 0.45
    algo_step_ahead_prob: float = 0.4
    algo_join_prob: float = 0.15
    algo_inside_prob: float = 0.0
    algo_depth_prob: float = 0.1
    algo_cancel_weight: float = 1.0
    flash_prob: float = 0.0

    def validate(self, prefix:str='agents'):
        for name in ('manual_fraction', 'half_pip_prob', 'manual_inside_prob', 'manual_join_prob',
                     'algo_step_ahead_prob', 'algo_join_prob', 'algo_inside_prob', 'flash_prob'):
            _check_probability(getattr(self, name), f'{prefix}.{name}')
        for name in ('manual_depth_prob', 'algo_depth_prob'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f'{prefix}.{name}', f'a geometric parameter must lie in (0, 1], got {value}')
        if self.manual_inside_prob + self.manual_join_prob > 1.0:
            raise ConfigError(f'{prefix}.manual_join_prob', 'manual_inside_prob + manual_join_prob cannot exceed 1')
        if self.algo_join_prob + self.algo_inside_prob > 1.0:
            raise ConfigError(f'{prefix}.algo_inside_prob', 'algo_join_prob + algo_inside_prob cannot exceed 1')
        if not self.algo_cancel_weight > 0:
            raise ConfigError(f'{prefix}.algo_cancel_weight', f'the cancel weight must be strictly positive, got {self.algo_cancel_weight}')

    def cancel_weight(self, trader_class:TraderClass) -> float:
        '''Relative cancellation hazard of one resting order of (trader_class), manual orders weighing 1.'''
        return 1.0 if trader_class is TraderClass.MANUAL else self.algo_cancel_weight


class DiscretePowerLaw(object):
    '''P(v) = v^-alpha / zeta(alpha, xmin) on the integers v >= xmin, optionally truncated at xmax. Draws use an
    inverse-cdf table; without truncation the mass beyond the table is drawn from the continuous tail.'''

    TABLE = 100000

    def __init__(self, alpha:float, xmin:int=1, xmax:int=None):
        assert alpha > 1, 'The (alpha) parameter of a power law must be greater than 1.'
        assert xmin >= 1, 'The (xmin) parameter must be at least 1.'
        assert xmax is None or xmax >= xmin, 'The (xmax) parameter cannot be smaller than (xmin).'
        self.alpha = alpha
        self.xmin = xmin
        self.xmax = xmax
        top = xmax if xmax is not None else xmin + self.TABLE - 1
        self.support = np.arange(xmin, top + 1, dtype=np.int64)
        weights = self.support.astype(float) ** -alpha
        self.norm = weights.sum() if xmax is not None else float(zeta(alpha, xmin))
        self.cdf = np.cumsum(weights) / self.norm
        if xmax is not None:
            self.cdf[-1] = 1.0

    def pmf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        upper = np.inf if self.xmax is None else self.xmax
        inside = (v >= self.xmin) & (v <= upper)
        return np.where(inside, np.power(np.maximum(v, 1), -self.alpha) / self.norm, 0.0)

    def rvs(self, rng:np.random.Generator, size:int=None):
        u = rng.random(size)
        idx = np.searchsorted(self.cdf, u, side='right')
        values = self.support[np.minimum(idx, len(self.support) - 1)]
        if self.xmax is None:
            beyond = idx >= len(self.support)
            if np.any(beyond):
                # continuous Pareto tail above the table, rounded to the nearest integer
                start = self.support[-1] + 0.5
                w = rng.random(np.count_nonzero(beyond)) if size is not None else rng.random()
                tail = np.floor(start * np.power(1.0 - w, -1.0 / (self.alpha - 1.0)) + 0.5)
                if size is None:
                    return int(tail)
                values = values.copy()
                values[beyond] = tail.astype(np.int64)
        return int(values) if size is None else values


@dataclass
class VolumeModel:
    '''Manual volumes follow a discrete power law mixed with a mass on big round sizes; algorithmic volumes are
    geometric with (algo_unit_prob) of the mass on one unit.'''
    manual_alpha: float = 2.6
    round_mass: float = 0.15
    round_sizes: list = field(default_factory=lambda: [5, 10, 15, 20, 25, 50])
    round_decay: float = 0.6
    algo_unit_prob: float = 0.8
    max_volume: int = 100

    def validate(self, prefix:str='volumes'):
        if not self.manual_alpha > 1:
            raise ConfigError(f'{prefix}.manual_alpha', f'the power-law exponent must exceed 1, got {self.manual_alpha}')
        _check_probability(self.round_mass, f'{prefix}.round_mass')
        if not self.round_sizes or any(int(v) != v or v < 1 for v in self.round_sizes):
            raise ConfigError(f'{prefix}.round_sizes', 'round sizes must be a nonempty list of positive integers')
        if not 0.0 < self.round_decay <= 1.0:
            raise ConfigError(f'{prefix}.round_decay', 'the round-size decay must lie in (0, 1]')
        if not 0.0 < self.algo_unit_prob <= 1.0:
            raise ConfigError(f'{prefix}.algo_unit_prob', 'the algorithmic unit probability must lie in (0, 1]')
        if self.max_volume is not None and self.max_volume < max(self.round_sizes):
            raise ConfigError(f'{prefix}.max_volume', 'the volume cap must allow every round size')

    def build(self):
        '''This method prepares the samplers: the truncated power law and the cdf of the round sizes, whose
        weights decay geometrically with (round_decay) along the list.

        :return: The VolumeModel itself.
        '''
        self._power = DiscretePowerLaw(self.manual_alpha, 1, self.max_volume)
        weights = self.round_decay ** np.arange(len(self.round_sizes))
        self._round_cdf = np.cumsum(weights / weights.sum())
        return self

    def manual(self, rng:np.random.Generator) -> int:
        '''This method draws the volume of a manual order: a round size with probability (round_mass), otherwise a
        power-law volume.

        :param rng: The session random generator.
        :return: The volume in units.
        '''
        if not hasattr(self, '_power'):
            self.build()
        if rng.random() < self.round_mass:
            i = int(np.searchsorted(self._round_cdf, rng.random(), side='right'))
            return int(self.round_sizes[min(i, len(self.round_sizes) - 1)])
        return self._power.rvs(rng)

    def algo(self, rng:np.random.Generator) -> int:
        '''This method draws the geometric volume of an algorithmic order, capped at (max_volume).

        :param rng: The session random generator.
        :return: The volume in units.
        '''
        v = int(rng.geometric(self.algo_unit_prob))
        return v if self.max_volume is None else min(v, self.max_volume)

    def draw(self, trader_class:TraderClass, rng:np.random.Generator) -> int:
        '''Draws a volume from the law of (trader_class).'''
        return self.manual(rng) if trader_class is TraderClass.MANUAL else self.algo(rng)


@dataclass
class SignPersistence:
    '''Limit and market orders each carry a preferred side that switches as a two-state Markov chain with rate
    1 / timescale, so the sign autocorrelation decays as exp(-2 t / timescale). With probability (persistence) an
    event takes the preferred side instead of its drawn one. Cancellations keep their drawn side.'''
    market_order_sign_timescale: float = 120.0
    limit_order_sign_timescale: float = 300.0
    market_persistence: float = 0.2
    limit_persistence: float = 0.07

    def validate(self, prefix:str='signs'):
        for name in ('market_order_sign_timescale', 'limit_order_sign_timescale'):
            if not getattr(self, name) > 0:
                raise ConfigError(f'{prefix}.{name}', 'a sign timescale must be strictly positive')
        _check_probability(self.market_persistence, f'{prefix}.market_persistence')
        _check_probability(self.limit_persistence, f'{prefix}.limit_persistence')

    def switch_rate(self, kind:EventKind) -> float:
        scale = self.market_order_sign_timescale if kind is EventKind.MARKET else self.limit_order_sign_timescale
        return 1.0 / scale

    def persistence(self, kind:EventKind) -> float:
        return self.market_persistence if kind is EventKind.MARKET else self.limit_persistence


class SignState(object):
    '''Preferred side of limit orders and of market orders.'''

    KINDS = (EventKind.LIMIT, EventKind.MARKET)

    def __init__(self, signs:SignPersistence, rng:np.random.Generator):
        self.signs = signs
        self.preferred = {kind: (Side.BID if rng.random() < 0.5 else Side.ASK) for kind in self.KINDS}
        self.updated = {kind: 0.0 for kind in self.KINDS}

    def apply(self, kind:EventKind, side:Side, t:float, rng:np.random.Generator) -> Side:
        '''This method advances the preferred side of (kind) to time (t) and returns the side the event takes.
        Only a (persistence) share of the events is redirected, the rest keeps the side drawn with the arrival, so
        the per-side counts stay driven by the arrival process.

        :param kind: The event kind.
        :param side: The side drawn by the arrival process.
        :param t: The event time in seconds.
        :param rng: The session random generator.
        :return: The side of the event.
        '''
        if kind not in self.preferred:
            return side
        elapsed = t - self.updated[kind]
        self.updated[kind] = t
        # odd number of switches of a two-state chain over the elapsed time
        if rng.random() < 0.5 * (1.0 - exp(-2.0 * self.signs.switch_rate(kind) * elapsed)):
            self.preferred[kind] = self.preferred[kind].opposite
        if rng.random() < self.signs.persistence(kind):
            return self.preferred[kind]
        return side


class RestingPool(object):
    '''Ids of resting orders per (side, trader class), for uniform cancellation targets. Orders that left the book
    are dropped lazily when they are drawn.'''

    def __init__(self):
        self._ids = {(side, tc): [] for side in Side for tc in TraderClass}

    def add(self, side:Side, trader_class:TraderClass, order_id:int):
        self._ids[(side, trader_class)].append(order_id)

    def size(self, side:Side) -> int:
        return sum(len(self._ids[(side, tc)]) for tc in TraderClass)

    def draw(self, side:Side, trader_class:TraderClass, book:Book, rng:np.random.Generator) -> Optional[int]:
        ids = self._ids[(side, trader_class)]
        while ids:
            i = int(rng.integers(len(ids)))
            order_id = ids[i]
            if book.has_order(order_id):
                return order_id
            ids[i] = ids[-1]
            ids.pop()
        return None


class OrderFactory(object):
    '''Turns an arrival (kind, side) into a concrete order of a manual or algorithmic trader.'''

    def __init__(self, spec:InstrumentSpec, mix:AgentMix, volumes:VolumeModel, seed_price:int):
        self.spec = spec
        self.mix = mix
        self.volumes = volumes.build()
        self.seed_price = seed_price
        self.pool = RestingPool()
        self.next_id = 1
        self.resampled_cancels = 0

    def quotes(self, book:Book) -> tuple:
        '''This method returns the best bid and ask to price against. A missing quote is inferred one pip away
        from the other side, and an empty book is priced around the seed price.

        :param book: The current book.
        :return: (bid, ask) in ticks.
        '''
        pip = self.spec.pip_in_ticks
        bid, ask = book.best_bid, book.best_ask
        if bid is None and ask is None:
            return self.seed_price - pip, self.seed_price + pip
        if bid is None:
            return ask - pip, ask
        if ask is None:
            return bid, bid + pip
        return bid, ask

    def draw_class(self, rng:np.random.Generator) -> TraderClass:
        '''Draws a manual trader with probability (manual_fraction), an algorithmic one otherwise.'''
        return TraderClass.MANUAL if rng.random() < self.mix.manual_fraction else TraderClass.ALGO

    def manual_price(self, side:Side, bid:int, ask:int, rng:np.random.Generator) -> int:
        '''This method prices a manual limit order around its anchor, the pip price at or behind the same-side best.
        A half-pip order sits half a pip behind the anchor plus a geometric number of pips. Otherwise the order
        improves the anchor by one pip when that is still inside the spread, joins the anchor, or rests a geometric
        number of pips behind it.

        :param side: The side of the order.
        :param bid: The best bid in ticks.
        :param ask: The best ask in ticks.
        :param rng: The session random generator.
        :return: The price in ticks.
        '''
        pip = self.spec.pip_in_ticks
        toward = 1 if side is Side.BID else -1
        anchor = (bid // pip) * pip if side is Side.BID else -(-ask // pip) * pip
        if pip > 1 and rng.random() < self.mix.half_pip_prob:
            depth = int(rng.geometric(self.mix.manual_depth_prob)) - 1
            return anchor - toward * (pip // 2 + depth * pip)
        u = rng.random()
        inside = anchor + toward * pip
        if u < self.mix.manual_inside_prob and bid < inside < ask:
            return inside
        if u < self.mix.manual_inside_prob + self.mix.manual_join_prob:
            return anchor
        return anchor - toward * pip * int(rng.geometric(self.mix.manual_depth_prob))

    def is_round(self, price:int, side:Side) -> bool:
        '''Whether a best quote is one algorithms step ahead of: any pip-regime price, or a decimal price on the pip
        grid (and on the half-pip grid when manual traders use it).'''
        if not self.spec.decimal:
            return True
        digit = last_digit(price, side)
        return digit == 0 or (digit == 5 and self.mix.half_pip_prob > 0)

    def algo_price(self, side:Side, bid:int, ask:int, rng:np.random.Generator) -> tuple:
        '''This method prices an algorithmic limit order. Facing a round best quote with a free tick ahead of it,
        the algorithm steps one tick ahead with probability (algo_step_ahead_prob). It never joins such a quote:
        otherwise it quotes uniformly inside the spread with probability (algo_inside_prob) or rests a geometric
        number of ticks behind the best. Facing any other best quote it may also join it.

        :param side: The side of the order.
        :param bid: The best bid in ticks.
        :param ask: The best ask in ticks.
        :param rng: The session random generator.
        :return: (price, stepped) where (stepped) marks a step-ahead order.
        '''
        best = bid if side is Side.BID else ask
        toward = 1 if side is Side.BID else -1
        room = ask - bid > 1
        steppable = room and self.is_round(best, side)
        if steppable and rng.random() < self.mix.algo_step_ahead_prob:
            return best + toward, True
        u = rng.random()
        if room and u < self.mix.algo_inside_prob:
            return int(rng.integers(bid + 1, ask)), False
        if not steppable and u < self.mix.algo_inside_prob + self.mix.algo_join_prob:
            return best, False
        return best - toward * int(rng.geometric(self.mix.algo_depth_prob)), False

    def limit(self, side:Side, book:Book, rng:np.random.Generator, now:int, trader_class:TraderClass=None) -> GroundTruthEvent:
        '''This method draws a limit order of (trader_class), or of a freshly drawn class when none is given.

        :param side: The side of the order.
        :param book: The current book.
        :param rng: The session random generator.
        :param now: The time in ms.
        :param trader_class: The class of the trader, None to draw it.
        :return: The GroundTruthEvent with a new order id.
        '''
        trader_class = trader_class or self.draw_class(rng)
        bid, ask = self.quotes(book)
        flash = False
        if trader_class is TraderClass.MANUAL:
            price = self.manual_price(side, bid, ask, rng)
        else:
            price, stepped = self.algo_price(side, bid, ask, rng)
            flash = stepped and rng.random() < self.mix.flash_prob
        price = TickPrice(max(int(price), 1))
        volume = self.volumes.draw(trader_class, rng)
        order_id = self.next_id
        self.next_id += 1
        return GroundTruthEvent(now, EventKind.LIMIT, side, price, volume, trader_class, order_id, book.best(side), flash)

    def market(self, side:Side, book:Book, rng:np.random.Generator, now:int) -> GroundTruthEvent:
        '''Draws a market order of (side), the side of the aggressor.'''
        trader_class = self.draw_class(rng)
        volume = self.volumes.draw(trader_class, rng)
        return GroundTruthEvent(now, EventKind.MARKET, side, None, volume, trader_class, None, book.best(side.opposite))

    def cancel_class(self, side:Side, book:Book, rng:np.random.Generator) -> Optional[TraderClass]:
        '''This method picks the class of the order a cancellation removes, in proportion to the resting orders of
        each class weighted by their cancel weight.

        :return: The TraderClass, None when the side is empty.
        '''
        weights = {tc: self.mix.cancel_weight(tc) * book.order_count(side, tc) for tc in TraderClass}
        total = sum(weights.values())
        if total <= 0:
            return None
        return TraderClass.MANUAL if rng.random() * total < weights[TraderClass.MANUAL] else TraderClass.ALGO

    def cancel(self, side:Side, book:Book, rng:np.random.Generator, now:int) -> GroundTruthEvent:
        '''This method draws the cancellation of a resting order of (side): the class by cancel_class(), then an
        order of that class uniformly. With nothing to cancel the arrival becomes a limit order.

        :param side: The side of the resting order.
        :param book: The current book.
        :param rng: The session random generator.
        :param now: The time in ms.
        :return: The cancel GroundTruthEvent, or a limit one when resampled.
        '''
        trader_class = self.cancel_class(side, book, rng)
        order_id = None if trader_class is None else self.pool.draw(side, trader_class, book, rng)
        if order_id is None:
            self.resampled_cancels += 1
            trader_class = self.draw_class(rng)
            logger.debug('No resting order on %s to cancel at %d ms, drawing a %s limit order instead.', side.name, now, trader_class.name)
            return self.limit(side, book, rng, now, trader_class)
        order = book.orders[order_id]
        return GroundTruthEvent(now, EventKind.CANCEL, side, order.price, order.volume, trader_class, order_id, book.best(side))

    def draw(self, kind:EventKind, side:Side, book:Book, rng:np.random.Generator, now:int) -> GroundTruthEvent:
        '''Dispatches an arrival to limit(), cancel() or market().'''
        if kind is EventKind.LIMIT:
            return self.limit(side, book, rng, now)
        if kind is EventKind.CANCEL:
            return self.cancel(side, book, rng, now)
        return self.market(side, book, rng, now)


def draw_order(factory:OrderFactory, sign_state:SignState, kind:EventKind, side:Side, book:Book, rng:np.random.Generator, t:float) -> GroundTruthEvent:
    '''This function draws the order behind one arrival. The sign state first decides the side of the event,
    then the factory draws the trader class, the price and the volume.

    :param factory: The OrderFactory of the session.
    :param sign_state: The SignState of the session.
    :param kind: The event kind drawn by the arrival process.
    :param side: The event side drawn by the arrival process.
    :param book: The current book.
    :param rng: The session random generator.
    :param t: The event time in seconds.
    :return: The GroundTruthEvent, not yet applied to the book.
    '''
    side = sign_state.apply(kind, side, t, rng)
    return factory.draw(kind, side, book, rng, int(floor(t * 1000)))
