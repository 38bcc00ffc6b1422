import bisect
import heapq
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from clusterFX.errors import OrderRejected
from clusterFX.Book.instruments import InstrumentSpec, Side, TraderClass

logger = logging.getLogger(__name__)

SNAPSHOT_DEPTH = 10


class EventKind(Enum):
    LIMIT = 'L'
    CANCEL = 'C'
    MARKET = 'M'
    TRADE = 'T'


@dataclass
class Order:
    id: int
    side: Side
    price: int
    volume: int
    submit_time: int
    trader_class: TraderClass = TraderClass.ALGO


class Trade(NamedTuple):
    '''One fill. (side) is the side of the aggressor, so a buy that lifts an ask carries Side.BID.'''
    time: int
    side: Side
    price: int
    volume: int
    maker_id: int
    taker_id: Optional[int] = None

    @property
    def maker_side(self) -> Side:
        return self.side.opposite


class Effect(NamedTuple):
    '''A change of resting liquidity at one price of one book side.'''
    time: int
    side: Side
    kind: EventKind
    price: int
    volume: int


class CancelEvent(NamedTuple):
    order_id: int
    side: Side
    price: int
    volume: int
    time: int
    deferred: bool = False
    trader_class: TraderClass = TraderClass.ALGO


class MarketResult(NamedTuple):
    trades: list
    exhausted: bool


@dataclass(frozen=True)
class DepthSnapshot:
    time_slice: int
    bid_levels: tuple = ()
    ask_levels: tuple = ()

    def __post_init__(self):
        assert len(self.bid_levels) <= SNAPSHOT_DEPTH and len(self.ask_levels) <= SNAPSHOT_DEPTH, 'A snapshot carries at most ten levels per side.'

    def levels(self, side:Side) -> tuple:
        return self.bid_levels if side is Side.BID else self.ask_levels

    def best(self, side:Side) -> Optional[int]:
        levels = self.levels(side)
        return levels[0][0] if levels else None

    @property
    def spread(self) -> Optional[int]:
        if not self.bid_levels or not self.ask_levels:
            return None
        return self.ask_levels[0][0] - self.bid_levels[0][0]

    def same_levels(self, other) -> bool:
        '''True when both snapshots show the same visible book, whatever their time slices.'''
        return other is not None and self.bid_levels == other.bid_levels and self.ask_levels == other.ask_levels

    def volume_map(self, side:Side) -> dict:
        return dict(self.levels(side))

    def observable(self, side:Side, price:int) -> bool:
        '''A price is observable when the snapshot would show it if volume rested there: either the side has
        fewer than ten levels, or the price is at or better than the tenth level.'''
        levels = self.levels(side)
        if len(levels) < SNAPSHOT_DEPTH:
            return True
        worst = levels[-1][0]
        return price >= worst if side is Side.BID else price <= worst


class Book(object):
    '''A limit order book with price-time priority. Prices are whole ticks and volumes whole units. Resting
    orders of one price are kept in a FIFO queue and the level volume is maintained alongside.'''

    def __init__(self, spec:InstrumentSpec=None, min_quote_life:int=None, record_effects:bool=True):
        if min_quote_life is None:
            min_quote_life = spec.min_quote_life if spec is not None else 0
        assert min_quote_life >= 0, 'The (min_quote_life) parameter cannot be negative.'
        self.spec = spec
        self.min_quote_life = min_quote_life
        self.record_effects = record_effects
        self.orders = {}
        self.trade_log = []
        self.effects = []
        self.now = 0
        self._queues = {Side.BID: {}, Side.ASK: {}}
        self._volumes = {Side.BID: {}, Side.ASK: {}}
        self._prices = {Side.BID: [], Side.ASK: []}
        self._counts = {(side, tc): 0 for side in Side for tc in TraderClass}
        self._pending = []
        self._pending_seq = 0
        self._next_taker = -1

    #################### Book state ####################

    @property
    def best_bid(self) -> Optional[int]:
        prices = self._prices[Side.BID]
        return prices[-1] if prices else None

    @property
    def best_ask(self) -> Optional[int]:
        prices = self._prices[Side.ASK]
        return prices[0] if prices else None

    def best(self, side:Side) -> Optional[int]:
        return self.best_bid if side is Side.BID else self.best_ask

    @property
    def spread(self) -> Optional[int]:
        if self.best_bid is None or self.best_ask is None:
            return None
        return self.best_ask - self.best_bid

    def volume_at(self, side:Side, price:int) -> int:
        return self._volumes[side].get(price, 0)

    def total_volume(self, side:Side) -> int:
        return sum(self._volumes[side].values())

    def n_levels(self, side:Side) -> int:
        return len(self._prices[side])

    def has_order(self, order_id:int) -> bool:
        return order_id in self.orders

    def order_count(self, side:Side, trader_class:TraderClass=None) -> int:
        '''Resting orders of one side, optionally of one trader class only.'''
        if trader_class is not None:
            return self._counts[(side, trader_class)]
        return sum(self._counts[(side, tc)] for tc in TraderClass)

    def queue(self, side:Side, price:int) -> list:
        '''The resting orders at one price in priority order.'''
        return list(self._queues[side].get(price, ()))

    def levels(self, side:Side, depth:int=None) -> list:
        '''Aggregated (price, volume) levels of one side, best first.'''
        prices = self._prices[side]
        ordered = reversed(prices) if side is Side.BID else iter(prices)
        out = []
        for price in ordered:
            if depth is not None and len(out) >= depth:
                break
            out.append((price, self._volumes[side][price]))
        return out

    def snapshot(self, slice_index:int) -> DepthSnapshot:
        '''This method returns the truncated view of the book: the ten best levels of each side with the volume
        aggregated per price. Deeper levels are invisible.

        :param slice_index: The 0.1 s time slice the snapshot closes.
        :return: The DepthSnapshot.
        '''
        return DepthSnapshot(slice_index,
                             tuple(self.levels(Side.BID, SNAPSHOT_DEPTH)),
                             tuple(self.levels(Side.ASK, SNAPSHOT_DEPTH)))

    #################### Order operations ####################

    def submit_limit(self, order:Order) -> tuple:
        '''This method submits a limit order. When the order crosses the opposite best quote it executes against
        resting orders in price then arrival order until it is exhausted or no longer crosses. Any remainder rests
        at its price behind the orders already queued there.

        :param order: The order. Its id must not already rest in the book.
        :return: The list of trades and the resting remainder (None when fully executed).
        '''
        assert isinstance(order, Order), 'The (order) parameter must be an Order.'
        assert order.volume >= 1, 'The (order.volume) must be a positive whole number of units.'
        assert order.price >= 1, 'The (order.price) must be a positive number of ticks.'
        if order.id in self.orders:
            raise OrderRejected(f'order id {order.id} already rests in the book')
        self.now = max(self.now, order.submit_time)

        contra = order.side.opposite
        trades = self._walk(contra, order.volume, order.price, order.submit_time, order.id, order.side)
        filled = sum(t.volume for t in trades)
        if filled == order.volume:
            return trades, None
        order.volume -= filled
        self._rest(order)
        return trades, order

    def submit_market(self, side:Side, volume:int, now:int=None, taker_id:int=None) -> MarketResult:
        '''This method executes a market order of the given side (Side.BID buys) against the opposite side,
        best price first. Whatever cannot be filled is discarded.

        :param side: The side of the market order.
        :param volume: The volume in units.
        :param now: The submission time in milliseconds.
        :return: A MarketResult with the trades and a flag set when liquidity ran out.
        '''
        assert isinstance(side, Side), 'The (side) parameter must be a Side.'
        assert volume >= 1, 'The (volume) of a market order must be at least one unit.'
        now = self.now if now is None else max(self.now, now)
        self.now = now
        if taker_id is None:
            taker_id = self._next_taker
            self._next_taker -= 1
        trades = self._walk(side.opposite, volume, None, now, taker_id, side)
        exhausted = sum(t.volume for t in trades) < volume
        if exhausted:
            logger.debug('Market order of %d units on %s exhausted the opposite side.', volume, side.name)
        return MarketResult(trades, exhausted)

    def cancel(self, order_id:int, volume:int=None, now:int=None) -> CancelEvent:
        '''This method cancels a resting order, fully or partially. A partial cancel keeps the queue position of the
        remainder. When the book has a minimum quote life and the order is younger than it, the cancel is deferred
        until the order becomes eligible and the returned event is marked as deferred.

        :param order_id: The id of a resting order.
        :param volume: The volume to remove. None removes the whole order.
        :param now: The time of the request in milliseconds.
        :return: The CancelEvent, effective or deferred.
        '''
        if order_id not in self.orders:
            raise OrderRejected(f'order id {order_id} does not rest in the book')
        order = self.orders[order_id]
        if volume is not None:
            assert 1 <= volume <= order.volume, f'The (volume) of a partial cancel must lie between 1 and the resting volume {order.volume}.'
        now = self.now if now is None else max(self.now, now)
        self.now = now

        eligible = order.submit_time + self.min_quote_life
        if now < eligible:
            self._pending_seq += 1
            heapq.heappush(self._pending, (eligible, self._pending_seq, order_id, volume))
            logger.debug('Cancel of order %d deferred from %d ms to %d ms.', order_id, now, eligible)
            return CancelEvent(order_id, order.side, order.price, volume or order.volume, eligible, True, order.trader_class)
        return self._remove(order, volume, now)

    def advance(self, now:int) -> list:
        '''This method moves the book clock to (now) and executes every deferred cancel that became eligible,
        in eligibility order. Deferred cancels of orders that were filled in the meantime are dropped and partial
        ones are capped at what still rests.

        :param now: The new time in milliseconds.
        :return: The executed CancelEvents.
        '''
        executed = []
        while self._pending and self._pending[0][0] <= now:
            eligible, _, order_id, volume = heapq.heappop(self._pending)
            order = self.orders.get(order_id)
            if order is None:
                continue
            self.now = max(self.now, eligible)
            if volume is not None and volume >= order.volume:
                volume = None
            executed.append(self._remove(order, volume, eligible))
        self.now = max(self.now, now)
        return executed

    @property
    def pending_cancels(self) -> int:
        return len(self._pending)

    @property
    def next_pending(self) -> Optional[int]:
        '''Eligibility time of the earliest deferred cancel, None when nothing is deferred.'''
        return self._pending[0][0] if self._pending else None

    #################### Internals ####################

    def _rest(self, order:Order):
        '''This method queues an order at the back of its price level, opening the level when needed.

        :param order: The Order to rest, already checked against the book.
        '''
        side = order.side
        queues = self._queues[side]
        if order.price not in queues:
            queues[order.price] = deque()
            self._volumes[side][order.price] = 0
            bisect.insort(self._prices[side], order.price)
        queues[order.price].append(order)
        self._volumes[side][order.price] += order.volume
        self.orders[order.id] = order
        self._counts[(side, order.trader_class)] += 1
        self._effect(order.submit_time, side, EventKind.LIMIT, order.price, order.volume)

    def _remove(self, order:Order, volume:Optional[int], now:int) -> CancelEvent:
        '''This method takes resting volume out of the book for a cancellation.

        :param order: The resting Order.
        :param volume: The units to cancel, None for the whole order.
        :param now: The time in ms, recorded on the effect.
        :return: The CancelEvent.
        '''
        side, price = order.side, order.price
        removed = order.volume if volume is None else volume
        if volume is None or volume == order.volume:
            queue = self._queues[side][price]
            queue.remove(order)
            del self.orders[order.id]
            self._counts[(side, order.trader_class)] -= 1
            self._drop_if_empty(side, price, removed)
        else:
            order.volume -= volume
            self._volumes[side][price] -= volume
        self._effect(now, side, EventKind.CANCEL, price, removed)
        return CancelEvent(order.id, side, price, removed, now, False, order.trader_class)

    def _drop_if_empty(self, side:Side, price:int, removed:int):
        '''Lowers a level by (removed) units and deletes it once its queue is empty.'''
        self._volumes[side][price] -= removed
        if not self._queues[side][price]:
            del self._queues[side][price]
            del self._volumes[side][price]
            prices = self._prices[side]
            del prices[bisect.bisect_left(prices, price)]

    def _walk(self, contra:Side, volume:int, limit:Optional[int], now:int, taker_id:int, taker_side:Side) -> list:
        '''This method fills an aggressor against the contra side, best level first and FIFO within a level.

        :param contra: The side being consumed.
        :param volume: The aggressor volume.
        :param limit: The worst price the aggressor accepts, None for a market order.
        :param now: The time in ms of the fills.
        :param taker_id: The aggressor id written on each Trade.
        :param taker_side: The side of the aggressor.
        :return: The Trades, one per maker order touched.
        '''
        trades = []
        prices = self._prices[contra]
        while volume > 0 and prices:
            price = prices[0] if contra is Side.ASK else prices[-1]
            if limit is not None and ((contra is Side.ASK and price > limit) or (contra is Side.BID and price < limit)):
                break
            queue = self._queues[contra][price]
            while volume > 0 and queue:
                maker = queue[0]
                dealt = min(volume, maker.volume)
                volume -= dealt
                maker.volume -= dealt
                self._volumes[contra][price] -= dealt
                trade = Trade(now, taker_side, price, dealt, maker.id, taker_id)
                trades.append(trade)
                self.trade_log.append(trade)
                self._effect(now, contra, EventKind.TRADE, price, dealt)
                if maker.volume == 0:
                    queue.popleft()
                    del self.orders[maker.id]
                    self._counts[(contra, maker.trader_class)] -= 1
            if not queue:
                del self._queues[contra][price]
                del self._volumes[contra][price]
                del prices[0 if contra is Side.ASK else -1]
        return trades

    def _effect(self, time:int, side:Side, kind:EventKind, price:int, volume:int):
        '''Records a change of resting liquidity when effects are kept.'''
        if self.record_effects:
            self.effects.append(Effect(time, side, kind, price, volume))


class SnapshotSeries(object):
    '''The end-of-slice snapshot series of a session, stored sparsely: a snapshot is kept only for slices in which
    the visible book changed, and it holds until the next kept snapshot.'''

    def __init__(self, n_slices:int, snapshots:list=None):
        assert n_slices >= 0, 'The (n_slices) parameter cannot be negative.'
        self.n_slices = n_slices
        self.snapshots = []
        self.slices = []
        for snap in snapshots or ():
            self.append(snap)

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def append(self, snapshot:DepthSnapshot) -> bool:
        '''Keeps (snapshot) when it differs from the last kept one. Returns whether it was kept.'''
        assert not self.slices or snapshot.time_slice > self.slices[-1], 'Snapshots must be appended in increasing slice order.'
        if self.snapshots and self.snapshots[-1].same_levels(snapshot):
            return False
        if not self.snapshots and not snapshot.bid_levels and not snapshot.ask_levels:
            return False
        self.snapshots.append(snapshot)
        self.slices.append(snapshot.time_slice)
        return True

    def at(self, slice_index:int) -> DepthSnapshot:
        '''The visible book at the end of (slice_index). Before the first kept snapshot the book is empty.'''
        i = bisect.bisect_right(self.slices, slice_index) - 1
        if i < 0:
            return DepthSnapshot(slice_index)
        return self.snapshots[i]

    def dwell(self) -> np.ndarray:
        '''Number of slices each kept snapshot stays in force.'''
        if not self.slices:
            return np.zeros(0, dtype=np.int64)
        bounds = np.append(np.asarray(self.slices, dtype=np.int64), max(self.n_slices, self.slices[-1] + 1))
        return np.diff(bounds)

    def sample_indices(self, period:int) -> np.ndarray:
        '''Indexes of the snapshots in force at slices 0, period, 2*period, ... (-1 before the first snapshot).'''
        assert period >= 1, 'The sampling (period) must be at least one slice.'
        grid = np.arange(0, self.n_slices, period, dtype=np.int64)
        return np.searchsorted(np.asarray(self.slices, dtype=np.int64), grid, side='right') - 1

    def best_prices(self, side:Side) -> np.ndarray:
        '''Best price of (side) per kept snapshot, 0 when the side is empty.'''
        return np.array([s.best(side) or 0 for s in self.snapshots], dtype=np.int64)
