import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from clusterFX.errors import FeedParseError
from clusterFX.Book.book import DepthSnapshot, EventKind
from clusterFX.Book.instruments import Side
from clusterFX.Feed.codec import DealRecord, QuoteRecord

logger = logging.getLogger(__name__)

CASE1 = 'case1'
CASE2 = 'case2'
INCONSISTENT = 'inconsistent'


class InferredEvent(NamedTuple):
    '''An event recovered from the feed. (side) is the book side whose liquidity changed, so a Trade on the Ask side
    is a buy. Events are aggregated per slice, side, kind and price.'''
    slice: int
    side: Side
    kind: EventKind
    price: int
    volume: int


@dataclass
class ReconstructionReport:
    '''Counts of side-slices by reconstruction regime. Trade-bearing side-slices are Case 1, Case 2 or
    inconsistent; quiet side-slices changed without any trade.'''
    case1_slices: int = 0
    case2_slices: int = 0
    quiet_slices: int = 0
    inconsistent_slices: int = 0
    inconsistent: list = field(default_factory=list)

    @property
    def trade_slices(self) -> int:
        return self.case1_slices + self.case2_slices + self.inconsistent_slices

    @property
    def case1_share(self) -> float:
        return self.case1_slices / self.trade_slices if self.trade_slices else 0.0

    def count(self, case:str, slice_index:int, side:Side):
        if case == CASE1:
            self.case1_slices += 1
        elif case == CASE2:
            self.case2_slices += 1
        else:
            self.inconsistent_slices += 1
            self.inconsistent.append((slice_index, side.value))

    def to_dict(self) -> dict:
        out = asdict(self)
        out['trade_slices'] = self.trade_slices
        out['case1_share'] = round(self.case1_share, 6)
        out['inconsistent'] = [list(x) for x in self.inconsistent]
        return out


def _check_inputs(prev:DepthSnapshot, nxt:DepthSnapshot, side:Side):
    assert isinstance(prev, DepthSnapshot) and isinstance(nxt, DepthSnapshot), 'The (prev) and (nxt) parameters must be DepthSnapshot instances.'
    assert isinstance(side, Side), 'The (side) parameter must be a Side.'


def _observed_changes(prev:DepthSnapshot, nxt:DepthSnapshot, side:Side) -> dict:
    '''Volume change per price, restricted to prices both snapshots would show. Prices that enter or leave the
    ten-level window only because the window moved are not observed in both.'''
    before, after = prev.volume_map(side), nxt.volume_map(side)
    changes = {}
    for price in set(before) | set(after):
        if prev.observable(side, price) and nxt.observable(side, price):
            changes[price] = after.get(price, 0) - before.get(price, 0)
    return changes


def _best_first(prices, side:Side) -> list:
    return sorted(prices, reverse=side is Side.BID)


def _explain(changes:dict, trades:dict, slice_index:int, side:Side) -> list:
    '''Turns observed changes into events: trades as given, and whatever the trades leave unexplained as limit
    orders (increase) or cancellations (decrease).'''
    events = []
    for price in _best_first(set(changes) | set(trades), side):
        traded = trades.get(price, 0)
        if traded:
            events.append(InferredEvent(slice_index, side, EventKind.TRADE, price, traded))
        if price not in changes:
            continue
        residual = changes[price] + traded
        if residual > 0:
            events.append(InferredEvent(slice_index, side, EventKind.LIMIT, price, residual))
        elif residual < 0:
            events.append(InferredEvent(slice_index, side, EventKind.CANCEL, price, -residual))
    return events


def diff_quiet(prev:DepthSnapshot, nxt:DepthSnapshot, side:Side, slice_index:int=None) -> list:
    '''This function explains the change of one book side between two snapshots of a slice without trades: every
    volume increase is a limit order and every decrease a cancellation, price by price.

    :param prev: The visible book before the slice.
    :param nxt: The visible book at the end of the slice.
    :param side: The book side to explain.
    :param slice_index: The slice the events belong to. Defaults to the slice of (nxt).
    :return: InferredEvents, best price first.
    '''
    _check_inputs(prev, nxt, side)
    slice_index = nxt.time_slice if slice_index is None else slice_index
    return _explain(_observed_changes(prev, nxt, side), {}, slice_index, side)


def _eligible(price:int, reported:int, side:Side) -> bool:
    return price <= reported if side is Side.ASK else price >= reported


def diff_trading(prev:DepthSnapshot, nxt:DepthSnapshot, side:Side, deal:tuple, total_volume:int=None,
                 rng:np.random.Generator=None, slice_index:int=None) -> tuple:
    '''This function explains the change of one book side over a slice with trades. The deal reports the worst price
    reached and the volume dealt there. When the side's traded total equals that volume (Case 1) the deal is the
    only trade. When it is larger (Case 2) the remainder is spread one unit at a time, uniformly, over the prices
    between the best and the reported price whose observed decrease can still absorb it. What the trades leave
    unexplained becomes limit orders and cancellations.

    :param prev: The visible book before the slice.
    :param nxt: The visible book at the end of the slice.
    :param side: The book side whose liquidity was consumed.
    :param deal: (price, volume) of the extreme deal on this side.
    :param total_volume: Total volume traded on this side during the slice. None means it is unknown and Case 1 is assumed.
    :param rng: Generator for the Case 2 allocation.
    :param slice_index: The slice the events belong to. Defaults to the slice of (nxt).
    :return: The events and the regime, one of 'case1', 'case2' and 'inconsistent'.
    '''
    _check_inputs(prev, nxt, side)
    assert isinstance(deal, tuple) and len(deal) == 2, 'The (deal) parameter must be a (price, volume) pair.'
    slice_index = nxt.time_slice if slice_index is None else slice_index
    price, volume = deal
    total = volume if total_volume is None else total_volume
    changes = _observed_changes(prev, nxt, side)

    if total < volume:
        logger.warning('Slice %d %s: traded total %d is below the reported deal volume %d.', slice_index, side.name, total, volume)
        return diff_quiet(prev, nxt, side, slice_index), INCONSISTENT
    if total == volume:
        return _explain(changes, {price: volume}, slice_index, side), CASE1

    remainder = total - volume
    caps = {}
    for p, change in changes.items():
        if not _eligible(p, price, side):
            continue
        cap = -change - (volume if p == price else 0)
        if cap > 0:
            caps[p] = cap
    if sum(caps.values()) < remainder:
        logger.warning('Slice %d %s: %d units of traded volume cannot be placed on the observed decreases.', slice_index, side.name, remainder)
        return diff_quiet(prev, nxt, side, slice_index), INCONSISTENT

    rng = rng if rng is not None else np.random.default_rng(0)
    trades = defaultdict(int)
    trades[price] += volume
    open_prices = _best_first(caps, side)
    while remainder > 0:
        p = open_prices[int(rng.integers(len(open_prices)))]
        trades[p] += 1
        caps[p] -= 1
        remainder -= 1
        if caps[p] == 0:
            open_prices.remove(p)
    return _explain(changes, dict(trades), slice_index, side), CASE2


def side_totals(deal:DealRecord) -> dict:
    '''This function splits the traded volume of a slice between the two book sides. The net signed volume only
    fixes the difference of buys and sells, so when both sides traded the smallest pair of totals consistent with
    the net and with the reported volumes is used. Without a net volume each side is assumed to have traded its
    reported volume only.

    :param deal: The DealRecord of the slice.
    :return: Total traded volume keyed by the book side it consumed (buys consume Side.ASK).
    '''
    buy = deal.highest_buy[1] if deal.highest_buy else 0
    sell = deal.lowest_sell[1] if deal.lowest_sell else 0
    net = deal.total_signed_volume
    if net is not None:
        if deal.highest_buy and deal.lowest_sell:
            if net + sell >= buy:
                buy = net + sell
            else:
                sell = buy - net
        elif deal.highest_buy:
            buy = net
        else:
            sell = -net
    return {Side.ASK: buy, Side.BID: sell}


def _slices(records):
    group = []
    for record in records:
        if group and record.slice != group[0].slice:
            yield group
            group = []
        group.append(record)
    if group:
        yield group


def reconstruct_stream(records, seed:int=0) -> tuple:
    '''This function runs the reconstruction over a whole feed. The book sides are processed independently, each
    going sequentially through the slices and carrying the last reported visible state.

    :param records: Feed records in feed order.
    :param seed: Seed of the Case 2 allocations.
    :return: The InferredEvents in slice order and the ReconstructionReport.
    '''
    assert isinstance(seed, int), 'The (seed) parameter must be of type int.'
    rngs = dict(zip(Side, (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))))
    report = ReconstructionReport()
    events = []
    prev = DepthSnapshot(0)
    for group in _slices(records):
        slice_index = group[0].slice
        deal = next((r for r in group if isinstance(r, DealRecord)), None)
        quote = next((r for r in group if isinstance(r, QuoteRecord)), None)
        nxt = quote.to_snapshot() if quote is not None else prev
        totals = side_totals(deal) if deal is not None else {}
        for side in (Side.BID, Side.ASK):
            entry = deal.for_book_side(side) if deal is not None else None
            if entry is not None:
                found, case = diff_trading(prev, nxt, side, entry, totals[side], rngs[side], slice_index)
                report.count(case, slice_index, side)
            elif quote is not None and prev.levels(side) != nxt.levels(side):
                found = diff_quiet(prev, nxt, side, slice_index)
                report.quiet_slices += 1
            else:
                continue
            events.extend(found)
        prev = nxt
    logger.info('Reconstructed %d events: %d Case 1, %d Case 2, %d inconsistent and %d quiet side-slices.',
                len(events), report.case1_slices, report.case2_slices, report.inconsistent_slices, report.quiet_slices)
    return events, report


#################### Checks against the book ####################

def conservation_errors(prev:DepthSnapshot, nxt:DepthSnapshot, side:Side, events:list) -> list:
    '''Prices, observed in both snapshots, where the visible change differs from limit orders minus cancellations
    minus trades of (events).'''
    net = defaultdict(int)
    for (_, s, price), volume in net_by_slice(events).items():
        if s is side:
            net[price] += volume
    changes = _observed_changes(prev, nxt, side)
    return [p for p in _best_first(set(changes) | set(net), side)
            if p in changes and changes[p] != net.get(p, 0)]


def check_stream(records, events:list, report:ReconstructionReport=None) -> list:
    '''Replays a feed against reconstructed events and returns the (slice, side, price) triples breaking volume
    conservation. Slices flagged inconsistent by (report) are skipped.'''
    skip = set(tuple(x) for x in report.inconsistent) if report is not None else set()
    by_slice = defaultdict(list)
    for e in events:
        by_slice[e.slice].append(e)
    errors = []
    prev = DepthSnapshot(0)
    for group in _slices(records):
        slice_index = group[0].slice
        quote = next((r for r in group if isinstance(r, QuoteRecord)), None)
        nxt = quote.to_snapshot() if quote is not None else prev
        for side in Side:
            if (slice_index, side.value) in skip:
                continue
            errors += [(slice_index, side, p) for p in conservation_errors(prev, nxt, side, by_slice.get(slice_index, []))]
        prev = nxt
    return errors


def truth_events(effects) -> list:
    '''This function aggregates the book's liquidity changes into the same shape as the reconstruction output: one
    event per slice, side, kind and price.

    :param effects: Book.effects of a session.
    :return: InferredEvents in slice order, best price first within a slice and side.
    '''
    volumes = defaultdict(int)
    for e in effects:
        volumes[(e.time // 100, e.side, e.kind, e.price)] += e.volume
    order = {EventKind.TRADE: 0, EventKind.LIMIT: 1, EventKind.CANCEL: 2}
    keys = sorted(volumes, key=lambda k: (k[0], k[1] is Side.ASK, k[3] if k[1] is Side.ASK else -k[3], order[k[2]]))
    return [InferredEvent(s, side, kind, price, volumes[(s, side, kind, price)]) for s, side, kind, price in keys]


def net_by_slice(events) -> dict:
    '''This function nets events per (slice, side, price): limit orders add their volume, cancellations and trades
    remove it. Keys whose volume nets to zero are left out.

    :param events: InferredEvents.
    :return: A dict from (slice, side, price) to the net volume.
    '''
    net = defaultdict(int)
    for e in events:
        net[(e.slice, e.side, e.price)] += e.volume if e.kind is EventKind.LIMIT else -e.volume
    return {k: v for k, v in net.items() if v}


#################### Files ####################

def write_inferred(events:list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='\n') as fh:
        for e in events:
            fh.write(f'{e.slice},{e.side.value},{e.kind.value},{e.price},{e.volume}\n')
    return path


def read_inferred(path) -> list:
    events = []
    with open(path) as fh:
        for number, line in enumerate(fh, start=1):
            parts = line.strip().split(',')
            if len(parts) != 5:
                raise FeedParseError(number, 'event', f'expected 5 fields, got {len(parts)}')
            try:
                events.append(InferredEvent(int(parts[0]), Side(parts[1]), EventKind(parts[2]), int(parts[3]), int(parts[4])))
            except ValueError:
                raise FeedParseError(number, 'event', f'malformed inferred event {line.strip()!r}')
    return events


def write_report(report:ReconstructionReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n')
    return path
