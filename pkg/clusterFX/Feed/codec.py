import logging
from collections import defaultdict
from pathlib import Path
from typing import NamedTuple, Optional

from clusterFX.errors import FeedParseError, FeedTruncatedError
from clusterFX.Book.book import SNAPSHOT_DEPTH, DepthSnapshot, SnapshotSeries
from clusterFX.Book.instruments import Side

logger = logging.getLogger(__name__)

QUOTE = 'Q'
DEAL = 'D'
EMPTY = '-'


class QuoteRecord(NamedTuple):
    '''The visible book at the end of a slice in which some visible price or volume changed.'''
    slice: int
    bid_levels: tuple = ()
    ask_levels: tuple = ()

    def to_snapshot(self) -> DepthSnapshot:
        return DepthSnapshot(self.slice, self.bid_levels, self.ask_levels)

    @classmethod
    def from_snapshot(cls, snapshot:DepthSnapshot):
        return cls(snapshot.time_slice, tuple(snapshot.bid_levels), tuple(snapshot.ask_levels))


class DealRecord(NamedTuple):
    '''The trades of one slice. (highest_buy) is the highest price paid by a buyer with the volume dealt at that
    price, (lowest_sell) the lowest price received by a seller. Buys consume asks, sells consume bids.'''
    slice: int
    highest_buy: Optional[tuple] = None
    lowest_sell: Optional[tuple] = None
    total_signed_volume: Optional[int] = None

    def for_book_side(self, side:Side) -> Optional[tuple]:
        '''The extreme deal that consumed liquidity of the (side) book side.'''
        return self.highest_buy if side is Side.ASK else self.lowest_sell


#################### Encoding ####################

def _deal_records(trades, include_total_volume:bool) -> dict:
    by_slice = defaultdict(list)
    for trade in trades:
        by_slice[trade.time // 100].append(trade)
    deals = {}
    for slice_index, group in by_slice.items():
        extremes = {}
        for side, pick in ((Side.BID, max), (Side.ASK, min)):
            fills = [t for t in group if t.side is side]
            if fills:
                price = pick(t.price for t in fills)
                extremes[side] = (price, sum(t.volume for t in fills if t.price == price))
        total = None
        if include_total_volume:
            total = sum(t.volume if t.side is Side.BID else -t.volume for t in group)
        deals[slice_index] = DealRecord(slice_index, extremes.get(Side.BID), extremes.get(Side.ASK), total)
    return deals


def encode(snapshots, trades, include_total_volume:bool=True) -> list:
    '''This function turns end-of-slice book states and trades into the lossy feed. A slice gets a QuoteRecord when
    its visible book differs from the last emitted one, and a DealRecord when it holds at least one trade. Within
    a slice the DealRecord comes first.

    :param snapshots: End-of-slice DepthSnapshots in increasing slice order (a SnapshotSeries or any iterable).
    :param trades: Trades carrying the aggressor side, in time order.
    :param include_total_volume: Whether DealRecords carry the net signed volume of the slice.
    :return: The records in feed order.
    '''
    assert isinstance(include_total_volume, bool), 'The (include_total_volume) parameter must be of type bool.'
    quotes = {}
    last = DepthSnapshot(-1)
    for snapshot in snapshots:
        if not snapshot.same_levels(last):
            quotes[snapshot.time_slice] = QuoteRecord.from_snapshot(snapshot)
            last = snapshot
    deals = _deal_records(trades, include_total_volume)

    records = []
    for slice_index in sorted(set(quotes) | set(deals)):
        if slice_index in deals:
            records.append(deals[slice_index])
        if slice_index in quotes:
            records.append(quotes[slice_index])
    logger.debug('Encoded %d quote and %d deal records.', len(quotes), len(deals))
    return records


def _optional(value) -> str:
    return EMPTY if value is None else str(value)


def format_record(record) -> str:
    '''One feed line, without the newline.'''
    if isinstance(record, QuoteRecord):
        fields = [QUOTE, str(record.slice), str(len(record.bid_levels))]
        for price, volume in record.bid_levels:
            fields += [str(price), str(volume)]
        fields.append(str(len(record.ask_levels)))
        for price, volume in record.ask_levels:
            fields += [str(price), str(volume)]
        return ','.join(fields)
    assert isinstance(record, DealRecord), 'A feed record must be a QuoteRecord or a DealRecord.'
    buy = record.highest_buy or (None, None)
    sell = record.lowest_sell or (None, None)
    return ','.join([DEAL, str(record.slice), _optional(buy[0]), _optional(buy[1]), _optional(sell[0]),
                     _optional(sell[1]), _optional(record.total_signed_volume)])


def encode_text(records) -> str:
    return ''.join(format_record(r) + '\n' for r in records)


#################### Decoding ####################

def _integer(value:str, number:int, name:str, minimum:int=None) -> int:
    try:
        out = int(value)
    except ValueError:
        raise FeedParseError(number, name, f'expected an integer, got {value!r}')
    if minimum is not None and out < minimum:
        raise FeedParseError(number, name, f'must be at least {minimum}, got {out}')
    return out


def _levels(parts:list, at:int, number:int, side:Side) -> tuple:
    name = side.name.lower()
    if at >= len(parts):
        raise FeedParseError(number, f'{name}_count', 'missing level count')
    count = _integer(parts[at], number, f'{name}_count', 0)
    if count > SNAPSHOT_DEPTH:
        raise FeedParseError(number, f'{name}_count', f'at most {SNAPSHOT_DEPTH} levels per side, got {count}')
    if at + 1 + 2 * count > len(parts):
        raise FeedParseError(number, f'{name}_count', f'{count} levels announced but the line ends early')
    levels = []
    for i in range(count):
        price = _integer(parts[at + 1 + 2 * i], number, f'{name}_price_{i + 1}', 1)
        volume = _integer(parts[at + 2 + 2 * i], number, f'{name}_volume_{i + 1}', 1)
        if levels:
            better = price < levels[-1][0] if side is Side.BID else price > levels[-1][0]
            if not better:
                raise FeedParseError(number, f'{name}_price_{i + 1}', 'levels must be strictly ordered away from the best')
        levels.append((price, volume))
    return tuple(levels), at + 1 + 2 * count


def _pair(price:str, volume:str, number:int, name:str) -> Optional[tuple]:
    if price == EMPTY and volume == EMPTY:
        return None
    if price == EMPTY or volume == EMPTY:
        raise FeedParseError(number, f'{name}_price' if price == EMPTY else f'{name}_volume', 'price and volume must be both present or both absent')
    return _integer(price, number, f'{name}_price', 1), _integer(volume, number, f'{name}_volume', 1)


def parse_line(line:str, number:int):
    '''This function parses one feed line.

    :param line: The line, with or without its newline.
    :param number: The 1-based line number, used in error messages.
    :return: A QuoteRecord or a DealRecord.
    '''
    parts = line.rstrip('\n').split(',')
    kind = parts[0]
    if kind not in (QUOTE, DEAL):
        raise FeedParseError(number, 'type', f'unknown record type {kind!r}')
    if len(parts) < 2:
        raise FeedParseError(number, 'slice', 'missing slice index')
    slice_index = _integer(parts[1], number, 'slice', 0)
    if kind == QUOTE:
        bids, at = _levels(parts, 2, number, Side.BID)
        asks, at = _levels(parts, at, number, Side.ASK)
        if at != len(parts):
            raise FeedParseError(number, 'trailing', f'{len(parts) - at} unexpected fields after the ask levels')
        return QuoteRecord(slice_index, bids, asks)
    if len(parts) != 7:
        raise FeedParseError(number, 'deal', f'a deal line has 7 fields, got {len(parts)}')
    buy = _pair(parts[2], parts[3], number, 'buy')
    sell = _pair(parts[4], parts[5], number, 'sell')
    if buy is None and sell is None:
        raise FeedParseError(number, 'deal', 'a deal record needs at least one side')
    total = None if parts[6] == EMPTY else _integer(parts[6], number, 'signed_total')
    return DealRecord(slice_index, buy, sell, total)


def decode(data) -> list:
    '''This function decodes a feed into its records, checking the record order: slices strictly increase and a
    slice holds at most one DealRecord followed by at most one QuoteRecord.

    :param data: The feed as bytes or text.
    :return: The list of QuoteRecord and DealRecord.
    '''
    if isinstance(data, bytes):
        try:
            data = data.decode('ascii')
        except UnicodeDecodeError as err:
            line = data.count(b'\n', 0, err.start) + 1
            raise FeedParseError(line, 'encoding', f'byte 0x{data[err.start]:02x} at offset {err.start} is not ASCII')
    assert isinstance(data, str), 'The (data) parameter must be the feed as bytes or str.'
    if not data:
        return []
    lines = data.split('\n')
    if lines[-1] != '':
        raise FeedTruncatedError(len(lines), 'the last line is not terminated, the feed was cut short')
    records = []
    last = None
    for number, line in enumerate(lines[:-1], start=1):
        record = parse_line(line, number)
        if last is not None:
            if record.slice < last.slice:
                raise FeedParseError(number, 'slice', f'slice {record.slice} comes after slice {last.slice}')
            if record.slice == last.slice and not (isinstance(last, DealRecord) and isinstance(record, QuoteRecord)):
                raise FeedParseError(number, 'slice', f'slice {record.slice} repeats a record type or puts the deal after the quote')
        records.append(record)
        last = record
    return records


def write_feed(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_text(records).encode('ascii'))
    return path


def read_feed(path) -> list:
    return decode(Path(path).read_bytes())


#################### Snapshot series ####################

def quotes_to_series(records, n_slices:int) -> SnapshotSeries:
    '''Rebuilds the sparse snapshot series from the QuoteRecords of a feed.'''
    series = SnapshotSeries(n_slices)
    for record in records:
        if isinstance(record, QuoteRecord):
            series.append(record.to_snapshot())
    return series


def write_snapshots(series, path) -> Path:
    '''Writes the kept snapshots of a series as quote lines.'''
    return write_feed([QuoteRecord.from_snapshot(s) for s in series], path)


def read_snapshots(path, n_slices:int) -> SnapshotSeries:
    return quotes_to_series(read_feed(path), n_slices)
