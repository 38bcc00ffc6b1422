import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from clusterFX.errors import FeedParseError
from clusterFX.Book.book import Book, CancelEvent, Effect, EventKind, Order, SnapshotSeries, Trade
from clusterFX.Book.instruments import InstrumentSpec, Side, TraderClass, price_to_rate
from clusterFX.Feed.codec import read_snapshots, write_snapshots
from clusterFX.Flow.agents import AgentMix, GroundTruthEvent, OrderFactory, SignState, draw_order
from clusterFX.Flow.arrivals import EVENT_TYPES, ArrivalProcess
from clusterFX.Flow.config import PipelineConfig

logger = logging.getLogger(__name__)

# Cap on the book-state scaling of the cancellation intensities.
CANCEL_SCALE_CAP = 3.0

EVENTS_FILE = 'events.txt'
TRADES_FILE = 'trades.txt'
EFFECTS_FILE = 'effects.txt'
SNAPSHOTS_FILE = 'snapshots.txt'
META_FILE = 'session.json'


@dataclass
class Session:
    '''Everything one simulated session produced: the ground-truth event stream, the end-of-slice snapshot series,
    the trades and the per-price liquidity changes of the book.'''
    instrument: InstrumentSpec
    duration: float
    seed: int
    events: list
    snapshots: SnapshotSeries
    trades: list
    effects: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    name: str = 'session'

    @property
    def n_slices(self) -> int:
        return self.snapshots.n_slices

    def summary(self) -> pd.DataFrame:
        '''Event counts per kind and side, in thousands per simulated day next to the raw counts.'''
        counts = Counter((e.kind, e.side) for e in self.events)
        days = self.duration / 86400.0
        rows = []
        for kind in (EventKind.LIMIT, EventKind.CANCEL, EventKind.MARKET):
            for side in Side:
                n = counts.get((kind, side), 0)
                rows.append({'kind': kind.name.lower(), 'side': side.name.lower(), 'events': n,
                             'thousands_per_day': round(n / days / 1000.0, 1)})
        buys = sum(t.volume for t in self.trades if t.side is Side.BID)
        sells = sum(t.volume for t in self.trades if t.side is Side.ASK)
        rows.append({'kind': 'trade', 'side': 'bid', 'events': sum(1 for t in self.trades if t.side is Side.BID),
                     'thousands_per_day': round(buys / days / 1000.0, 1)})
        rows.append({'kind': 'trade', 'side': 'ask', 'events': sum(1 for t in self.trades if t.side is Side.ASK),
                     'thousands_per_day': round(sells / days / 1000.0, 1)})
        return pd.DataFrame(rows)


def _cancel_scaling(book:Book, resting_target:float, mix:AgentMix) -> np.ndarray:
    '''This function scales the cancellation intensity of each side by its resting orders, each weighted by the
    cancel weight of its class, over (resting_target). A resting order of class c is then cancelled at the rate
    cancel_intensity * weight_c / resting_target.

    :return: The multipliers of the six event types, 1 for limit and market orders.
    '''
    scale = np.ones(len(EVENT_TYPES))
    if resting_target > 0:
        for k, (kind, side) in enumerate(EVENT_TYPES):
            if kind is EventKind.CANCEL:
                weighted = sum(mix.cancel_weight(tc) * book.order_count(side, tc) for tc in TraderClass)
                scale[k] = min(CANCEL_SCALE_CAP, weighted / resting_target)
    return scale


def _cancel_event(cancel:CancelEvent, best_before=None) -> GroundTruthEvent:
    return GroundTruthEvent(cancel.time, EventKind.CANCEL, cancel.side, cancel.price, cancel.volume,
                            cancel.trader_class, cancel.order_id, best_before)


class _SessionRun(object):
    '''The state of one session while it is generated.'''

    def __init__(self, config:PipelineConfig, duration:float, seed:int):
        self.config = config
        self.duration = duration
        self.end_ms = int(round(duration * 1000))
        self.rng = np.random.default_rng(seed)
        self.book = Book(config.instrument)
        self.process = ArrivalProcess(config.arrivals)
        self.factory = OrderFactory(config.instrument, config.agents, config.volumes, config.seed_price)
        self.signs = SignState(config.signs, self.rng)
        self.series = SnapshotSeries(int(round(duration * 10)))
        self.events = []
        self.current_slice = 0
        self.stats = Counter()

    def close_slices(self, slice_index:int):
        '''Records the end-of-slice snapshot of the open slice when (slice_index) lies beyond it.'''
        if slice_index > self.current_slice:
            self.series.append(self.book.snapshot(self.current_slice))
            self.current_slice = slice_index

    def run_deferred(self, until_ms:int):
        '''Executes, in time order, every deferred cancel that becomes eligible up to (until_ms).'''
        while self.book.next_pending is not None and self.book.next_pending <= until_ms:
            at = self.book.next_pending
            self.close_slices(at // 100)
            before = {side: self.book.best(side) for side in Side}
            for cancel in self.book.advance(at):
                self.events.append(_cancel_event(cancel, before[cancel.side]))
                self.stats['deferred_cancels'] += 1

    def apply(self, event:GroundTruthEvent):
        book = self.book
        if event.kind is EventKind.LIMIT:
            order = Order(event.order_id, event.side, event.price, event.volume, event.time, event.trader_class)
            self.events.append(event)
            _, rest = book.submit_limit(order)
            if rest is None:
                return
            self.factory.pool.add(event.side, event.trader_class, event.order_id)
            if event.flash:
                self.stats['flash_orders'] += 1
                best = book.best(event.side)
                cancel = book.cancel(event.order_id, now=event.time)
                if not cancel.deferred:
                    self.events.append(_cancel_event(cancel, best))
        elif event.kind is EventKind.CANCEL:
            cancel = book.cancel(event.order_id, now=event.time)
            if not cancel.deferred:
                self.events.append(event)
        else:
            self.events.append(event)
            result = book.submit_market(event.side, event.volume, event.time)
            if result.exhausted:
                self.stats['exhausted_markets'] += 1

    def run(self) -> SnapshotSeries:
        arrivals = self.config.arrivals
        while True:
            t, k = self.process.next_arrival(self.rng, _cancel_scaling(self.book, arrivals.resting_target, self.config.agents))
            if t >= self.duration:
                break
            now = int(t * 1000)
            self.run_deferred(now)
            self.close_slices(now // 100)
            kind, side = EVENT_TYPES[k]
            self.apply(draw_order(self.factory, self.signs, kind, side, self.book, self.rng, t))
        self.run_deferred(self.end_ms - 1)
        self.close_slices(self.series.n_slices)
        return self.series


def generate_session(config:PipelineConfig, duration:float=None, seed:int=None) -> Session:
    '''This function simulates one trading session. Arrivals come from the mutually exciting process, each arrival
    is turned into a concrete order by the agent populations and applied to the book, and the visible book is
    recorded at the end of every 0.1 s slice in which it changed. The output is a pure function of the config,
    the duration and the seed.

    :param config: A validated PipelineConfig.
    :param duration: Session length in seconds. Defaults to the config duration.
    :param seed: Seed of the session random generator. Defaults to the config seed.
    :return: The Session.
    '''
    assert isinstance(config, PipelineConfig), 'The (config) parameter must be a PipelineConfig. Use load_config() to build one.'
    duration = config.duration if duration is None else duration
    seed = config.seed if seed is None else seed
    assert duration > 0, 'The (duration) parameter must be strictly positive.'
    assert isinstance(seed, int) and seed >= 0, 'The (seed) parameter must be a nonnegative integer.'

    logger.info('Simulating %s for %.0f s with seed %d.', config.name, duration, seed)
    run = _SessionRun(config, duration, seed)
    series = run.run()
    stats = dict(run.stats)
    stats['resampled_cancels'] = run.factory.resampled_cancels
    stats['proposals'] = run.process.proposals
    stats['arrivals'] = run.process.accepted
    stats['kept_snapshots'] = len(series)
    for side in Side:
        stats[f'closing_volume_{side.name.lower()}'] = run.book.total_volume(side)
    if run.factory.resampled_cancels:
        logger.debug('%d cancels found no resting order and were drawn as limit orders.', run.factory.resampled_cancels)
    logger.info('Generated %d events, %d trades and %d snapshots.', len(run.events), len(run.book.trade_log), len(series))
    return Session(config.instrument, duration, seed, run.events, series, run.book.trade_log,
                   run.book.effects, stats, config.name)


#################### Files ####################

def _optional(value) -> str:
    return '-' if value is None else str(value)


def format_event(event:GroundTruthEvent) -> str:
    return f'{event.time},{event.kind.value},{event.side.value},{_optional(event.price)},{event.volume},{event.trader_class.value}'


def parse_event(line:str, number:int) -> GroundTruthEvent:
    parts = line.strip().split(',')
    if len(parts) != 6:
        raise FeedParseError(number, 'event', f'expected 6 fields, got {len(parts)}')
    names = ('time_ms', 'kind', 'side', 'price_ticks', 'volume', 'trader_class')
    try:
        time = int(parts[0])
        kind = EventKind(parts[1])
        side = Side(parts[2])
        price = None if parts[3] == '-' else int(parts[3])
        volume = int(parts[4])
        trader_class = TraderClass(parts[5])
    except ValueError:
        for name, value in zip(names, parts):
            if not value:
                raise FeedParseError(number, name, 'empty field')
        raise FeedParseError(number, 'event', f'malformed event line {line.strip()!r}')
    return GroundTruthEvent(time, kind, side, price, volume, trader_class)


def _write_lines(path:Path, lines):
    with open(path, 'w', newline='\n') as fh:
        for line in lines:
            fh.write(line + '\n')


def _read_rows(path:Path, width:int, what:str):
    with open(path) as fh:
        for number, line in enumerate(fh, start=1):
            parts = line.strip().split(',')
            if len(parts) != width:
                raise FeedParseError(number, what, f'expected {width} fields, got {len(parts)}')
            yield number, parts


def write_events(events:list, path):
    _write_lines(Path(path), (format_event(e) for e in events))


def read_events(path) -> list:
    with open(path) as fh:
        return [parse_event(line, number) for number, line in enumerate(fh, start=1) if line.strip()]


def _closing_quotes(session:Session) -> dict:
    '''Best quotes of the last slice as exchange rate strings, None for an empty side.'''
    last = session.snapshots.at(session.n_slices - 1)
    return {side.name.lower(): None if last.best(side) is None else price_to_rate(last.best(side), session.instrument)
            for side in Side}


def save_session(session:Session, directory) -> Path:
    '''This function writes a session to (directory): the event stream, the trades, the book effects and the
    snapshot series as line-delimited text, plus a JSON metadata file.

    :return: The directory.
    '''
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_events(session.events, directory / EVENTS_FILE)
    _write_lines(directory / TRADES_FILE,
                 (f'{t.time},{t.side.value},{t.price},{t.volume},{t.maker_id},{_optional(t.taker_id)}' for t in session.trades))
    _write_lines(directory / EFFECTS_FILE,
                 (f'{e.time},{e.side.value},{e.kind.value},{e.price},{e.volume}' for e in session.effects))
    write_snapshots(session.snapshots, directory / SNAPSHOTS_FILE)
    meta = {
        'name': session.name,
        'instrument': asdict(session.instrument),
        'duration': session.duration,
        'seed': session.seed,
        'n_slices': session.n_slices,
        'stats': session.stats,
        'closing_quotes': _closing_quotes(session),
    }
    (directory / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + '\n')
    logger.info('Saved session %s to %s.', session.name, directory)
    return directory


def load_session(directory) -> Session:
    '''Reads back a session written by save_session().'''
    directory = Path(directory)
    meta = json.loads((directory / META_FILE).read_text())
    events = read_events(directory / EVENTS_FILE)
    trades = []
    for number, parts in _read_rows(directory / TRADES_FILE, 6, 'trade'):
        try:
            taker = None if parts[5] == '-' else int(parts[5])
            trades.append(Trade(int(parts[0]), Side(parts[1]), int(parts[2]), int(parts[3]), int(parts[4]), taker))
        except ValueError:
            raise FeedParseError(number, 'trade', 'malformed trade line')
    effects = []
    if (directory / EFFECTS_FILE).exists():
        for number, parts in _read_rows(directory / EFFECTS_FILE, 5, 'effect'):
            try:
                effects.append(Effect(int(parts[0]), Side(parts[1]), EventKind(parts[2]), int(parts[3]), int(parts[4])))
            except ValueError:
                raise FeedParseError(number, 'effect', 'malformed effect line')
    series = read_snapshots(directory / SNAPSHOTS_FILE, meta['n_slices'])
    return Session(InstrumentSpec(**meta['instrument']), meta['duration'], meta['seed'], events, series, trades,
                   effects, meta.get('stats', {}), meta.get('name', directory.name))
