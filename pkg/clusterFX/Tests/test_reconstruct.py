import json
import tempfile
import unittest
from collections import Counter
from pathlib import Path

import numpy as np

from clusterFX.Book import Book, DepthSnapshot, EventKind, Order, Side, SnapshotSeries
from clusterFX.Feed import DealRecord, decode, encode
from clusterFX.Flow import config_from_dict, config_path, generate_session
from clusterFX.Reconstruct import (CASE1, CASE2, INCONSISTENT, InferredEvent, check_stream, diff_quiet, diff_trading,
                                   net_by_slice, read_inferred, reconstruct_stream, side_totals, truth_events,
                                   write_inferred)

GOLDEN = Path(__file__).resolve().parent / 'golden'


class setup_tests:

    def __init__(self):
        return

    def setup_random_flow(self, seed:int, n_slices:int=300) -> tuple:
        ''' We use this method to generate a random order flow with exactly one event per 0.1 s slice and every
        price between 100 and 109, so that each side shows its whole depth. Limit orders may cross and trade.

        :param seed: Seed of the flow.
        :param n_slices: Number of slices.
        :return: The Book (with its effect log) and the end-of-slice SnapshotSeries.
        '''
        rng = np.random.default_rng(seed)
        book = Book(min_quote_life=0)
        series = SnapshotSeries(n_slices)
        next_id = 1
        for s in range(n_slices):
            now = s * 100 + 10
            side = Side.BID if rng.random() < 0.5 else Side.ASK
            u = rng.random()
            resting = list(book.orders)
            if u < 0.55 or not resting:
                book.submit_limit(Order(next_id, side, int(rng.integers(100, 110)), int(rng.integers(1, 6)), now))
                next_id += 1
            elif u < 0.85:
                book.cancel(resting[int(rng.integers(len(resting)))], now=now)
            else:
                book.submit_market(side, int(rng.integers(1, 8)), now=now)
            series.append(book.snapshot(s))
        return book, series

    def setup_quiet_config(self):
        ''' We use this method to turn the EUR/USD decimal config into a sparse one: twenty seconds of independent
        Poisson arrivals at 0.6 events per second, no flash orders and few resting orders, so that most sessions
        have at most one event per slice and a book of at most ten levels.

        :return: The validated PipelineConfig.
        '''
        data = json.loads(config_path('eurusd_decimal').read_text())
        data['agents']['flash_prob'] = 0.0
        data['arrivals'] = {'baseline_rates': [0.15, 0.15, 0.1, 0.1, 0.05, 0.05], 'excitation_matrix': [[0.0] * 6] * 6,
                             'decay_rate': 1.0, 'resting_target': 5}
        return config_from_dict(data, duration=20.0, outputs='output')

    def setup_is_quiet(self, session) -> bool:
        '''Whether a session has at most one event per slice and never more than ten levels on a side.'''
        per_slice = Counter(e.slice for e in session.events)
        deep = any(len(s.bid_levels) >= 10 or len(s.ask_levels) >= 10 for s in session.snapshots)
        return max(per_slice.values(), default=0) <= 1 and not deep

    def setup_walk(self) -> tuple:
        '''Asks of 3 units at 105 and 4 units at 106 before the slice, 2 units left at 106 after it.'''
        prev = DepthSnapshot(1, ((100, 5),), ((105, 3), (106, 4)))
        nxt = DepthSnapshot(2, ((100, 5),), ((106, 2),))
        return prev, nxt


class TestReconstruct(unittest.TestCase):

################ diff_quiet() #################
    #1
    def test_quiet_limit_and_cancel(self):
        '''This test is for the diff_quiet() function and checks that increases are limit orders and decreases
        cancellations, best price first.'''
        prev = DepthSnapshot(0, ((100, 5), (99, 2)))
        nxt = DepthSnapshot(1, ((101, 1), (100, 3), (99, 2)))
        events = diff_quiet(prev, nxt, Side.BID)
        self.assertEqual(events, [InferredEvent(1, Side.BID, EventKind.LIMIT, 101, 1),
                                  InferredEvent(1, Side.BID, EventKind.CANCEL, 100, 2)])
    #2
    def test_quiet_window_shift(self):
        '''This test is for the diff_quiet() function and checks that a level pushed out of the ten visible levels
        by a better order is not read as a cancellation.'''
        prev = DepthSnapshot(0, tuple((100 - i, 1) for i in range(10)))
        nxt = DepthSnapshot(1, ((101, 1),) + tuple((100 - i, 1) for i in range(9)))
        self.assertEqual(diff_quiet(prev, nxt, Side.BID), [InferredEvent(1, Side.BID, EventKind.LIMIT, 101, 1)])
    #3
    def test_quiet_side_type(self):
        '''This test is for the diff_quiet() function and checks that the AssertionError is raised for a string side.'''
        with self.assertRaises(AssertionError):
            diff_quiet(DepthSnapshot(0), DepthSnapshot(1), 'B')

################ diff_trading() #################
    #4
    def test_trading_case1(self):
        '''This test is for the diff_trading() function and checks that with no volume beyond the reported deal the
        other decreases are cancellations.'''
        prev, nxt = setup_tests().setup_walk()
        events, case = diff_trading(prev, nxt, Side.ASK, (106, 2), 2)
        self.assertEqual(case, CASE1)
        self.assertEqual(events, [InferredEvent(2, Side.ASK, EventKind.CANCEL, 105, 3),
                                  InferredEvent(2, Side.ASK, EventKind.TRADE, 106, 2)])
    #5
    def test_trading_case2(self):
        '''This test is for the diff_trading() function and checks that the traded volume beyond the reported deal
        is placed on the decreases between the best and the reported price.'''
        prev, nxt = setup_tests().setup_walk()
        events, case = diff_trading(prev, nxt, Side.ASK, (106, 2), 5, np.random.default_rng(1))
        self.assertEqual(case, CASE2)
        self.assertEqual(events, [InferredEvent(2, Side.ASK, EventKind.TRADE, 105, 3),
                                  InferredEvent(2, Side.ASK, EventKind.TRADE, 106, 2)])
    #6
    def test_trading_total_below_deal(self):
        '''This test is for the diff_trading() function and checks that a total below the reported volume is
        flagged inconsistent and explained without trades.'''
        prev, nxt = setup_tests().setup_walk()
        events, case = diff_trading(prev, nxt, Side.ASK, (106, 2), 1)
        self.assertEqual(case, INCONSISTENT)
        self.assertTrue(all(e.kind is not EventKind.TRADE for e in events))
    #7
    def test_trading_not_enough_decrease(self):
        '''This test is for the diff_trading() function and checks that a total the observed decreases cannot
        absorb is flagged inconsistent.'''
        prev, nxt = setup_tests().setup_walk()
        _, case = diff_trading(prev, nxt, Side.ASK, (106, 2), 9)
        self.assertEqual(case, INCONSISTENT)
    #8
    def test_trading_case2_conserves(self):
        '''This test is for the diff_trading() function and checks that a random Case 2 allocation keeps every
        price's net change equal to the observed one.'''
        prev = DepthSnapshot(0, (), ((105, 4), (106, 4), (107, 6)))
        nxt = DepthSnapshot(1, (), ((105, 1), (107, 3)))
        for seed in range(20):
            events, case = diff_trading(prev, nxt, Side.ASK, (107, 3), 8, np.random.default_rng(seed))
            self.assertEqual(case, CASE2)
            net = Counter()
            for e in events:
                net[e.price] += e.volume if e.kind is EventKind.LIMIT else -e.volume
            self.assertEqual(dict(net), {105: -3, 106: -4, 107: -3})
            self.assertEqual(sum(e.volume for e in events if e.kind is EventKind.TRADE), 8)
    #9
    def test_trading_deal_type(self):
        '''This test is for the diff_trading() function and checks that the AssertionError is raised when the deal
        is not a (price, volume) pair.'''
        prev, nxt = setup_tests().setup_walk()
        with self.assertRaises(AssertionError):
            diff_trading(prev, nxt, Side.ASK, 106)

################ side_totals() #################
    #10
    def test_side_totals_one_side(self):
        '''This test is for the side_totals() function and checks that the net volume is the total of the only side.'''
        self.assertEqual(side_totals(DealRecord(1, (106, 2), None, 5)), {Side.ASK: 5, Side.BID: 0})
        self.assertEqual(side_totals(DealRecord(1, None, (99, 2), -4)), {Side.ASK: 0, Side.BID: 4})
    #11
    def test_side_totals_both_sides(self):
        '''This test is for the side_totals() function and checks the smallest pair consistent with the net volume.'''
        self.assertEqual(side_totals(DealRecord(1, (106, 2), (99, 3), 4)), {Side.ASK: 7, Side.BID: 3})
        self.assertEqual(side_totals(DealRecord(1, (106, 2), (99, 3), -5)), {Side.ASK: 2, Side.BID: 7})
    #12
    def test_side_totals_without_net(self):
        '''This test is for the side_totals() function and checks that without a net volume the reported volumes are used.'''
        self.assertEqual(side_totals(DealRecord(1, (106, 2), (99, 3), None)), {Side.ASK: 2, Side.BID: 3})

################ reconstruct_stream() #################
    #13
    def test_stream_golden(self):
        '''This test is for the reconstruct_stream() function and checks the events read from the golden feed.'''
        records = decode((GOLDEN / 'scripted.feed').read_bytes())
        events, report = reconstruct_stream(records)
        self.assertEqual(events, [
            InferredEvent(0, Side.BID, EventKind.LIMIT, 100, 5),
            InferredEvent(0, Side.ASK, EventKind.LIMIT, 105, 3),
            InferredEvent(1, Side.ASK, EventKind.LIMIT, 106, 4),
            InferredEvent(2, Side.ASK, EventKind.TRADE, 105, 3),
            InferredEvent(2, Side.ASK, EventKind.TRADE, 106, 2),
            InferredEvent(3, Side.BID, EventKind.CANCEL, 100, 5),
        ])
        self.assertEqual((report.case1_slices, report.case2_slices, report.quiet_slices), (0, 1, 4))
        self.assertEqual(report.case1_share, 0.0)
    #14
    def test_stream_golden_without_total(self):
        '''This test is for the reconstruct_stream() function and checks that without the signed total the trade
        slice falls back to Case 1.'''
        records = decode((GOLDEN / 'scripted_no_total.feed').read_bytes())
        events, report = reconstruct_stream(records)
        self.assertIn(InferredEvent(2, Side.ASK, EventKind.CANCEL, 105, 3), events)
        self.assertEqual((report.case1_slices, report.trade_slices), (1, 1))
    #15
    def test_stream_matches_truth(self):
        '''This test is for the reconstruct_stream() function and checks that on flows with one event per slice
        and a fully visible book the reconstruction gives back exactly the changes of the book.'''
        for seed in range(10):
            book, series = setup_tests().setup_random_flow(seed)
            records = encode(series, book.trade_log)
            events, report = reconstruct_stream(records, seed=seed)
            self.assertEqual(report.inconsistent_slices, 0)
            self.assertEqual(Counter(events), Counter(truth_events(book.effects)), f'seed {seed}')
    #16
    def test_stream_conservation(self):
        '''This test is for the check_stream() function and checks that no price breaks volume conservation.'''
        book, series = setup_tests().setup_random_flow(11, 500)
        records = encode(series, book.trade_log)
        events, report = reconstruct_stream(records, seed=3)
        self.assertEqual(check_stream(records, events, report), [])
    #17
    def test_stream_seed_type(self):
        '''This test is for the reconstruct_stream() function and checks that the AssertionError is raised for a float seed.'''
        with self.assertRaises(AssertionError):
            reconstruct_stream([], seed=1.0)
    #18
    def test_stream_quiet_session(self):
        '''This test is for the reconstruct_stream() function and checks that a feed without deals gives no trades.'''
        book, series = setup_tests().setup_random_flow(5)
        records = [r for r in encode(series, []) if not isinstance(r, DealRecord)]
        events, report = reconstruct_stream(records)
        self.assertEqual(report.trade_slices, 0)
        self.assertFalse(any(e.kind is EventKind.TRADE for e in events))

################ Files #################
    #19
    def test_inferred_file(self):
        '''This test is for the write_inferred() and read_inferred() functions.'''
        records = decode((GOLDEN / 'scripted.feed').read_bytes())
        events, _ = reconstruct_stream(records)
        with tempfile.TemporaryDirectory() as directory:
            path = write_inferred(events, Path(directory) / 'inferred.txt')
            self.assertEqual(path.read_text().splitlines()[3], '2,A,T,105,3')
            self.assertEqual(read_inferred(path), events)
    #20
    def test_stream_generated_quiet_sessions(self):
        '''This test is for the reconstruct_stream() function and checks on 100 generated sessions with at most one
        event per slice and at most ten levels per side that the reconstruction gives back exactly the changes of
        the book.'''
        config = setup_tests().setup_quiet_config()
        checked = 0
        for seed in range(1000):
            session = generate_session(config, seed=seed)
            if not setup_tests().setup_is_quiet(session):
                continue
            records = encode(session.snapshots, session.trades)
            events, report = reconstruct_stream(records, seed=seed)
            self.assertEqual(report.inconsistent_slices, 0, f'seed {seed}')
            self.assertEqual(Counter(events), Counter(truth_events(session.effects)), f'seed {seed}')
            checked += 1
            if checked == 100:
                break
        self.assertEqual(checked, 100)
    #21
    def test_net_by_slice(self):
        '''This test is for the net_by_slice() function and checks that offsetting events drop out.'''
        events = [InferredEvent(1, Side.BID, EventKind.LIMIT, 100, 5), InferredEvent(1, Side.BID, EventKind.CANCEL, 100, 5),
                  InferredEvent(1, Side.ASK, EventKind.TRADE, 105, 2), InferredEvent(2, Side.ASK, EventKind.LIMIT, 105, 1)]
        self.assertEqual(net_by_slice(events), {(1, Side.ASK, 105): -2, (2, Side.ASK, 105): 1})
