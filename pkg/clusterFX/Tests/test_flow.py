import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from clusterFX.errors import ConfigError, FeedParseError
from clusterFX.Book import Book, EventKind, Order, Side, TickPrice, TraderClass, instrument, price_to_rate
from clusterFX.Flow import (AgentMix, ArrivalModel, ArrivalProcess, DiscretePowerLaw, EVENT_TYPES, OrderFactory, SignPersistence,
                            SignState, VolumeModel, config_from_dict, config_path, format_event, generate_session,
                            load_config, load_session, parse_event, save_session, with_regime)
from clusterFX.Flow.session import _cancel_scaling


class setup_tests:

    def __init__(self):
        return

    def setup_config_data(self) -> dict:
        ''' We use this method to read the packaged EUR/USD decimal config as a plain dict, so that single fields
        can be broken before it is validated.

        :return: The parsed JSON document.
        '''
        return json.loads(config_path('eurusd_decimal').read_text())

    def setup_short_config(self):
        '''The EUR/USD decimal config shortened to one minute.'''
        return load_config('eurusd_decimal', duration=60.0, outputs='output')

    def setup_factory(self, **mix) -> tuple:
        '''An order factory on EUR/USD decimal and a book quoting 135000 / 135010.'''
        spec = instrument('EUR/USD decimal', min_quote_life=0)
        factory = OrderFactory(spec, AgentMix(**mix), VolumeModel(), spec.reference_ticks)
        book = Book(spec)
        book.submit_limit(Order(1, Side.BID, 135000, 5, 0))
        book.submit_limit(Order(2, Side.ASK, 135010, 5, 0))
        return factory, book


class TestFlow(unittest.TestCase):

################ Configuration #################
    #1
    def test_load_packaged_config(self):
        '''This test is for the load_config() function and checks the packaged EUR/USD decimal config.'''
        config = load_config('eurusd_decimal', outputs='output')
        self.assertTrue(config.instrument.decimal)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.n_slices, 864000)
        self.assertLess(config.arrivals.spectral_radius(), 1.0)
    #2
    def test_load_config_overrides(self):
        '''This test is for the load_config() function and checks that keyword overrides replace file values.'''
        config = load_config('eurusd_decimal', seed=3, duration=60.0, outputs='elsewhere')
        self.assertEqual((config.seed, config.duration, config.outputs), (3, 60.0, 'elsewhere'))
    #3
    def test_config_unknown_field(self):
        '''This test is for the config_from_dict() function and checks that an unknown field is named in the error.'''
        data = setup_tests().setup_config_data()
        data['agents']['bogus'] = 1
        with self.assertRaises(ConfigError) as caught:
            config_from_dict(data)
        self.assertEqual(caught.exception.field, 'agents.bogus')
    #4
    def test_config_explosive_arrivals(self):
        '''This test is for the config_from_dict() function and checks that a non-stationary excitation matrix is refused.'''
        data = setup_tests().setup_config_data()
        data['arrivals']['excitation_matrix'] = (np.asarray(data['arrivals']['excitation_matrix']) * 2).tolist()
        with self.assertRaises(ConfigError) as caught:
            config_from_dict(data)
        self.assertEqual(caught.exception.field, 'arrivals.excitation_matrix')
    #5
    def test_config_bad_probability(self):
        '''This test is for the config_from_dict() function and checks the field named for a probability above 1.'''
        data = setup_tests().setup_config_data()
        data['agents']['flash_prob'] = 1.5
        with self.assertRaises(ConfigError) as caught:
            config_from_dict(data)
        self.assertEqual(caught.exception.field, 'agents.flash_prob')
    #6
    def test_config_unknown_instrument(self):
        '''This test is for the config_from_dict() function and checks the field named for an unknown instrument.'''
        data = setup_tests().setup_config_data()
        data['instrument'] = 'GBP/USD decimal'
        with self.assertRaises(ConfigError) as caught:
            config_from_dict(data)
        self.assertEqual(caught.exception.field, 'instrument.key')
    #7
    def test_config_missing_section(self):
        '''This test is for the config_from_dict() function and checks the field named for a missing section.'''
        data = setup_tests().setup_config_data()
        del data['signs']
        with self.assertRaises(ConfigError) as caught:
            config_from_dict(data)
        self.assertEqual(caught.exception.field, 'signs')
    #8
    def test_config_path_missing(self):
        '''This test is for the config_path() function and checks that a missing config raises the ConfigError.'''
        with self.assertRaises(ConfigError) as caught:
            config_path('no_such_config')
        self.assertEqual(caught.exception.field, 'config')
    #9
    def test_with_regime_pip(self):
        '''This test is for the with_regime() function and checks the move to pip pricing.'''
        config = with_regime(setup_tests().setup_short_config(), 'pip')
        self.assertEqual(config.instrument.pip_in_ticks, 1)
        self.assertEqual(config.seed_price, 13500)
        self.assertEqual(config.agents.half_pip_prob, 0.0)
        self.assertEqual(config.name, 'eurusd_pip')
        self.assertEqual(config.duration, 60.0)

################ Arrivals #################
    #10
    def test_stationary_rates(self):
        '''This test is for the ArrivalModel().stationary_rates() method and checks the long-run daily rates.'''
        config = setup_tests().setup_short_config()
        expected = [1.273, 1.273, 1.157, 1.157, 0.127, 0.127]
        self.assertTrue(np.allclose(config.arrivals.stationary_rates(), expected, rtol=1e-2))
    #11
    def test_poisson_arrivals(self):
        '''This test is for the ArrivalProcess().next_arrival() method and checks that without excitation a single
        type arrives at its baseline rate.'''
        model = ArrivalModel([1.0, 0, 0, 0, 0, 0], np.zeros((6, 6)), 1.0)
        process = ArrivalProcess(model)
        rng = np.random.default_rng(0)
        count = 0
        while True:
            t, k = process.next_arrival(rng)
            if t >= 2000:
                break
            self.assertEqual(k, 0)
            count += 1
        self.assertTrue(1800 < count < 2200)
    #12
    def test_excitation_raises_counts(self):
        '''This test is for the ArrivalProcess().next_arrival() method and checks that self excitation raises the
        event count above the baseline count.'''
        excitation = np.zeros((6, 6))
        excitation[0, 0] = 0.5
        process = ArrivalProcess(ArrivalModel([1.0, 0, 0, 0, 0, 0], excitation, 1.0))
        rng = np.random.default_rng(1)
        count = 0
        while process.next_arrival(rng)[0] < 2000:
            count += 1
        self.assertGreater(count, 3000)

################ Agents #################
    #13
    def test_power_law_normalized(self):
        '''This test is for the DiscretePowerLaw() class and checks that the truncated law sums to one.'''
        law = DiscretePowerLaw(2.6, 1, 100)
        self.assertAlmostEqual(float(law.pmf(np.arange(1, 101)).sum()), 1.0)
        self.assertEqual(float(law.pmf(101)), 0.0)
    #14
    def test_power_law_alpha(self):
        '''This test is for the DiscretePowerLaw() class and checks that the AssertionError is raised for alpha <= 1.'''
        with self.assertRaises(AssertionError):
            DiscretePowerLaw(1.0)
    #15
    def test_volume_cap(self):
        '''This test is for the VolumeModel().draw() method and checks that volumes stay between 1 and the cap.'''
        model = VolumeModel(algo_unit_prob=0.05, max_volume=60).build()
        rng = np.random.default_rng(2)
        volumes = [model.draw(tc, rng) for tc in (TraderClass.MANUAL, TraderClass.ALGO) for _ in range(500)]
        self.assertTrue(all(1 <= v <= 60 for v in volumes))
    #16
    def test_sign_persistence(self):
        '''This test is for the SignState().apply() method and checks that full persistence keeps every event on the
        preferred side.'''
        signs = SignPersistence(1e9, 1e9, 1.0, 1.0)
        rng = np.random.default_rng(3)
        state = SignState(signs, rng)
        sides = {state.apply(EventKind.MARKET, Side.BID if i % 2 else Side.ASK, i * 0.1, rng) for i in range(200)}
        self.assertEqual(sides, {state.preferred[EventKind.MARKET]})
    #17
    def test_step_ahead(self):
        '''This test is for the OrderFactory().algo_price() method and checks the step one tick ahead of round quotes.'''
        factory, _ = setup_tests().setup_factory(algo_step_ahead_prob=1.0)
        rng = np.random.default_rng(4)
        self.assertEqual(factory.algo_price(Side.BID, 135000, 135010, rng), (135001, True))
        self.assertEqual(factory.algo_price(Side.ASK, 135000, 135010, rng), (135009, True))
    #18
    def test_manual_pip_grid(self):
        '''This test is for the OrderFactory().manual_price() method and checks that manual traders quote on the pip grid.'''
        factory, _ = setup_tests().setup_factory(half_pip_prob=0.0)
        rng = np.random.default_rng(5)
        prices = [factory.manual_price(side, 135003, 135012, rng) for side in Side for _ in range(200)]
        self.assertTrue(all(p % 10 == 0 for p in prices))
    #19
    def test_quotes_empty_book(self):
        '''This test is for the OrderFactory().quotes() method and checks the quotes around the seed price.'''
        factory, _ = setup_tests().setup_factory()
        self.assertEqual(factory.quotes(Book()), (134990, 135010))
    #20
    def test_cancel_without_orders(self):
        '''This test is for the OrderFactory().cancel() method and checks that a cancel with nothing to cancel is
        drawn again as a limit order.'''
        factory, book = setup_tests().setup_factory()
        event = factory.cancel(Side.BID, book, np.random.default_rng(6), 10)
        self.assertIs(event.kind, EventKind.LIMIT)
        self.assertEqual(factory.resampled_cancels, 1)

################ generate_session() #################
    #21
    def test_session_deterministic(self):
        '''This test is for the generate_session() function and checks that one seed gives one session.'''
        config = setup_tests().setup_short_config()
        first = generate_session(config, seed=3)
        second = generate_session(config, seed=3)
        self.assertEqual([format_event(e) for e in first.events], [format_event(e) for e in second.events])
        self.assertEqual(first.trades, second.trades)
        third = generate_session(config, seed=4)
        self.assertNotEqual([format_event(e) for e in first.events], [format_event(e) for e in third.events])
    #22
    def test_session_times(self):
        '''This test is for the generate_session() function and checks that events are time ordered within the session.'''
        session = generate_session(setup_tests().setup_short_config(), seed=5)
        times = [e.time for e in session.events]
        self.assertGreater(len(times), 50)
        self.assertEqual(times, sorted(times))
        self.assertLess(times[-1], 60000)
        self.assertEqual(session.n_slices, 600)
    #23
    def test_session_summary(self):
        '''This test is for the Session().summary() method and checks that it counts every event.'''
        session = generate_session(setup_tests().setup_short_config(), seed=6)
        summary = session.summary()
        self.assertEqual(int(summary[summary.kind != 'trade'].events.sum()), len(session.events))
    #24
    def test_session_files(self):
        '''This test is for the save_session() and load_session() functions and checks that a saved session reads back.'''
        session = generate_session(setup_tests().setup_short_config(), seed=8)
        with tempfile.TemporaryDirectory() as directory:
            save_session(session, directory)
            loaded = load_session(directory)
        self.assertEqual([format_event(e) for e in loaded.events], [format_event(e) for e in session.events])
        self.assertEqual(loaded.trades, session.trades)
        self.assertEqual(loaded.effects, session.effects)
        self.assertEqual(len(loaded.snapshots), len(session.snapshots))
        self.assertEqual(loaded.instrument, session.instrument)
    #25
    def test_parse_event_short_line(self):
        '''This test is for the parse_event() function and checks that a short line raises the FeedParseError.'''
        with self.assertRaises(FeedParseError) as caught:
            parse_event('1,L,B,100', 3)
        self.assertEqual(caught.exception.line, 3)

################ Placement and cancellation #################
    #26
    def test_manual_join_anchor(self):
        '''This test is for the OrderFactory().manual_price() method and checks that a joining manual trader quotes
        the pip price at or behind the best quote of its side.'''
        factory, _ = setup_tests().setup_factory(manual_inside_prob=0.0, manual_join_prob=1.0)
        rng = np.random.default_rng(9)
        self.assertEqual(factory.manual_price(Side.BID, 135003, 135012, rng), 135000)
        self.assertEqual(factory.manual_price(Side.ASK, 135003, 135012, rng), 135020)
    #27
    def test_manual_half_pip(self):
        '''This test is for the OrderFactory().manual_price() method and checks that half-pip orders rest half a
        pip behind the anchor or deeper, on the half-pip grid.'''
        factory, _ = setup_tests().setup_factory(half_pip_prob=1.0)
        rng = np.random.default_rng(10)
        bids = [factory.manual_price(Side.BID, 135003, 135012, rng) for _ in range(300)]
        self.assertTrue(all(p % 10 == 5 and p <= 134995 for p in bids))
        self.assertEqual(max(bids), 134995)
    #28
    def test_algo_does_not_join_round_quotes(self):
        '''This test is for the OrderFactory().algo_price() method and checks that algorithms rest behind a round
        best quote they do not step ahead of, and join a best quote that is not round.'''
        factory, _ = setup_tests().setup_factory(algo_step_ahead_prob=0.0, algo_join_prob=1.0, algo_inside_prob=0.0)
        rng = np.random.default_rng(11)
        behind = [factory.algo_price(Side.BID, 135000, 135010, rng) for _ in range(200)]
        self.assertTrue(all(p < 135000 and not stepped for p, stepped in behind))
        self.assertEqual(factory.algo_price(Side.BID, 135001, 135010, rng), (135001, False))
        self.assertEqual(factory.algo_price(Side.ASK, 135001, 135009, rng), (135009, False))
    #29
    def test_limit_price_type(self):
        '''This test is for the OrderFactory().limit() method and checks that limit prices are whole positive ticks.'''
        factory, book = setup_tests().setup_factory()
        rng = np.random.default_rng(12)
        prices = [factory.limit(side, book, rng, 0).price for side in Side for _ in range(100)]
        self.assertTrue(all(isinstance(p, TickPrice) and p >= 1 for p in prices))
    #30
    def test_cancel_class_weights(self):
        '''This test is for the OrderFactory().cancel_class() method and checks that the class of a cancel follows
        the resting counts weighted by the cancel weights.'''
        factory, book = setup_tests().setup_factory(algo_cancel_weight=9.0)
        book.submit_limit(Order(3, Side.BID, 134990, 5, 0, TraderClass.MANUAL))
        rng = np.random.default_rng(13)
        draws = [factory.cancel_class(Side.BID, book, rng) for _ in range(4000)]
        share = draws.count(TraderClass.ALGO) / len(draws)
        self.assertTrue(0.87 < share < 0.93)
        self.assertIsNone(factory.cancel_class(Side.BID, Book(), rng))
    #31
    def test_cancel_targets_pool(self):
        '''This test is for the OrderFactory().cancel() method and checks that a cancel removes a resting order of
        the drawn class and side.'''
        factory, book = setup_tests().setup_factory(algo_cancel_weight=1e6)
        factory.pool.add(Side.BID, TraderClass.ALGO, 1)
        event = factory.cancel(Side.BID, book, np.random.default_rng(14), 10)
        self.assertIs(event.kind, EventKind.CANCEL)
        self.assertEqual((event.order_id, event.price, event.volume, event.trader_class), (1, 135000, 5, TraderClass.ALGO))
    #32
    def test_cancel_scaling(self):
        '''This test is for the _cancel_scaling() function and checks the weighted resting counts over the target.'''
        book = Book(min_quote_life=0)
        book.submit_limit(Order(1, Side.BID, 100, 1, 0, TraderClass.MANUAL))
        book.submit_limit(Order(2, Side.BID, 99, 1, 0, TraderClass.MANUAL))
        book.submit_limit(Order(3, Side.BID, 98, 1, 0, TraderClass.ALGO))
        scale = _cancel_scaling(book, 3.0, AgentMix(algo_cancel_weight=4.0))
        self.assertEqual(scale.tolist(), [1.0, 1.0, 2.0, 0.0, 1.0, 1.0])
        self.assertEqual(_cancel_scaling(book, 0.0, AgentMix()).tolist(), [1.0] * 6)
    #33
    def test_agent_mix_sums(self):
        '''This test is for the AgentMix().validate() method and checks that the manual inside and join shares
        cannot exceed one together, and that the cancel weight must be positive.'''
        with self.assertRaises(ConfigError) as caught:
            AgentMix(manual_inside_prob=0.6, manual_join_prob=0.6).validate()
        self.assertEqual(caught.exception.field, 'agents.manual_join_prob')
        with self.assertRaises(ConfigError) as caught:
            AgentMix(algo_cancel_weight=0.0).validate()
        self.assertEqual(caught.exception.field, 'agents.algo_cancel_weight')

################ Signs #################
    #34
    def test_sign_switch_rate(self):
        '''This test is for the SignPersistence().switch_rate() method and checks that the preferred side switches
        at rate 1 / timescale.'''
        signs = SignPersistence(120.0, 300.0)
        self.assertAlmostEqual(signs.switch_rate(EventKind.MARKET), 1 / 120.0)
        self.assertAlmostEqual(signs.switch_rate(EventKind.LIMIT), 1 / 300.0)
    #35
    def test_sign_state_keeps_cancels(self):
        '''This test is for the SignState().apply() method and checks that cancellations keep their drawn side.'''
        rng = np.random.default_rng(15)
        state = SignState(SignPersistence(1e9, 1e9, 1.0, 1.0), rng)
        sides = [state.apply(EventKind.CANCEL, side, 1.0, rng) for side in Side]
        self.assertEqual(sides, list(Side))
    #36
    def test_sign_state_switching(self):
        '''This test is for the SignState().apply() method and checks that the preferred side switches about
        elapsed / timescale times over a long stretch.'''
        rng = np.random.default_rng(16)
        state = SignState(SignPersistence(10.0, 10.0, 1.0, 1.0), rng)
        sides = [state.apply(EventKind.MARKET, Side.BID, 0.1 * i, rng) for i in range(100000)]
        switches = sum(a is not b for a, b in zip(sides, sides[1:]))
        self.assertTrue(850 < switches < 1150)

################ Regimes and session files #################
    #37
    def test_with_regime_agent_mix(self):
        '''This test is for the with_regime() function and checks that the pip regime takes the packaged pip agent mix.'''
        config = with_regime(setup_tests().setup_short_config(), 'pip')
        pip = load_config('eurusd_pip', outputs='output')
        self.assertEqual(config.agents, pip.agents)
    #38
    def test_session_closing_book(self):
        '''This test is for the generate_session() and save_session() functions and checks the closing volumes and
        quotes kept with a session.'''
        session = generate_session(setup_tests().setup_short_config(), seed=17)
        last = session.snapshots.at(session.n_slices - 1)
        self.assertGreaterEqual(session.stats['closing_volume_bid'], sum(v for _, v in last.bid_levels))
        with tempfile.TemporaryDirectory() as directory:
            save_session(session, directory)
            meta = json.loads((Path(directory) / 'session.json').read_text())
        if last.best(Side.BID) is not None:
            self.assertEqual(meta['closing_quotes']['bid'], price_to_rate(last.best(Side.BID), session.instrument))
        self.assertEqual(set(meta['closing_quotes']), {'bid', 'ask'})
    #39
    def test_sign_state_keeps_sides_correlated(self):
        '''This test is for the SignState().apply() method and checks that, on the EUR/USD decimal arrivals, the
        per-window counts of bid and ask limit orders (and of buy and sell market orders) stay positively
        correlated once the sign state has redirected its share of them.'''
        config = setup_tests().setup_short_config()
        rng = np.random.default_rng(12)
        process = ArrivalProcess(config.arrivals)
        signs = SignState(config.signs, rng)
        counts = np.zeros((600, 6))
        while True:
            t, k = process.next_arrival(rng)
            if t >= 6000:
                break
            kind, side = EVENT_TYPES[k]
            side = signs.apply(kind, side, t, rng)
            counts[int(t // 10), EVENT_TYPES.index((kind, side))] += 1
        matrix = np.corrcoef(counts, rowvar=False)
        self.assertGreater(matrix[0, 1], 0.0)
        self.assertGreater(matrix[4, 5], 0.0)
