import numpy as np
import numpy.testing as npt
import pytest

from slrtrack.completion import GrouseTracker
from slrtrack.exceptions import DimensionError
from slrtrack.exceptions import PreconditionError
from slrtrack.linalg import random_basis
from slrtrack.simulator import Simulator
from slrtrack.trackers import NorstParams
from slrtrack.trackers import NorstTracker
from slrtrack.utilities import rng_stream


class EchoTracker:
    """
    Returns every frame it gets and records the initialization batch.

    """

    def __init__(self):
        self.batch = None
        self.calls = []
        self.resets = 0

    def initialize(self, batch):
        self.batch = batch

    def process_frame(self, frame, *mask):
        self.calls.append((frame.copy(), *mask))
        return frame.sum()

    def reset(self):
        self.resets += 1
        self.calls = []


def test_matrix_source_with_initialization():
    M = np.arange(20.0).reshape(4, 5)
    tracker = EchoTracker()
    sim = Simulator(tracker, M, t_train=2)
    seen = []
    sim.run(lambda t, frame, out: seen.append((t, out)))
    npt.assert_array_equal(tracker.batch, M[:, :2])
    assert seen == [(2, M[:, 2].sum()), (3, M[:, 3].sum()), (4, M[:, 4].sum())]
    assert sim.t == 4


def test_step_by_step_data():
    M = np.eye(3)
    sim = Simulator(EchoTracker(), M)
    assert sim.sim_step()
    t, frame, out = sim.get_sim_step_data()
    assert t == 0
    npt.assert_array_equal(frame, [1, 0, 0])
    assert out == 1
    assert sim.sim_step() and sim.sim_step()
    assert not sim.sim_step()


def test_reset_replays_matrix():
    M = np.ones((2, 3))
    tracker = EchoTracker()
    sim = Simulator(tracker, M)
    sim.run()
    sim.reset()
    assert tracker.resets == 2
    sim.run()
    assert len(tracker.calls) == 3


def test_iterator_source_consumed_once():
    frames = (np.full(3, float(t)) for t in range(4))
    tracker = EchoTracker()
    sim = Simulator(tracker, frames, t_train=1)
    sim.run()
    assert len(tracker.calls) == 3
    with pytest.raises(PreconditionError):
        sim.reset()


def test_stream_shorter_than_training():
    sim = Simulator(EchoTracker(), iter([np.zeros(2)]), t_train=3)
    with pytest.raises(PreconditionError):
        sim.sim_step()


def test_masks_are_forwarded():
    M = np.ones((3, 4))
    masks = np.zeros((3, 4), dtype=bool)
    masks[1, 2] = True
    tracker = EchoTracker()
    Simulator(tracker, M, masks=masks).run()
    npt.assert_array_equal(tracker.calls[2][1], [False, True, False])
    with pytest.raises(DimensionError):
        Simulator(EchoTracker(), M, masks=masks[:, :2])


def test_norst_through_simulator():
    rng = rng_stream(0, "sim")
    P = random_basis(40, 2, rng)
    M = P.data @ rng.uniform(-1, 1, size=(2, 120))
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=30, alpha=10, K=2))
    sim = Simulator(tracker, M, t_train=30)
    outputs = []
    sim.run(lambda t, frame, out: outputs.append(out))
    assert [out.t for out in outputs] == list(range(30, 120))
    assert [t for t, _ in tracker.state.update_log] == [39, 49]
    assert tracker.state.t_hat == []


def test_grouse_through_simulator():
    rng = rng_stream(1, "sim")
    P = random_basis(30, 2, rng)
    M = P.data @ rng.standard_normal((2, 50))
    masks = rng.random(M.shape) < 0.7
    tracker = GrouseTracker(random_basis(30, 2, rng_stream(1, "init")))
    sim = Simulator(tracker, M, masks=masks)
    sim.run()
    assert tracker.t == 49
