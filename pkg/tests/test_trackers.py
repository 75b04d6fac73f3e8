import numpy as np
import numpy.testing as npt
import pytest

from slrtrack import trackers
from slrtrack.exceptions import FallbackWarning
from slrtrack.exceptions import IllConditionedSupport
from slrtrack.exceptions import InvalidConfig
from slrtrack.exceptions import PreconditionError
from slrtrack.linalg import random_basis
from slrtrack.linalg import random_skew
from slrtrack.linalg import rotate_subspace
from slrtrack.linalg import subspace_error
from slrtrack.presets import DESK
from slrtrack.presets import DESK_NORST
from slrtrack.presets import FULL
from slrtrack.presets import FULL_NORST
from slrtrack.presets import desk_bernoulli
from slrtrack.presets import desk_moving_object
from slrtrack.presets import full_bernoulli
from slrtrack.scenarios import assemble_scenario
from slrtrack.trackers import DETECT
from slrtrack.trackers import UPDATE
from slrtrack.trackers import NorstParams
from slrtrack.trackers import NorstTracker
from slrtrack.trackers import TrackerState
from slrtrack.trackers import detection_statistic
from slrtrack.trackers import norst_detect
from slrtrack.trackers import norst_init
from slrtrack.trackers import norst_offline
from slrtrack.trackers import norst_subspace_update
from slrtrack.trackers import recover_frame
from slrtrack.utilities import FrameBuffer
from slrtrack.utilities import rel_frob_err
from slrtrack.utilities import rng_stream

from .helpers import sparse_vector


def test_params_resolution():
    params = NorstParams(r=10, xmin=10.0).resolved(200, lambda_plus=3.0)
    assert params.K == 5
    assert params.alpha == 60
    assert params.omega_supp == pytest.approx(5.0)
    assert params.xi == pytest.approx(10.0 / 15)
    assert params.omega_evals == pytest.approx(2 * 0.01 ** 2 * 3.0)


def test_params_alpha_grows_with_dimension():
    params = NorstParams(r=30, xmin=10.0).resolved(1000)
    assert params.alpha == int(np.ceil(30 * np.log(1000)))
    assert params.omega_evals is None


def test_params_explicit_values_win():
    params = NorstParams(r=10, xmin=10.0, alpha=120, K=8, omega_evals=1e-3).resolved(200, lambda_plus=3.0)
    assert (params.alpha, params.K, params.omega_evals) == (120, 8, 1e-3)


def test_params_alpha_below_rank():
    with pytest.raises(InvalidConfig):
        NorstParams(r=10, xmin=10.0, alpha=5).resolved(200)


def test_recover_frame_exact():
    rng = rng_stream(1, "recover")
    P = random_basis(200, 10, rng)
    T = np.sort(rng.choice(200, size=20, replace=False))
    x = sparse_vector(200, T, rng)
    l = P.data @ rng.uniform(-3, 3, size=10)
    params = NorstParams(r=10, xmin=10.0).resolved(200)
    xhat, lhat, That, fallback = recover_frame(P, l + x, params)
    npt.assert_array_equal(That, T)
    npt.assert_allclose(xhat, x, atol=1e-8)
    npt.assert_allclose(lhat, l, atol=1e-8)
    assert not fallback


def test_recover_frame_without_outliers():
    rng = rng_stream(2, "recover")
    P = random_basis(50, 3, rng)
    l = P.data @ rng.standard_normal(3)
    params = NorstParams(r=3, xmin=10.0).resolved(50)
    xhat, lhat, That, _ = recover_frame(P, l, params)
    assert That.size == 0
    npt.assert_array_equal(xhat, np.zeros(50))
    npt.assert_array_equal(lhat, l)


def test_recover_frame_fallback(monkeypatch):
    def ill_conditioned(Psi, y, T):
        raise IllConditionedSupport("singular", cond=np.inf)

    monkeypatch.setattr(trackers, "ls_on_support", ill_conditioned)
    rng = rng_stream(3, "recover")
    P = random_basis(60, 2, rng)
    T = np.array([4, 20, 33])
    x = sparse_vector(60, T, rng)
    params = NorstParams(r=2, xmin=10.0).resolved(60)
    with pytest.warns(FallbackWarning):
        xhat, lhat, That, fallback = recover_frame(P, x, params)
    assert fallback
    npt.assert_array_equal(That, T)
    assert np.all(xhat[np.setdiff1d(np.arange(60), T)] == 0)
    npt.assert_allclose(lhat, x - xhat)


def tracker_state(P, alpha, phase=UPDATE):
    state = TrackerState(Phat=P, buffer=FrameBuffer(P.n, alpha), lambda_plus_hat=1.0, t=alpha - 1)
    if phase == DETECT:
        state.enter(DETECT)
    return state


def test_phase_transitions():
    state = tracker_state(random_basis(10, 2, rng_stream(0, "p")), 4)
    with pytest.raises(PreconditionError):
        state.enter(UPDATE)
    state.enter(DETECT)
    with pytest.raises(PreconditionError):
        state.enter(DETECT)


def test_update_preconditions():
    P = random_basis(10, 2, rng_stream(0, "p"))
    params = NorstParams(r=2, xmin=10.0, alpha=4, K=2, omega_evals=0.1).resolved(10)
    state = tracker_state(P, 4)
    with pytest.raises(PreconditionError):
        norst_subspace_update(state, params)
    with pytest.raises(PreconditionError):
        norst_detect(tracker_state(P, 4, DETECT), params)
    with pytest.raises(PreconditionError):
        norst_detect(state, params)


def test_subspace_update_counts_to_K():
    rng = rng_stream(4, "update")
    P = random_basis(30, 2, rng)
    params = NorstParams(r=2, xmin=10.0, alpha=5, K=2, omega_evals=0.1).resolved(30)
    state = tracker_state(random_basis(30, 2, rng), 5)
    for k in (1, 2):
        for _ in range(5):
            state.buffer.push(P.data @ rng.standard_normal(2))
        norst_subspace_update(state, params)
        assert len(state.buffer) == 0
        assert subspace_error(state.Phat, P) <= 1e-10
        assert state.k == k % params.K
    assert state.phase == DETECT
    assert state.k == 0 and state.j == 1
    assert len(state.segment_bases) == 1
    assert len(state.update_log) == 2


def test_detection_statistic():
    rng = rng_stream(5, "detect")
    P = random_basis(30, 2, rng)
    state = tracker_state(P, 6, DETECT)
    frames = rng.standard_normal((30, 6))
    for f in frames.T:
        state.buffer.push(f)
    expected = np.linalg.norm(P.project_out(frames), 2) ** 2 / 6
    assert detection_statistic(state) == pytest.approx(expected)
    params = NorstParams(r=2, xmin=10.0, alpha=6, omega_evals=expected / 2).resolved(30)
    state.t = 41
    assert norst_detect(state, params)
    assert state.t_hat == [41]
    assert state.phase == UPDATE
    assert len(state.buffer) == 0


def test_no_detection_inside_subspace():
    rng = rng_stream(6, "detect")
    P = random_basis(30, 2, rng)
    state = tracker_state(P, 6, DETECT)
    for _ in range(6):
        state.buffer.push(P.data @ rng.standard_normal(2))
    params = NorstParams(r=2, xmin=10.0, alpha=6, omega_evals=1e-6).resolved(30)
    assert not norst_detect(state, params)
    assert state.phase == DETECT
    assert state.t_hat == []


def test_norst_init_exact_without_outliers():
    rng = rng_stream(7, "init")
    P = random_basis(40, 3, rng)
    Y = P.data @ rng.uniform(-2, 2, size=(3, 60))
    Phat, lambda_plus = norst_init(Y, 3)
    assert subspace_error(Phat, P) <= 1e-8
    assert lambda_plus == pytest.approx(np.linalg.norm(Y, 2) ** 2 / 60)
    with pytest.raises(PreconditionError):
        norst_init(Y[:, :2], 3)


@pytest.mark.parametrize("factory", [desk_bernoulli, desk_moving_object])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_norst_init_on_desk_preset(factory, seed):
    truth = assemble_scenario(factory(seed))
    t_train = DESK["t_train"]
    Phat, _ = norst_init(truth.M[:, :t_train], DESK["r"], T_per_stage=DESK_NORST["init_iters"])
    assert subspace_error(Phat, truth.bases[0]) <= 0.05


@pytest.mark.full
def test_norst_init_on_full_preset():
    truth = assemble_scenario(full_bernoulli(0))
    Phat, _ = norst_init(truth.M[:, :FULL["t_train"]], FULL["r"], T_per_stage=FULL_NORST["init_iters"])
    assert subspace_error(Phat, truth.bases[0]) <= 0.05


def changing_subspace_data(seed, n=50, r=2, tmax=300, t_change=100, delta=0.05):
    P0 = random_basis(n, r, rng_stream(seed, "P0"))
    P1 = rotate_subspace(P0, delta, random_skew(n, rng_stream(seed, "B")))
    a = rng_stream(seed, "a").uniform(-1.0, 1.0, size=(r, tmax))
    L = np.empty((n, tmax))
    L[:, :t_change] = P0.data @ a[:, :t_change]
    L[:, t_change:] = P1.data @ a[:, t_change:]
    return L, P0, P1


def test_tracker_detects_and_tracks_change():
    L, P0, P1 = changing_subspace_data(0)
    params = NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2)
    tracker = NorstTracker(params, keep_history=True)
    result = tracker.run(L)
    assert [t for t, _ in result.update_log] == [59, 79, 139, 159]
    assert result.t_hat == [119]
    assert subspace_error(tracker.state.Phat, P1) <= 1e-8
    assert subspace_error(result.segment_bases[0], P0) <= 1e-8
    assert tracker.state.phase == DETECT
    npt.assert_allclose(result.Lhat[:, 160:], L[:, 160:], atol=1e-8)

    Lhat_off, Xhat_off = tracker.offline()
    assert rel_frob_err(Lhat_off, L) <= 1e-8
    assert rel_frob_err(Lhat_off, L) <= rel_frob_err(result.Lhat, L)


def test_tracker_fixed_subspace_never_detects():
    L, P0, _ = changing_subspace_data(1, delta=0.0)
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2))
    result = tracker.run(L)
    assert result.t_hat == []
    assert len(result.update_log) == 2
    assert subspace_error(tracker.state.Phat, P0) <= 1e-8


def test_tracker_with_outliers():
    rng = rng_stream(8, "outliers")
    L, P0, P1 = changing_subspace_data(2, n=100, tmax=400, t_change=200)
    mask = rng.random(L.shape) < 0.05
    mask[:, :40] = False
    S = np.where(mask, rng.uniform(10.0, 20.0, size=L.shape), 0.0)
    tracker = NorstTracker(NorstParams(r=2, xmin=10.0, t_train=40, alpha=30, K=2))
    result = tracker.run(L + S)
    exact = [np.array_equal(result.supports[t], np.flatnonzero(mask[:, t])) for t in range(40, 400)]
    assert np.mean(exact) >= 0.95
    assert len(result.t_hat) >= 1
    assert 200 <= result.t_hat[0] <= 200 + 2 * 30


def updates_by_segment(result):
    segments = [[] for _ in range(len(result.t_hat) + 1)]
    for t, P in result.update_log:
        segments[int(np.searchsorted(result.t_hat, t, side="left"))].append(P)
    return segments


def test_subspace_error_decreases_within_segment():
    rng = rng_stream(8, "outliers")
    L, P0, P1 = changing_subspace_data(2, n=100, tmax=400, t_change=200)
    mask = rng.random(L.shape) < 0.05
    mask[:, :40] = False
    S = np.where(mask, rng.uniform(10.0, 20.0, size=L.shape), 0.0)
    result = NorstTracker(NorstParams(r=2, xmin=10.0, t_train=40, alpha=30, K=2)).run(L + S)
    for truth, estimates in zip([P0, P1], updates_by_segment(result)):
        errors = [subspace_error(P, truth) for P in estimates]
        assert np.all(np.diff(errors) <= 1e-10), errors


def test_offline_never_worse_per_frame():
    L, _, _ = changing_subspace_data(5)
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2), keep_history=True)
    result = tracker.run(L)
    Lhat_off, _ = tracker.offline()
    online = np.linalg.norm(result.Lhat - L, axis=0)
    offline = np.linalg.norm(Lhat_off - L, axis=0)
    assert np.all(offline <= online + 1e-12)


def test_block_processing_matches_frame_by_frame():
    rng = rng_stream(9, "blocks")
    L, _, _ = changing_subspace_data(6, n=60, tmax=200, t_change=120)
    mask = rng.random(L.shape) < 0.05
    mask[:, :40] = False
    M = L + np.where(mask, rng.uniform(10.0, 20.0, size=L.shape), 0.0)
    params = NorstParams(r=2, xmin=10.0, t_train=40, alpha=20, K=2, l1_tol=1e-9)
    result = NorstTracker(params).run(M)
    tracker = NorstTracker(params)
    tracker.initialize(M[:, :40])
    for t in range(40, 200):
        out = tracker.process_frame(M[:, t])
        npt.assert_array_equal(out.That, result.supports[t])
        npt.assert_allclose(out.lhat, result.Lhat[:, t], atol=1e-6)
    assert tracker.state.t_hat == result.t_hat
    assert [t for t, _ in tracker.state.update_log] == [t for t, _ in result.update_log]


def test_block_must_end_at_window():
    L, _, _ = changing_subspace_data(7)
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2))
    tracker.initialize(L[:, :40])
    with pytest.raises(PreconditionError):
        tracker.process_block(L[:, 40:61])
    assert len(tracker.process_block(L[:, 40:60])) == 20
    assert len(tracker.state.update_log) == 1


def test_process_frame_requires_initialization():
    with pytest.raises(PreconditionError):
        NorstTracker(NorstParams(r=2, xmin=10.0)).process_frame(np.zeros(5))


def test_offline_requires_history():
    L, _, _ = changing_subspace_data(3)
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2))
    tracker.run(L)
    with pytest.raises(PreconditionError):
        tracker.offline()


def test_offline_segment_count_checked():
    P = random_basis(10, 2, rng_stream(0, "p"))
    params = NorstParams(r=2, xmin=10.0, alpha=4, K=2).resolved(10)
    with pytest.raises(ValueError):
        norst_offline(np.zeros((10, 20)), [P], [8], params)


def test_reset_clears_state():
    L, _, _ = changing_subspace_data(4)
    tracker = NorstTracker(NorstParams(r=2, xmin=30.0, t_train=40, alpha=20, K=2))
    first = tracker.run(L)
    tracker.reset()
    assert tracker.state is None
    second = tracker.run(L)
    assert first.t_hat == second.t_hat
    npt.assert_array_equal(first.Lhat, second.Lhat)
