import math

import numpy as np
import pytest

from swarm_rl.baselines import VanillaDqn
from swarm_rl.dqn import (
    DqnConfig,
    DqnExplorer,
    DqnSupervisor,
    dqn_loss_grad,
    epsilon_at,
    explorer_episode,
    q_network,
    supervisor_loop,
    td_target,
    td_targets,
)
from swarm_rl.errors import ConfigError, NumericError, StaleCommitError
from swarm_rl.nn import Network
from swarm_rl.paramsrv import Candidate, ParameterServer
from swarm_rl.replay import Batch
from swarm_rl.supervisor import Supervisor

from conftest import assert_grad_close, central_diff

SMALL = DqnConfig(hidden=(16,), warmup=64, batch_size=16, buffer_size=2000, target_sync=50)


def make_batch(rng, n, obs_dim=4, n_actions=2, dones=None):
    return Batch(
        rng.normal(size=(n, obs_dim)),
        rng.integers(0, n_actions, n),
        rng.normal(size=n),
        rng.normal(size=(n, obs_dim)),
        (rng.random(n) < 0.3).astype(float) if dones is None else np.asarray(dones, float),
        np.full(n, -1),
        np.arange(n),
    )


def test_td_target_cases(rng):
    net = Network([4, 3, 2], ["tanh", "identity"], rng=rng)
    s = rng.normal(size=4)
    assert td_target(2.5, s, True, net, 0.99) == 2.5
    assert td_target(2.5, s, False, net, 0.0) == 2.5
    assert td_target(1.0, s, False, Network([4, 3, 2], ["tanh", "identity"]), 0.9) == 1.0
    assert td_target(1.0, s, False, net, 0.5) == pytest.approx(1.0 + 0.5 * net.forward(s).max())


def test_batched_targets_match_scalar(rng):
    net = Network([4, 3, 2], ["tanh", "identity"], rng=rng)
    b = make_batch(rng, 6)
    y = td_targets(b.rewards, b.next_states, b.dones, net, 0.9)
    for i in range(6):
        assert y[i] == pytest.approx(td_target(b.rewards[i], b.next_states[i], bool(b.dones[i]), net, 0.9))


def test_fixed_point_has_zero_loss_and_grad(rng):
    net = Network([4, 5, 2], ["tanh", "identity"], rng=rng)
    b = make_batch(rng, 8)
    y = net.forward(b.states)[np.arange(8), b.actions]
    loss, grad = dqn_loss_grad(b, net, net, 0.9, targets=y)
    assert loss == 0.0 and not grad.any()


def test_linear_single_transition_analytic(rng):
    net = Network([3, 2], ["identity"], rng=rng)
    s = np.array([[0.5, -1.0, 2.0]])
    b = Batch(s, np.array([1]), np.array([0.7]), s, np.array([1.0]), np.array([-1]), np.array([0]))
    loss, grad = dqn_loss_grad(b, net, net, 0.9)
    q = net.forward(s[0])[1]
    # d/dtheta (Q - y)^2 = -2 (y - Q) dQ/dtheta, and dQ/dW[1] = s, dQ/db[1] = 1
    expect = Network([3, 2], ["identity"])
    expect.layers[0].weights[1] = -2 * (0.7 - q) * s[0]
    expect.layers[0].biases[1] = -2 * (0.7 - q)
    np.testing.assert_allclose(grad, expect.params, rtol=1e-12)
    assert loss == pytest.approx((0.7 - q) ** 2)


@pytest.mark.parametrize("seed", range(5))
def test_semi_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = Network([4, 6, 5, 2], ["tanh", "tanh", "identity"], rng=rng)
    target = Network([4, 6, 5, 2], ["tanh", "tanh", "identity"], rng=rng)
    b = make_batch(rng, 7)
    y = td_targets(b.rewards, b.next_states, b.dones, target, 0.95)
    _, grad = dqn_loss_grad(b, net, target, 0.95)
    grad = grad.copy()

    def loss():
        return dqn_loss_grad(b, net, target, 0.95, targets=y)[0]

    assert_grad_close(grad, central_diff(loss, net.params))


def test_non_finite_loss_raises(rng):
    net = Network([4, 2], ["identity"], rng=rng)
    b = make_batch(rng, 3)._replace(rewards=np.array([np.nan, 0.0, 0.0]))
    with pytest.raises(NumericError, match="non-finite"):
        dqn_loss_grad(b, net, net, 0.9)


def test_epsilon_schedule():
    cfg = DqnConfig()
    assert epsilon_at(0, 1000, cfg, 0.05) == 1.0
    assert epsilon_at(100, 1000, cfg, 0.05) == pytest.approx(0.525)
    assert epsilon_at(200, 1000, cfg, 0.05) == 0.05
    assert epsilon_at(999, 1000, cfg, 0.05) == 0.05


def test_config_validation_lists_every_problem():
    with pytest.raises(ConfigError) as exc:
        DqnConfig(lr=-1, gamma=2.0, batch_size=0, candidate_rule="sometimes").validate()
    assert len(exc.value.problems) == 4


def test_epsilon_one_is_uniform():
    cfg = DqnConfig(eps_start=1.0, eps_final=1.0)
    agent = DqnExplorer(0, "cartpole", cfg, seed=0, total_steps=10_000)
    obs = np.zeros(4)
    counts = np.bincount([agent.act(obs) for _ in range(10_000)], minlength=2)
    assert abs(counts[0] - 5000) < 3 * math.sqrt(10_000 * 0.25)


def test_reduction_to_vanilla_is_bitwise():
    steps = 1500
    srv = ParameterServer()
    dist = DqnExplorer(0, "cartpole", SMALL, seed=3, total_steps=steps, c_override=0.0)
    # a committed global best must not matter when c is pinned to zero
    srv.commit_best(dist.net.flatten(), 1.0, 0.5)
    plain = VanillaDqn("cartpole", SMALL, seed=3, total_steps=steps)
    while dist.steps < steps:
        ra = dist.run_episode(srv, steps - dist.steps)
        rb = plain.run_episode(None, steps - plain.steps)
        assert ra.ret == rb.ret and ra.steps == rb.steps
        assert dist.net.params.tobytes() == plain.net.params.tobytes()
        assert dist.target.params.tobytes() == plain.target.params.tobytes()


def test_infinite_best_means_no_candidates():
    srv = ParameterServer(initial_score=math.inf)
    agent = DqnExplorer(0, "cartpole", SMALL, seed=0, total_steps=500)
    while agent.steps < 500:
        agent.run_episode(srv, 500 - agent.steps)
    assert srv.submitted == []


def test_episode_submits_when_beating_best():
    srv = ParameterServer()
    agent = DqnExplorer(2, "cartpole", SMALL, seed=0, total_steps=500)
    ret = explorer_episode(agent, srv)
    cand = srv.take_candidate()
    assert cand.claimed_score == ret and cand.source_agent == 2
    assert cand.params.same_as(agent.latest_params)


def test_budget_cut_episode_is_not_submitted():
    srv = ParameterServer()
    agent = DqnExplorer(0, "cartpole", SMALL, seed=0, total_steps=500)
    rec = agent.run_episode(srv, max_steps=3)
    assert rec.truncated_by_budget and rec.steps == 3
    assert srv.pending() == 0


def test_target_is_a_snapshot_of_the_last_sync():
    cfg = DqnConfig(hidden=(8,), warmup=32, batch_size=8, target_sync=40)
    agent = DqnExplorer(0, "cartpole", cfg, seed=1, total_steps=400)
    while agent.steps < 120:
        agent.run_episode(None, 120 - agent.steps)
    assert agent.target.params.tobytes() == agent.net.params.tobytes()
    synced = agent.net.params.copy()
    agent.run_episode(None, max_steps=5)
    assert agent.target.params.tobytes() == synced.tobytes()
    assert agent.net.params.tobytes() != synced.tobytes()


def test_td_target_rule_submits_snapshots():
    cfg = DqnConfig(hidden=(8,), warmup=32, batch_size=8, candidate_rule="td_target")
    srv = ParameterServer(queue_capacity=64)
    agent = DqnExplorer(0, "cartpole", cfg, seed=0, total_steps=300)
    while agent.steps < 300:
        agent.run_episode(srv, 300 - agent.steps)
    assert srv.submitted
    assert all(c.params.layout == agent.net.layout for c in srv.submitted)


def test_explorer_follows_committed_best():
    srv = ParameterServer()
    agent = DqnExplorer(0, "cartpole", SMALL, seed=0, total_steps=400)
    star = np.zeros(agent.net.n_params)
    net = q_network(4, 2, SMALL)
    net.params[...] = star
    srv.commit_best(net.flatten(), 10.0, 1.0)
    start = np.abs(agent.net.params).max()
    while agent.steps < 400:
        agent.run_episode(srv, 400 - agent.steps)
    assert agent.view.version == 1 and agent.view.c == 1.0
    assert np.abs(agent.net.params).max() < 0.5 * start


class Scripted(Supervisor):
    """Supervisor whose episode returns come from a fixed script."""

    def __init__(self, server, script, **kw):
        super().__init__(server, "cartpole", **kw)
        self.script = list(script)

    def play_episode(self, params):
        return self.script.pop(0), 100


def test_commit_on_the_success_after_b():
    srv = ParameterServer()
    sup = Scripted(srv, [10.0] * 10, b=3)
    srv.submit_candidate(Candidate(np.zeros(2), 10.0, 1))
    sup.validate(srv.take_candidate())
    ev = sup.evals[-1]
    assert ev.committed and len(ev.returns) == 4
    rec = srv.read_best()
    assert rec.x == 4 and rec.c == pytest.approx(math.atan(4 / 600)) and rec.score == 10.0


def test_bad_candidate_never_committed():
    srv = ParameterServer()
    srv.commit_best(np.zeros(2), 100.0, 0.01)
    sup = Scripted(srv, [5.0] * 10 + [100.0], b=3)
    sup.sync_from_server()
    srv.submit_candidate(Candidate(np.ones(2), 150.0, 1))
    supervisor_loop(sup, srv, episodes_per_candidate=10)
    assert not sup.evals[-1].committed and len(sup.evals[-1].returns) == 10
    # only the old best is ever re-published (by the keepalive replay)
    assert all(not r.params.any() for r in srv.commit_log[1:])


def test_validated_score_is_mean_of_successes():
    srv = ParameterServer()
    srv.commit_best(np.zeros(2), 10.0, 0.0)
    sup = Scripted(srv, [12.0, 3.0, 14.0, 10.0, 20.0], b=3)
    sup.sync_from_server()
    ev = sup.validate(Candidate(np.ones(2), 30.0, 0, 0, 1))
    assert ev.committed
    assert srv.read_best().score == pytest.approx((12 + 14 + 10 + 20) / 4)


def test_keepalive_grows_c_and_republishes():
    srv = ParameterServer()
    sup = Scripted(srv, [10.0] * 6 + [11.0, 9.0, 10.0], b=5)
    sup.validate(Candidate(np.zeros(2), 10.0, 0, 0, 1))
    v = srv.read_best().version
    sup.keepalive()
    assert srv.read_best().version == v + 1 and srv.read_best().x == 7
    sup.keepalive()  # 9 < 10: no change
    assert srv.read_best().version == v + 1
    sup.keepalive()
    assert srv.read_best().x == 8 and srv.read_best().c == pytest.approx(math.atan(8 / 1000))


def test_race_triggers_revalidation():
    srv = ParameterServer()

    class Racing(Scripted):
        def play_episode(self, params):
            if len(self.trace) == 3:
                srv.commit_best(np.full(2, 7.0), 50.0, 0.1)
            return super().play_episode(params)

    sup = Racing(srv, [20.0] * 4 + [60.0] * 4, b=3, episodes_per_candidate=8)
    ev = sup.validate(Candidate(np.ones(2), 20.0, 0, 0, 1))
    assert ev.committed
    assert srv.read_best().score == 60.0 and srv.read_best().version == 2


def test_keepalive_respects_step_budget():
    srv = ParameterServer()
    sup = Scripted(srv, [10.0] * 4 + [10.0] * 20, b=3, keepalive_episodes=5)
    srv.submit_candidate(Candidate(np.zeros(2), 10.0, 1))
    sup.turn(step=0, step_budget=400)  # validation alone used 400 steps
    assert sup.env_steps == 400 and sup.x == 4
    sup.turn(step=1, step_budget=650)
    assert sup.env_steps == 700 and sup.x == 7  # replays stop once the budget is reached
    sup.turn(step=2, step_budget=650)
    assert sup.x == 7


def test_supervisor_requires_enough_episodes():
    with pytest.raises(ConfigError):
        Scripted(ParameterServer(), [], b=5, episodes_per_candidate=5)


def test_dqn_supervisor_replays_greedily():
    srv = ParameterServer()
    sup = DqnSupervisor(srv, "cartpole", SMALL, b=1, episodes_per_candidate=2)
    net = q_network(4, 2, SMALL, rng=np.random.default_rng(0))
    srv.submit_candidate(Candidate(net.flatten(), 9.0, 0))
    sup.turn(0)
    assert sup.evals[0].committed
    assert all(r >= 1 for r in sup.evals[0].returns)


from hypothesis import given, settings, strategies as st


@settings(max_examples=100, deadline=None)
@given(claims=st.lists(st.floats(0, 500), min_size=1, max_size=6),
       script=st.lists(st.floats(0, 500), min_size=200, max_size=200), b=st.integers(1, 4))
def test_every_commit_traces_to_a_validated_candidate(claims, script, b):
    srv = ParameterServer()
    sup = Scripted(srv, script, b=b, episodes_per_candidate=b + 3, keepalive_episodes=2)
    submitted = {}
    for k, claim in enumerate(claims):
        params = np.array([float(k)])
        if srv.submit_candidate(Candidate(params, claim, k, k)):
            submitted[k] = params
        sup.turn(step=k)
    log = srv.commit_log[1:]
    prev = -math.inf
    for rec in log:
        assert any(rec.params is p for p in submitted.values())
        assert rec.score >= prev
        prev = rec.score
    for ev in sup.evals:
        if ev.committed:
            assert sum(r >= ev.best_score_then for r in ev.returns) == b + 1
