import math

import numpy as np
import pytest

from intent_admit.controller import (
    AdmittanceParams,
    DampingSchedule,
    DampingScheduler,
    VotingBuffer,
    blend_damping,
    blend_damping_rate,
    step_admittance,
)
from intent_admit.core import Subtask
from intent_admit.errors import ConfigurationError, DynamicsFault


class TestAdmittance:
    def test_equilibrium(self):
        p = AdmittanceParams(m=50.0, b=500.0, dt=0.002)
        v = step_admittance(np.zeros(3), np.zeros(3), p)
        assert np.all(v == 0.0)

    def test_step_response_matches_analytic(self):
        # v(t) = (F/b)(1 - exp(-b t / m)) for a force step
        m, b, dt = 50.0, 500.0, 0.002
        p = AdmittanceParams(m=m, b=b, dt=dt)
        f = np.array([50.0, 0.0, 0.0])
        v = np.zeros(3)
        worst = 0.0
        for k in range(1, 1001):
            v = step_admittance(v, f, p)
            exact = (50.0 / b) * (1.0 - math.exp(-b * k * dt / m))
            worst = max(worst, abs(v[0] - exact) / exact)
        assert worst < 1e-3
        # long-run steady state F/b
        assert v[0] == pytest.approx(0.1, rel=1e-6)

    def test_linearity_in_force(self):
        p = AdmittanceParams(m=50.0, b=100.0, dt=0.002)
        rng = np.random.default_rng(1)
        v0 = rng.standard_normal(3)
        f1, f2 = rng.standard_normal(3), rng.standard_normal(3)
        lhs = step_admittance(v0, f1 + 2.0 * f2, p)
        rhs = (step_admittance(v0, f1, p)
               + 2.0 * step_admittance(v0, f2, p)
               - 2.0 * step_admittance(v0, np.zeros(3), p))
        np.testing.assert_allclose(lhs, rhs, atol=1e-15)

    def test_passive_decay(self):
        p = AdmittanceParams(m=50.0, b=100.0, dt=0.002)
        rng = np.random.default_rng(2)
        for _ in range(20):
            v = rng.standard_normal(3)
            nxt = step_admittance(v, np.zeros(3), p)
            assert np.linalg.norm(nxt) < np.linalg.norm(v)

    def test_nonfinite_input_faults(self):
        p = AdmittanceParams()
        with pytest.raises(DynamicsFault):
            step_admittance(np.array([np.nan, 0, 0]), np.zeros(3), p)
        with pytest.raises(DynamicsFault):
            step_admittance(np.zeros(3), np.array([np.inf, 0, 0]), p)

    def test_param_validation(self):
        with pytest.raises(ConfigurationError):
            AdmittanceParams(m=-1.0)
        with pytest.raises(ConfigurationError):
            AdmittanceParams(b=0.0)


class TestBlend:
    def test_endpoints_exact(self):
        assert blend_damping(100.0, 500.0, 0.0, 0.2) == 100.0
        assert blend_damping(100.0, 500.0, 0.2, 0.2) == 500.0
        assert blend_damping(100.0, 500.0, 5.0, 0.2) == 500.0

    def test_midpoint_is_mean(self):
        assert blend_damping(100.0, 500.0, 0.1, 0.2) == pytest.approx(300.0)

    def test_end_slopes_zero(self):
        assert blend_damping_rate(100.0, 500.0, 0.0, 0.2) == 0.0
        assert blend_damping_rate(100.0, 500.0, 0.2, 0.2) == 0.0
        assert blend_damping_rate(100.0, 500.0, 0.3, 0.2) == 0.0
        # interior slope positive for an increasing blend
        assert blend_damping_rate(100.0, 500.0, 0.1, 0.2) > 0.0

    def test_monotone_between_endpoints(self):
        ts = np.linspace(0.0, 0.2, 101)
        vals = [blend_damping(100.0, 500.0, t, 0.2) for t in ts]
        assert np.all(np.diff(vals) >= 0.0)
        assert min(vals) == 100.0 and max(vals) == 500.0


class TestVoting:
    def test_unanimity(self):
        buf = VotingBuffer(capacity=100)
        out = None
        for _ in range(100):
            out = buf.vote(Subtask.DRIVING)
        assert out == Subtask.DRIVING

    def test_majority(self):
        buf = VotingBuffer(capacity=100)
        for _ in range(60):
            buf.vote(Subtask.DRIVING)
        out = None
        for _ in range(40):
            out = buf.vote(Subtask.CONTACT)
        assert out == Subtask.DRIVING

    def test_tie_prefers_later_phase(self):
        buf = VotingBuffer(capacity=100)
        for _ in range(50):
            buf.vote(Subtask.DRIVING)
        out = None
        for _ in range(50):
            out = buf.vote(Subtask.CONTACT)
        assert out == Subtask.CONTACT

    def test_eviction_beyond_capacity(self):
        buf = VotingBuffer(capacity=10)
        for _ in range(10):
            buf.vote(Subtask.CONTACT)
        out = None
        for _ in range(6):
            out = buf.vote(Subtask.DRIVING)
        assert out == Subtask.DRIVING

    def test_prefilled_idle(self):
        buf = VotingBuffer(capacity=100)
        assert buf.vote(Subtask.CONTACT) == Subtask.IDLE


class TestScheduler:
    def test_c1_constant(self):
        s = DampingScheduler("C1")
        for t in np.linspace(0, 10, 50):
            assert s.step(t, Subtask.DRIVING, 0.99) == 500.0
        assert math.isnan(s.t_a)

    def test_c2_blend_on_vote_change(self):
        s = DampingScheduler("C2")
        assert s.step(0.0, Subtask.IDLE, None) == 300.0
        assert s.step(1.0, Subtask.TOOL_ATTACHMENT, None) == 300.0
        b0 = s.step(2.0, Subtask.DRIVING, None)
        assert b0 == pytest.approx(300.0)
        assert s.step(2.1, Subtask.DRIVING, None) == pytest.approx(200.0)
        assert s.step(2.2, Subtask.DRIVING, None) == pytest.approx(100.0)
        assert s.step(3.0, Subtask.DRIVING, None) == 100.0

    def test_blend_restart_is_continuous(self):
        s = DampingScheduler("C2")
        s.step(0.0, Subtask.IDLE, None)
        s.step(1.0, Subtask.DRIVING, None)       # 300 -> 100 begins
        mid = s.step(1.1, Subtask.DRIVING, None)  # halfway: 200
        b = s.step(1.1, Subtask.CONTACT, None)    # interrupt toward 500
        assert b == pytest.approx(mid)
        after = s.step(1.1 + 1e-4, Subtask.CONTACT, None)
        assert abs(after - mid) < 1.0  # no jump

    def test_continuity_and_bounds_under_flicker(self):
        rng = np.random.default_rng(7)
        s = DampingScheduler("C2")
        prev = s.step(0.0, Subtask.IDLE, None)
        t = 0.0
        max_rate = (500.0 - 100.0) * 1.5 / 0.2  # peak smoothstep slope
        for _ in range(3000):
            t += 0.002
            voted = Subtask(int(rng.integers(0, 4)))
            b = s.step(t, voted, None)
            assert 100.0 <= b <= 500.0
            assert abs(b - prev) <= max_rate * 0.002 + 1e-9
            prev = b

    def test_c3_fires_once_and_latches(self):
        s = DampingScheduler("C3")
        s.step(0.0, Subtask.IDLE, None)
        s.step(1.0, Subtask.DRIVING, 0.1)
        s.step(1.5, Subtask.DRIVING, 0.5)
        assert not s.fired
        s.step(2.0, Subtask.DRIVING, 0.76)
        assert s.fired and s.t_a == 2.0
        # blend completes to b_high and never drops, even through Contact
        b_end = s.step(2.2, Subtask.DRIVING, 0.9)
        assert b_end == 500.0
        assert s.step(2.5, Subtask.CONTACT, None) == 500.0
        assert s.step(2.6, Subtask.DRIVING, 0.2) == 500.0  # vote flicker ignored
        assert s.t_a == 2.0

    def test_c3_nondecreasing_after_fire(self):
        s = DampingScheduler("C3")
        s.step(0.0, Subtask.IDLE, None)
        s.step(1.0, Subtask.DRIVING, 0.0)
        prev = s.step(1.05, Subtask.DRIVING, 0.8)  # fires mid-blend 300->100
        t = 1.05
        for _ in range(500):
            t += 0.002
            b = s.step(t, Subtask.DRIVING, 0.9)
            assert b >= prev - 1e-12
            prev = b
        assert prev == 500.0

    def test_c3_threshold_requires_driving_vote(self):
        s = DampingScheduler("C3")
        s.step(0.0, Subtask.TOOL_ATTACHMENT, 0.9)
        assert not s.fired

    def test_mode_validation(self):
        with pytest.raises(ConfigurationError):
            DampingScheduler("C4")

    def test_schedule_validation(self):
        with pytest.raises(ConfigurationError):
            DampingSchedule(b_low=300.0, b_med=100.0)
        with pytest.raises(ConfigurationError):
            DampingSchedule(theta_star=0.0)
