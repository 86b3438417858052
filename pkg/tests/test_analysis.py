"""Blow-up diagnostics: calibration suites and run-level exponent contracts.

Estimator soundness is established first on synthetic data with known
answers (pure-power cusps, exact power-law histories), then the same
estimators are pointed at the session's Hunter-Saxton, Camassa-Holm, and
Burgers runs and held to the theory's exponents: the 3/5 cusp, the
(5*alpha - 3)/2 seminorm rates, the (T - t)**-1 gradient rate, and the
1/3-vs-3/5 discrimination against the Burgers baseline.
"""

import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cusplab import analysis as an
from cusplab.profiles import rescale_beta
from cusplab.sim.frames import to_self_similar


def cusp_samples(a, coef=1.0, r_lo=1e-4, r_hi=10.0, n=400):
    """Odd pure-power cusp -coef*sign(x)|x|^a on a two-sided geometric grid."""
    r = np.geomspace(r_lo, r_hi, n)
    x = np.concatenate([-r[::-1], r])
    return x, -coef * np.sign(x) * np.abs(x) ** a


# ---------------------------------------------------------------------------
# Hölder exponent: calibration on synthetic cusps
# ---------------------------------------------------------------------------

class TestHolderCalibration:
    @pytest.mark.parametrize("a", [1.0 / 3.0, 0.5, 0.6])
    def test_pure_cusp_recovered(self, a):
        x, u = cusp_samples(a, coef=1.7)
        fit = an.holder_exponent(x, u, 0.0, (1e-2, 1.0), u_star=0.0)
        assert abs(fit.alpha_hat - a) <= 1e-3
        assert fit.r2 > 0.999999
        assert fit.stderr < 1e-3

    def test_profile_scale_cusp(self):
        # the exact far-field cusp shape of the blow-up profile
        coef = (5.0 / 3.0) * 50.0 ** -0.2
        x, u = cusp_samples(0.6, coef=coef)
        fit = an.holder_exponent(x, u, 0.0, (1e-2, 1.0), u_star=0.0)
        assert abs(fit.alpha_hat - 0.600) <= 1e-3

    def test_cusp_value_interpolated_when_omitted(self):
        x, u = cusp_samples(0.6)
        fit = an.holder_exponent(x, u, 0.0, (1e-2, 1.0))
        assert abs(fit.alpha_hat - 0.6) <= 1e-3

    def test_fit_bookkeeping(self):
        x, u = cusp_samples(0.5, n=200)
        fit = an.holder_exponent(x, u, 0.0, (1e-3, 1.0), u_star=0.0)
        assert fit.n_left == fit.n_right > 12
        n = fit.n_left + fit.n_right
        assert fit.log_r.shape == fit.log_osc.shape == fit.side.shape == (n,)
        assert set(np.unique(fit.side)) == {-1.0, 1.0}
        assert np.all(np.isfinite(fit.residuals))
        assert fit.window == (1e-3, 1.0)
        assert fit.x_star == 0.0

    def test_starved_side_refused(self):
        x, u = cusp_samples(0.6, n=30)
        with pytest.raises(an.FitRefusedError, match="refused"):
            an.holder_exponent(x, u, 0.0, (1.0, 1.5), u_star=0.0)

    def test_refusal_is_a_value_error(self):
        assert issubclass(an.FitRefusedError, ValueError)

    def test_degenerate_window_rejected(self):
        x, u = cusp_samples(0.6)
        with pytest.raises(ValueError, match="window"):
            an.holder_exponent(x, u, 0.0, (1.0, 1.0), u_star=0.0)

    def test_fit_invariants_enforced(self):
        kw = dict(x_star=0.0, stderr=0.0, n_left=20, n_right=20,
                  log_r=np.zeros(1), log_osc=np.zeros(1),
                  side=np.ones(1), residuals=np.zeros(1))
        with pytest.raises(ValueError, match="r2"):
            an.HolderFit(alpha_hat=0.6, window=(0.1, 1.0), r2=1.5, **kw)
        with pytest.raises(ValueError, match="window"):
            an.HolderFit(alpha_hat=0.6, window=(1.0, 0.1), r2=0.5, **kw)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(0.25, 0.95), coef=st.floats(0.5, 3.0))
    def test_power_law_is_recovered_exactly(self, a, coef):
        x, u = cusp_samples(a, coef=coef, n=150)
        fit = an.holder_exponent(x, u, 0.0, (1e-3, 5.0), u_star=0.0)
        assert abs(fit.alpha_hat - a) <= 1e-6


# ---------------------------------------------------------------------------
# blow-up time fit: synthetic histories and run contracts
# ---------------------------------------------------------------------------

def power_history(t_star, rate, amplitude, t0=-1.0, gap=1e-6, n=120):
    """Sample times plus g_min following 1/|g| = amplitude*(t_star - t)**rate."""
    t = t_star - np.geomspace(t_star - t0, gap, n)
    return t, -1.0 / (amplitude * (t_star - t) ** rate)


class TestBlowupTimeFit:
    def test_linear_inverse_gradient_is_exact(self):
        t = np.linspace(0.0, 0.499, 160)
        fit = an.fit_blowup_time(t, -1.0 / (0.5 - t))
        assert abs(fit.t_star - 0.5) <= 1e-8
        assert abs(fit.rate - 1.0) <= 1e-8
        assert fit.r2 >= 1.0 - 1e-12
        assert abs(fit.amplitude - 1.0) <= 1e-8

    @pytest.mark.parametrize("t_star,rate,amplitude", [
        (0.5, 1.0, 1.0),
        (0.25, 2.0, 0.7),
        (1.0, 0.5, 2.0),
    ])
    def test_synthetic_history_recovered(self, t_star, rate, amplitude):
        t, g = power_history(t_star, rate, amplitude)
        fit = an.fit_blowup_time(t, g)
        assert abs(fit.t_star - t_star) <= 1e-6
        assert abs(fit.rate - rate) <= 1e-6

    @settings(max_examples=15, deadline=None)
    @given(t_star=st.floats(0.1, 2.0), rate=st.floats(0.4, 2.5))
    def test_recovery_property(self, t_star, rate):
        t, g = power_history(t_star, rate, 1.3)
        fit = an.fit_blowup_time(t, g)
        assert abs(fit.t_star - t_star) <= 1e-6 * max(1.0, abs(t_star))
        assert abs(fit.rate - rate) <= 1e-6

    def test_short_history_refused(self):
        t, g = power_history(0.5, 1.0, 1.0, n=12)
        with pytest.raises(an.FitRefusedError, match="refused"):
            an.fit_blowup_time(t, g)

    def test_non_monotone_history_refused(self):
        t, g = power_history(0.5, 1.0, 1.0)
        g[40] = g[60]
        with pytest.raises(an.FitRefusedError, match="monotone"):
            an.fit_blowup_time(t, g)

    def test_narrow_dynamic_range_refused(self):
        t, g = power_history(0.5, 1.0, 1.0, t0=0.49, gap=5e-3)
        with pytest.raises(an.FitRefusedError, match="decades"):
            an.fit_blowup_time(t, g)

    def test_unordered_times_refused(self):
        t, g = power_history(0.5, 1.0, 1.0)
        t = t[::-1].copy()
        with pytest.raises(an.FitRefusedError, match="increasing"):
            an.fit_blowup_time(t, g[::-1].copy())

    def test_vanishing_gradient_refused(self):
        t, g = power_history(0.5, 1.0, 1.0)
        g[0] = 0.0
        with pytest.raises(an.FitRefusedError, match="finite"):
            an.fit_blowup_time(t, g)

    def test_last_decades_restricts_the_window(self):
        t, g = power_history(0.5, 1.0, 1.0)
        full = an.fit_blowup_time(t, g)
        tail = an.fit_blowup_time(t, g, last_decades=1.5)
        assert tail.n_used < full.n_used
        assert abs(tail.t_star - 0.5) <= 1e-6

    def test_hs_run_blowup_time(self, hs_run):
        # pure-profile seed: blow-up at t = 0 with the exact gradient rate
        fit = an.fit_blowup_time(hs_run.seed.t, hs_run.seed.g_min)
        assert abs(fit.t_star) <= 1e-3
        assert abs(fit.rate - 1.0) <= 1e-3
        assert fit.r2 > 0.999999

    def test_burgers_run_rate(self, burgers_run):
        fit = an.fit_blowup_time(burgers_run.seed.t, burgers_run.seed.g_min)
        assert abs(fit.rate - 1.0) <= 1e-2
        assert abs(fit.t_star) <= 1e-3

    def test_ch_run_rate(self, ch_run):
        fit = an.fit_blowup_time(ch_run.seed.t, ch_run.seed.g_min)
        assert abs(fit.rate - 1.0) <= 0.05


# ---------------------------------------------------------------------------
# Hölder exponent on run snapshots
# ---------------------------------------------------------------------------

class TestRunHolderFits:
    def test_hs_final_cusp_exponent(self, hs_run):
        fit = an.run_holder_exponent(hs_run)
        assert abs(fit.alpha_hat - 0.600) <= 0.03
        assert fit.r2 > 0.999
        assert fit.n_left >= 12 and fit.n_right >= 12

    def test_hs_seed_cusp_exponent(self, hs_run):
        # at the seed tau - t = 1, so the similarity window is physical
        fit = an.run_holder_exponent(hs_run, index=0)
        assert abs(fit.alpha_hat - 0.600) <= 0.03

    def test_burgers_final_cusp_exponent(self, burgers_run):
        fit = an.run_holder_exponent(burgers_run)
        assert abs(fit.alpha_hat - 1.0 / 3.0) <= 0.03

    def test_burgers_discriminated_from_main(self, burgers_run):
        # the pipeline must separate 1/3 from 3/5 by >= 5 standard errors
        fit = an.run_holder_exponent(burgers_run)
        assert (0.6 - fit.alpha_hat) / fit.stderr >= 5.0

    def test_ch_final_cusp_exponent(self, ch_run):
        fit = an.run_holder_exponent(ch_run)
        assert abs(fit.alpha_hat - 0.60) <= 0.05

    def test_starved_window_refused(self, hs_run):
        with pytest.raises(an.FitRefusedError, match="refused"):
            an.run_holder_exponent(hs_run, window_y=(1e-7, 3e-7))

    def test_window_outside_core_refused(self, hs_run):
        with pytest.raises(an.FitRefusedError, match="core"):
            an.run_holder_exponent(hs_run, window_y=(1.0, 1e12))


# ---------------------------------------------------------------------------
# Hölder seminorms and temporal rates
# ---------------------------------------------------------------------------

class TestSeminormRates:
    def test_small_grid_matches_hand_computation(self):
        x = np.linspace(0.0, 1.0, 5)
        u = x ** 2
        # Lipschitz seminorm of x^2 on the grid: steepest chord is the last
        expected = (1.0 - 0.75 ** 2) / 0.25
        got = an.holder_seminorm(x, u, 1.0, 0.0)
        assert got == pytest.approx(expected, rel=1e-14)

    def test_subsample_is_exact_on_a_cusp(self):
        # rank stratification keeps the closest pair, which attains the sup
        x, u = cusp_samples(0.6, n=300)
        full = an.holder_seminorm(x, u, 0.8, 0.0, n_sample=10 ** 6)
        sub = an.holder_seminorm(x, u, 0.8, 0.0, n_sample=32)
        assert sub == full

    def test_lipschitz_seminorm_tracks_gradient(self, hs_run):
        snap, mod = hs_run.snapshots[-1], hs_run.modulation[-1]
        semi = an.holder_seminorm(snap.x, snap.u, 1.0, mod.x_min)
        # bounded by sup |u_x| up to the fp cancellation of near-cusp chords
        assert 0.9 <= semi / abs(mod.g_min) <= 1.05

    def test_interval_restriction(self, hs_run):
        snap, mod = hs_run.snapshots[-1], hs_run.modulation[-1]
        near = an.holder_seminorm(snap.x, snap.u, 0.8, mod.x_min,
                                  omega=(-1.0, 1.0))
        far = an.holder_seminorm(snap.x, snap.u, 0.8, mod.x_min,
                                 omega=(5.0, 40.0))
        assert far < 0.05 * near

    def test_empty_interval_refused(self, hs_run):
        snap = hs_run.snapshots[-1]
        with pytest.raises(an.FitRefusedError, match="refused"):
            an.holder_seminorm(snap.x, snap.u, 0.8, 0.0, omega=(1e8, 2e8))

    @pytest.mark.parametrize("alpha,expected", [
        (0.7, 0.25),
        (0.8, 0.5),
        (1.0, 1.0),
    ])
    def test_hs_rate_exponents(self, hs_run, alpha, expected):
        fit = an.holder_rate(hs_run, alpha)
        assert fit.expected == pytest.approx(expected)
        assert abs(fit.exponent - expected) <= 0.1 * expected
        assert fit.r2 > 0.999

    @pytest.mark.parametrize("alpha", [0.6, 0.5])
    def test_nondivergent_orders_refused(self, hs_run, alpha):
        with pytest.raises(an.FitRefusedError, match="cusp exponent"):
            an.holder_rate(hs_run, alpha)

    def test_cusp_order_seminorm_stays_bounded(self, hs_run):
        # at alpha = 3/5 the seminorm is uniformly bounded through blow-up
        _, vals = an.seminorm_history(hs_run, 0.6)
        assert np.max(vals) <= 1.5 * vals[0]
        assert np.min(vals) >= 0.5 * vals[0]

    def test_default_t_star_matches_explicit(self, hs_run):
        explicit = an.fit_blowup_time(hs_run.seed.t, hs_run.seed.g_min).t_star
        a = an.holder_rate(hs_run, 0.8)
        b = an.holder_rate(hs_run, 0.8, t_star=explicit)
        assert a.exponent == pytest.approx(b.exponent, rel=1e-12)

    def test_stale_t_star_refused(self, hs_run):
        with pytest.raises(an.FitRefusedError, match="t_star"):
            an.holder_rate(hs_run, 0.8, t_star=hs_run.t0)

    def test_burgers_gradient_rate(self, burgers_run):
        # Burgers space/amplitude exponents give (3*alpha - 1)/2
        fit = an.holder_rate(burgers_run, 1.0)
        assert fit.expected == pytest.approx(1.0)
        assert abs(fit.exponent - 1.0) <= 0.1

    def test_ch_gradient_rate(self, ch_run):
        fit = an.holder_rate(ch_run, 1.0)
        assert abs(fit.exponent - 1.0) <= 0.1


# ---------------------------------------------------------------------------
# envelope audit
# ---------------------------------------------------------------------------

class TestEnvelopeAudit:
    @pytest.fixture()
    def seed_frame(self, hs_run):
        return to_self_similar(hs_run.snapshots[0], hs_run.modulation[0])

    @pytest.fixture()
    def late_frame(self, hs_run):
        return to_self_similar(hs_run.snapshots[-1], hs_run.modulation[-1])

    def test_seed_passes_every_envelope(self, seed_frame, main_table):
        audit = an.envelope_audit(seed_frame, main_table)
        assert audit.ok
        assert tuple(b.name for b in audit.bounds) == an.ENVELOPE_BOUND_NAMES
        for b in audit.bounds:
            assert b.ok, b

    def test_seed_margins_are_meaningful(self, seed_frame, main_table):
        audit = an.envelope_audit(seed_frame, main_table)
        # the seed is the profile itself, so the slope deviation is zero and
        # each tail margin equals the envelope evaluated at the worst y
        assert audit["envelope_tail"].margin > 0.0
        assert audit["origin_third"].margin > 0.9
        assert abs(audit.d3_origin - 256.0) < 0.1

    def test_late_time_origin_pin(self, late_frame, main_table):
        audit = an.envelope_audit(late_frame, main_table)
        assert 255.0 <= audit.d3_origin <= 257.0
        assert audit["origin_third"].ok
        assert audit["envelope_tail"].ok
        assert audit["sup_third"].ok and audit["sup_fourth"].ok

    def test_scaled_slope_fails_the_first_envelope(self, seed_frame,
                                                   main_table):
        bad = dataclasses.replace(seed_frame, Uy=1.5 * seed_frame.Uy)
        audit = an.envelope_audit(bad, main_table)
        first = audit.bounds[0]
        assert first.name == "envelope_core"
        assert not first.ok
        assert first.margin < -0.5
        assert not audit.ok

    def test_burgers_seed_passes(self, burgers_run, burgers_table):
        frame = to_self_similar(burgers_run.snapshots[0],
                                burgers_run.modulation[0])
        audit = an.envelope_audit(frame, burgers_table)
        assert audit.ok
        assert abs(audit.d3_origin - 4.0) < 0.1

    def test_family_mismatch_rejected(self, seed_frame, burgers_table):
        with pytest.raises(ValueError, match="family"):
            an.envelope_audit(seed_frame, burgers_table)

    def test_rescaled_table_rejected(self, seed_frame, main_table):
        with pytest.raises(ValueError, match="beta"):
            an.envelope_audit(seed_frame, rescale_beta(main_table, 2.0))

    def test_m_const_governs_the_curvature_envelope(self, seed_frame,
                                                    main_table):
        audit = an.envelope_audit(seed_frame, main_table, m_const=1.0)
        assert not audit["curvature_weighted"].ok
        assert audit["curvature_weighted"].margin < -1.0

    def test_margin_profiles_cover_the_audited_range(self, seed_frame,
                                                     main_table):
        audit = an.envelope_audit(seed_frame, main_table)
        for name in ("envelope_core", "envelope_tail", "curvature_weighted"):
            assert audit.profiles[name].shape == audit.y_used.shape

    def test_lookup_by_name(self, seed_frame, main_table):
        audit = an.envelope_audit(seed_frame, main_table)
        assert audit["origin_third"].name == "origin_third"
        with pytest.raises(KeyError):
            audit["no_such_bound"]

    def test_dict_form_serializes(self, seed_frame, main_table):
        audit = an.envelope_audit(seed_frame, main_table)
        text = json.dumps(audit.to_dict())
        assert "envelope_core" in text


# ---------------------------------------------------------------------------
# profile tail fits and the main-vs-Burgers comparison
# ---------------------------------------------------------------------------

class TestProfileComparison:
    def test_main_tail_exponent(self, main_table):
        fit = an.profile_tail_fit(main_table)
        assert abs(fit.alpha_hat - 0.6) <= 0.01

    def test_burgers_tail_exponent(self, burgers_table):
        fit = an.profile_tail_fit(burgers_table)
        assert abs(fit.alpha_hat - 1.0 / 3.0) <= 0.01

    def test_tail_exponents_well_separated(self, main_table, burgers_table):
        a = an.profile_tail_fit(main_table)
        b = an.profile_tail_fit(burgers_table)
        gap = a.alpha_hat - b.alpha_hat
        assert gap / math.hypot(a.stderr, b.stderr) >= 5.0

    def test_main_dominates_the_far_field(self, main_table, burgers_table):
        cmp_ = an.profile_comparison(main_table, burgers_table)
        assert math.isfinite(cmp_.dominance_from)
        assert cmp_.dominance_from < 200.0
        tail = cmp_.y >= cmp_.dominance_from
        assert np.all(np.abs(cmp_.u_main[tail]) > np.abs(cmp_.u_burgers[tail]))

    def test_midfield_belongs_to_burgers(self, main_table, burgers_table):
        # |V| > |U| before the tail exponents flip the ordering: the main
        # profile bends away from -2y much faster (cubic coefficient 128/3
        # against 2/3), so dominance is genuinely a far-field statement
        cmp_ = an.profile_comparison(main_table, burgers_table)
        k = int(np.argmin(np.abs(cmp_.y - 1.0)))
        assert abs(cmp_.u_main[k]) < abs(cmp_.u_burgers[k])

    def test_family_order_enforced(self, main_table, burgers_table):
        with pytest.raises(ValueError, match="main"):
            an.profile_comparison(burgers_table, burgers_table)
        with pytest.raises(ValueError, match="burgers"):
            an.profile_comparison(main_table, main_table)


# ---------------------------------------------------------------------------
# assembled reports
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hs_report(hs_run, main_table):
    return an.analyze_run(hs_run, table=main_table)


class TestAnalyzeRun:
    def test_headline_numbers(self, hs_report, hs_run):
        assert hs_report.equation == "hs"
        assert hs_report.t_star > hs_report.t_last == hs_run.t_final
        assert abs(hs_report.t_star) <= 1e-3
        assert abs(hs_report.alpha_hat - 0.6) <= 0.03
        # the nonlocal term gives the vertex a velocity, so the cusp drifts;
        # the report must carry the tracked location, not assume symmetry
        assert hs_report.x_star == hs_run.modulation[-1].x_min
        assert math.isfinite(hs_report.x_star)
        assert hs_report.riccati_error <= 1e-6

    def test_rate_exponent_table(self, hs_report):
        assert set(hs_report.rate_exponents) == {0.7, 0.8, 1.0}
        for alpha, exponent in hs_report.rate_exponents.items():
            expected = (5.0 * alpha - 3.0) / 2.0
            assert abs(exponent - expected) <= 0.1 * expected

    def test_envelope_summary(self, hs_report):
        assert set(hs_report.envelope_checks) == set(an.ENVELOPE_BOUND_NAMES)
        assert hs_report.envelope_checks["origin_third"]

    def test_consistency_chain(self, hs_report):
        # the fitted cusp exponent and the fitted temporal rates describe
        # one self-similar collapse: rate(alpha) = (5*alpha - 3)/2 evaluated
        # at the fitted alpha_hat must extrapolate to zero divergence
        predicted_boundary = (5.0 * hs_report.alpha_hat - 3.0) / 2.0
        assert abs(predicted_boundary) <= 0.1

    def test_blowup_time_invariant_enforced(self, hs_report):
        with pytest.raises(ValueError, match="snapshot"):
            dataclasses.replace(hs_report, t_star=hs_report.t_last - 1.0)

    def test_json_round_trip(self, hs_report, tmp_path):
        path = tmp_path / "report.json"
        hs_report.to_json(path)
        data = json.loads(path.read_text())
        assert data["equation"] == "hs"
        assert set(data["rate_exponents"]) == {"0.7", "0.8", "1.0"}
        assert data["time_fit"]["n_used"] > 20
        assert data["audit"]["ok"] in (True, False)

    def test_fit_csv(self, hs_report, tmp_path):
        path = an.write_fit_csv(hs_report.holder, tmp_path / "fit.csv")
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "side,log_r,log_osc,residual"
        n = hs_report.holder.n_left + hs_report.holder.n_right
        assert len(lines) == n + 1
        row = [float(v) for v in lines[1].split(",")]
        assert row[0] in (-1.0, 1.0) and all(map(math.isfinite, row))

    def test_burgers_report(self, burgers_run, burgers_table):
        report = an.analyze_run(burgers_run, table=burgers_table)
        assert abs(report.alpha_hat - 1.0 / 3.0) <= 0.03
        assert abs(report.t_star) <= 1e-3
        assert abs(report.time_fit.rate - 1.0) <= 1e-2
        assert abs(report.rate_exponents[1.0] - 1.0) <= 0.1
