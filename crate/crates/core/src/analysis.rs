//! Closed-form thresholds, crossing level and stationary moments.
//!
//! Everything here is a pure function of a [`Scenario`]. Regime boundaries
//! are compared on raw doubles with no tolerance band.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{critical_n, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub alpha: f64,
    /// `R0 = alpha c2 N / c1`.
    pub r0: f64,
    /// `R0s = R0 - alpha^2 sigma^2 N^2 / (2 c1)`.
    pub r0s: f64,
    /// Deterministic free-flow bound.
    pub n_c: f64,
    /// Stochastic bound `c2 N_max / (sigma^2 + c2)`.
    pub n_s: f64,
    /// Small-noise estimate `c1 sigma^2 / (2 c2 (c1 + c2))` of the bound shift.
    pub delta_n_c: f64,
    pub n_c_prime_approx: f64,
    /// `min(N_c, N_s)`.
    pub n_bound: f64,
    /// `min(N_c', N_s)`.
    pub n_bound_refined: f64,
    /// Noise level where `R0s = 1`; absent when `alpha c2 N <= c1`.
    pub sigma_tilde: Option<f64>,
    /// Crossing level; present only when `R0s > 1` and `sigma > 0`.
    pub xi: Option<f64>,
    /// `c2 / (alpha N)`.
    pub sigma_sq_freeflow_cap: f64,
    /// `c2^2 / (2 c1)`.
    pub sigma_sq_decay_cap: f64,
}

pub fn r0(scenario: &Scenario) -> f64 {
    let p = &scenario.params;
    scenario.alpha() * p.c2 * scenario.n_total / p.c1
}

pub fn r0s(scenario: &Scenario) -> f64 {
    let p = &scenario.params;
    let a = scenario.alpha();
    let n = scenario.n_total;
    r0(scenario) - a * a * p.sigma * p.sigma * n * n / (2.0 * p.c1)
}

pub fn thresholds(scenario: &Scenario) -> Result<ThresholdSet> {
    scenario.validate()?;
    let p = &scenario.params;
    let alpha = scenario.alpha();
    let s2 = p.sigma * p.sigma;
    let n_c = critical_n(p);
    let n_s = p.c2 * p.n_max / (s2 + p.c2);
    let delta_n_c = p.c1 * s2 / (2.0 * p.c2 * (p.c1 + p.c2));
    let n_c_prime_approx = n_c + delta_n_c;
    let r0s = r0s(scenario);
    Ok(ThresholdSet {
        alpha,
        r0: r0(scenario),
        r0s,
        n_c,
        n_s,
        delta_n_c,
        n_c_prime_approx,
        n_bound: n_c.min(n_s),
        n_bound_refined: n_c_prime_approx.min(n_s),
        sigma_tilde: sigma_tilde(scenario).ok(),
        xi: xi(scenario).ok(),
        sigma_sq_freeflow_cap: p.c2 / (alpha * scenario.n_total),
        sigma_sq_decay_cap: p.c2 * p.c2 / (2.0 * p.c1),
    })
}

/// Level crossed infinitely often in the persistence regime: the root of
/// [`log_drift`] inside `(0, N)`.
///
/// Evaluated as `N - 2 c1 / (alpha (c2 + sqrt(c2^2 - 2 sigma^2 c1)))`, the
/// rationalised form of the usual quadratic-root expression, which avoids
/// the cancellation at small sigma.
pub fn xi(scenario: &Scenario) -> Result<f64> {
    let p = &scenario.params;
    let r0s = r0s(scenario);
    if !(r0s > 1.0) {
        return Err(Error::NotPersistent { r0s });
    }
    if p.sigma == 0.0 {
        return Err(Error::ZeroNoise);
    }
    // R0s > 1 puts a sign change of f inside (0, N), so the discriminant is positive.
    let disc = p.c2 * p.c2 - 2.0 * p.sigma * p.sigma * p.c1;
    Ok(scenario.n_total - 2.0 * p.c1 / (scenario.alpha() * (p.c2 + disc.sqrt())))
}

/// The same root written exactly as the textbook quadratic formula. Used as an
/// independent route in tests.
pub fn xi_quadratic_form(scenario: &Scenario) -> f64 {
    let p = &scenario.params;
    let a = scenario.alpha();
    let a2s2 = a * a * p.sigma * p.sigma;
    ((a * a * p.c2 * p.c2 - 2.0 * a2s2 * p.c1).sqrt() - (a * p.c2 - a2s2 * scenario.n_total)) / a2s2
}

/// `lim_{sigma -> 0+} xi = N (1 - c1 / (alpha c2 N))`, i.e. the deterministic attractor.
pub fn xi_zero_noise_limit(scenario: &Scenario) -> f64 {
    let p = &scenario.params;
    let n = scenario.n_total;
    n * (1.0 - p.c1 / (scenario.alpha() * p.c2 * n))
}

/// `lim_{sigma -> sigma_tilde-} xi`: `N (R0 - 2)/(R0 - 1)` for `R0 > 2`, else 0.
pub fn xi_upper_noise_limit(scenario: &Scenario) -> Result<f64> {
    let r0 = r0(scenario);
    if !(r0 > 1.0) {
        return Err(Error::NoNoiseRange {
            excess: scenario.growth_rate(),
        });
    }
    Ok(if r0 > 2.0 {
        scenario.n_total * (r0 - 2.0) / (r0 - 1.0)
    } else {
        0.0
    })
}

/// Noise intensity at which `R0s = 1`: `sqrt(2 (alpha c2 N - c1)) / (alpha N)`.
pub fn sigma_tilde(scenario: &Scenario) -> Result<f64> {
    let excess = scenario.growth_rate();
    if !(excess > 0.0) {
        return Err(Error::NoNoiseRange { excess });
    }
    Ok((2.0 * excess).sqrt() / (scenario.alpha() * scenario.n_total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryMoments {
    pub mu: f64,
    pub gamma: f64,
    /// Deterministic attractor, the upper bound for `mu`.
    pub n1_g: f64,
}

/// Mean and variance of the stationary law in the persistence regime.
pub fn stationary_moments(scenario: &Scenario) -> Result<StationaryMoments> {
    let p = &scenario.params;
    let r0s = r0s(scenario);
    if !(r0s > 1.0) {
        return Err(Error::NotPersistent { r0s });
    }
    let a = scenario.alpha();
    let n = scenario.n_total;
    let s2 = p.sigma * p.sigma;
    let excess = a * p.c2 * n - p.c1;
    let denominator = 2.0 * p.c2 * (a * p.c2 - a * a * s2 * n) + a * s2 * excess;
    if !(denominator > 0.0) {
        return Err(Error::MomentsOutOfValidity { denominator });
    }
    let mu = 2.0 * p.c2 * (r0s - 1.0) * p.c1 / denominator;
    let n1_g = excess / (a * p.c2);
    Ok(StationaryMoments {
        mu,
        gamma: mu * n1_g - mu * mu,
        n1_g,
    })
}

/// Drift of `log n1` under the Itô formula:
/// `f(x) = c2 alpha N - c1 - c2 alpha x - sigma^2 alpha^2 (N - x)^2 / 2`.
pub fn log_drift(scenario: &Scenario, x: f64) -> f64 {
    let p = &scenario.params;
    let a = scenario.alpha();
    let n = scenario.n_total;
    let gap = n - x;
    p.c2 * a * n - p.c1 - p.c2 * a * x - 0.5 * p.sigma * p.sigma * a * a * gap * gap
}

/// Maximiser of [`log_drift`] on `[0, N]`: `N - c2 / (sigma^2 alpha)` clipped.
pub fn log_drift_argmax(scenario: &Scenario) -> f64 {
    let p = &scenario.params;
    if p.sigma == 0.0 {
        return 0.0;
    }
    let n = scenario.n_total;
    (n - p.c2 / (p.sigma * p.sigma * scenario.alpha())).clamp(0.0, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    FreeFlowStable,
    CongestionPersistent,
    NonphysicalDecay,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub thresholds: ThresholdSet,
    pub moments: Option<StationaryMoments>,
    pub regime: Regime,
    pub notes: Vec<String>,
}

pub fn classify_regime(scenario: &Scenario) -> Result<RegimeReport> {
    let th = thresholds(scenario)?;
    let p = &scenario.params;
    let s2 = p.sigma * p.sigma;
    let mut notes = Vec::new();

    let free_flow = th.r0s < 1.0 && s2 < th.sigma_sq_freeflow_cap;
    let persistent = th.r0s > 1.0;
    let decay = s2 > th.sigma_sq_freeflow_cap.max(th.sigma_sq_decay_cap);

    if free_flow {
        notes.push(format!(
            "free-flow stability: R0s = {} < 1 and sigma^2 = {s2} < c2/(alpha N) = {}; log-decay rate <= {}",
            th.r0s,
            th.sigma_sq_freeflow_cap,
            (th.r0s - 1.0) * p.c1
        ));
    }
    if persistent {
        notes.push(format!("persistence: R0s = {} > 1", th.r0s));
    }
    if decay {
        notes.push(format!(
            "nonphysical decay: sigma^2 = {s2} > max(c2/(alpha N) = {}, c2^2/(2 c1) = {}); log-decay rate <= {}",
            th.sigma_sq_freeflow_cap,
            th.sigma_sq_decay_cap,
            -p.c1 + p.c2 * p.c2 / (2.0 * s2)
        ));
    }

    // Validity of the free-flow bound and the concentration cutoff.
    if s2 <= p.c2 * p.c2 / p.c1 {
        notes.push(format!("N_c = {} < N_s = {} holds", th.n_c, th.n_s));
    } else {
        notes.push(format!(
            "N_c < N_s violated: sigma^2 = {s2} > c2^2/c1 = {}",
            p.c2 * p.c2 / p.c1
        ));
    }
    if let Some(cut) = scenario.n_cut {
        if cut < th.n_s {
            notes.push(format!("N_cut = {cut} < N_s = {} holds", th.n_s));
        } else {
            notes.push(format!("N_cut = {cut} >= N_s = {} violated", th.n_s));
        }
    }

    let mut moments = None;
    let regime = match (free_flow, persistent, decay) {
        (true, false, false) => Regime::FreeFlowStable,
        (false, true, false) => match stationary_moments(scenario) {
            Ok(m) => {
                moments = Some(m);
                Regime::CongestionPersistent
            }
            Err(e) => {
                notes.push(format!("persistence without usable moments: {e}"));
                Regime::Indeterminate
            }
        },
        (false, false, true) => Regime::NonphysicalDecay,
        (false, false, false) => {
            notes.push("no theorem hypothesis holds".into());
            Regime::Indeterminate
        }
        _ => {
            notes.push("conflicting theorem hypotheses".into());
            Regime::Indeterminate
        }
    };

    Ok(RegimeReport {
        thresholds: th,
        moments,
        regime,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scen(n: f64, sigma: f64) -> Scenario {
        Scenario::new(ModelParams::default().with_sigma(sigma), n).unwrap()
    }

    #[test]
    fn reference_point() {
        let s = scen(150.0, 1.0);
        let th = thresholds(&s).unwrap();
        assert_eq!(th.r0s, 4.5);
        assert_relative_eq!(th.r0, 9.0, max_relative = 1e-15);
        assert!((th.xi.unwrap() - 132.2876).abs() < 1e-4);
        assert_relative_eq!(th.n_s, 150.0, max_relative = 1e-15);
        assert_relative_eq!(th.delta_n_c, 1.0 / 24.0, max_relative = 1e-14);
        assert_relative_eq!(th.sigma_tilde.unwrap(), 4.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_noise_degenerates() {
        for n in [20.0, 50.0, 120.0] {
            let th = thresholds(&scen(n, 0.0)).unwrap();
            assert_eq!(th.r0s, th.r0);
            assert_eq!(th.n_s, 200.0);
            assert_eq!(th.delta_n_c, 0.0);
            assert!(th.xi.is_none());
        }
        assert!(matches!(xi(&scen(150.0, 0.0)), Err(Error::ZeroNoise)));
    }

    #[test]
    fn xi_needs_persistence() {
        assert!(matches!(xi(&scen(40.0, 0.5)), Err(Error::NotPersistent { .. })));
        assert!(matches!(
            stationary_moments(&scen(40.0, 0.5)),
            Err(Error::NotPersistent { .. })
        ));
        assert!(matches!(sigma_tilde(&scen(40.0, 0.5)), Err(Error::NoNoiseRange { .. })));
    }

    #[test]
    fn xi_forms_agree() {
        let s = scen(150.0, 1.0);
        assert_relative_eq!(xi(&s).unwrap(), xi_quadratic_form(&s), max_relative = 1e-12);
    }

    #[test]
    fn xi_limits() {
        let s = scen(150.0, 1.0);
        assert_relative_eq!(xi_zero_noise_limit(&s), 400.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(xi_upper_noise_limit(&s).unwrap(), 131.25, max_relative = 1e-14);
        // direct evaluation at sigma^2 = 16/9, where R0s = 1
        let at_tilde = scen(150.0, 4.0 / 3.0);
        assert_relative_eq!(r0s(&at_tilde), 1.0, max_relative = 1e-12);
        let p = at_tilde.params;
        let direct = at_tilde.n_total
            - 2.0 * p.c1 / (at_tilde.alpha() * (p.c2 + (p.c2 * p.c2 - 2.0 * p.sigma * p.sigma * p.c1).sqrt()));
        assert_relative_eq!(direct, 131.25, max_relative = 1e-12);
    }

    #[test]
    fn moments_reference() {
        let m = stationary_moments(&scen(150.0, 1.0)).unwrap();
        assert_relative_eq!(m.mu, 131.25, max_relative = 1e-13);
        assert_relative_eq!(m.gamma, 273.4375, max_relative = 1e-10);
        assert_relative_eq!(m.n1_g, 400.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn moments_limits() {
        let m = stationary_moments(&scen(150.0, 1e-7)).unwrap();
        assert!((m.mu - 400.0 / 3.0).abs() < 1e-9);
        assert!(m.gamma.abs() < 1e-6);
        // near saturation R0s > 1 needs sigma to shrink with N_max - N
        let m = stationary_moments(&scen(199.9, 0.01)).unwrap();
        assert!((m.mu - 200.0).abs() < 0.2, "{}", m.mu);
        assert!(m.gamma < 1.0, "{}", m.gamma);
    }

    #[test]
    fn log_drift_values() {
        let s = scen(150.0, 1.0);
        assert!(log_drift(&s, xi(&s).unwrap()).abs() < 1e-9);
        assert_relative_eq!(log_drift(&s, 150.0), -1.0, max_relative = 1e-14);
        assert_relative_eq!(log_drift(&s, 0.0), 3.5, max_relative = 1e-13);
    }

    #[test]
    fn log_drift_maximum() {
        // decay regime, argmax inside (0, N)
        let s = scen(150.0, 3.0);
        let xh = log_drift_argmax(&s);
        assert!(xh > 0.0 && xh < 150.0);
        let p = s.params;
        assert_relative_eq!(
            log_drift(&s, xh),
            -p.c1 + p.c2 * p.c2 / (2.0 * p.sigma * p.sigma),
            max_relative = 1e-12
        );
        for i in 0..=300 {
            assert!(log_drift(&s, i as f64 * 0.5) <= log_drift(&s, xh) + 1e-12);
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_regime(&scen(150.0, 1.0)).unwrap().regime, Regime::CongestionPersistent);
        let ff = classify_regime(&scen(40.0, 0.5)).unwrap();
        assert_eq!(ff.regime, Regime::FreeFlowStable);
        assert!(ff.moments.is_none());
        assert_relative_eq!(ff.thresholds.r0s, 0.7421875, max_relative = 1e-14);
        assert_eq!(classify_regime(&scen(150.0, 3.0)).unwrap().regime, Regime::NonphysicalDecay);
        // deterministic picture
        assert_eq!(classify_regime(&scen(30.0, 0.0)).unwrap().regime, Regime::FreeFlowStable);
        let cp = classify_regime(&scen(100.0, 0.0)).unwrap();
        assert_eq!(cp.regime, Regime::CongestionPersistent);
        assert!(cp.moments.is_some());
    }

    #[test]
    fn classification_notes_validity_checks() {
        let s = scen(100.0, 1.0).with_n_cut(150.0).unwrap();
        let r = classify_regime(&s).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("N_c = 50 < N_s")));
        assert!(r.notes.iter().any(|n| n.contains("N_cut = 150 >= N_s") && n.contains("violated")));
    }

    #[test]
    fn sigma_tilde_hits_unit_r0s() {
        for n in [60.0, 90.0, 150.0, 190.0] {
            let st = sigma_tilde(&scen(n, 1.0)).unwrap();
            assert!((r0s(&scen(n, st)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_sigma() {
        for n in [70.0, 100.0, 150.0] {
            let st = sigma_tilde(&scen(n, 1.0)).unwrap();
            let mut prev_xi = f64::INFINITY;
            let mut prev_mu = f64::INFINITY;
            for i in 1..=50 {
                let s = scen(n, st * i as f64 / 51.0);
                let x = xi(&s).unwrap();
                assert!(x < prev_xi);
                prev_xi = x;
                if let Ok(m) = stationary_moments(&s) {
                    assert!(m.mu < prev_mu, "N={n} i={i}");
                    prev_mu = m.mu;
                }
            }
        }
    }

    #[test]
    fn xi_limit_consistency() {
        // R0 = 2 exactly (N = 80) is the branch point where the approach is
        // only square-root fast, so it is left out.
        for n in [55.0, 60.0, 75.0, 85.0, 100.0, 150.0, 180.0] {
            let s = scen(n, 1.0);
            let th = thresholds(&s).unwrap();
            let lo = xi(&scen(n, 1e-6)).unwrap();
            assert!((lo - s.n1_attractor()).abs() < 1e-3);
            let st = th.sigma_tilde.unwrap();
            let hi = xi(&scen(n, st * (1.0 - 1e-6))).unwrap();
            let expected = xi_upper_noise_limit(&s).unwrap();
            assert!((hi - expected).abs() < 1e-2, "N={n}: {hi} vs {expected} (R0 = {})", th.r0);
        }
    }

    fn persistent_scenario() -> impl Strategy<Value = Scenario> {
        (0.2f64..6.0, 0.2f64..6.0, 10.0f64..400.0, 0.01f64..0.99, 0.0f64..1.0).prop_filter_map(
            "R0s > 1",
            |(c1, c2, n_max, frac, sfrac)| {
                let p = ModelParams { c1, c2, n_max, ..Default::default() };
                let s = Scenario::new(p, frac * n_max).ok()?;
                let st = sigma_tilde(&s).ok()?;
                let s = Scenario::new(p.with_sigma(sfrac * st * 0.999 + 1e-9), frac * n_max).ok()?;
                (r0s(&s) > 1.0).then_some(s)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn log_drift_vanishes_at_xi(s in persistent_scenario()) {
            let x = xi(&s).unwrap();
            prop_assert!(x > 0.0 && x < s.n_total);
            prop_assert!(log_drift(&s, x).abs() < 1e-9);
            let f0 = log_drift(&s, 0.0);
            prop_assert!((f0 - (r0s(&s) - 1.0) * s.params.c1).abs() < 1e-9 * (1.0 + f0.abs()));
        }

        #[test]
        fn moment_identity_and_bounds(s in persistent_scenario()) {
            if let Ok(m) = stationary_moments(&s) {
                let lhs = m.gamma + m.mu * m.mu;
                let rhs = m.mu * m.n1_g;
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300));
                prop_assert!(m.mu >= 0.0 && m.mu <= m.n1_g * (1.0 + 1e-12));
                prop_assert!(m.gamma >= -1e-9 * m.n1_g * m.n1_g);
                prop_assert!(m.gamma <= m.n1_g * m.n1_g / 4.0 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn r0s_definition(s in persistent_scenario()) {
            let th = thresholds(&s).unwrap();
            let p = s.params;
            let expect = th.r0 - th.alpha.powi(2) * p.sigma.powi(2) * s.n_total.powi(2) / (2.0 * p.c1);
            prop_assert!((th.r0s - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            let st = th.sigma_tilde.unwrap();
            prop_assert_eq!(th.r0s > 1.0, p.sigma < st);
        }
    }
}
