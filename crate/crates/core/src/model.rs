//! Geometry, damping profile, cutoff and run configuration.
//!
//! The damping is even in `x`, invariant in `y`, zero on the strip `|x| < a`,
//! equal to `(|x| - a)^beta` on `a < |x| < a + sigma`, and bounded below by a
//! positive level on `a + sigma < |x| < b`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{smooth_step, smooth_step_derivative};

/// A damping coefficient on `(-b, b)`, depending on `x` only.
pub trait Damping: Sync {
    /// Half-width `b` of the domain.
    fn half_width(&self) -> f64;

    /// `W(x)` for `|x| <= b`; callers are responsible for the range.
    fn value_unchecked(&self, x: f64) -> f64;

    fn value(&self, x: f64) -> Result<f64> {
        let b = self.half_width();
        if x.abs() > b * (1.0 + 1e-14) {
            return Err(Error::Domain(format!("|x| = {} exceeds b = {}", x.abs(), b)));
        }
        Ok(self.value_unchecked(x))
    }
}

/// How `c(|x|)` continues the damping on `a + sigma < |x| < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Join {
    /// `c = sigma^beta`, continuous at `a + sigma`.
    #[default]
    ConstantLevel,
    /// Smooth blend from `(|x| - a)^beta` to the constant `(2 sigma)^beta`,
    /// reached at `a + 2 sigma`.
    SmoothBlend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingProfile {
    pub beta: f64,
    pub a: f64,
    pub sigma: f64,
    pub b: f64,
    pub join: Join,
}

impl DampingProfile {
    pub fn new(beta: f64, a: f64, sigma: f64, b: f64, join: Join) -> Result<Self> {
        let problems = Self::violations(beta, a, sigma, b);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(Self { beta, a, sigma, b, join })
    }

    fn violations(beta: f64, a: f64, sigma: f64, b: f64) -> Vec<String> {
        let mut v = Vec::new();
        if !(beta >= 0.0 && beta.is_finite()) {
            v.push(format!("beta = {beta} must be a finite number >= 0"));
        }
        if !(a > 0.0) {
            v.push(format!("a = {a} must be > 0"));
        }
        if !(sigma > 0.0) {
            v.push(format!("sigma = {sigma} must be > 0"));
        }
        if !(a + sigma < b) {
            v.push(format!(
                "damping profile requires a + sigma < b (a + sigma = {}, b = {b})",
                a + sigma
            ));
        }
        v
    }

    /// `(x - a)_+^beta` with the convention `0^0 = 1` only for `x > a`.
    pub fn power_part(&self, x: f64) -> f64 {
        let d = x.abs() - self.a;
        if d <= 0.0 {
            0.0
        } else if self.beta == 0.0 {
            1.0
        } else {
            d.powf(self.beta)
        }
    }

    /// Lower bound of `W` on `a + sigma < |x| < b`.
    pub fn c_floor(&self) -> f64 {
        self.sigma.powf(self.beta)
    }

    /// The level `c` reaches far from the strip.
    pub fn c_level(&self) -> f64 {
        match self.join {
            Join::ConstantLevel => self.sigma.powf(self.beta),
            Join::SmoothBlend => (2.0 * self.sigma).powf(self.beta),
        }
    }
}

impl Damping for DampingProfile {
    fn half_width(&self) -> f64 {
        self.b
    }

    fn value_unchecked(&self, x: f64) -> f64 {
        let r = x.abs();
        if r < self.a {
            0.0
        } else if r < self.a + self.sigma {
            self.power_part(r)
        } else {
            match self.join {
                Join::ConstantLevel => self.c_level(),
                Join::SmoothBlend => {
                    let s = smooth_step((r - self.a - self.sigma) / self.sigma);
                    (1.0 - s) * self.power_part(r) + s * self.c_level()
                }
            }
        }
    }
}

/// `W = level` everywhere (the geometric-control comparison case; `level = 0`
/// is the undamped control).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDamping {
    pub level: f64,
    pub b: f64,
}

impl Damping for UniformDamping {
    fn half_width(&self) -> f64 {
        self.b
    }

    fn value_unchecked(&self, _x: f64) -> f64 {
        self.level
    }
}

/// Smooth cutoff: 1 below `b - 2 delta`, 0 above `b - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub delta: f64,
    pub b: f64,
}

impl Cutoff {
    pub fn new(profile: &DampingProfile, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Config(vec![format!("delta = {delta} must be > 0")]));
        }
        if !(profile.a + profile.sigma < profile.b - 2.0 * delta) {
            return Err(Error::Config(vec![format!(
                "cutoff requires a + sigma < b - 2 delta (a + sigma = {}, b - 2 delta = {})",
                profile.a + profile.sigma,
                profile.b - 2.0 * delta
            )]));
        }
        Ok(Self { delta, b: profile.b })
    }

    fn phase(&self, x: f64) -> f64 {
        (x - (self.b - 2.0 * self.delta)) / self.delta
    }

    pub fn value(&self, x: f64) -> f64 {
        1.0 - smooth_step(self.phase(x))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -smooth_step_derivative(self.phase(x)) / self.delta
    }

    /// `max |phi'|`, located on a fine sampling of the transition.
    pub fn max_slope(&self) -> f64 {
        let n = 4001;
        (0..n)
            .map(|k| {
                let x = self.b - 2.0 * self.delta + self.delta * k as f64 / (n - 1) as f64;
                self.derivative(x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `(x, phi(x))` samples across `[b - 2 delta, b - delta]`.
    pub fn transition(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let x = self.b - 2.0 * self.delta + self.delta * k as f64 / (n.max(2) - 1) as f64;
                (x, self.value(x))
            })
            .collect()
    }
}

/// `h = sqrt(b / (2 pi m))`, so that `b / (2 pi h^2) = m`.
pub fn select_h(m: u64, b: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("transverse index m must be >= 1".into()));
    }
    if !(b > 0.0) {
        return Err(Error::Domain(format!("b = {b} must be > 0")));
    }
    Ok((b / (2.0 * std::f64::consts::PI * m as f64)).sqrt())
}

/// Transverse index for a given `h` (inverse of [`select_h`]).
pub fn transverse_index(h: f64, b: f64) -> f64 {
    b / (2.0 * std::f64::consts::PI * h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `u(0) = 0`; odd extension, integer `l`.
    Dirichlet,
    /// `u'(0) = 0`; even extension, half-integer `l`.
    Neumann,
}

impl BoundaryCondition {
    /// Check the parity rule tying `l` to the boundary condition.
    pub fn check_index(self, l: f64) -> Result<()> {
        let twice = 2.0 * l;
        let ok = (twice - twice.round()).abs() < 1e-12
            && match self {
                BoundaryCondition::Dirichlet => (l - l.round()).abs() < 1e-12,
                BoundaryCondition::Neumann => ((l + 0.5) - (l + 0.5).round()).abs() < 1e-12,
            };
        if ok && l != 0.0 {
            Ok(())
        } else {
            Err(Error::Config(vec![match self {
                BoundaryCondition::Dirichlet => format!("Dirichlet branch needs a nonzero integer l, got {l}"),
                BoundaryCondition::Neumann => format!("Neumann branch needs l + 1/2 integer, got {l}"),
            }]))
        }
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Truncation length of the half-line problem; `None` picks the default for `beta`.
    pub cap_length: Option<f64>,
    /// Grid intervals of the half-line solver.
    pub cap_points: usize,
    /// Step in the rescaled variable used when sampling quasimodes.
    pub quasimode_step: f64,
    /// Grid intervals for the resolvent scan on `(-b, b)`.
    pub resolvent_points: usize,
    /// Grid intervals for time evolution on `(-b, b)`.
    pub evolve_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cap_length: None,
            cap_points: 8000,
            quasimode_step: 5e-3,
            resolvent_points: 4000,
            evolve_points: 1200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton: f64,
    pub glue: f64,
    pub tail: f64,
    pub energy_identity: f64,
    pub self_convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: 1e-12,
            glue: 1e-8,
            tail: 1e-10,
            energy_identity: 1e-7,
            self_convergence: 1e-8,
        }
    }
}

/// Parameters of the real-axis resolvent scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub q_count: usize,
    /// Transverse candidates on each side of `b q / 2 pi`.
    pub m_window: u64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self {
            q_min: 3.0e5,
            q_max: 1.0e7,
            q_count: 7,
            m_window: 3,
        }
    }
}

/// Parameters of the time-domain runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub horizon: f64,
    pub stride: usize,
    /// Number of quasimodes evolved by the decay-rate check.
    pub quasimodes: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 5e-3,
            horizon: 20.0,
            stride: 10,
            quasimodes: 1,
        }
    }
}

/// Everything a pipeline run needs; parsed from a TOML key-value file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub beta: f64,
    pub a: f64,
    pub sigma: f64,
    pub b: f64,
    pub delta: f64,
    #[serde(default)]
    pub join: Join,
    pub bc: BoundaryCondition,
    pub l: f64,
    pub m_list: Vec<u64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    /// Report every violated invariant at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = DampingProfile::violations(self.beta, self.a, self.sigma, self.b);
        if !(self.delta > 0.0) {
            v.push(format!("delta = {} must be > 0", self.delta));
        } else if !(self.a + self.sigma < self.b - 2.0 * self.delta) {
            v.push(format!(
                "cutoff requires a + sigma < b - 2 delta (a + sigma = {}, b - 2 delta = {})",
                self.a + self.sigma,
                self.b - 2.0 * self.delta
            ));
        }
        if let Err(Error::Config(mut e)) = self.bc.check_index(self.l) {
            v.append(&mut e);
        }
        if self.m_list.is_empty() {
            v.push("m_list must not be empty".into());
        }
        if self.m_list.contains(&0) {
            v.push("every m in m_list must be >= 1".into());
        }
        if self.grid.cap_points < 1000 {
            v.push(format!("grid.cap_points = {} must be >= 1000", self.grid.cap_points));
        }
        if !(self.grid.quasimode_step > 0.0) {
            v.push("grid.quasimode_step must be > 0".into());
        }
        if !(self.resolvent.q_min > 0.0 && self.resolvent.q_max > self.resolvent.q_min) {
            v.push("resolvent needs 0 < q_min < q_max".into());
        }
        if !(self.evolve.dt > 0.0 && self.evolve.horizon > self.evolve.dt) {
            v.push("evolve needs 0 < dt < horizon".into());
        }
        if self.evolve.quasimodes == 0 {
            v.push("evolve.quasimodes must be >= 1".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn profile(&self) -> Result<DampingProfile> {
        DampingProfile::new(self.beta, self.a, self.sigma, self.b, self.join)
    }

    pub fn cutoff(&self) -> Result<Cutoff> {
        Cutoff::new(&self.profile()?, self.delta)
    }

    /// `h` for every configured transverse index, in `m_list` order.
    pub fn h_values(&self) -> Result<Vec<f64>> {
        self.m_list.iter().map(|&m| select_h(m, self.b)).collect()
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            a: 1.0,
            sigma: 0.5,
            b: 2.0,
            delta: 0.1,
            join: Join::ConstantLevel,
            bc: BoundaryCondition::Dirichlet,
            l: 1.0,
            m_list: vec![80, 160, 320, 640, 1280, 2560],
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            resolvent: ResolventConfig::default(),
            evolve: EvolveConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(beta: f64, join: Join) -> DampingProfile {
        DampingProfile::new(beta, 1.0, 0.5, 2.0, join).unwrap()
    }

    #[test]
    fn damping_values() {
        let p = profile(2.0, Join::ConstantLevel);
        assert_eq!(p.value(0.5).unwrap(), 0.0);
        assert!((p.value(1.25).unwrap() - 0.0625).abs() < 1e-15);
        assert!((p.value(-1.25).unwrap() - 0.0625).abs() < 1e-15);
        assert!((p.value(1.9).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(p.value(2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_zero_is_indicator() {
        let p = profile(0.0, Join::ConstantLevel);
        assert_eq!(p.value(0.99).unwrap(), 0.0);
        assert_eq!(p.value(1.01).unwrap(), 1.0);
        assert_eq!(p.value(1.8).unwrap(), 1.0);
    }

    #[test]
    fn smooth_blend_reaches_level() {
        let p = profile(2.0, Join::SmoothBlend);
        assert!((p.value(1.999).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.value(1.5).unwrap() - 0.25).abs() < 1e-12);
        let mut prev = 0.0;
        for k in 0..=1000 {
            let x = 1.0 + k as f64 * 1e-3;
            let w = p.value(x).unwrap();
            assert!(w + 1e-14 >= prev, "not monotone at {x}");
            prev = w;
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        let err = DampingProfile::new(1.0, 1.0, 1.0, 2.0, Join::ConstantLevel).unwrap_err();
        assert!(err.to_string().contains("a + sigma < b"));
    }

    #[test]
    fn cutoff_plateaus_and_monotone() {
        let p = profile(1.0, Join::ConstantLevel);
        let c = Cutoff::new(&p, 0.1).unwrap();
        assert_eq!(c.value(2.0 - 0.3), 1.0);
        assert_eq!(c.value(2.0 - 0.05), 0.0);
        let mid = c.value(2.0 - 0.15);
        assert!(mid > 0.0 && mid < 1.0);
        let tr = c.transition(200);
        assert!(tr.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(tr[20..180].windows(2).all(|w| w[1].1 < w[0].1));
        assert!(c.max_slope().is_finite() && c.max_slope() > 1.0 / 0.1);
        assert!(Cutoff::new(&p, 0.3).is_err());
    }

    #[test]
    fn select_h_examples() {
        assert!((select_h(100, 1.0).unwrap() - 0.039_894_228).abs() < 1e-8);
        assert!((select_h(400, 1.0).unwrap() - 0.019_947_114).abs() < 1e-8);
        assert!((select_h(1, 2.0 * std::f64::consts::PI).unwrap() - 1.0).abs() < 1e-15);
        assert!(select_h(0, 1.0).is_err());
    }

    #[test]
    fn boundary_condition_parity() {
        assert!(BoundaryCondition::Dirichlet.check_index(2.0).is_ok());
        assert!(BoundaryCondition::Dirichlet.check_index(1.5).is_err());
        assert!(BoundaryCondition::Neumann.check_index(0.5).is_ok());
        assert!(BoundaryCondition::Neumann.check_index(1.0).is_err());
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);

        let bad = "beta = 1.0\na = 1.0\nsigma = 1.5\nb = 2.0\ndelta = 0.1\nbc = \"dirichlet\"\nl = 1.5\nm_list = []\n";
        match RunConfig::from_toml_str(bad) {
            Err(Error::Config(v)) => {
                assert!(v.iter().any(|s| s.contains("a + sigma < b")));
                assert!(v.iter().any(|s| s.contains("Dirichlet")));
                assert!(v.iter().any(|s| s.contains("m_list")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn damping_is_even_and_floored(x in 0.0f64..2.0, beta in 0.0f64..4.0, smooth in any::<bool>()) {
            let join = if smooth { Join::SmoothBlend } else { Join::ConstantLevel };
            let p = profile(beta, join);
            prop_assert_eq!(p.value(x).unwrap(), p.value(-x).unwrap());
            if x > 1.5 {
                prop_assert!(p.value(x).unwrap() >= p.c_floor() * (1.0 - 1e-12));
            }
        }

        #[test]
        fn damping_nondecreasing_on_power_branch(x in 1.0f64..1.5, dx in 0.0f64..0.5, beta in 0.0f64..4.0) {
            let p = profile(beta, Join::ConstantLevel);
            let y = (x + dx).min(1.5);
            prop_assert!(p.value(y).unwrap() >= p.value(x).unwrap());
        }

        #[test]
        fn select_h_inverts(m in 1u64..1_000_000, b in 0.1f64..10.0) {
            let h = select_h(m, b).unwrap();
            prop_assert!((transverse_index(h, b) - m as f64).abs() < 1e-9 * m as f64);
        }

        #[test]
        fn cutoff_product_vanishes_off_transition(x in 0.0f64..2.0) {
            let c = Cutoff::new(&profile(1.0, Join::ConstantLevel), 0.1).unwrap();
            let phi = c.value(x);
            if x < 1.8 || x > 1.9 {
                prop_assert_eq!(phi * (1.0 - phi), 0.0);
            }
        }
    }
}
