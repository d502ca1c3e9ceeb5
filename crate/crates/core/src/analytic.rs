//! Closed-form reliability: order-statistics time, min-cut MTTF approximations
//! and the numeric checks behind them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{expected_counts, GatewayPolicy, TopologyKind, TopologyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureType {
    Link,
    Switch,
    Server,
}

impl FailureType {
    pub fn name(&self) -> &'static str {
        match self {
            FailureType::Link => "link",
            FailureType::Switch => "switch",
            FailureType::Server => "server",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "link" => Some(FailureType::Link),
            "switch" => Some(FailureType::Switch),
            "server" => Some(FailureType::Server),
            _ => None,
        }
    }
}

impl fmt::Display for FailureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expected time of the `f`-th failure among `total` elements with
/// exponential lifetimes of mean `mean_lifetime`.
pub fn elapsed_time(f: u64, total: u64, mean_lifetime: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Domain("element count must be positive".into()));
    }
    if f > total {
        return Err(Error::Domain(format!("{f} failures exceed {total} elements")));
    }
    if !(mean_lifetime > 0.0 && mean_lifetime.is_finite()) {
        return Err(Error::Domain(format!("mean lifetime must be positive, got {mean_lifetime}")));
    }
    Ok(mean_lifetime * partial_harmonic(f, total))
}

/// [`elapsed_time`] with unit mean lifetime.
pub fn normalized_time(f: u64, total: u64) -> Result<f64> {
    elapsed_time(f, total, 1.0)
}

/// `sum_{i=0}^{f-1} 1/(total-i)`, summed smallest term first.
pub(crate) fn partial_harmonic(f: u64, total: u64) -> f64 {
    ((total - f + 1)..=total).rev().fold(0.0, |acc, k| acc + 1.0 / k as f64)
}

/// Normalized time at a fractional number of failures `fer * total`, linearly
/// interpolated between the neighbouring integer counts.
pub fn normalized_time_at_fer(fer: f64, total: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fer) {
        return Err(Error::Domain(format!("failed element ratio {fer} outside [0, 1]")));
    }
    let x = fer * total as f64;
    let lo = (x.floor() as u64).min(total);
    let t_lo = normalized_time(lo, total)?;
    if lo == total {
        return Ok(t_lo);
    }
    let t_hi = t_lo + 1.0 / (total - lo) as f64;
    Ok(t_lo + (x - lo as f64) * (t_hi - t_lo))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos approximation, reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI / (s * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Size `r` and number `c` of minimum cuts. `c` may be non-integral when it
/// comes from a formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinCutSpec {
    pub r: u32,
    pub c: f64,
}

impl MinCutSpec {
    pub fn new(r: u32, c: f64) -> Result<Self> {
        let spec = MinCutSpec { r, c };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::Domain("min-cut size must be >= 1".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Domain(format!("min-cut count must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

fn check_lifetime(mean_lifetime: f64) -> Result<()> {
    if mean_lifetime > 0.0 && mean_lifetime.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("mean lifetime must be positive, got {mean_lifetime}")))
    }
}

/// `(E/r) * c^(-1/r) * Gamma(1/r)`.
pub fn burtin_pittel_mttf(mincut: MinCutSpec, mean_lifetime: f64) -> Result<f64> {
    mincut.validate()?;
    check_lifetime(mean_lifetime)?;
    let r = f64::from(mincut.r);
    Ok(mean_lifetime / r * mincut.c.powf(-1.0 / r) * gamma(1.0 / r))
}

/// Integrates the reliability `exp(-c (t/E)^r)` over `t >= 0` numerically.
///
/// The integrand is smooth for integer `r`, so it is integrated directly in
/// `t` up to the point where it drops below 1e-16.
pub fn mttf_numeric_quadrature(mincut: MinCutSpec, mean_lifetime: f64) -> Result<f64> {
    mincut.validate()?;
    check_lifetime(mean_lifetime)?;
    let r = f64::from(mincut.r);
    let c = mincut.c;
    let cutoff = -(1e-16f64).ln();
    let t_max = mean_lifetime * (cutoff / c).powf(1.0 / r);
    let f = |t: f64| (-c * (t / mean_lifetime).powf(r)).exp();
    integrate(f, 0.0, t_max, 1e-13)
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to relative
/// tolerance `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 4096;
    let (value, error) = kronrod_15(&f, a, b);
    let mut intervals = vec![(a, b, value, error)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= rel_tol * total.abs() || err < f64::MIN_POSITIVE {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: estimate {total}, error {err}"
            )));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod_15(&f, lo, mid);
        let (v2, e2) = kronrod_15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Min-cut size and count of a topology for one failure type.
pub fn min_cut_catalog(params: &TopologyParams, failure: FailureType) -> Result<MinCutSpec> {
    let (servers, _, _) = expected_counts(params)?;
    let s = servers as f64;
    let l = params.l;
    let (r, c) = match (failure, params.kind) {
        (FailureType::Server, _) => {
            return Err(Error::Domain(
                "server failures have no min-cut model: the first one disconnects a server".into(),
            ))
        }
        (FailureType::Link, TopologyKind::ThreeLayer | TopologyKind::FatTree) => (1, s),
        (FailureType::Link, TopologyKind::BCube) => (l + 1, s),
        (FailureType::Link, TopologyKind::DCell) if l == 1 => (2, 1.5 * s),
        (FailureType::Link, TopologyKind::DCell) => (l + 1, s),
        (FailureType::Switch, TopologyKind::ThreeLayer) => (1, s / f64::from(params.n_e)),
        (FailureType::Switch, TopologyKind::FatTree) => (1, (2.0 * s * s).cbrt()),
        // a single switch serves every server
        (FailureType::Switch, TopologyKind::BCube | TopologyKind::DCell) if l == 0 => (1, 1.0),
        (FailureType::Switch, TopologyKind::BCube) => (l + 1, s),
        (FailureType::Switch, TopologyKind::DCell) if l <= 2 => {
            (2 * l * l, binomial(u64::from(params.n + l), u64::from(2 * l)))
        }
        (FailureType::Switch, TopologyKind::DCell) => {
            return Err(Error::OutOfScope(format!(
                "switch min-cuts of DCell with l = {l} > 2 are not modelled"
            )))
        }
    };
    MinCutSpec::new(r, c)
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accuracy {
    Exact,
    Approximate,
    /// The min-cut approximation is known to fit badly for this case.
    PoorApproximation,
}

impl Accuracy {
    pub fn name(&self) -> &'static str {
        match self {
            Accuracy::Exact => "exact",
            Accuracy::Approximate => "approximate",
            Accuracy::PoorApproximation => "poor-approximation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub mttf: f64,
    pub accuracy: Accuracy,
    /// Cut used by the approximation; absent for exact results.
    pub mincut: Option<MinCutSpec>,
}

/// Closed-form MTTF for link or switch failures with every top-level switch
/// acting as gateway.
pub fn closed_form_mttf(params: &TopologyParams, failure: FailureType, mean_lifetime: f64) -> Result<ClosedForm> {
    check_lifetime(mean_lifetime)?;
    params.validate()?;
    if params.gateway_policy != GatewayPolicy::MaxGpd {
        return Err(Error::OutOfScope(format!(
            "closed forms assume every top-level switch is a gateway (policy {})",
            params.gateway_policy
        )));
    }
    if failure == FailureType::Switch && params.kind == TopologyKind::DCell && params.l == 1 {
        let (servers, _, _) = expected_counts(params)?;
        let s = servers as f64;
        return Ok(ClosedForm {
            mttf: mean_lifetime * (4.0 * s + 1.0).sqrt() / s,
            accuracy: Accuracy::Exact,
            mincut: None,
        });
    }
    let mincut = min_cut_catalog(params, failure)?;
    let poor = failure == FailureType::Switch
        && matches!(
            (params.kind, params.l),
            (TopologyKind::BCube, 1) | (TopologyKind::DCell, 2)
        );
    Ok(ClosedForm {
        mttf: burtin_pittel_mttf(mincut, mean_lifetime)?,
        accuracy: if poor { Accuracy::PoorApproximation } else { Accuracy::Approximate },
        mincut: Some(mincut),
    })
}

/// Server count above which one more server interface raises the link-failure
/// MTTF of BCube (and DCell for l > 1), for a topology with `l` levels.
pub fn interface_gain_threshold(l: u32) -> Result<f64> {
    if l < 1 {
        return Err(Error::Domain("threshold defined for l >= 1".into()));
    }
    let a = f64::from(l + 1);
    let b = f64::from(l + 2);
    Ok((b / a * gamma(1.0 / a) / gamma(1.0 / b)).powf(a * b))
}

/// Server count above which Fat-tree has a lower link-failure MTTF than
/// DCell with l = 1: `(2 sqrt(1.5) / Gamma(1/2))^2`.
pub fn fat_tree_dcell2_threshold() -> f64 {
    (2.0 * 1.5f64.sqrt() / gamma(0.5)).powi(2)
}

/// `|a - b| / |reference|`.
pub fn relative_error(simulated: f64, theoretical: f64) -> f64 {
    (simulated - theoretical).abs() / simulated.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn elapsed_time_examples() {
        assert!(close(elapsed_time(1, 10, 1.0).unwrap(), 0.1, 1e-15));
        assert!(close(elapsed_time(3, 3, 1.0).unwrap(), 1.0 / 3.0 + 0.5 + 1.0, 1e-15));
        assert!(close(elapsed_time(2, 5, 100.0).unwrap(), 45.0, 1e-14));
        assert_eq!(elapsed_time(0, 7, 3.0).unwrap(), 0.0);
        assert!(matches!(elapsed_time(4, 3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn second_order_statistic_by_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let mut x = [0.0f64; 5];
            for v in &mut x {
                *v = -100.0 * (1.0 - rng.random::<f64>()).ln();
            }
            x.sort_by(f64::total_cmp);
            sum += x[1];
        }
        let mean = sum / draws as f64;
        assert!(close(mean, 45.0, 0.005), "{mean}");
    }

    #[test]
    fn normalized_time_examples() {
        assert_eq!(normalized_time(0, 9).unwrap(), 0.0);
        let h: f64 = (1..=40).map(|k| 1.0 / k as f64).sum();
        assert!(close(normalized_time(40, 40).unwrap(), h, 1e-15));
        let t = normalized_time(90_000, 100_000).unwrap();
        assert!((t - 2.3).abs() < 0.01, "{t}");
    }

    #[test]
    fn normalized_time_nearly_independent_of_element_count() {
        let values: Vec<f64> = [759u64, 5133, 16380]
            .iter()
            .map(|&f| normalized_time_at_fer(0.4, f).unwrap())
            .collect();
        for a in &values {
            for b in &values {
                assert!((a - b).abs() / b < 1e-3, "{values:?}");
            }
        }
    }

    #[test]
    fn gamma_reference_values() {
        let pi = std::f64::consts::PI;
        assert!(close(gamma(1.0), 1.0, 1e-14));
        assert!(close(gamma(0.5), pi.sqrt(), 1e-14));
        assert!(close(gamma(1.0 / 3.0), 2.678_938_534_707_747_6, 1e-13));
        assert!(close(gamma(0.25), 3.625_609_908_221_908_3, 1e-13));
        assert!(close(gamma(0.2), 4.590_843_711_998_803, 1e-13));
        assert!(close(gamma(5.0), 24.0, 1e-13));
    }

    #[test]
    fn burtin_pittel_examples() {
        let s = 3456.0;
        assert!(close(burtin_pittel_mttf(MinCutSpec::new(1, s).unwrap(), 2.0).unwrap(), 2.0 / s, 1e-14));
        let bcube = burtin_pittel_mttf(MinCutSpec::new(2, 3364.0).unwrap(), 1.0).unwrap();
        let dcell = burtin_pittel_mttf(MinCutSpec::new(2, 1.5 * 3364.0).unwrap(), 1.0).unwrap();
        assert!((bcube / dcell - 1.5f64.sqrt()).abs() < 1e-12);
        assert!(close(bcube, 0.5 / 58.0 * std::f64::consts::PI.sqrt(), 1e-13));
        assert!(close(bcube, 0.015_281, 1e-4));
    }

    #[test]
    fn quadrature_examples() {
        let q = |r, c, e| mttf_numeric_quadrature(MinCutSpec::new(r, c).unwrap(), e).unwrap();
        assert!(close(q(1, 10.0, 1.0), 0.1, 1e-10));
        assert!(close(q(2, 1.0, 1.0), std::f64::consts::PI.sqrt() / 2.0, 1e-10));
        let spec = MinCutSpec::new(3, 7.0).unwrap();
        assert!(close(q(3, 7.0, 2.0), burtin_pittel_mttf(spec, 2.0).unwrap(), 1e-8));
    }

    #[test]
    fn quadrature_matches_closed_form_on_grid() {
        for r in 1..=5 {
            for c in [1.0, 10.0, 1e3, 1e5] {
                for e in [1.0, 100.0] {
                    let spec = MinCutSpec::new(r, c).unwrap();
                    let exact = burtin_pittel_mttf(spec, e).unwrap();
                    let numeric = mttf_numeric_quadrature(spec, e).unwrap();
                    assert!(close(numeric, exact, 1e-8), "r={r} c={c} e={e}: {numeric} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn invalid_cuts_are_rejected() {
        assert!(MinCutSpec::new(0, 1.0).is_err());
        assert!(MinCutSpec::new(1, 0.0).is_err());
        assert!(burtin_pittel_mttf(MinCutSpec { r: 1, c: 1.0 }, -1.0).is_err());
    }

    #[test]
    fn catalog_examples() {
        let ft = min_cut_catalog(&TopologyParams::fat_tree(24), FailureType::Switch).unwrap();
        assert_eq!(ft.r, 1);
        assert!(close(ft.c, 288.0, 1e-12));
        let dc = min_cut_catalog(&TopologyParams::dcell(7, 2), FailureType::Switch).unwrap();
        assert_eq!((dc.r, dc.c), (8, 126.0));
        let dl = min_cut_catalog(&TopologyParams::dcell(58, 1), FailureType::Link).unwrap();
        assert_eq!((dl.r, dl.c), (2, 5133.0));
        let bc = min_cut_catalog(&TopologyParams::bcube(15, 2), FailureType::Link).unwrap();
        assert_eq!((bc.r, bc.c), (3, 3375.0));
        let tl = min_cut_catalog(&TopologyParams::three_layer(12, 48, 6), FailureType::Switch).unwrap();
        assert_eq!((tl.r, tl.c), (1, 72.0));
        assert!(matches!(
            min_cut_catalog(&TopologyParams::dcell(3, 3), FailureType::Switch),
            Err(Error::OutOfScope(_))
        ));
        assert!(min_cut_catalog(&TopologyParams::fat_tree(4), FailureType::Server).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let tl = closed_form_mttf(&TopologyParams::three_layer(12, 48, 6), FailureType::Switch, 1.0).unwrap();
        assert!(close(tl.mttf, 1.0 / 72.0, 1e-14));
        assert_eq!(tl.accuracy, Accuracy::Approximate);

        let dc = closed_form_mttf(&TopologyParams::dcell(58, 1), FailureType::Switch, 1.0).unwrap();
        assert_eq!(dc.accuracy, Accuracy::Exact);
        assert!(close(dc.mttf, 117.0 / 3422.0, 1e-15));
        assert!(close(dc.mttf, elapsed_time(2, 59, 1.0).unwrap(), 1e-14));

        let ft = closed_form_mttf(&TopologyParams::fat_tree(24), FailureType::Link, 1.0).unwrap();
        assert!(close(ft.mttf, 1.0 / 3456.0, 1e-14));

        let bc = closed_form_mttf(&TopologyParams::bcube(58, 1), FailureType::Switch, 1.0).unwrap();
        assert_eq!(bc.accuracy, Accuracy::PoorApproximation);
        let d3 = closed_form_mttf(&TopologyParams::dcell(7, 2), FailureType::Switch, 1.0).unwrap();
        assert_eq!(d3.accuracy, Accuracy::PoorApproximation);

        let min = TopologyParams::fat_tree(4).with_gateway_policy(GatewayPolicy::MinGpd);
        assert!(matches!(closed_form_mttf(&min, FailureType::Link, 1.0), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn fat_tree_versus_dcell2_at_equal_servers() {
        let s = 3422.0;
        let ft = burtin_pittel_mttf(MinCutSpec::new(1, s).unwrap(), 1.0).unwrap();
        let dc = burtin_pittel_mttf(MinCutSpec::new(2, 1.5 * s).unwrap(), 1.0).unwrap();
        let ratio = dc / ft;
        assert!(ratio >= 42.0 && (ratio - 42.3).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn thresholds() {
        assert!((interface_gain_threshold(1).unwrap() - 0.955).abs() < 1e-3);
        let mut prev = interface_gain_threshold(1).unwrap();
        for l in 2..8 {
            let t = interface_gain_threshold(l).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!((fat_tree_dcell2_threshold() - 1.909).abs() < 1e-3);
        assert!(close(fat_tree_dcell2_threshold(), 6.0 / std::f64::consts::PI, 1e-14));
    }

    proptest! {
        #[test]
        fn more_interfaces_raise_link_mttf(l in 1u32..6, servers in 2u64..1_000_000) {
            let s = servers as f64;
            let lo = burtin_pittel_mttf(MinCutSpec::new(l + 1, s).unwrap(), 1.0).unwrap();
            let hi = burtin_pittel_mttf(MinCutSpec::new(l + 2, s).unwrap(), 1.0).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn fat_tree_below_dcell2(servers in 2u64..10_000_000) {
            let s = servers as f64;
            let ft = burtin_pittel_mttf(MinCutSpec::new(1, s).unwrap(), 1.0).unwrap();
            let dc = burtin_pittel_mttf(MinCutSpec::new(2, 1.5 * s).unwrap(), 1.0).unwrap();
            prop_assert!(ft < dc);
        }

        #[test]
        fn full_run_is_harmonic_number(total in 1u64..5000) {
            let h: f64 = (1..=total).rev().map(|k| 1.0 / k as f64).sum();
            let t = normalized_time(total, total).unwrap();
            prop_assert!((t - h).abs() <= 4.0 * f64::EPSILON * h);
        }

        #[test]
        fn dcell2_switch_is_second_failure_time(n in 2u32..200, e in 0.1f64..100.0) {
            let p = TopologyParams::dcell(n, 1);
            let exact = closed_form_mttf(&p, FailureType::Switch, e).unwrap().mttf;
            let order = elapsed_time(2, u64::from(n) + 1, e).unwrap();
            prop_assert!((exact - order).abs() <= 1e-14 * order);
        }
    }
}
