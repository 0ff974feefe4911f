//! A priori bound formulas evaluated next to the quantities they bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{detect_monotone_with, DetectConfig, MonotoneType, RenormalizationData};
use crate::diffeo::{Diffeomorphism, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::island::locate_island;
use crate::map::{LorenzMap, Side, StandardParams};
use crate::renorm::renormalize;

/// Relative slack allowed in every bound comparison.
pub const BOUND_SLACK: f64 = 1e-10;

/// `α, η, κ, γ, ν, ξ` for a distortion budget `π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsConstants {
    pub alpha: f64,
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub nu: f64,
    pub xi: f64,
    pub pi: f64,
    pub rho: f64,
    pub c: f64,
    pub mu: f64,
    pub c1_minus: f64,
    pub c1_plus: f64,
}

/// `π = max(dist φ, dist ψ)` rounded up to 3 decimals, at least `0.001`.
pub fn default_pi(f: &LorenzMap) -> f64 {
    let d = f.phi.distortion().max(f.psi.distortion());
    ((d * 1000.0).ceil() / 1000.0).max(0.001)
}

pub fn constants(f: &LorenzMap, pi: f64) -> Result<BoundsConstants> {
    let (c1m, c1p) = (f.c1_minus(), f.c1_plus());
    if c1m <= 0.0 || c1p >= 1.0 {
        return Err(Error::DegenerateMap(format!("c₁⁻ = {c1m}, c₁⁺ = {c1p}")));
    }
    let (rho, c, mu) = (f.rho(), f.c(), f.params.mu());
    let e = (-pi).exp();
    Ok(BoundsConstants {
        alpha: e / rho,
        eta: e * mu / ((1.0 - c1p) * rho),
        kappa: e * c / (c1m * rho),
        gamma: (2.0 * pi).exp() / rho,
        nu: mu / (1.0 - c1p).powf(1.0 / rho),
        xi: c / c1m.powf(1.0 / rho),
        pi,
        rho,
        c,
        mu,
        c1_minus: c1m,
        c1_plus: c1p,
    })
}

/// Lower bounds `Δ ≤ |p − f₀⁻¹(c)|` and `Θ ≤ |q − f₁⁻¹(c)|`.
pub fn delta_theta(k: &BoundsConstants, n: usize, m: usize) -> (f64, f64) {
    let BoundsConstants { rho, c, mu, pi, .. } = *k;
    let tail = |x: f64| x.powf(rho / (rho - 1.0)) * (-pi / (rho - 1.0)).exp();
    let outer = |j: usize| {
        let r = rho.powi(j as i32);
        r / (r - 1.0)
    };
    let delta = (k.kappa * (c / (c - k.c1_plus)).powf(rho - 1.0) * tail(k.nu)).powf(outer(n));
    let theta = (k.eta * (mu / (k.c1_minus - c)).powf(rho - 1.0) * tail(k.xi)).powf(outer(m));
    (delta, theta)
}

/// `c₁⁺ ≥ κᵐΔ/(1−κᵐ)` and `1 − c₁⁻ ≥ ηⁿΘ/(1−ηⁿ)`; `None` unless `κ, η < 1`.
pub fn critical_value_lbs(
    k: &BoundsConstants,
    delta: f64,
    theta: f64,
    n: usize,
    m: usize,
) -> (Option<f64>, Option<f64>) {
    let lb = |base: f64, e: usize, x: f64| {
        (base < 1.0).then(|| {
            let b = base.powi(e as i32);
            b * x / (1.0 - b)
        })
    };
    (lb(k.kappa, m, delta), lb(k.eta, n, theta))
}

/// The six `|L|`, `|R|` bound expressions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LrBounds {
    pub l_upper_1: f64,
    pub l_upper_2: f64,
    pub l_lower: f64,
    pub r_upper_1: f64,
    pub r_upper_2: f64,
    pub r_lower: f64,
}

/// Bounds on `|L|` and `|R|`; the lower bounds use the measured `|R|` and `|L|`.
#[allow(clippy::too_many_arguments)]
pub fn lr_bounds(
    k: &BoundsConstants,
    delta: f64,
    theta: f64,
    n: usize,
    m: usize,
    len_l: f64,
    len_r: f64,
    big_k: f64,
) -> LrBounds {
    let BoundsConstants { rho, c, mu, pi, gamma, eta, kappa, c1_minus: c1m, c1_plus: c1p, .. } = *k;
    let ep = pi.exp();
    let geometric = |j: usize| ((1.0 / gamma - 1.0) / (gamma.powi(-(j as i32)) - 1.0)).powf(1.0 / (rho + 1.0));
    let l_upper_1 = ((c1m - c) * c.powf(rho) * ep / c1m).powf(1.0 / (rho + 1.0)) * geometric(n);
    let r_upper_1 = ((c - c1p) * mu.powf(rho) * ep / (1.0 - c1p)).powf(1.0 / (rho + 1.0)) * geometric(m);
    let second = |j: usize| 1.0 / (rho + 1.0 / rho.powi(j as i32 - 1));
    let l_upper_2 = (mu * mu * (mu / (theta + len_r)).abs().powf(rho - 1.0) * gamma * c.powf(rho)
        / ((1.0 - c1p) * c1m))
        .powf(second(n));
    let r_upper_2 = (c * c * (c / (delta + len_l)).abs().powf(rho - 1.0) * gamma * mu.powf(rho)
        / ((1.0 - c1p) * c1m))
        .powf(second(m));
    let e2 = (-2.0 * pi).exp();
    let sum = |ratio: f64, j: usize| (0..j).map(|i| ratio.powi(i as i32)).sum::<f64>();
    let en = eta.powi(n as i32);
    let l_lower = ((-pi).exp() * c.powf(rho) / c1m * en).powf(1.0 / (rho - 1.0))
        * (big_k * en * theta / (mu * (1.0 - en))
            * sum(e2 / eta * ((theta + len_r) / mu).powf(rho - 1.0), n))
        .exp();
    let km = kappa.powi(m as i32);
    let r_lower = ((-pi).exp() * mu.powf(rho) / (1.0 - c1p) * km).powf(1.0 / (rho - 1.0))
        * (big_k * km * delta / (c * (1.0 - km))
            * sum(e2 / kappa * ((delta + len_l) / c).powf(rho - 1.0), m))
        .exp();
    LrBounds { l_upper_1, l_upper_2, l_lower, r_upper_1, r_upper_2, r_lower }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

/// One formula value compared with the measured quantity it bounds.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: BoundKind,
    pub bound: f64,
    pub measured: f64,
    /// Whether the hypotheses of the bound verifiably hold.
    pub asserted: bool,
    pub pass: bool,
    /// `measured − bound` for lower bounds, `bound − measured` for upper ones.
    pub slack: f64,
}

impl BoundCheck {
    fn new(name: &str, kind: BoundKind, bound: f64, measured: f64, asserted: bool) -> Self {
        let slack = match kind {
            BoundKind::Lower => measured - bound,
            BoundKind::Upper => bound - measured,
        };
        let tol = BOUND_SLACK * bound.abs().max(measured.abs());
        BoundCheck {
            name: name.to_string(),
            kind,
            bound,
            measured,
            asserted,
            pass: bound.is_finite() && slack >= -tol,
            slack,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Measured {
    pub len_l: f64,
    pub len_r: f64,
    pub p_gap: f64,
    pub q_gap: f64,
    pub c1_plus: f64,
    pub one_minus_c1_minus: f64,
    pub dist_phi_tilde: f64,
    pub dist_psi_tilde: f64,
    pub c_tilde: f64,
}

/// Every bound of one map with its measured counterpart.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub m: usize,
    pub constants: BoundsConstants,
    pub delta: f64,
    pub theta: f64,
    pub c1plus_lb: Option<f64>,
    pub one_minus_c1minus_lb: Option<f64>,
    pub lr: LrBounds,
    pub k_const: f64,
    pub measured: Measured,
    /// `0 < 2π < ln ρ`.
    pub small_distortion: bool,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    /// Failed checks among those whose hypotheses hold.
    pub fn violations(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| c.asserted && !c.pass).collect()
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> = ["n", "m", "pi", "delta", "theta"].iter().map(|s| s.to_string()).collect();
        for name in CHECK_NAMES {
            cols.push(format!("{name}_bound"));
            cols.push(format!("{name}_measured"));
            cols.push(format!("{name}_pass"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.n.to_string(),
            self.m.to_string(),
            format!("{:e}", self.constants.pi),
            format!("{:e}", self.delta),
            format!("{:e}", self.theta),
        ];
        for name in CHECK_NAMES {
            match self.checks.iter().find(|c| c.name == name) {
                Some(c) => {
                    cols.push(format!("{:e}", c.bound));
                    cols.push(format!("{:e}", c.measured));
                    cols.push(if !c.asserted { "n/a" } else if c.pass { "pass" } else { "FAIL" }.to_string());
                }
                None => cols.extend(["", "", "n/a"].map(String::from)),
            }
        }
        cols.join(",")
    }
}

const CHECK_NAMES: [&str; 10] = [
    "delta",
    "theta",
    "c1plus",
    "one_minus_c1minus",
    "l_upper_1",
    "l_upper_2",
    "l_lower",
    "r_upper_1",
    "r_upper_2",
    "r_lower",
];

/// Evaluate all bounds for `f` with detected window `d`.
pub fn bounds_report(f: &LorenzMap, d: &RenormalizationData, pi: f64, big_k: f64) -> Result<BoundsReport> {
    let (n, m) = (d.kind.n, d.kind.m);
    let k = constants(f, pi)?;
    let (delta, theta) = delta_theta(&k, n, m);
    let (c1p_lb, c1m_lb) = critical_value_lbs(&k, delta, theta, n, m);
    let c = f.c();
    let len_l = c - d.p;
    let len_r = d.q - c;
    let lr = lr_bounds(&k, delta, theta, n, m, len_l, len_r, big_k);
    let r = renormalize(f, d)?;
    let measured = Measured {
        len_l,
        len_r,
        p_gap: (d.p - f.branch_inverse(Side::Left, c)).abs(),
        q_gap: (d.q - f.branch_inverse(Side::Right, c)).abs(),
        c1_plus: k.c1_plus,
        one_minus_c1_minus: 1.0 - k.c1_minus,
        dist_phi_tilde: r.phi.distortion(),
        dist_psi_tilde: r.psi.distortion(),
        c_tilde: r.c(),
    };
    let in_class = f.phi.distortion() <= pi && f.psi.distortion() <= pi && pi > 0.0;
    let small = in_class && 2.0 * pi < f.rho().ln();
    let checks = vec![
        BoundCheck::new("delta", BoundKind::Lower, delta, measured.p_gap, in_class),
        BoundCheck::new("theta", BoundKind::Lower, theta, measured.q_gap, in_class),
        BoundCheck::new("c1plus", BoundKind::Lower, c1p_lb.unwrap_or(f64::NAN), k.c1_plus, in_class && c1p_lb.is_some()),
        BoundCheck::new(
            "one_minus_c1minus",
            BoundKind::Lower,
            c1m_lb.unwrap_or(f64::NAN),
            measured.one_minus_c1_minus,
            in_class && c1m_lb.is_some(),
        ),
        BoundCheck::new("l_upper_1", BoundKind::Upper, lr.l_upper_1, len_l, small),
        // the second upper bounds need at least two steps of the return orbit
        // the second upper bounds follow the intervals f^k(L), 1 ≤ k ≤ n−1, so need n ≥ 2
        BoundCheck::new("l_upper_2", BoundKind::Upper, lr.l_upper_2, len_l, small && n >= 2),
        BoundCheck::new("l_lower", BoundKind::Lower, lr.l_lower, len_l, small),
        BoundCheck::new("r_upper_1", BoundKind::Upper, lr.r_upper_1, len_r, small),
        BoundCheck::new("r_upper_2", BoundKind::Upper, lr.r_upper_2, len_r, small && m >= 2),
        BoundCheck::new("r_lower", BoundKind::Lower, lr.r_lower, len_r, small),
    ];
    Ok(BoundsReport {
        n,
        m,
        constants: k,
        delta,
        theta,
        c1plus_lb: c1p_lb,
        one_minus_c1minus_lb: c1m_lb,
        lr,
        k_const: big_k,
        measured,
        small_distortion: small,
        checks,
    })
}

/// Measured quantities of `R[f]` against the invariance targets.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub applicable: bool,
    pub reason: Option<String>,
    pub pi: f64,
    pub eps: f64,
    pub dist_phi_tilde: f64,
    pub dist_psi_tilde: f64,
    pub c_tilde: f64,
    pub distortion_invariant: bool,
    pub critical_point_invariant: bool,
    pub tau: f64,
    pub zeta: f64,
    /// `max{((q−c₁⁺)/(p−c₁⁺))², ((c₁⁻−p)/(c₁⁻−q))²}`.
    pub koebe_bound: f64,
    pub koebe_below_exp_pi: bool,
    pub koebe_below_exp_half_pi: bool,
    /// `exp(max dist) ≤ koebe_bound`; meaningful when `S_f < 0`.
    pub koebe_consistent: bool,
    pub negative_schwarzian: bool,
}

pub fn invariance_report(f: &LorenzMap, d: &RenormalizationData, pi: f64, eps: f64) -> Result<InvarianceReport> {
    let (p, q) = (d.p, d.q);
    let (c1m, c1p) = (f.c1_minus(), f.c1_plus());
    let len_c = q - p;
    let tau = ((1.0 - q) / len_c).max((p - c1p) / len_c);
    let zeta = (p / len_c).max((c1m - q) / len_c);
    let koebe = ((q - c1p) / (p - c1p)).powi(2).max(((c1m - p) / (c1m - q)).powi(2));
    let r = renormalize(f, d)?;
    let (dp, ds) = (r.phi.distortion(), r.psi.distortion());
    let c_tilde = r.c();
    let premise = f.phi.distortion() <= pi && f.psi.distortion() <= pi && f.c() >= eps && f.c() <= 1.0 - eps;
    let negative_schwarzian = f.has_negative_schwarzian(1000);
    Ok(InvarianceReport {
        applicable: premise,
        reason: (!premise).then(|| "map is not in the class with distortion ≤ π and c ∈ [ε, 1−ε]".to_string()),
        pi,
        eps,
        dist_phi_tilde: dp,
        dist_psi_tilde: ds,
        c_tilde,
        distortion_invariant: dp <= pi && ds <= pi,
        critical_point_invariant: c_tilde >= eps && c_tilde <= 1.0 - eps,
        tau,
        zeta,
        koebe_bound: koebe,
        koebe_below_exp_pi: koebe <= pi.exp(),
        koebe_below_exp_half_pi: koebe <= (0.5 * pi).exp(),
        koebe_consistent: dp.max(ds).exp() <= koebe * (1.0 + BOUND_SLACK),
        negative_schwarzian,
    })
}

/// Sampling plan for the empirical invariance of the bounded class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceScanConfig {
    pub rho: f64,
    pub c0s: Vec<f64>,
    /// Distortion of the sampled coefficients.
    pub coefficient_budget: f64,
    /// Island positions, used for both critical returns.
    pub thetas: Vec<f64>,
    /// Smallest and largest `N` tried.
    pub n_range: (usize, usize),
    /// Types with `N ≤ n, m ≤ N + width`.
    pub width: usize,
    /// Candidate `ε`, tried from the largest down.
    pub eps_ladder: Vec<f64>,
}

impl Default for InvarianceScanConfig {
    fn default() -> Self {
        InvarianceScanConfig {
            rho: 2.5,
            c0s: vec![0.4, 0.5, 0.6],
            coefficient_budget: 0.1,
            thetas: vec![0.25, 0.5, 0.75],
            n_range: (2, 6),
            width: 2,
            eps_ladder: vec![0.4, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceLevel {
    pub n_min: usize,
    pub n_max: usize,
    pub samples: usize,
    /// Island points that could not be located or detected.
    pub misses: usize,
    /// Measured distortion budget of the inputs.
    pub pi: f64,
    pub max_dist_tilde: f64,
    pub distortion_pass: usize,
    pub c_tilde_min: f64,
    pub c_tilde_max: f64,
    /// Largest ladder value with every `c̃ ∈ [ε, 1−ε]`.
    pub eps: Option<f64>,
    pub koebe_max: f64,
    pub koebe_below_exp_half_pi: usize,
    pub koebe_consistent: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceScanReport {
    pub config: InvarianceScanConfig,
    pub levels: Vec<InvarianceLevel>,
    /// Smallest `N` whose level passes.
    pub n_emp: Option<usize>,
}

#[derive(Clone, Copy)]
struct Sample {
    input_dist: f64,
    dist_tilde: f64,
    c_tilde: f64,
    koebe: f64,
}

fn coefficient_family(budget: f64) -> Result<Vec<(Diffeomorphism, Diffeomorphism)>> {
    let id = Diffeomorphism::identity();
    let plus = Diffeomorphism::from_nonlinearity(vec![budget; DEFAULT_GRID])?;
    let minus = Diffeomorphism::from_nonlinearity(vec![-budget; DEFAULT_GRID])?;
    // N = a(2x − 1) has distortion a/4
    let tilt = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, |x| 4.0 * budget * (2.0 * x - 1.0))?;
    Ok(vec![
        (id.clone(), id),
        (plus.clone(), plus.clone()),
        (minus.clone(), minus.clone()),
        (plus, minus),
        (tilt.clone(), tilt),
    ])
}

fn invariance_sample(
    base: &LorenzMap,
    kind: MonotoneType,
    theta: (f64, f64),
    detect: &DetectConfig,
) -> Result<Sample> {
    let f = locate_island(base, kind, theta, detect)?;
    let d = detect_monotone_with(&f, kind, detect)?;
    let r = invariance_report(&f, &d, f64::INFINITY, 0.0)?;
    Ok(Sample {
        input_dist: f.phi.distortion().max(f.psi.distortion()),
        dist_tilde: r.dist_phi_tilde.max(r.dist_psi_tilde),
        c_tilde: r.c_tilde,
        koebe: r.koebe_bound,
    })
}

/// Levels `N = n_range.0, …` until one passes: every sampled map of type
/// `N ≤ n, m ≤ N + width` keeps distortion within the measured input budget
/// and `c̃` within `[ε, 1−ε]` for a common `ε` from the ladder.
pub fn invariance_scan(cfg: &InvarianceScanConfig, detect: &DetectConfig) -> Result<InvarianceScanReport> {
    let family = coefficient_family(cfg.coefficient_budget)?;
    let c_margin = cfg.c0s.iter().map(|&c| c.min(1.0 - c)).fold(0.5, f64::min);
    let mut levels = Vec::new();
    let mut n_emp = None;
    for n_min in cfg.n_range.0..=cfg.n_range.1 {
        let n_max = n_min + cfg.width;
        let mut jobs = Vec::new();
        for &c in &cfg.c0s {
            for (phi, psi) in &family {
                for n in n_min..=n_max {
                    for m in n_min..=n_max {
                        for &a in &cfg.thetas {
                            for &b in &cfg.thetas {
                                jobs.push((c, phi, psi, MonotoneType { n, m }, (a, b)));
                            }
                        }
                    }
                }
            }
        }
        let results: Vec<Result<Sample>> = jobs
            .into_par_iter()
            .map(|(c, phi, psi, kind, theta)| {
                let base = LorenzMap::new(StandardParams::new(1.0, 1.0, c, cfg.rho)?, phi.clone(), psi.clone())?;
                invariance_sample(&base, kind, theta, detect)
            })
            .collect();
        let samples: Vec<Sample> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let misses = results.len() - samples.len();
        let measured = samples.iter().map(|s| s.input_dist).fold(0.0, f64::max);
        let pi = ((measured * 1000.0).ceil() / 1000.0).max(0.001);
        let max_dist_tilde = samples.iter().map(|s| s.dist_tilde).fold(0.0, f64::max);
        let distortion_pass = samples.iter().filter(|s| s.dist_tilde <= pi).count();
        let c_tilde_min = samples.iter().map(|s| s.c_tilde).fold(1.0, f64::min);
        let c_tilde_max = samples.iter().map(|s| s.c_tilde).fold(0.0, f64::max);
        let eps = cfg
            .eps_ladder
            .iter()
            .copied()
            .find(|&e| e <= c_margin && c_tilde_min >= e && c_tilde_max <= 1.0 - e);
        let koebe_max = samples.iter().map(|s| s.koebe).fold(0.0, f64::max);
        let koebe_below_exp_half_pi = samples.iter().filter(|s| s.koebe <= (0.5 * pi).exp()).count();
        let koebe_consistent = samples.iter().filter(|s| s.dist_tilde.exp() <= s.koebe * (1.0 + BOUND_SLACK)).count();
        let pass = !samples.is_empty() && distortion_pass == samples.len() && eps.is_some();
        log::info!(
            "invariance N={n_min}..{n_max}: {} samples, max dist {max_dist_tilde:.4} vs π {pi}, c̃ ∈ [{c_tilde_min:.4}, {c_tilde_max:.4}]",
            samples.len()
        );
        levels.push(InvarianceLevel {
            n_min,
            n_max,
            samples: samples.len(),
            misses,
            pi,
            max_dist_tilde,
            distortion_pass,
            c_tilde_min,
            c_tilde_max,
            eps,
            koebe_max,
            koebe_below_exp_half_pi,
            koebe_consistent,
            pass,
        });
        if pass {
            n_emp = Some(n_min);
            break;
        }
    }
    Ok(InvarianceScanReport { config: cfg.clone(), levels, n_emp })
}

/// Koebe window `[(τ/(1+τ))², ((1+τ)/τ)²]` for derivative ratios.
pub fn koebe_window(tau: f64) -> (f64, f64) {
    let r = (1.0 + tau) / tau;
    (1.0 / (r * r), r * r)
}
