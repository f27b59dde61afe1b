//! Numerical density of the aggregate delay under exponential latency.
//!
//! Conditioning on the latency `z` and the number `k` of arrivals during
//! the fetch, `D - z` is the sum of `k` residual waits uniform on `(0, z)`,
//! so `D | k, z` is a scaled Irwin–Hall variable supported on
//! `(z, (k + 1) z]`. The unconditional density is the `k = 0` point-mass
//! term `mu e^{-(lambda + mu) d}` plus, for every `k >= 1`, an integral over
//! `z in [d / (k + 1), d]` of Poisson weight times conditional density times
//! `mu e^{-mu z}`. The series over `k` is truncated at `k_max`.

use rayon::prelude::*;

use crate::error::ModelError;
use crate::quadrature::GaussLegendre;

/// Alternating sums above this order lose too many digits in `f64`.
const ALTERNATING_SUM_MAX_K: usize = 15;

/// Relative mass of the last retained series term above which a truncation
/// warning is raised.
pub const TRUNCATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PdfEvalConfig {
    /// Largest arrival count kept in the series.
    pub k_max: usize,
    /// Gauss–Legendre nodes per smooth sub-interval.
    pub quad_points: usize,
}

impl PdfEvalConfig {
    pub fn new(k_max: usize, quad_points: usize) -> Result<Self, ModelError> {
        if k_max < 1 {
            return Err(ModelError::DegenerateInput(
                "k_max must be at least 1".into(),
            ));
        }
        if quad_points < 16 {
            return Err(ModelError::DegenerateInput(
                "quad_points must be at least 16".into(),
            ));
        }
        Ok(PdfEvalConfig { k_max, quad_points })
    }

    /// Default truncation for the given rates with 16-point panels.
    pub fn for_rates(lambda: f64, mu: f64) -> Self {
        PdfEvalConfig {
            k_max: default_k_max(lambda, mu),
            quad_points: 16,
        }
    }
}

/// `max(20, ceil(lambda z_q + 8 sqrt(lambda z_q)))` with `z_q` the
/// `1 - 1e-6` quantile of `Exp(mu)`.
pub fn default_k_max(lambda: f64, mu: f64) -> usize {
    let zq = latency_quantile(mu);
    let m = lambda * zq;
    20usize.max((m + 8.0 * m.sqrt()).ceil() as usize)
}

fn latency_quantile(mu: f64) -> f64 {
    1e6f64.ln() / mu
}

/// Density contribution of episodes with no delayed hits.
pub fn pdf_point_mass_term(lambda: f64, mu: f64, d: f64) -> f64 {
    mu * (-(lambda + mu) * d).exp()
}

/// Irwin–Hall density (sum of `k` uniforms on `(0, 1)`) at `x`, by the
/// positive recurrence
/// `f_n(x) = (x f_{n-1}(x) + (n - x) f_{n-1}(x - 1)) / (n - 1)`.
pub fn irwin_hall_density(k: usize, x: f64) -> f64 {
    if k == 0 || x <= 0.0 || x > k as f64 {
        return 0.0;
    }
    let mut out = vec![0.0; k + 1];
    let mut scratch = Vec::new();
    irwin_hall_upto(k, x, &mut out, &mut scratch);
    out[k]
}

/// Fills `out[n] = f_n(x)` for `n = 1..=k_max`.
fn irwin_hall_upto(k_max: usize, x: f64, out: &mut [f64], v: &mut Vec<f64>) {
    out[0] = 0.0;
    if x <= 0.0 {
        out[1..=k_max].fill(0.0);
        return;
    }
    // v[j] holds f_n(x - j); only shifts with x - j > 0 are non-zero.
    let j_max = (k_max - 1).min(x.floor() as usize);
    v.clear();
    v.extend((0..=j_max + 1).map(|j| {
        let y = x - j as f64;
        if y > 0.0 && y <= 1.0 {
            1.0
        } else {
            0.0
        }
    }));
    out[1] = v[0];
    for (n, slot) in out.iter_mut().enumerate().take(k_max + 1).skip(2) {
        let nf = n as f64;
        let top = (k_max - n).min(j_max);
        for j in 0..=top {
            let y = x - j as f64;
            v[j] = (y * v[j] + (nf - y) * v[j + 1]) / (nf - 1.0);
        }
        *slot = v[0];
    }
}

/// Alternating-sum form of the Irwin–Hall density with Neumaier
/// compensation. Uses the symmetry `f_k(x) = f_k(k - x)` so the sum runs
/// over the shorter side.
fn irwin_hall_alternating(k: usize, x: f64) -> f64 {
    let x = if x > 0.5 * k as f64 { k as f64 - x } else { x };
    if x <= 0.0 {
        return 0.0;
    }
    let upper = x.floor() as usize;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut binom = 1.0f64;
    for j in 0..=upper.min(k) {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binom * (x - j as f64).powi(k as i32 - 1);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    let fact: f64 = (1..k).map(|i| i as f64).product();
    ((sum + comp) / fact).max(0.0)
}

/// Density of `D` given `k >= 1` delayed hits and latency `z`:
/// `1 / (z^k (k-1)!) * sum_{j=0}^{floor(d/z)-1} (-1)^j C(k,j) (d - (j+1) z)^{k-1}`.
///
/// Zero outside `(z, (k + 1) z]`. Orders above 15 switch from the
/// alternating sum to the positive recurrence.
pub fn conditional_pdf_given_k_z(k: usize, z: f64, d: f64) -> f64 {
    if k == 0 || z <= 0.0 || d <= z || d > (k as f64 + 1.0) * z {
        return 0.0;
    }
    let x = (d - z) / z;
    let unit = if k <= ALTERNATING_SUM_MAX_K {
        irwin_hall_alternating(k, x)
    } else {
        irwin_hall_density(k, x)
    };
    unit / z
}

/// Numerical density at one point, with the size of the last series term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfEval {
    pub density: f64,
    pub point_mass: f64,
    /// Contribution of the `k = k_max` term.
    pub last_term: f64,
}

impl PdfEval {
    /// True when the last retained term carries more than
    /// [`TRUNCATION_TOLERANCE`] of the density.
    pub fn truncation_warning(&self) -> bool {
        self.density > 0.0 && self.last_term > TRUNCATION_TOLERANCE * self.density
    }
}

/// Density of the aggregate delay at `d` for Poisson rate `lambda` and
/// exponential latency rate `mu`.
pub fn pdf_numeric(
    lambda: f64,
    mu: f64,
    d: f64,
    cfg: &PdfEvalConfig,
) -> Result<PdfEval, ModelError> {
    check_inputs(lambda, mu)?;
    if !(d.is_finite() && d > 0.0) {
        return Err(ModelError::DegenerateInput(format!(
            "density point must be positive, got {d}"
        )));
    }
    let rule = GaussLegendre::new(cfg.quad_points);
    let mut evaluator = PdfEvaluator::new(lambda, mu, *cfg, &rule);
    Ok(evaluator.eval(d))
}

fn check_inputs(lambda: f64, mu: f64) -> Result<(), ModelError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ModelError::NegativeRate(lambda));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(ModelError::NonPositiveLatency(1.0 / mu));
    }
    Ok(())
}

struct PdfEvaluator<'a> {
    lambda: f64,
    mu: f64,
    cfg: PdfEvalConfig,
    rule: &'a GaussLegendre,
    ih: Vec<f64>,
    scratch: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl<'a> PdfEvaluator<'a> {
    fn new(lambda: f64, mu: f64, cfg: PdfEvalConfig, rule: &'a GaussLegendre) -> Self {
        let mut ln_fact = vec![0.0; cfg.k_max + 1];
        for k in 1..=cfg.k_max {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        PdfEvaluator {
            lambda,
            mu,
            cfg,
            rule,
            ih: vec![0.0; cfg.k_max + 1],
            scratch: Vec::new(),
            ln_fact,
        }
    }

    fn eval(&mut self, d: f64) -> PdfEval {
        let point_mass = pdf_point_mass_term(self.lambda, self.mu, d);
        if self.lambda == 0.0 {
            return PdfEval {
                density: point_mass,
                point_mass,
                last_term: 0.0,
            };
        }
        let k_max = self.cfg.k_max;
        let (mut series, mut last) = (0.0, 0.0);
        // On z in [d/(m+1), d/m] the Irwin–Hall argument d/z - 1 lies in
        // [m-1, m], so the integrand is smooth there and only k >= m count.
        for m in 1..=k_max {
            let (a, b) = (d / (m as f64 + 1.0), d / m as f64);
            if self.mu * a > 700.0 {
                continue;
            }
            for (z, w) in self.rule.mapped(a, b) {
                let x = d / z - 1.0;
                irwin_hall_upto(k_max, x, &mut self.ih, &mut self.scratch);
                let lz = self.lambda * z;
                let ln_lz = lz.ln();
                let mut acc = 0.0;
                for k in m..=k_max {
                    let ln_p = k as f64 * ln_lz - lz - self.ln_fact[k];
                    acc += ln_p.exp() * self.ih[k];
                }
                let ln_p_last = k_max as f64 * ln_lz - lz - self.ln_fact[k_max];
                let base = w * self.mu * (-self.mu * z).exp() / z;
                series += base * acc;
                last += base * ln_p_last.exp() * self.ih[k_max];
            }
        }
        PdfEval {
            density: point_mass + series,
            point_mass,
            last_term: last,
        }
    }
}

/// Mass, mean and variance obtained by integrating the numerical density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPdfMoments {
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    /// Upper end of the integration range.
    pub d_max: f64,
    /// Whether any evaluated point raised a truncation warning.
    pub truncated: bool,
}

impl NumericPdfMoments {
    /// Integrates over `(0, d_max]` with `d_max = z_q + lambda z_q^2`,
    /// `z_q` the `1 - 1e-6` latency quantile. Panels are 16-point
    /// Gauss–Legendre, a quarter mean latency wide up to ten means and one
    /// mean wide beyond.
    pub fn compute(lambda: f64, mu: f64, cfg: &PdfEvalConfig) -> Result<Self, ModelError> {
        check_inputs(lambda, mu)?;
        let zq = latency_quantile(mu);
        let d_max = zq + lambda * zq * zq;
        let z_mean = 1.0 / mu;
        let mut edges = vec![0.0];
        let near = (10.0 * z_mean).min(d_max);
        let mut x = 0.0;
        while x < near {
            x = (x + 0.25 * z_mean).min(near);
            edges.push(x);
        }
        while x < d_max {
            x = (x + z_mean).min(d_max);
            edges.push(x);
        }
        let outer = GaussLegendre::new(16);
        let inner = GaussLegendre::new(cfg.quad_points);
        let panels: Vec<(f64, f64, f64, bool)> = edges
            .par_windows(2)
            .map(|w| {
                let mut ev = PdfEvaluator::new(lambda, mu, *cfg, &inner);
                let (mut m0, mut m1, mut m2, mut warn) = (0.0, 0.0, 0.0, false);
                for (d, wt) in outer.mapped(w[0], w[1]) {
                    let p = ev.eval(d);
                    warn |= p.truncation_warning();
                    m0 += wt * p.density;
                    m1 += wt * d * p.density;
                    m2 += wt * d * d * p.density;
                }
                (m0, m1, m2, warn)
            })
            .collect();
        let (mass, s1, s2, truncated) = panels
            .iter()
            .fold((0.0, 0.0, 0.0, false), |(a, b, c, t), &(m0, m1, m2, w)| {
                (a + m0, b + m1, c + m2, t || w)
            });
        let mean = s1 / mass;
        Ok(NumericPdfMoments {
            mass,
            mean,
            variance: s2 / mass - mean * mean,
            d_max,
            truncated,
        })
    }
}
