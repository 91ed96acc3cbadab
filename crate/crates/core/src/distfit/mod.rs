//! Left-truncated (at zero) normal distribution: density, histogram
//! estimation, and parameter fitting by OLS on a histogram or by
//! moment-based MLE.
//!
//! The MLE route works through the ratio identities of the truncated
//! moments. With `Q(r) = f(r)/F(r)` over the standard normal density f and
//! CDF F, the truncated mean and variance are
//!
//! ```text
//! mean = mu + sigma·Q(r)                      r = mu/sigma
//! var  = sigma²·(1 − Q(r)·(r + Q(r)))
//! ```
//!
//! so the observable mean/std ratio is a strictly increasing function of r
//! alone. Fitting solves that scalar equation for r, then recovers sigma
//! from the variance identity and mu = r·sigma.

pub mod normal;

use std::fmt;

use serde::Serialize;

use normal::{cdf, mills_q, pdf};

#[derive(Debug, Clone, PartialEq)]
pub enum DistFitError {
    BadSigma(f64),
    TooFewSamples(usize),
    NonPositiveSample(f64),
    ZeroVariance,
    BadRatioTarget(f64),
    /// The target ratio lies outside the attainable range on the solver
    /// bracket (ratios at or below 1 have no truncated-normal solution).
    NoBracket { target: f64, lo_value: f64, hi_value: f64 },
    NonConvergence { residual: f64 },
    TooFewBins(usize),
    DegenerateBins,
    EmptyValues,
    BadBinWidth(f64),
    NegativeValue(f64),
}

impl fmt::Display for DistFitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistFitError::BadSigma(s) => write!(f, "sigma must be positive, got {s}"),
            DistFitError::TooFewSamples(n) => write!(f, "need at least 2 samples, got {n}"),
            DistFitError::NonPositiveSample(x) => {
                write!(f, "samples must be positive, got {x}")
            }
            DistFitError::ZeroVariance => write!(f, "samples have zero variance"),
            DistFitError::BadRatioTarget(t) => {
                write!(f, "mean/std ratio must be positive and finite, got {t}")
            }
            DistFitError::NoBracket { target, lo_value, hi_value } => write!(
                f,
                "ratio {target} not attainable on the bracket (range [{lo_value}, {hi_value}])"
            ),
            DistFitError::NonConvergence { residual } => {
                write!(f, "root solve did not converge, residual {residual:e}")
            }
            DistFitError::TooFewBins(n) => {
                write!(f, "need at least 3 bins with positive density, got {n}")
            }
            DistFitError::DegenerateBins => write!(f, "histogram bin centers are degenerate"),
            DistFitError::EmptyValues => write!(f, "no values to bin"),
            DistFitError::BadBinWidth(w) => write!(f, "bin width must be positive, got {w}"),
            DistFitError::NegativeValue(x) => {
                write!(f, "histogram values must be non-negative, got {x}")
            }
        }
    }
}

impl std::error::Error for DistFitError {}

/// Left-truncated normal with validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormal {
    mu: f64,
    sigma: f64,
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<TruncNormal, DistFitError> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(DistFitError::BadSigma(sigma));
        }
        Ok(TruncNormal { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Density of the normal conditioned on positivity:
    /// `φ((x−μ)/σ) / (σ·F(μ/σ))`, and 0 for x outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = (x - self.mu) / self.sigma;
        pdf(z) / (self.sigma * cdf(self.mu / self.sigma))
    }
}

/// Free-function form of the truncated density.
pub fn truncnorm_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64, DistFitError> {
    Ok(TruncNormal::new(mu, sigma)?.pdf(x))
}

/// Mean/std ratio of the truncated distribution as a function of
/// `r = mu/sigma`:
///
/// ```text
/// ratio(r) = (r + Q(r)) / sqrt(1 − Q(r)·(r + Q(r)))
/// ```
///
/// Strictly increasing, tending to 1 as r → −∞ (the exponential limit of
/// heavy truncation) and to r as r → +∞ (truncation negligible).
pub fn truncated_moment_ratio(r: f64) -> f64 {
    let q = mills_q(r);
    let shifted = r + q;
    shifted / (1.0 - q * shifted).sqrt()
}

/// Root solve result for [`solve_r`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSolution {
    pub r: f64,
    pub iterations: u32,
    pub residual: f64,
}

const SOLVE_BRACKET: (f64, f64) = (-40.0, 40.0);
const SOLVE_TOLERANCE: f64 = 1e-10;
const SOLVE_MAX_ITER: u32 = 200;

/// Inverts [`truncated_moment_ratio`]: finds r with
/// `|ratio(r) − r_prime| < 1e-10`.
///
/// Monotonicity gives a guaranteed bracket: [−40, 40] covers every target
/// up to 40, and because `ratio(r) ≥ r` the right edge extends to
/// `r_prime + 1` for larger targets (where truncation is already
/// negligible). The bracket is then narrowed by Illinois false position:
/// derivative-free secant steps that halve a retained endpoint's value
/// whenever the same side repeats, so the interval provably collapses.
pub fn solve_r(r_prime: f64) -> Result<RootSolution, DistFitError> {
    if !(r_prime > 0.0) || !r_prime.is_finite() {
        return Err(DistFitError::BadRatioTarget(r_prime));
    }
    let (mut lo, mut hi) = SOLVE_BRACKET;
    if r_prime > hi {
        hi = r_prime + 1.0;
    }
    let mut f_lo = truncated_moment_ratio(lo) - r_prime;
    let mut f_hi = truncated_moment_ratio(hi) - r_prime;
    if f_lo.abs() < SOLVE_TOLERANCE {
        return Ok(RootSolution { r: lo, iterations: 0, residual: f_lo });
    }
    if f_hi.abs() < SOLVE_TOLERANCE {
        return Ok(RootSolution { r: hi, iterations: 0, residual: f_hi });
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(DistFitError::NoBracket {
            target: r_prime,
            lo_value: f_lo + r_prime,
            hi_value: f_hi + r_prime,
        });
    }
    let mut side = 0i8;
    for iter in 1..=SOLVE_MAX_ITER {
        let secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let x = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let fx = truncated_moment_ratio(x) - r_prime;
        if fx.abs() < SOLVE_TOLERANCE {
            return Ok(RootSolution { r: x, iterations: iter, residual: fx });
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo < f64::EPSILON * lo.abs().max(1.0) {
            // bracket exhausted at f64 resolution
            let fl = truncated_moment_ratio(lo) - r_prime;
            let fh = truncated_moment_ratio(hi) - r_prime;
            let (r, residual) = if fl.abs() < fh.abs() { (lo, fl) } else { (hi, fh) };
            if residual.abs() < SOLVE_TOLERANCE {
                return Ok(RootSolution { r, iterations: iter, residual });
            }
            return Err(DistFitError::NonConvergence { residual });
        }
    }
    let residual = if f_lo.abs() < f_hi.abs() { f_lo } else { f_hi };
    Err(DistFitError::NonConvergence { residual })
}

/// Fit method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Ols,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitDiagnostics {
    Ols { rss: f64 },
    Mle { iterations: u32, residual: f64 },
}

/// Estimated truncated-normal parameters with fit provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncNormalFit {
    pub method: FitMethod,
    pub mu: f64,
    pub sigma: f64,
    pub diagnostics: FitDiagnostics,
}

/// Moment-based MLE from positive samples.
///
/// Sample mean m and population standard deviation s give the target ratio
/// m/s; `solve_r` recovers r, then `sigma = s / sqrt(1 − Q(r)(r + Q(r)))`
/// and `mu = r·sigma`.
pub fn fit_mle(samples: &[f64]) -> Result<TruncNormalFit, DistFitError> {
    if samples.len() < 2 {
        return Err(DistFitError::TooFewSamples(samples.len()));
    }
    for &x in samples {
        if !(x > 0.0) || !x.is_finite() {
            return Err(DistFitError::NonPositiveSample(x));
        }
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(DistFitError::ZeroVariance);
    }
    let std = var.sqrt();
    let sol = solve_r(mean / std)?;
    let q = mills_q(sol.r);
    let sigma = std / (1.0 - q * (sol.r + q)).sqrt();
    let mu = sol.r * sigma;
    Ok(TruncNormalFit {
        method: FitMethod::Mle,
        mu,
        sigma,
        diagnostics: FitDiagnostics::Mle { iterations: sol.iterations, residual: sol.residual },
    })
}

const OLS_GRID: usize = 100;
const OLS_REFINE_PASSES: usize = 3;

/// Least-squares fit of the truncated density to a histogram of
/// `(bin_center, density)` points.
///
/// Deterministic search: a 100×100 grid with mu over the bin-center range
/// and sigma over (0, range], then three refinement passes each re-gridding
/// ±2 coarse steps around the incumbent. Ties keep the first (lowest-index)
/// grid point.
pub fn fit_ols(histogram: &[(f64, f64)]) -> Result<TruncNormalFit, DistFitError> {
    let informative = histogram.iter().filter(|(_, d)| *d > 0.0).count();
    if informative < 3 {
        return Err(DistFitError::TooFewBins(informative));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(c, d) in histogram {
        if !c.is_finite() || !d.is_finite() {
            return Err(DistFitError::DegenerateBins);
        }
        lo = lo.min(c);
        hi = hi.max(c);
    }
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(DistFitError::DegenerateBins);
    }

    let rss_for = |mu: f64, sigma: f64| -> f64 {
        let norm = sigma * cdf(mu / sigma);
        let mut rss = 0.0;
        for &(c, d) in histogram {
            let p = if c <= 0.0 { 0.0 } else { pdf((c - mu) / sigma) / norm };
            let e = p - d;
            rss += e * e;
        }
        rss
    };

    let sigma_floor = range * 1e-9;
    let mut mu_lo = lo;
    let mut mu_hi = hi;
    let mut sigma_lo = range / OLS_GRID as f64;
    let mut sigma_hi = range;
    let mut best = (f64::INFINITY, 0.0f64, 1.0f64);
    for pass in 0..=OLS_REFINE_PASSES {
        let mu_step = (mu_hi - mu_lo) / (OLS_GRID - 1) as f64;
        let sigma_step = (sigma_hi - sigma_lo) / (OLS_GRID - 1) as f64;
        if pass > 0 {
            best.0 = f64::INFINITY; // re-evaluate on the fresh grid
        }
        for i in 0..OLS_GRID {
            let mu = mu_lo + mu_step * i as f64;
            for j in 0..OLS_GRID {
                let sigma = (sigma_lo + sigma_step * j as f64).max(sigma_floor);
                let rss = rss_for(mu, sigma);
                if rss < best.0 {
                    best = (rss, mu, sigma);
                }
            }
        }
        mu_lo = best.1 - 2.0 * mu_step;
        mu_hi = best.1 + 2.0 * mu_step;
        sigma_lo = (best.2 - 2.0 * sigma_step).max(sigma_floor);
        sigma_hi = best.2 + 2.0 * sigma_step;
    }
    Ok(TruncNormalFit {
        method: FitMethod::Ols,
        mu: best.1,
        sigma: best.2,
        diagnostics: FitDiagnostics::Ols { rss: best.0 },
    })
}

/// One histogram bin: left-closed `[lower, lower + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub center: f64,
    pub count: u64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub sample_count: u64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// (center, density) pairs, the shape [`fit_ols`] consumes.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.bins.iter().map(|b| (b.center, b.density)).collect()
    }
}

/// Empirical density over left-closed bins anchored at zero:
/// `density = count / (n · bin_width)`, so densities integrate to one.
pub fn estimate_pdf(values: &[f64], bin_width: f64) -> Result<Histogram, DistFitError> {
    if values.is_empty() {
        return Err(DistFitError::EmptyValues);
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(DistFitError::BadBinWidth(bin_width));
    }
    const MAX_BINS: usize = 100_000_000;
    let mut counts: Vec<u64> = Vec::new();
    for &v in values {
        if v < 0.0 || !v.is_finite() {
            return Err(DistFitError::NegativeValue(v));
        }
        let idx = (v / bin_width).floor();
        if idx >= MAX_BINS as f64 {
            // a bin width this far below the data range is a configuration
            // mistake, not a histogram
            return Err(DistFitError::BadBinWidth(bin_width));
        }
        let idx = idx as usize;
        if idx >= counts.len() {
            counts.resize(idx + 1, 0);
        }
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            lower: i as f64 * bin_width,
            center: (i as f64 + 0.5) * bin_width,
            count,
            density: count as f64 / (n * bin_width),
        })
        .collect();
    Ok(Histogram { bin_width, sample_count: values.len() as u64, bins })
}
