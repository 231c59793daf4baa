//! Markovian log-price models.
//!
//! The state is the log price `x`, evolving by
//!
//! ```text
//! X_t = X_{t-1} + mu(X_{t-1}) + sigma(X_{t-1}) * eps_t
//! ```
//!
//! with i.i.d. centered noise `eps`. The traded price is `S_t = exp(X_t)`.
//! Drift and volatility are real maps on the state space; noise is either
//! Gaussian or a tabulated density with a precomputed quantile table.
//!
//! Noise with nonzero mean is re-centered at construction: a mean `m` is
//! absorbed into the drift as `mu(x) + sigma(x) * m`, the noise is shifted
//! to mean zero, and the applied shift is recorded on the model. The chain
//! itself is unchanged by this rewrite.

use crate::error::{Error, Result};
use crate::quad;
use crate::rng;

/// Half-width of the audit range used for construction-time volatility
/// checks and as the default grid extent in assumption audits.
pub const AUDIT_X_MAX: f64 = 50.0;

/// Point count of the default audit grid over `[-AUDIT_X_MAX, AUDIT_X_MAX]`.
pub const AUDIT_GRID_POINTS: usize = 2001;

/// Size of the inverse-CDF table built for tabulated noise.
const QUANTILE_TABLE_LEN: usize = 4096;

/// Beyond this log price, `exp` overflows f64.
const PRICE_OVERFLOW_X: f64 = 709.782_712_893_384;

/// Below this log price, `exp` is treated as underflowed to zero.
const PRICE_UNDERFLOW_X: f64 = -700.0;

/// Behavior of a piecewise-linear table outside its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Hold the boundary value constant.
    Clamp,
    /// Continue the boundary segment's slope.
    Linear,
}

/// Piecewise-linear map over a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    extrapolation: Extrapolation,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, extrapolation: Extrapolation) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidModel(format!(
                "table lengths differ: {} abscissae vs {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidModel(
                "piecewise-linear table needs at least two points".into(),
            ));
        }
        if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("table contains non-finite entries".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Self { xs, ys, extrapolation })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return match self.extrapolation {
                Extrapolation::Clamp => self.ys[0],
                Extrapolation::Linear => {
                    let slope = (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0]);
                    self.ys[0] + slope * (x - self.xs[0])
                }
            };
        }
        if x >= self.xs[n - 1] {
            return match self.extrapolation {
                Extrapolation::Clamp => self.ys[n - 1],
                Extrapolation::Linear => {
                    let slope =
                        (self.ys[n - 1] - self.ys[n - 2]) / (self.xs[n - 1] - self.xs[n - 2]);
                    self.ys[n - 1] + slope * (x - self.xs[n - 1])
                }
            };
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 1,
            p => p,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn tail_slopes(&self) -> (f64, f64) {
        let n = self.xs.len();
        let left = (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0]);
        let right = (self.ys[n - 1] - self.ys[n - 2]) / (self.xs[n - 1] - self.xs[n - 2]);
        (left, right)
    }
}

/// Real-valued map usable as a drift or volatility profile.
#[derive(Debug, Clone)]
pub enum RealMap {
    /// `slope * x + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// `sigma0 * clamp(sqrt(|x|), c_lo, c_hi)`: square-root volatility with
    /// a floor keeping it positive near zero and a cap bounding it above.
    ClampedSqrtVol { sigma0: f64, c_lo: f64, c_hi: f64 },
    /// Tabulated profile with a declared extrapolation rule.
    Table(PiecewiseLinear),
}

impl RealMap {
    pub fn constant(value: f64) -> Self {
        RealMap::Affine { slope: 0.0, intercept: value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RealMap::Affine { slope, intercept } => slope * x + intercept,
            RealMap::ClampedSqrtVol { sigma0, c_lo, c_hi } => {
                sigma0 * x.abs().sqrt().clamp(*c_lo, *c_hi)
            }
            RealMap::Table(t) => t.eval(x),
        }
    }

    /// Global supremum when the variant makes it derivable, infinity when
    /// the map is unbounded (nonzero affine slope, rising linear tails).
    fn global_sup(&self) -> f64 {
        match self {
            RealMap::Affine { slope, intercept } => {
                if *slope == 0.0 {
                    *intercept
                } else {
                    f64::INFINITY
                }
            }
            RealMap::ClampedSqrtVol { sigma0, c_hi, .. } => sigma0 * c_hi,
            RealMap::Table(t) => {
                let (l, r) = t.tail_slopes();
                if t.extrapolation == Extrapolation::Linear && (l < 0.0 || r > 0.0) {
                    f64::INFINITY
                } else {
                    t.max_value()
                }
            }
        }
    }
}

/// Noise distribution, stored centered.
#[derive(Debug, Clone)]
enum NoiseKind {
    Gaussian {
        sd: f64,
    },
    Tabulated {
        /// Support grid, shifted so the tabulated law has mean zero.
        xs: Vec<f64>,
        /// Normalized density values on `xs`.
        pdf: Vec<f64>,
        /// Quantiles at `u_j = j / (len - 1)`, linearly interpolated on draw.
        quantiles: Vec<f64>,
        sd: f64,
    },
}

/// Centered noise law plus its integrability certificate.
///
/// `kappa` and `i_bound` record a verified pair `E exp(kappa * eps^2) =
/// i_bound < inf`, filled at construction (closed form for Gaussian,
/// quadrature for tables).
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    kind: NoiseKind,
    center_shift: f64,
    kappa: f64,
    i_bound: f64,
}

impl NoiseSpec {
    /// Standard normal noise.
    pub fn standard_gaussian() -> Self {
        Self::gaussian(0.0, 1.0).expect("standard gaussian is always valid")
    }

    /// Gaussian noise. A nonzero mean is recorded as the centering shift and
    /// the stored law is `N(0, sd^2)`.
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidNoise(format!("sd must be positive, got {sd}")));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidNoise(format!("mean must be finite, got {mean}")));
        }
        let kappa = 0.25 / (sd * sd);
        // E exp(kappa eps^2) for eps ~ N(0, sd^2) is (1 - 2 kappa sd^2)^{-1/2}.
        let i_bound = 1.0 / (1.0 - 2.0 * kappa * sd * sd).sqrt();
        Ok(Self { kind: NoiseKind::Gaussian { sd }, center_shift: mean, kappa, i_bound })
    }

    /// Noise given as density samples over a compact support grid.
    ///
    /// The density is normalized to unit mass, re-centered to mean zero
    /// (the shift is recorded), and inverted into a 4096-point quantile
    /// table that draws interpolate linearly. The sampled law is exactly
    /// the piecewise-linear quantile law, so its mean is zero to rounding.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidNoise(
                "tabulated noise needs at least three density points".into(),
            ));
        }
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut pdf: Vec<f64> = points.iter().map(|p| p.1).collect();
        if xs.iter().chain(pdf.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNoise("non-finite table entry".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidNoise("support grid must be strictly increasing".into()));
        }
        if pdf.iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidNoise("density values must be nonnegative".into()));
        }
        let mass = quad::trapezoid(&xs, &pdf);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidNoise(format!("density mass must be positive, got {mass}")));
        }
        for d in pdf.iter_mut() {
            *d /= mass;
        }

        let weighted: Vec<f64> = xs.iter().zip(&pdf).map(|(x, d)| x * d).collect();
        let density_mean = quad::trapezoid(&xs, &weighted);
        for x in xs.iter_mut() {
            *x -= density_mean;
        }

        let mut quantiles = invert_cdf(&xs, &pdf);
        // Residual mean of the piecewise-linear quantile law; removing it
        // makes sampled draws centered exactly, not just approximately.
        let table_mean = piecewise_linear_law_mean(&quantiles);
        for q in quantiles.iter_mut() {
            *q -= table_mean;
        }
        for x in xs.iter_mut() {
            *x -= table_mean;
        }
        let center_shift = density_mean + table_mean;

        let variance = piecewise_linear_law_second_moment(&quantiles);
        let sd = variance.sqrt();
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidNoise("tabulated law has zero variance".into()));
        }

        // Decreasing trial ladder for the squared-exponential moment. The
        // support is compact so some rung always certifies.
        let mut kappa = 0.25 / variance;
        let mut i_bound = f64::INFINITY;
        for _ in 0..16 {
            let integrand: Vec<f64> =
                xs.iter().zip(&pdf).map(|(x, d)| (kappa * x * x).exp() * d).collect();
            let value = quad::trapezoid(&xs, &integrand);
            if value.is_finite() {
                i_bound = value;
                break;
            }
            kappa *= 0.5;
        }
        if !i_bound.is_finite() {
            return Err(Error::InvalidNoise(
                "could not certify a finite squared-exponential moment".into(),
            ));
        }

        Ok(Self {
            kind: NoiseKind::Tabulated { xs, pdf, quantiles, sd },
            center_shift,
            kappa,
            i_bound,
        })
    }

    /// Mean removed from the law at construction.
    pub fn center_shift(&self) -> f64 {
        self.center_shift
    }

    /// Certified exponent in `E exp(kappa * eps^2) < inf`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Value of `E exp(kappa * eps^2)` at the certified `kappa`.
    pub fn i_bound(&self) -> f64 {
        self.i_bound
    }

    /// Standard deviation of the centered law.
    pub fn sd(&self) -> f64 {
        match &self.kind {
            NoiseKind::Gaussian { sd } => *sd,
            NoiseKind::Tabulated { sd, .. } => *sd,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, NoiseKind::Gaussian { .. })
    }

    /// Density of the centered law at `e`.
    ///
    /// Tabulated noise outside its support is a domain error rather than
    /// zero, so accidental extrapolation cannot silently flatten tails.
    pub fn density(&self, e: f64) -> Result<f64> {
        match &self.kind {
            NoiseKind::Gaussian { sd } => Ok(rng::normal_pdf(e / sd) / sd),
            NoiseKind::Tabulated { xs, pdf, .. } => {
                let n = xs.len();
                if e < xs[0] || e > xs[n - 1] {
                    return Err(Error::OutOfSupport { point: e });
                }
                let i = xs.partition_point(|&v| v <= e).clamp(1, n - 1);
                let t = (e - xs[i - 1]) / (xs[i] - xs[i - 1]);
                Ok(pdf[i - 1] + (pdf[i] - pdf[i - 1]) * t)
            }
        }
    }

    /// Quantile of the centered law at `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            NoiseKind::Gaussian { sd } => sd * rng::normal_quantile(u),
            NoiseKind::Tabulated { quantiles, .. } => {
                let n = quantiles.len();
                let pos = u * (n - 1) as f64;
                let i = (pos.floor() as usize).min(n - 2);
                let t = pos - i as f64;
                quantiles[i] + (quantiles[i + 1] - quantiles[i]) * t
            }
        }
    }

    /// Noise draw `step` of path `path` under `seed`: exactly one counter
    /// value is consumed, through the quantile of one uniform.
    #[inline]
    pub fn draw(&self, seed: u64, path: u64, step: u64) -> f64 {
        self.quantile(rng::draw_uniform(seed, path, step))
    }

    /// Central range holding all but `2 * tail_mass` of the law, used as an
    /// audit window and as integration bounds.
    pub fn bulk_range(&self, tail_mass: f64) -> (f64, f64) {
        (self.quantile(tail_mass), self.quantile(1.0 - tail_mass))
    }

    /// Full support for quadrature: exact for tables, an effectively
    /// exhaustive window for Gaussian tails.
    pub fn quad_support(&self) -> (f64, f64) {
        match &self.kind {
            NoiseKind::Gaussian { sd } => (-16.0 * sd, 16.0 * sd),
            NoiseKind::Tabulated { xs, .. } => (xs[0], xs[xs.len() - 1]),
        }
    }
}

/// Quantile table of the normalized density: entry `j` is the quantile at
/// `u = j / (len - 1)`, with the support endpoints kept exact.
fn invert_cdf(xs: &[f64], pdf: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * (xs[i] - xs[i - 1]);
    }
    let total = cdf[n - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    let m = QUANTILE_TABLE_LEN;
    let mut q = vec![0.0; m];
    q[0] = xs[0];
    q[m - 1] = xs[n - 1];
    let mut seg = 0usize;
    for (j, slot) in q.iter_mut().enumerate().take(m - 1).skip(1) {
        let u = j as f64 / (m - 1) as f64;
        while seg + 1 < n - 1 && cdf[seg + 1] < u {
            seg += 1;
        }
        let span = cdf[seg + 1] - cdf[seg];
        *slot = if span > 0.0 {
            xs[seg] + (u - cdf[seg]) / span * (xs[seg + 1] - xs[seg])
        } else {
            xs[seg]
        };
    }
    q
}

/// Mean of the law whose quantile function linearly interpolates `q` on a
/// uniform u-grid: trapezoid in u is exact for piecewise-linear quantiles.
fn piecewise_linear_law_mean(q: &[f64]) -> f64 {
    let m = q.len();
    let du = 1.0 / (m - 1) as f64;
    let mut acc = 0.0;
    for i in 1..m {
        acc += 0.5 * (q[i] + q[i - 1]) * du;
    }
    acc
}

/// Second moment of the same law; per-segment closed form for the square
/// of a linear function.
fn piecewise_linear_law_second_moment(q: &[f64]) -> f64 {
    let m = q.len();
    let du = 1.0 / (m - 1) as f64;
    let mut acc = 0.0;
    for i in 1..m {
        let (a, b) = (q[i - 1], q[i]);
        acc += du * (a * a + a * b + b * b) / 3.0;
    }
    acc
}

/// Markov log-price model: drift, volatility, noise, start state.
#[derive(Debug, Clone)]
pub struct MarketModel {
    name: String,
    drift: RealMap,
    vol: RealMap,
    noise: NoiseSpec,
    x0: f64,
    center_shift: f64,
    vol_bound: f64,
}

impl MarketModel {
    /// Mean-reverting linear model: `mu(x) = (alpha - 1) x`, unit volatility,
    /// standard Gaussian noise. Requires `0 < |alpha| < 1`.
    pub fn stable_ar(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha.abs() > 0.0 && alpha.abs() < 1.0) {
            return Err(Error::InvalidModel(format!(
                "stable_ar needs 0 < |alpha| < 1, got {alpha}"
            )));
        }
        Self::custom(
            format!("stable_ar(alpha={alpha})"),
            RealMap::Affine { slope: alpha - 1.0, intercept: 0.0 },
            RealMap::constant(1.0),
            NoiseSpec::standard_gaussian(),
            0.0,
        )
    }

    /// Mean-reverting model with square-root volatility clamped to
    /// `[c_lo, c_hi]`: `mu(x) = (alpha - 1) x`,
    /// `sigma(x) = sigma0 * clamp(sqrt(|x|), c_lo, c_hi)`.
    pub fn clamped_cir(alpha: f64, sigma0: f64, c_lo: f64, c_hi: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha.abs() > 0.0 && alpha.abs() < 1.0) {
            return Err(Error::InvalidModel(format!(
                "clamped_cir needs 0 < |alpha| < 1, got {alpha}"
            )));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidModel(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(c_lo.is_finite() && c_hi.is_finite() && 0.0 < c_lo && c_lo <= c_hi) {
            return Err(Error::InvalidModel(format!(
                "clamp bounds need 0 < c_lo <= c_hi, got [{c_lo}, {c_hi}]"
            )));
        }
        Self::custom(
            format!("clamped_cir(alpha={alpha},sigma0={sigma0},c=[{c_lo},{c_hi}])"),
            RealMap::Affine { slope: alpha - 1.0, intercept: 0.0 },
            RealMap::ClampedSqrtVol { sigma0, c_lo, c_hi },
            NoiseSpec::standard_gaussian(),
            0.0,
        )
    }

    /// Constant-drift random walk: `mu(x) = m`, unit volatility, standard
    /// Gaussian noise. Deliberately not mean-reverting; audits report that
    /// rather than the constructor rejecting it.
    pub fn drifted_walk(m: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidModel(format!("drift must be finite, got {m}")));
        }
        Self::custom(
            format!("drifted_walk(m={m})"),
            RealMap::constant(m),
            RealMap::constant(1.0),
            NoiseSpec::standard_gaussian(),
            0.0,
        )
    }

    /// Model from explicit drift and volatility profiles.
    ///
    /// The noise centering shift `m` is absorbed here: the effective drift
    /// becomes `mu(x) + sigma(x) * m` and the recorded shift is kept as
    /// metadata. Volatility must be strictly positive across the audit
    /// grid.
    pub fn custom(
        name: impl Into<String>,
        drift: RealMap,
        vol: RealMap,
        noise: NoiseSpec,
        x0: f64,
    ) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::InvalidModel(format!("start state must be finite, got {x0}")));
        }
        for i in 0..AUDIT_GRID_POINTS {
            let x = audit_grid_point(i);
            let s = vol.eval(x);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "volatility must be positive on the audit grid; sigma({x}) = {s}"
                )));
            }
        }
        let vol_bound = vol.global_sup();
        let center_shift = noise.center_shift();
        Ok(Self { name: name.into(), drift, vol, noise, x0, center_shift, vol_bound })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Replace the start state, keeping everything else.
    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::InvalidModel(format!("start state must be finite, got {x0}")));
        }
        self.x0 = x0;
        Ok(self)
    }

    /// Mean shift absorbed into the drift at construction.
    pub fn center_shift(&self) -> f64 {
        self.center_shift
    }

    /// Global volatility supremum when derivable; infinity marks profiles
    /// whose declared form is unbounded.
    pub fn vol_bound(&self) -> f64 {
        self.vol_bound
    }

    /// Effective drift, including any absorbed noise mean.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        let base = self.drift.eval(x);
        if self.center_shift == 0.0 {
            base
        } else {
            base + self.vol.eval(x) * self.center_shift
        }
    }

    /// Volatility at `x`.
    #[inline]
    pub fn vol(&self, x: f64) -> f64 {
        self.vol.eval(x)
    }

    /// One transition: `x + mu(x) + sigma(x) * eps`.
    #[inline]
    pub fn step(&self, x: f64, eps: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteState { x, context: "step input" });
        }
        let y = x + self.drift(x) + self.vol(x) * eps;
        if !y.is_finite() {
            return Err(Error::NonFiniteState { x, context: "step output" });
        }
        Ok(y)
    }

    /// Price level `exp(x)`, with the range failures made explicit.
    pub fn price(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteState { x, context: "price" });
        }
        if x > PRICE_OVERFLOW_X {
            return Err(Error::PriceOverflow { x });
        }
        if x < PRICE_UNDERFLOW_X {
            return Err(Error::PriceUnderflow { x });
        }
        Ok(x.exp())
    }

    /// One-step transition density `p(x, y)`:
    /// `gamma((y - x - mu(x)) / sigma(x)) / sigma(x)`.
    pub fn transition_density(&self, x: f64, y: f64) -> Result<f64> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFiniteState { x, context: "transition density" });
        }
        let s = self.vol(x);
        let arg = (y - x - self.drift(x)) / s;
        Ok(self.noise.density(arg)? / s)
    }
}

/// Point `i` of the construction-time audit grid.
fn audit_grid_point(i: usize) -> f64 {
    let step = 2.0 * AUDIT_X_MAX / (AUDIT_GRID_POINTS - 1) as f64;
    -AUDIT_X_MAX + step * i as f64
}
