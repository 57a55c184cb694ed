//! Trust-region nonlinear least squares for power-law learning trends.
//!
//! The solver is a scaled trust-region method in the Levenberg-Marquardt
//! family: each iteration solves the damped linearized problem
//! `min |J d + r|` subject to `|D d| <= radius`, where `D` holds the running
//! maxima of the Jacobian column norms. The damping that puts the step on the
//! trust-region boundary is found by bisection in log space, and every
//! subproblem is solved by Householder QR so the normal equations are never
//! formed.
//!
//! Internally the amplitude is expressed relative to a reference size
//! `x_ref` (the geometric mean of the fitted positions): the curve is
//! `-A (x / x_ref)^(-b) + c` with `a = A x_ref^b`. This keeps the three
//! Jacobian columns on comparable scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{canonical_stream, Observation};
use crate::pattern::PowerLawParams;

/// Minimum number of points that determines a power-law curve.
pub const MIN_FIT_POINTS: usize = 3;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Cap on trust-region iterations, accepted or not.
    pub max_iterations: u32,
    /// Relative tolerance on the residual sum of squares: the fit has
    /// converged once both the actual and the predicted reduction of an
    /// iteration fall below `residual_tolerance * rss`.
    pub residual_tolerance: f64,
    /// Relative tolerance on the scaled step: the fit has converged once the
    /// trust radius drops below `step_tolerance * |D p|`.
    pub step_tolerance: f64,
    /// Initial trust radius, as a multiple of the scaled norm of the starting
    /// point.
    pub initial_trust_radius: f64,
    /// Lower bound enforced on `a` and `b`.
    pub parameter_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            residual_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_trust_radius: 1.0,
            parameter_floor: 1e-9,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.residual_tolerance > 0.0
            && self.step_tolerance > 0.0
            && self.initial_trust_radius > 0.0
            && self.parameter_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "fit settings must be strictly positive: {self:?}"
            )))
        }
    }
}

/// A power-law curve fitted to the first `level` observations of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTrend {
    pub params: PowerLawParams,
    /// Number of leading observations the curve was fitted on (at least 3).
    pub level: usize,
    /// Residual sum of squares at the returned parameters.
    pub rss: f64,
    pub converged: bool,
    pub iterations: u32,
}

impl PowerLawTrend {
    pub fn asymptote(&self) -> f64 {
        self.params.c
    }
}

/// Exponents scanned by [`initial_guess`], log-spaced over `[0.02, 3]`.
const GUESS_EXPONENTS: usize = 64;

/// Starting point for the solver. For a fixed exponent the curve is linear
/// in `a` and `c`, so every exponent of a log-spaced scan gets its exact
/// least-squares `(a, c)` and the scan's best point with `a > 0` is
/// returned. When no exponent yields an increasing curve the guess falls
/// back to `c0` one point above the best observed accuracy, `b0 = 0.5`, and
/// `a0` chosen so the curve passes through the first observation.
pub fn initial_guess(observations: &[Observation]) -> Result<PowerLawParams> {
    initial_guess_with_floor(observations, FitConfig::default().parameter_floor)
}

pub fn initial_guess_with_floor(observations: &[Observation], floor: f64) -> Result<PowerLawParams> {
    if observations.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: observations.len(),
        });
    }
    if observations.iter().any(|o| o.x == 0) {
        return Err(Error::domain("word positions must be > 0"));
    }
    if let Some(p) = profile_scan(observations, floor) {
        return Ok(p);
    }
    let first = observations.iter().min_by_key(|o| o.x).expect("non-empty");
    let max_acc = observations
        .iter()
        .map(|o| o.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = max_acc + 1.0;
    let b = 0.5f64.max(floor);
    let a = ((c - first.accuracy) * (first.x as f64).powf(b)).max(floor);
    Ok(PowerLawParams { a, b, c })
}

fn profile_scan(observations: &[Observation], floor: f64) -> Option<PowerLawParams> {
    let n = observations.len() as f64;
    let (lo, hi) = (0.02f64.ln(), 3f64.ln());
    let mut best: Option<(f64, PowerLawParams)> = None;
    for k in 0..GUESS_EXPONENTS {
        let b = (lo + (hi - lo) * k as f64 / (GUESS_EXPONENTS - 1) as f64)
            .exp()
            .max(floor);
        let u: Vec<f64> = observations.iter().map(|o| (o.x as f64).powf(-b)).collect();
        let mu = u.iter().sum::<f64>() / n;
        let my = observations.iter().map(|o| o.accuracy).sum::<f64>() / n;
        let (mut suu, mut suy) = (0.0, 0.0);
        for (ui, o) in u.iter().zip(observations) {
            suu += (ui - mu) * (ui - mu);
            suy += (ui - mu) * (o.accuracy - my);
        }
        if suu <= 0.0 || !suu.is_finite() {
            continue;
        }
        // y = c - a u
        let a = -suy / suu;
        if a <= floor || !a.is_finite() {
            continue;
        }
        let c = my + a * mu;
        let rss: f64 = u
            .iter()
            .zip(observations)
            .map(|(ui, o)| (o.accuracy - (c - a * ui)).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(r, _)| rss < *r) {
            best = Some((rss, PowerLawParams { a, b, c }));
        }
    }
    best.map(|(_, p)| p)
}

/// Fits the trend of `level` over the first `level` observations, starting
/// from [`initial_guess`].
///
/// Fold-labelled input is averaged per word position first. A fit that
/// exhausts its iteration budget is returned with `converged = false`.
pub fn fit_trend(observations: &[Observation], level: usize, config: &FitConfig) -> Result<PowerLawTrend> {
    let prefix = prepare(observations, level, config)?;
    let start = initial_guess_with_floor(&prefix, config.parameter_floor)?;
    Ok(solve(&prefix, start, config).trend(level))
}

/// Same as [`fit_trend`] but starting from caller-supplied parameters.
pub fn fit_trend_from(
    observations: &[Observation],
    level: usize,
    start: PowerLawParams,
    config: &FitConfig,
) -> Result<PowerLawTrend> {
    let prefix = prepare(observations, level, config)?;
    Ok(solve(&prefix, clamp(start, config.parameter_floor), config).trend(level))
}

/// Runs [`fit_trend`] and also returns the residual sum of squares after the
/// start and after every accepted step.
pub fn fit_trend_with_history(
    observations: &[Observation],
    level: usize,
    config: &FitConfig,
) -> Result<(PowerLawTrend, Vec<f64>)> {
    let prefix = prepare(observations, level, config)?;
    let start = initial_guess_with_floor(&prefix, config.parameter_floor)?;
    let out = solve(&prefix, start, config);
    let history = out.history.clone();
    Ok((out.trend(level), history))
}

fn prepare(observations: &[Observation], level: usize, config: &FitConfig) -> Result<Vec<Observation>> {
    config.validate()?;
    if level < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: level,
        });
    }
    let stream = canonical_stream(observations)?;
    if stream.len() < level {
        return Err(Error::InsufficientData {
            needed: level,
            got: stream.len(),
        });
    }
    Ok(stream[..level].to_vec())
}

fn clamp(p: PowerLawParams, floor: f64) -> PowerLawParams {
    PowerLawParams {
        a: p.a.max(floor),
        b: p.b.max(floor),
        c: p.c,
    }
}

struct Outcome {
    params: PowerLawParams,
    rss: f64,
    converged: bool,
    iterations: u32,
    history: Vec<f64>,
}

impl Outcome {
    fn trend(self, level: usize) -> PowerLawTrend {
        PowerLawTrend {
            params: self.params,
            level,
            rss: self.rss,
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Least-squares problem in the internal `(A, b, c)` parameterization.
struct Problem {
    /// `ln(x / x_ref)` per point.
    log_u: Vec<f64>,
    y: Vec<f64>,
    log_ref: f64,
    floor: f64,
}

impl Problem {
    fn new(points: &[Observation], floor: f64) -> Self {
        let logs: Vec<f64> = points.iter().map(|o| (o.x as f64).ln()).collect();
        let log_ref = logs.iter().sum::<f64>() / logs.len() as f64;
        Problem {
            log_u: logs.iter().map(|l| l - log_ref).collect(),
            y: points.iter().map(|o| o.accuracy).collect(),
            log_ref,
            floor,
        }
    }

    fn to_internal(&self, p: PowerLawParams) -> [f64; 3] {
        [p.a * (-p.b * self.log_ref).exp(), p.b, p.c]
    }

    fn to_external(&self, t: [f64; 3]) -> PowerLawParams {
        PowerLawParams {
            a: t[0] * (t[1] * self.log_ref).exp(),
            b: t[1],
            c: t[2],
        }
    }

    /// Keeps `a >= floor` and `b >= floor` in external terms.
    fn project(&self, mut t: [f64; 3]) -> [f64; 3] {
        t[1] = t[1].max(self.floor);
        let min_amp = self.floor * (-t[1] * self.log_ref).exp();
        t[0] = t[0].max(min_amp);
        t
    }

    fn residuals(&self, t: &[f64; 3], out: &mut [f64]) -> f64 {
        let mut rss = 0.0;
        for ((r, &lu), &y) in out.iter_mut().zip(&self.log_u).zip(&self.y) {
            *r = -t[0] * (-t[1] * lu).exp() + t[2] - y;
            rss += *r * *r;
        }
        rss
    }

    fn jacobian(&self, t: &[f64; 3], out: &mut [[f64; 3]]) {
        for (row, &lu) in out.iter_mut().zip(&self.log_u) {
            let decay = (-t[1] * lu).exp();
            *row = [-decay, t[0] * decay * lu, 1.0];
        }
    }
}

fn solve(points: &[Observation], start: PowerLawParams, config: &FitConfig) -> Outcome {
    let n = points.len();
    let problem = Problem::new(points, config.parameter_floor);
    let mut theta = problem.project(problem.to_internal(start));
    let mut r = vec![0.0; n];
    let mut rss = problem.residuals(&theta, &mut r);
    let mut jac = vec![[0.0; 3]; n];
    let mut history = vec![rss];

    let mut scale = [0.0f64; 3];
    let mut radius = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut need_jacobian = true;
    let mut r_trial = vec![0.0; n];

    while iterations < config.max_iterations {
        if rss == 0.0 || !rss.is_finite() {
            converged = rss == 0.0;
            break;
        }
        if need_jacobian {
            problem.jacobian(&theta, &mut jac);
            for j in 0..3 {
                let norm = jac.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
                scale[j] = scale[j].max(norm);
                if scale[j] == 0.0 {
                    scale[j] = 1.0;
                }
            }
            if iterations == 0 {
                let dp = scaled_norm(&scale, &theta);
                radius = config.initial_trust_radius * if dp > 0.0 { dp } else { 1.0 };
            }
            need_jacobian = false;
        }
        iterations += 1;

        let step = trust_region_step(&jac, &r, &scale, radius);
        let trial = problem.project(add(&theta, &step));
        let delta = sub(&trial, &theta);
        let step_norm = scaled_norm(&scale, &delta);

        let linear_rss: f64 = jac
            .iter()
            .zip(&r)
            .map(|(row, &ri)| {
                let v = ri + row[0] * delta[0] + row[1] * delta[1] + row[2] * delta[2];
                v * v
            })
            .sum();
        let predicted = rss - linear_rss;
        let trial_rss = problem.residuals(&trial, &mut r_trial);
        let actual = if trial_rss.is_finite() {
            rss - trial_rss
        } else {
            f64::NEG_INFINITY
        };
        let ratio = if predicted > 0.0 { actual / predicted } else { -1.0 };

        if ratio < 0.25 {
            radius = 0.25 * step_norm.min(radius);
        } else if ratio > 0.75 || step_norm >= 0.99 * radius {
            radius = radius.max(2.0 * step_norm);
        }

        let rss_before = rss;
        if ratio > 1e-4 && actual > 0.0 {
            theta = trial;
            std::mem::swap(&mut r, &mut r_trial);
            rss = trial_rss;
            history.push(rss);
            need_jacobian = true;
        }

        let tol = config.residual_tolerance * rss_before;
        if (actual.abs() <= tol && predicted.abs() <= tol && ratio <= 2.0) || rss == 0.0 {
            converged = true;
            break;
        }
        if radius <= config.step_tolerance * scaled_norm(&scale, &theta) {
            converged = true;
            break;
        }
    }

    Outcome {
        params: problem.to_external(theta),
        rss,
        converged,
        iterations,
        history,
    }
}

fn add(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scaled_norm(scale: &[f64; 3], v: &[f64; 3]) -> f64 {
    (0..3).map(|j| (scale[j] * v[j]).powi(2)).sum::<f64>().sqrt()
}

/// Step minimizing `|J d + r|` with `|D d| <= radius`.
fn trust_region_step(jac: &[[f64; 3]], r: &[f64], scale: &[f64; 3], radius: f64) -> [f64; 3] {
    if let Some(gn) = damped_step(jac, r, scale, 0.0) {
        if scaled_norm(scale, &gn) <= radius {
            return gn;
        }
    }
    // |D d(mu)| decreases with mu; bracket the boundary and bisect in log space.
    let grad: [f64; 3] = std::array::from_fn(|j| jac.iter().zip(r).map(|(row, &ri)| row[j] * ri).sum());
    let scaled_grad = (0..3).map(|j| (grad[j] / scale[j]).powi(2)).sum::<f64>().sqrt();
    let mut hi = (scaled_grad / radius).max(f64::MIN_POSITIVE);
    let mut lo = hi * 1e-20;
    let mut best = damped_step(jac, r, scale, hi).unwrap_or([0.0; 3]);
    for _ in 0..200 {
        let mu = (lo * hi).sqrt();
        let Some(step) = damped_step(jac, r, scale, mu) else {
            lo = mu;
            continue;
        };
        let norm = scaled_norm(scale, &step);
        if norm > radius {
            lo = mu;
        } else {
            hi = mu;
            best = step;
            if norm >= 0.9 * radius {
                break;
            }
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    best
}

/// Solves `min |[J; sqrt(mu) D] d + [r; 0]|` by Householder QR. Returns
/// `None` when the system is numerically rank deficient.
#[allow(clippy::needless_range_loop)]
fn damped_step(jac: &[[f64; 3]], r: &[f64], scale: &[f64; 3], mu: f64) -> Option<[f64; 3]> {
    let mut a: Vec<[f64; 3]> = jac.to_vec();
    let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    if mu > 0.0 {
        let s = mu.sqrt();
        for j in 0..3 {
            let mut row = [0.0; 3];
            row[j] = s * scale[j];
            a.push(row);
            rhs.push(0.0);
        }
    }
    let m = a.len();
    if m < 3 {
        return None;
    }
    let mut diag = [0.0f64; 3];
    for k in 0..3 {
        let norm = (k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..3 {
                let dot: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    a[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * rhs[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                rhs[i] -= f * v[i - k];
            }
        }
        diag[k] = a[k][k];
    }
    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= max_diag * 1e-14) {
        return None;
    }
    let mut x = [0.0f64; 3];
    for k in (0..3).rev() {
        let mut s = rhs[k];
        for j in k + 1..3 {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::AccuracyPattern;

    fn sample(p: PowerLawParams, xs: impl IntoIterator<Item = u64>) -> Vec<Observation> {
        xs.into_iter()
            .enumerate()
            .map(|(i, x)| Observation::new(i as u32 + 1, x, p.eval(x as f64).unwrap()))
            .collect()
    }

    #[test]
    fn guess_lands_on_scanned_exponent() {
        // b = 0.5 lies on no scan point exactly; the guess must still be the
        // closest scanned curve, far better than a blind start.
        let truth = PowerLawParams::new(30.0, 0.5, 95.0).unwrap();
        let obs = sample(truth, (1..=10).map(|i| 5000 * i));
        let g = initial_guess(&obs).unwrap();
        assert!((g.b - 0.5).abs() < 0.05, "{g:?}");
        assert!((g.c - 95.0).abs() < 0.05, "{g:?}");
    }

    #[test]
    fn guess_on_constant_observations() {
        let obs: Vec<_> = (1..=4).map(|i| Observation::new(i, 1000 * i as u64, 50.0)).collect();
        let g = initial_guess(&obs).unwrap();
        assert_eq!(g.c, 51.0);
        assert!((g.a - 1000f64.sqrt()).abs() < 1e-9);
        g.validate().unwrap();
    }

    #[test]
    fn recovers_noiseless_curve() {
        let truth = PowerLawParams::new(10.0, 0.5, 95.0).unwrap();
        let obs = sample(truth, (1..=10).map(|i| 5000 * i));
        let t = fit_trend(&obs, 10, &FitConfig::default()).unwrap();
        assert!(t.converged);
        for (got, want) in t.params.as_array().iter().zip(truth.as_array()) {
            assert!(((got - want) / want).abs() < 1e-6, "{:?}", t.params);
        }
    }

    #[test]
    fn three_points_interpolate() {
        let truth = PowerLawParams::new(120.0, 0.3, 97.0).unwrap();
        let obs = sample(truth, [5000, 10000, 15000]);
        let t = fit_trend(&obs, 3, &FitConfig::default()).unwrap();
        assert!(t.rss <= 1e-12, "{}", t.rss);
    }

    #[test]
    fn fits_only_the_prefix() {
        let truth = PowerLawParams::new(10.0, 0.5, 95.0).unwrap();
        let mut obs = sample(truth, (1..=6).map(|i| 5000 * i));
        for o in obs.iter_mut().skip(4) {
            o.accuracy = 10.0;
        }
        let t = fit_trend(&obs, 4, &FitConfig::default()).unwrap();
        assert_eq!(t.level, 4);
        assert!((t.params.c - 95.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_or_degenerate_input() {
        let cfg = FitConfig::default();
        let obs = vec![Observation::new(1, 10, 50.0), Observation::new(2, 20, 60.0)];
        assert!(matches!(fit_trend(&obs, 3, &cfg), Err(Error::InsufficientData { .. })));
        assert!(matches!(
            fit_trend(&obs, 2, &cfg),
            Err(Error::InsufficientData { needed: 3, .. })
        ));
        let dup = vec![
            Observation::new(1, 10, 50.0),
            Observation::new(2, 10, 60.0),
            Observation::new(3, 30, 70.0),
        ];
        assert!(matches!(fit_trend(&dup, 3, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn exhausted_budget_is_not_an_error() {
        let truth = PowerLawParams::new(200.0, 0.3, 99.0).unwrap();
        let obs = sample(truth, (1..=12).map(|i| 5000 * i));
        let cfg = FitConfig {
            max_iterations: 1,
            ..FitConfig::default()
        };
        let t = fit_trend(&obs, 12, &cfg).unwrap();
        assert!(!t.converged);
        assert_eq!(t.iterations, 1);
    }

    #[test]
    fn folds_are_averaged_before_fitting() {
        let truth = PowerLawParams::new(10.0, 0.5, 95.0).unwrap();
        let base = sample(truth, (1..=8).map(|i| 5000 * i));
        let mut obs = Vec::new();
        for (fold, shift) in [(1, 0.3), (2, -0.3)] {
            obs.extend(base.iter().map(|o| Observation {
                accuracy: o.accuracy + shift,
                fold: Some(fold),
                ..*o
            }));
        }
        let t = fit_trend(&obs, 8, &FitConfig::default()).unwrap();
        assert!((t.params.c - 95.0).abs() < 1e-6);
    }

    #[test]
    fn history_never_increases() {
        let truth = PowerLawParams::new(204.57, 0.307, 99.2).unwrap();
        let mut obs = sample(truth, (1..=30).map(|i| 5000 * i));
        for (i, o) in obs.iter_mut().enumerate() {
            o.accuracy += if i % 2 == 0 { 0.07 } else { -0.05 };
        }
        let (_, hist) = fit_trend_with_history(&obs, 30, &FitConfig::default()).unwrap();
        assert!(hist.len() > 1);
        for w in hist.windows(2) {
            assert!(w[1] <= w[0], "{hist:?}");
        }
    }
}
