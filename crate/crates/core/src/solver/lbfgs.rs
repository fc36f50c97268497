//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion for the search direction (Nocedal & Wright,
//! Algorithm 7.4), bracketing plus zoom with safeguarded cubic
//! interpolation for the step (Algorithms 3.5 and 3.6). Trial points where
//! the objective is not finite are treated as overshooting, so the step
//! shrinks back into the region where the objective is defined.

use std::collections::VecDeque;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerConfig {
    /// Stop when `‖∇f‖∞` falls to this value.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step lowers `f` by at most this fraction of `|f|`.
    pub function_tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Number of correction pairs kept.
    pub history: usize,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-9,
            function_tolerance: 1e-10,
            max_iterations: 5000,
            c1: 1e-4,
            c2: 0.9,
            history: 10,
            max_line_search: 40,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!(
                "line search needs 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.max_iterations == 0 || self.history == 0 || self.max_line_search == 0 {
            return Err(Error::Config("iteration counts and history size must be positive".into()));
        }
        if !(self.gradient_tolerance >= 0.0) || !(self.function_tolerance >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizerStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No acceptable step along the search direction; the current point is
    /// the best one found.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: MinimizerStatus,
}

impl Minimum {
    pub fn gradient_max_norm(&self) -> f64 {
        max_norm(&self.gradient)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
    point: Vec<f64>,
    gradient: Vec<f64>,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    origin: &'a [f64],
    direction: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn probe(&mut self, alpha: f64) -> Probe {
        self.evaluations += 1;
        let point: Vec<f64> = self.origin.iter().zip(self.direction).map(|(x, d)| x + alpha * d).collect();
        let mut gradient = vec![0.0; point.len()];
        let mut value = (self.objective)(&point, &mut gradient);
        let mut slope = dot(&gradient, self.direction);
        if !value.is_finite() || !slope.is_finite() {
            value = f64::INFINITY;
            slope = f64::NAN;
        }
        Probe { alpha, value, slope, point, gradient }
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.value <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    /// Returns an accepted probe, or the best Armijo point when the budget
    /// runs out, or `None` if no step lowers the objective.
    fn run(mut self, first: f64) -> (Option<Probe>, usize) {
        let mut prev = Probe {
            alpha: 0.0,
            value: self.f0,
            slope: self.slope0,
            point: self.origin.to_vec(),
            gradient: Vec::new(),
        };
        let mut alpha = first;
        let mut first_probe = true;
        while self.evaluations < self.budget {
            let cur = self.probe(alpha);
            if !self.armijo(&cur) || (!first_probe && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return (Some(cur), self.evaluations);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            alpha = cur.alpha * 2.0;
            prev = cur;
            first_probe = false;
        }
        let best = (prev.alpha > 0.0).then_some(prev);
        (best, self.evaluations)
    }

    /// `lo` satisfies sufficient decrease and has the lowest value seen so
    /// far; the minimizer lies between `lo` and `hi`.
    fn zoom(mut self, mut lo: Probe, mut hi: Probe) -> (Option<Probe>, usize) {
        while self.evaluations < self.budget {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()) {
                break;
            }
            let alpha = if hi.value.is_finite() && hi.slope.is_finite() {
                let trial = cubic_minimizer(lo.alpha, lo.value, lo.slope, hi.alpha, hi.value, hi.slope);
                let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
                let margin = 0.1 * (b - a);
                match trial {
                    Some(t) if t > a + margin && t < b - margin => t,
                    _ => 0.5 * (lo.alpha + hi.alpha),
                }
            } else {
                // Non-finite at `hi`: back off geometrically towards `lo`.
                lo.alpha + 0.25 * width
            };
            let cur = self.probe(alpha);
            if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return (Some(cur), self.evaluations);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        let best = (lo.alpha > 0.0 && lo.value < self.f0).then_some(lo);
        (best, self.evaluations)
    }
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`.
fn cubic_minimizer(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * ((gb + d2 - d1) / (gb - ga + 2.0 * d2));
    t.is_finite().then_some(t)
}

/// Minimizes a smooth objective from `start`.
///
/// `objective(x, grad)` returns `f(x)` and writes `∇f(x)` into `grad`. It
/// may return a non-finite value away from `start`; the line search then
/// shortens the step. The returned point never has a higher value than
/// `start`.
pub fn minimize_smooth<F>(mut objective: F, start: &[f64], config: &MinimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    config.validate()?;
    let n = start.len();
    let mut x = start.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Minimizer(format!("objective is not finite at the start point (f = {f})")));
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history);
    let mut alpha_buf = vec![0.0; config.history];
    let mut direction = vec![0.0; n];
    let finish = |x, f, g, iterations, evaluations, status| Minimum {
        point: x,
        value: f,
        gradient: g,
        iterations,
        evaluations,
        status,
    };

    for iteration in 0..config.max_iterations {
        if max_norm(&g) <= config.gradient_tolerance {
            return Ok(finish(x, f, g, iteration, evaluations, MinimizerStatus::GradientTolerance));
        }

        // Two-loop recursion: direction = −H g.
        direction.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
        for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &direction);
            alpha_buf[k] = a;
            direction.iter_mut().zip(y).for_each(|(d, yv)| *d -= a * yv);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            direction.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &direction);
            let a = alpha_buf[k];
            direction.iter_mut().zip(s).for_each(|(d, sv)| *d += (a - b) * sv);
        }

        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            pairs.clear();
            direction.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
            slope = -dot(&g, &g);
        }
        let first_step = if pairs.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let search = LineSearch {
            objective: &mut objective,
            origin: &x,
            direction: &direction,
            f0: f,
            slope0: slope,
            c1: config.c1,
            c2: config.c2,
            budget: config.max_line_search,
            evaluations: 0,
        };
        let (accepted, used) = search.run(first_step);
        evaluations += used;
        let Some(step) = accepted else {
            if !pairs.is_empty() {
                // Retry from steepest descent before giving up.
                pairs.clear();
                continue;
            }
            return Ok(finish(x, f, g, iteration, evaluations, MinimizerStatus::LineSearchFailed));
        };

        let s: Vec<f64> = step.point.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y) {
            if pairs.len() == config.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let decrease = f - step.value;
        x = step.point;
        g = step.gradient;
        let scale = f.abs().max(step.value.abs());
        f = step.value;
        if max_norm(&g) <= config.gradient_tolerance {
            return Ok(finish(x, f, g, iteration + 1, evaluations, MinimizerStatus::GradientTolerance));
        }
        if decrease <= config.function_tolerance * scale {
            return Ok(finish(x, f, g, iteration + 1, evaluations, MinimizerStatus::FunctionTolerance));
        }
    }
    Ok(finish(x, f, g, config.max_iterations, evaluations, MinimizerStatus::MaxIterations))
}
