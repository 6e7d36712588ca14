//! Monte Carlo estimation of `w(b)` and of where the exceedance happens.
//!
//! The tilted estimator samples from the excursion measure `Q_zeta` over the
//! whole domain: a node is chosen with trapezoid weights, the field there is
//! drawn above `zeta`, and the rest of the path follows the pinned law. The
//! weight is `mes(domain) P(Z > zeta) / mes{xi > zeta}`. Since
//! `|v'| <= e^{sigma max xi} osc F`, every path with `max |v'| > b` has
//! `max xi > zeta*(b) = (ln b - ln osc F) / sigma`, so for `zeta <= zeta*(b)`
//! the estimator is unbiased.
//!
//! Draw `i` always uses the sub-seed `sub_seed(seed, i)`, and partial sums
//! are reduced over fixed-size chunks in index order, so results do not
//! depend on the number of worker threads.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{approximate_tail, ApproxOptions};
use crate::error::{Error, Result};
use crate::field::{rng_from_seed, sub_seed, FieldSampler, Grid, PathSample, SampleMethod, TiltRegion};
use crate::solver::{ForcingCase, ProblemSpec, StrainEvaluator};

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Direct,
    Tilted,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(EstimatorKind::Direct),
            "tilted" => Ok(EstimatorKind::Tilted),
            other => Err(Error::InvalidInput(format!("unknown method '{other}' (expected direct or tilted)"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::Tilted => "tilted",
        })
    }
}

/// Monte Carlo estimate of `P(max |v'| > b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    /// Sample standard deviation of the weighted indicators over `sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
    pub method: EstimatorKind,
    pub b: f64,
    /// Number of grid intervals.
    pub grid_n: usize,
    /// Tilt level, when tilted.
    pub zeta: Option<f64>,
    /// Draws with `max |v'| > b`.
    pub hits: usize,
}

impl TailEstimate {
    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.p_hat
    }
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    strain: f64,
    argmax: usize,
    log_weight: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    w: f64,
    w2: f64,
    hits: usize,
}

impl Sums {
    fn add(self, o: Sums) -> Sums {
        Sums { w: self.w + o.w, w2: self.w2 + o.w2, hits: self.hits + o.hits }
    }
}

/// Chunk totals plus the exceeding draws as `(index, argmax node, weight)`.
type ChunkSums = (Sums, Vec<(u64, usize, f64)>);

/// Sampler, strain evaluator and tilt region for one problem at one grid
/// resolution.
#[derive(Debug, Clone)]
pub struct Simulation {
    spec: ProblemSpec,
    sampler: FieldSampler,
    eval: StrainEvaluator,
    region: TiltRegion,
    grid_n: usize,
}

impl Simulation {
    pub fn new(spec: &ProblemSpec, grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidGrid(format!("grid_n must be at least 2, got {grid_n}")));
        }
        let grid = Grid::uniform(spec.length, grid_n)?;
        let sampler = FieldSampler::new(&spec.kernel, grid)?;
        let eval = StrainEvaluator::new(spec, Arc::clone(sampler.grid()))?;
        let region = TiltRegion::new(sampler.grid(), (0.0, spec.length))?;
        Ok(Self { spec: spec.clone(), sampler, eval, region, grid_n })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.sampler.grid()
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Largest tilt level keeping the tilted estimator unbiased at `b`,
    /// from the envelope `|v'| <= e^{sigma max xi} osc F` with `osc F` taken
    /// over the grid nodes the strain is evaluated on.
    pub fn envelope_zeta(&self, b: f64) -> f64 {
        let osc = self.eval.f_oscillation();
        if self.spec.sigma == 0.0 || osc == 0.0 {
            return f64::INFINITY;
        }
        if b <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (b.ln() - osc.ln()) / self.spec.sigma
    }

    fn draw(&self, seed: u64, index: u64, zeta: Option<f64>, buf: &mut [f64]) -> Result<Draw> {
        let mut rng = rng_from_seed(sub_seed(seed, index));
        let log_weight = match zeta {
            None => {
                self.sampler.draw_into(&mut rng, buf);
                0.0
            }
            Some(z) => {
                self.sampler.draw_tilted_into(&mut rng, &self.region, z, buf);
                self.region.log_likelihood_ratio(buf, z)?
            }
        };
        let (strain, argmax) = self.eval.max_abs_strain_index(buf);
        Ok(Draw { strain, argmax, log_weight })
    }

    /// The path of draw `index`, as used by the estimators.
    pub fn replay(&self, seed: u64, index: u64, zeta: Option<f64>) -> Result<PathSample> {
        let mut values = vec![0.0; self.grid().len()];
        let d = self.draw(seed, index, zeta, &mut values)?;
        Ok(PathSample {
            grid: Arc::clone(self.grid()),
            values,
            seed: sub_seed(seed, index),
            method: if zeta.is_some() { SampleMethod::ExcursionTilted } else { SampleMethod::Direct },
            log_likelihood_ratio: d.log_weight,
            tau: None,
        })
    }

    /// Runs `n` draws. With `keep`, `visit` sees every exceeding draw as
    /// `(index, argmax node, weight)` in index order.
    fn run<V: FnMut(u64, usize, f64)>(
        &self,
        b: f64,
        n: usize,
        seed: u64,
        zeta: Option<f64>,
        keep: bool,
        mut visit: V,
    ) -> Result<Sums> {
        let n = n as u64;
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Result<ChunkSums>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut buf = vec![0.0; self.grid().len()];
                let mut s = Sums::default();
                let mut hits = Vec::new();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let d = self.draw(seed, i, zeta, &mut buf)?;
                    if d.strain > b {
                        let w = d.log_weight.exp();
                        s.w += w;
                        s.w2 += w * w;
                        s.hits += 1;
                        if keep {
                            hits.push((i, d.argmax, w));
                        }
                    }
                }
                Ok((s, hits))
            })
            .collect();
        let mut total = Sums::default();
        for part in parts {
            let (s, hits) = part?;
            total = total.add(s);
            for (i, k, w) in hits {
                visit(i, k, w);
            }
        }
        Ok(total)
    }

    fn estimate(&self, b: f64, n: usize, seed: u64, zeta: Option<f64>) -> Result<TailEstimate> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if b.is_nan() {
            return Err(Error::InvalidInput("threshold b is NaN".into()));
        }
        let s = self.run(b, n, seed, zeta, false, |_, _, _| {})?;
        Ok(finish(s, n, b, self.grid_n, zeta))
    }

    pub fn direct(&self, b: f64, n: usize, seed: u64) -> Result<TailEstimate> {
        self.estimate(b, n, seed, None)
    }

    /// Tilted estimate at `zeta` (default `zeta*(b)`). A level above
    /// `zeta*(b)` is rejected; `-inf` and `sigma = 0` fall back to the direct
    /// estimator.
    pub fn tilted(&self, b: f64, n: usize, seed: u64, zeta: Option<f64>) -> Result<TailEstimate> {
        let z = self.resolve_zeta(b, zeta)?;
        match z {
            Some(z) if z == f64::INFINITY => {
                // b = inf, or no strain at all
                if n == 0 {
                    return Err(Error::InvalidInput("n must be at least 1".into()));
                }
                Ok(finish(Sums::default(), n, b, self.grid_n, Some(z)))
            }
            z => self.estimate(b, n, seed, z),
        }
    }

    /// `None` means direct sampling.
    fn resolve_zeta(&self, b: f64, zeta: Option<f64>) -> Result<Option<f64>> {
        if self.spec.sigma == 0.0 {
            return Ok(None);
        }
        let envelope = self.envelope_zeta(b);
        let z = match zeta {
            Some(z) if z.is_nan() => return Err(Error::InvalidInput("tilt level is NaN".into())),
            Some(z) if z > envelope => return Err(Error::ZetaAboveEnvelope { zeta: z, envelope }),
            Some(z) => z,
            None => envelope,
        };
        Ok(if z == f64::NEG_INFINITY { None } else { Some(z) })
    }

    pub fn estimate_with(
        &self,
        method: EstimatorKind,
        b: f64,
        n: usize,
        seed: u64,
        zeta: Option<f64>,
    ) -> Result<TailEstimate> {
        match method {
            EstimatorKind::Direct => self.direct(b, n, seed),
            EstimatorKind::Tilted => self.tilted(b, n, seed, zeta),
        }
    }

    /// Weighted histogram of the arg-max location given exceedance.
    pub fn locate(&self, b: f64, n: usize, seed: u64, opts: &LocateOptions) -> Result<LocationHistogram> {
        if opts.bins == 0 {
            return Err(Error::InvalidInput("bins must be positive".into()));
        }
        let rho = opts.rho.unwrap_or(2.0 * self.spec.kernel.length_scale());
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
        }
        let zeta = match opts.method {
            EstimatorKind::Direct => None,
            EstimatorKind::Tilted => self.resolve_zeta(b, opts.zeta)?,
        };
        if zeta == Some(f64::INFINITY) {
            return Err(Error::NoExceedance { b, n });
        }
        let mut hits: Vec<(usize, f64)> = Vec::new();
        let sums = self.run(b, n, seed, zeta, true, |_, k, w| hits.push((k, w)))?;
        if sums.hits == 0 {
            return Err(Error::NoExceedance { b, n });
        }
        let estimate = finish(sums, n, b, self.grid_n, zeta);
        let pts = self.grid().points();
        let l = self.spec.length;
        let x_stars: Vec<f64> = if self.spec.forcing.case() == ForcingCase::Constant {
            Vec::new()
        } else {
            self.spec.forcing.x_stars().to_vec()
        };

        let mut masses = vec![0.0; opts.bins];
        // per-hit indicator rows: left, right, near x*, near any
        let mut rows: Vec<(f64, [f64; 4])> = Vec::with_capacity(hits.len());
        for &(k, w) in &hits {
            let x = pts[k];
            let bin = ((x / l * opts.bins as f64) as usize).min(opts.bins - 1);
            masses[bin] += w;
            let left = (x <= rho) as u8 as f64;
            let right = (x >= l - rho) as u8 as f64;
            let star = x_stars.iter().any(|s| (x - s).abs() <= rho) as u8 as f64;
            let any = (left + right + star > 0.0) as u8 as f64;
            rows.push((w, [left, right, star, any]));
        }
        let total: f64 = sums.w;
        masses.iter_mut().for_each(|m| *m /= total);
        let ratio = |f: &dyn Fn(&[f64; 4]) -> f64| -> (f64, f64) {
            // ratio estimator sum(w f) / sum(w) over n draws, delta-method error
            let est = rows.iter().map(|(w, r)| w * f(r)).sum::<f64>() / total;
            let nf = n as f64;
            let mean_w = total / nf;
            let var = rows.iter().map(|(w, r)| (w * (f(r) - est)).powi(2)).sum::<f64>() / nf;
            (est, (var / nf).sqrt() / mean_w)
        };
        let (mass_left, _) = ratio(&|r| r[0]);
        let (mass_right, _) = ratio(&|r| r[1]);
        let (mass_near_x_star, _) = ratio(&|r| r[2]);
        let (mass_near, mass_near_stderr) = ratio(&|r| r[3]);
        let (diff, diff_stderr) = ratio(&|r| r[0] - r[1]);
        let edges = (0..=opts.bins).map(|i| l * i as f64 / opts.bins as f64).collect();
        Ok(LocationHistogram {
            b,
            n,
            grid_n: self.grid_n,
            method: if zeta.is_some() { EstimatorKind::Tilted } else { EstimatorKind::Direct },
            zeta,
            hits: sums.hits,
            p_hat: estimate.p_hat,
            stderr: estimate.stderr,
            rho,
            x_stars,
            edges,
            masses,
            mass_left,
            mass_right,
            mass_near_x_star,
            mass_near_ends_and_xstar: mass_near,
            mass_near_stderr,
            left_minus_right: diff,
            left_minus_right_stderr: diff_stderr,
        })
    }
}

fn finish(s: Sums, n: usize, b: f64, grid_n: usize, zeta: Option<f64>) -> TailEstimate {
    let nf = n as f64;
    let p_hat = s.w / nf;
    let stderr = if n > 1 { ((s.w2 - nf * p_hat * p_hat).max(0.0) / (nf - 1.0)).sqrt() / nf.sqrt() } else { 0.0 };
    TailEstimate {
        p_hat,
        stderr,
        n,
        method: if zeta.is_some() { EstimatorKind::Tilted } else { EstimatorKind::Direct },
        b,
        grid_n,
        zeta,
        hits: s.hits,
    }
}

/// Direct Monte Carlo estimate of `P(max |v'| > b)` over `n` paths on a grid
/// of `grid_n` intervals.
pub fn mc_direct(spec: &ProblemSpec, b: f64, n: usize, grid_n: usize, seed: u64) -> Result<TailEstimate> {
    Simulation::new(spec, grid_n)?.direct(b, n, seed)
}

/// Importance-sampled estimate under the excursion measure at `zeta`
/// (default `zeta*(b)`).
pub fn mc_tilted(
    spec: &ProblemSpec,
    b: f64,
    n: usize,
    grid_n: usize,
    seed: u64,
    zeta: Option<f64>,
) -> Result<TailEstimate> {
    Simulation::new(spec, grid_n)?.tilted(b, n, seed, zeta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocateOptions {
    /// Neighbourhood radius; defaults to two kernel length scales.
    pub rho: Option<f64>,
    pub bins: usize,
    pub method: EstimatorKind,
    pub zeta: Option<f64>,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self { rho: None, bins: 50, method: EstimatorKind::Tilted, zeta: None }
    }
}

/// Conditional law of the arg-max of `|v'|` given exceedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationHistogram {
    pub b: f64,
    pub n: usize,
    pub grid_n: usize,
    pub method: EstimatorKind,
    pub zeta: Option<f64>,
    pub hits: usize,
    pub p_hat: f64,
    pub stderr: f64,
    pub rho: f64,
    pub x_stars: Vec<f64>,
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    /// Mass within `rho` of `x = 0`.
    pub mass_left: f64,
    /// Mass within `rho` of `x = L`.
    pub mass_right: f64,
    pub mass_near_x_star: f64,
    /// Mass within `rho` of `{0, x*, L}` (`x*` omitted for constant forcing).
    pub mass_near_ends_and_xstar: f64,
    pub mass_near_stderr: f64,
    pub left_minus_right: f64,
    pub left_minus_right_stderr: f64,
}

impl LocationHistogram {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,mass")?;
        for (i, m) in self.masses.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], m)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histogram serializes")
    }
}

pub fn location_histogram(
    spec: &ProblemSpec,
    b: f64,
    n: usize,
    grid_n: usize,
    seed: u64,
    opts: &LocateOptions,
) -> Result<LocationHistogram> {
    Simulation::new(spec, grid_n)?.locate(b, n, seed, opts)
}

/// One row of the comparison table; `None` prints as `NA`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub b: f64,
    pub method: EstimatorKind,
    pub p_hat: f64,
    pub stderr: f64,
    pub approx_total: Option<f64>,
    pub term_interior: Option<f64>,
    pub term_left: Option<f64>,
    pub term_right: Option<f64>,
    /// `approx_total / p_hat`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareOptions {
    pub method: Option<EstimatorKind>,
    pub approx: ApproxOptions,
}

/// Monte Carlo against the approximation at each threshold. Every row uses
/// the same master seed.
pub fn compare(
    spec: &ProblemSpec,
    b_list: &[f64],
    n: usize,
    grid_n: usize,
    seed: u64,
    opts: CompareOptions,
) -> Result<Vec<CompareRow>> {
    if b_list.is_empty() {
        return Err(Error::InvalidInput("b_list is empty".into()));
    }
    if b_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("b_list must be strictly increasing".into()));
    }
    let sim = Simulation::new(spec, grid_n)?;
    let method = opts.method.unwrap_or(EstimatorKind::Tilted);
    let mut rows = Vec::with_capacity(b_list.len());
    for &b in b_list {
        let est = sim.estimate_with(method, b, n, seed, None)?;
        let approx = if spec.sigma == 0.0 { None } else { Some(approximate_tail(b, spec, opts.approx)?) };
        let ratio = approx.as_ref().filter(|_| est.p_hat > 0.0).map(|a| a.total / est.p_hat);
        rows.push(CompareRow {
            b,
            method: est.method,
            p_hat: est.p_hat,
            stderr: est.stderr,
            approx_total: approx.as_ref().map(|a| a.total),
            term_interior: approx.as_ref().map(|a| a.term_interior),
            term_left: approx.as_ref().map(|a| a.term_left),
            term_right: approx.as_ref().map(|a| a.term_right),
            ratio,
        });
    }
    Ok(rows)
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], mut out: W) -> std::io::Result<()> {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    writeln!(out, "b,method,p_hat,stderr,approx_total,term_interior,term_left,term_right,ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.b,
            r.method,
            r.p_hat,
            r.stderr,
            na(r.approx_total),
            na(r.term_interior),
            na(r.term_left),
            na(r.term_right),
            na(r.ratio)
        )?;
    }
    Ok(())
}
