//! (μ/μ_w, λ)-CMA-ES with rank-one and rank-μ covariance updates and
//! cumulative step-size adaptation.
//!
//! The optimizer is split into [`CmaState::ask`] and [`CmaState::tell`] so
//! callers can evaluate a population however they like; [`minimize`] is the
//! plain sequential loop over that pair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Non-finite candidates are resampled at most this many times.
pub const MAX_RESAMPLES: usize = 10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CmaError {
    #[error("invalid CMA-ES configuration: {0}")]
    Config(String),
    #[error("tell called without a pending ask")]
    NoPendingAsk,
    #[error("tell received {found} fitness values for {expected} candidates")]
    FitnessCount { expected: usize, found: usize },
    #[error("tell received candidates that differ from the last ask")]
    CandidateMismatch,
}

#[derive(Debug, Clone)]
pub struct CmaConfig {
    pub x0: Vec<f64>,
    pub sigma0: f64,
    /// Defaults to `4 + floor(3 ln n)`.
    pub population: Option<usize>,
    pub max_evaluations: usize,
    /// Stop once the best fitness is at or below this value.
    pub target: f64,
    /// Stop once `sigma * max eigenvalue of C` drops below this value.
    pub tol_sigma: f64,
    pub seed: u64,
}

impl CmaConfig {
    pub fn new(x0: Vec<f64>, sigma0: f64, seed: u64) -> Self {
        CmaConfig {
            x0,
            sigma0,
            population: None,
            max_evaluations: 100_000,
            target: f64::NEG_INFINITY,
            tol_sigma: 1e-12,
            seed,
        }
    }

    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    pub fn population_size(&self) -> usize {
        self.population
            .unwrap_or_else(|| default_population(self.dimension()))
    }
}

pub fn default_population(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    MaxEvaluations,
    SigmaTolerance,
    /// Covariance lost positive definiteness; the best-ever point is kept.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct CmaOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
    pub generations: usize,
    /// Best-ever fitness after each generation.
    pub history: Vec<f64>,
    pub termination: Termination,
}

/// Strategy parameters fixed at construction.
#[derive(Debug, Clone)]
struct Params {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Params {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    /// Steps `y = B D z` with `x = mean + sigma * y`.
    steps: Vec<DVector<f64>>,
    candidates: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct CmaState {
    n: usize,
    params: Params,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    /// Eigenvectors of `cov` (columns).
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of `cov`.
    scales: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
    evaluations: usize,
    best: Option<(DVector<f64>, f64)>,
    history: Vec<f64>,
    degenerate: bool,
    pending: Option<Pending>,
    rng: ChaCha8Rng,
}

impl CmaState {
    pub fn new(cfg: &CmaConfig) -> Result<Self, CmaError> {
        let n = cfg.dimension();
        if n == 0 {
            return Err(CmaError::Config("dimension must be at least 1".into()));
        }
        if !(cfg.sigma0 > 0.0 && cfg.sigma0.is_finite()) {
            return Err(CmaError::Config(format!("sigma0 = {} must be positive", cfg.sigma0)));
        }
        if cfg.x0.iter().any(|v| !v.is_finite()) {
            return Err(CmaError::Config("x0 must be finite".into()));
        }
        let lambda = cfg.population_size();
        if lambda < 4 {
            return Err(CmaError::Config(format!("population {lambda} is below 4")));
        }
        Ok(CmaState {
            n,
            params: Params::new(n, lambda),
            mean: DVector::from_column_slice(&cfg.x0),
            sigma: cfg.sigma0,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            evaluations: 0,
            best: None,
            history: Vec::new(),
            degenerate: false,
            pending: None,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn population(&self) -> usize {
        self.params.lambda
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn best(&self) -> Option<(&DVector<f64>, f64)> {
        self.best.as_ref().map(|(x, f)| (x, *f))
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `sigma` times the largest eigenvalue of `C`.
    pub fn spread(&self) -> f64 {
        self.sigma * self.scales.iter().fold(0.0f64, |m, s| m.max(s * s))
    }

    fn sample_step(&mut self) -> DVector<f64> {
        let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut self.rng));
        &self.basis * self.scales.component_mul(&z)
    }

    /// Draw a population from `N(mean, sigma^2 C)`.
    pub fn ask(&mut self) -> Vec<DVector<f64>> {
        let steps: Vec<DVector<f64>> = (0..self.params.lambda).map(|_| self.sample_step()).collect();
        let candidates: Vec<DVector<f64>> = steps.iter().map(|y| &self.mean + y * self.sigma).collect();
        self.pending = Some(Pending {
            steps,
            candidates: candidates.clone(),
        });
        candidates
    }

    /// Replace candidate `index` of the pending population with a fresh draw.
    pub fn resample(&mut self, index: usize) -> Result<DVector<f64>, CmaError> {
        if self.pending.is_none() {
            return Err(CmaError::NoPendingAsk);
        }
        let y = self.sample_step();
        let x = &self.mean + &y * self.sigma;
        let pending = self.pending.as_mut().unwrap();
        pending.steps[index] = y;
        pending.candidates[index] = x.clone();
        Ok(x)
    }

    /// Update the distribution from the fitness of the last asked batch.
    /// Non-finite fitness ranks as `+inf`.
    pub fn tell(&mut self, candidates: &[DVector<f64>], fitness: &[f64]) -> Result<(), CmaError> {
        let pending = self.pending.as_ref().ok_or(CmaError::NoPendingAsk)?;
        if fitness.len() != pending.candidates.len() {
            return Err(CmaError::FitnessCount {
                expected: pending.candidates.len(),
                found: fitness.len(),
            });
        }
        if candidates != pending.candidates.as_slice() {
            return Err(CmaError::CandidateMismatch);
        }
        let pending = self.pending.take().unwrap();
        let fitness: Vec<f64> = fitness
            .iter()
            .map(|&f| if f.is_nan() { f64::INFINITY } else { f })
            .collect();
        self.evaluations += fitness.len();

        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));

        let top = order[0];
        if self.best.as_ref().is_none_or(|(_, f)| fitness[top] < *f) {
            self.best = Some((pending.candidates[top].clone(), fitness[top]));
        }

        let p = &self.params;
        let n = self.n as f64;
        let mut y_w = DVector::zeros(self.n);
        for (w, &i) in p.weights.iter().zip(&order) {
            y_w += &pending.steps[i] * *w;
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let bty = self.basis.transpose() * &y_w;
        let inv_sqrt_y = &self.basis * bty.component_div(&self.scales);
        self.p_sigma = &self.p_sigma * (1.0 - p.c_sigma) + inv_sqrt_y * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();

        let ps_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - p.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        self.p_c = &self.p_c * (1.0 - p.c_c) + &y_w * (h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, &i) in p.weights.iter().zip(&order) {
            let y = &pending.steps[i];
            rank_mu += (y * y.transpose()) * *w;
        }
        let old_weight = 1.0 - p.c_1 - p.c_mu + (1.0 - h) * p.c_1 * p.c_c * (2.0 - p.c_c);
        let cov = &self.cov * old_weight + (&self.p_c * self.p_c.transpose()) * p.c_1 + rank_mu * p.c_mu;
        self.cov = (&cov + cov.transpose()) * 0.5;

        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.generation += 1;
        self.history.push(self.best.as_ref().map_or(f64::INFINITY, |b| b.1));
        self.decompose();
        Ok(())
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || !self.sigma.is_finite() {
            self.degenerate = true;
            return;
        }
        self.scales = eig.eigenvalues.map(f64::sqrt);
        self.basis = eig.eigenvectors;
    }

    /// Termination reason, if any, given the configured budget.
    pub fn should_stop(&self, cfg: &CmaConfig) -> Option<Termination> {
        if self.degenerate {
            return Some(Termination::Degenerate);
        }
        if self.best.as_ref().is_some_and(|b| b.1 <= cfg.target) {
            return Some(Termination::TargetReached);
        }
        if self.evaluations + self.params.lambda > cfg.max_evaluations {
            return Some(Termination::MaxEvaluations);
        }
        if self.spread() < cfg.tol_sigma {
            return Some(Termination::SigmaTolerance);
        }
        None
    }

    pub fn outcome(&self, termination: Termination, x0: &[f64]) -> CmaOutcome {
        let (x_best, f_best) = match &self.best {
            Some((x, f)) => (x.iter().copied().collect(), *f),
            None => (x0.to_vec(), f64::INFINITY),
        };
        CmaOutcome {
            x_best,
            f_best,
            evaluations: self.evaluations,
            generations: self.generation,
            history: self.history.clone(),
            termination,
        }
    }
}

/// Minimize `f` sequentially. Candidates scoring non-finite are redrawn up
/// to ten times before being ranked as `+inf`.
pub fn minimize<F>(mut f: F, cfg: &CmaConfig) -> Result<CmaOutcome, CmaError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut state = CmaState::new(cfg)?;
    loop {
        if let Some(reason) = state.should_stop(cfg) {
            return Ok(state.outcome(reason, &cfg.x0));
        }
        let mut candidates = state.ask();
        let mut fitness = Vec::with_capacity(candidates.len());
        for (i, x) in candidates.iter_mut().enumerate() {
            let mut value = f(x.as_slice());
            let mut tries = 0;
            while !value.is_finite() && tries < MAX_RESAMPLES {
                *x = state.resample(i)?;
                value = f(x.as_slice());
                tries += 1;
            }
            fitness.push(if value.is_finite() { value } else { f64::INFINITY });
        }
        state.tell(&candidates, &fitness)?;
    }
}
