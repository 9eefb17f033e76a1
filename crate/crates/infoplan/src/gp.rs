//! Exact Gaussian process regression with an anisotropic squared-exponential kernel.
//!
//! The model observes `y = f(x) + ε`, `ε ~ N(0, σ²)`, with a zero-mean GP prior on
//! `f` under the kernel
//!
//! ```text
//! k(a, b) = α² · exp(−½ Σ_d (a_d − b_d)² / ℓ_d²)
//! ```
//!
//! Inference uses one Cholesky factorization of `K_y = K_x + σ²I + jitter·I` per fit.
//! The jitter starts at 1e-8 and escalates tenfold (up to 1e-2) only if factorization
//! fails, so near-duplicate inputs degrade gracefully instead of crashing. Predictive
//! equations are the standard ones:
//!
//! ```text
//! μ(q) = k_*ᵀ K_y⁻¹ y            σ²(q) = α² − k_*ᵀ K_y⁻¹ k_*
//! ```
//!
//! (the variance of the latent function, clamped at zero against round-off).
//!
//! Hyperparameters are chosen by maximizing the log marginal likelihood
//!
//! ```text
//! log p(y | X, θ) = −½ (yᵀ K_y⁻¹ y + log |K_y| + N log 2π)
//! ```
//!
//! with Adam in log-parameter space, using the analytic gradient
//! `∂ log p / ∂θ = ½ tr((ααᵀ − K_y⁻¹) ∂K_y/∂θ)` where `α = K_y⁻¹ y`. The optimizer
//! never degrades the model: it tracks the best likelihood seen (including the
//! starting point) and returns that, flagging numerical trouble in a warning rather
//! than failing the run.

use ndarray::{Array1, Array2, Axis, Zip};
use ndarray_linalg::cholesky::{
    DeterminantC, FactorizeCInto, InverseC, SolveC, UPLO,
};
use thiserror::Error;

/// First jitter level added to `K_y` before factorization.
pub const JITTER_START: f64 = 1e-8;
/// Largest jitter attempted before giving up.
pub const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("cannot fit a GP to an empty dataset")]
    EmptyDataset,
    #[error("covariance factorization failed even with jitter {final_jitter:e}; inputs may contain exact duplicates with conflicting targets or non-finite values")]
    CholeskyFailed { final_jitter: f64 },
}

/// Kernel amplitude, per-dimension lengthscales, and observation noise, all strictly
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    amplitude: f64,
    lengthscales: Vec<f64>,
    noise_std: f64,
}

impl Hyperparams {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>, noise_std: f64) -> Result<Self, GpError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GpError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        pos("amplitude", amplitude)?;
        pos("noise_std", noise_std)?;
        if lengthscales.is_empty() {
            return Err(GpError::InvalidParams("at least one lengthscale is required".into()));
        }
        for (d, &l) in lengthscales.iter().enumerate() {
            pos(&format!("lengthscale[{d}]"), l)?;
        }
        Ok(Self {
            amplitude,
            lengthscales,
            noise_std,
        })
    }

    /// The conventional starting point for optimization on standardized data:
    /// amplitude 1, all lengthscales 0.5, noise 0.1.
    pub fn standard_init(dims: usize) -> Self {
        Self::new(1.0, vec![0.5; dims], 0.1).expect("constants are valid")
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    fn to_log_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dims() + 2);
        v.push(self.amplitude.ln());
        v.extend(self.lengthscales.iter().map(|l| l.ln()));
        v.push(self.noise_std.ln());
        v
    }

    fn from_log_vec(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            amplitude: theta[0].exp(),
            lengthscales: theta[1..=d].iter().map(|t| t.exp()).collect(),
            noise_std: theta[d + 1].exp(),
        }
    }
}

/// Training data: input rows and scalar targets, stored contiguously.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    dims: usize,
}

impl Dataset {
    pub fn new(dims: usize) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            dims,
        }
    }

    pub fn push(&mut self, input: &[f64], target: f64) -> Result<(), GpError> {
        if input.len() != self.dims {
            return Err(GpError::InvalidData(format!(
                "input has {} dimensions, dataset expects {}",
                input.len(),
                self.dims
            )));
        }
        if input.iter().any(|v| !v.is_finite()) || !target.is_finite() {
            return Err(GpError::InvalidData("inputs and targets must be finite".into()));
        }
        self.inputs.extend_from_slice(input);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn inputs(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), self.dims), self.inputs.clone())
            .expect("rows kept consistent by push")
    }

    pub fn targets(&self) -> Array1<f64> {
        Array1::from_vec(self.targets.clone())
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dims..(i + 1) * self.dims]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }
}

/// The squared-exponential kernel value for one pair of points.
pub fn kernel(a: &[f64], b: &[f64], hp: &Hyperparams) -> f64 {
    debug_assert_eq!(a.len(), hp.dims());
    debug_assert_eq!(b.len(), hp.dims());
    let mut q = 0.0;
    for d in 0..a.len() {
        let diff = a[d] - b[d];
        let l = hp.lengthscales[d];
        q += diff * diff / (l * l);
    }
    hp.amplitude * hp.amplitude * (-0.5 * q).exp()
}

/// Per-dimension squared-distance matrices `S_d[i, j] = (x_i,d − x_j,d)²`, computed
/// once and reused across optimizer iterations.
fn squared_distances(x: &Array2<f64>) -> Vec<Array2<f64>> {
    let (n, dims) = x.dim();
    (0..dims)
        .map(|d| {
            let col = x.index_axis(Axis(1), d);
            Array2::from_shape_fn((n, n), |(i, j)| {
                let diff = col[i] - col[j];
                diff * diff
            })
        })
        .collect()
}

/// Correlation matrix `E[i, j] = exp(−½ Σ_d S_d[i, j] / ℓ_d²)`.
fn correlation_from_sqdists(sqdists: &[Array2<f64>], lengthscales: &[f64]) -> Array2<f64> {
    let n = sqdists[0].nrows();
    let mut q = Array2::<f64>::zeros((n, n));
    for (s, &l) in sqdists.iter().zip(lengthscales) {
        let inv = 1.0 / (l * l);
        Zip::from(&mut q).and(s).for_each(|qv, &sv| *qv += sv * inv);
    }
    q.mapv_inplace(|v| (-0.5 * v).exp());
    q
}

/// Cross-covariance `K_*[i, j] = k(train_i, query_j)` (N × M).
fn cross_kernel(train: &Array2<f64>, queries: &Array2<f64>, hp: &Hyperparams) -> Array2<f64> {
    let n = train.nrows();
    let m = queries.nrows();
    Array2::from_shape_fn((n, m), |(i, j)| {
        kernel(
            train.row(i).as_slice().expect("contiguous row"),
            queries.row(j).as_slice().expect("contiguous row"),
            hp,
        )
    })
}

struct Factorized {
    fact: ndarray_linalg::cholesky::CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    jitter: f64,
}

/// Factorize `K_x + (σ² + jitter)·I`, escalating jitter tenfold from
/// [`JITTER_START`] until it succeeds or exceeds [`JITTER_MAX`].
fn factorize_with_jitter(kx: &Array2<f64>, noise_var: f64) -> Result<Factorized, GpError> {
    let n = kx.nrows();
    let mut jitter = JITTER_START;
    loop {
        let mut ky = kx.clone();
        for i in 0..n {
            ky[(i, i)] += noise_var + jitter;
        }
        match ky.factorizec_into(UPLO::Lower) {
            Ok(fact) => return Ok(Factorized { fact, jitter }),
            Err(_) => {
                let next = jitter * 10.0;
                if next > JITTER_MAX {
                    return Err(GpError::CholeskyFailed { final_jitter: jitter });
                }
                jitter = next;
            }
        }
    }
}

/// A trained GP, holding everything prediction needs.
#[derive(Clone, Debug)]
pub struct FittedGP {
    hyperparams: Hyperparams,
    train_inputs: Array2<f64>,
    alpha_vector: Array1<f64>,
    chol_factor: Array2<f64>,
    ky_inv: Array2<f64>,
    jitter: f64,
}

impl FittedGP {
    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn train_inputs(&self) -> &Array2<f64> {
        &self.train_inputs
    }

    /// `K_y⁻¹ y`.
    pub fn alpha_vector(&self) -> &Array1<f64> {
        &self.alpha_vector
    }

    /// Lower-triangular `L` with `L Lᵀ = K_x + σ²I + jitter·I`.
    pub fn chol_factor(&self) -> &Array2<f64> {
        &self.chol_factor
    }

    /// The jitter that made factorization succeed (usually [`JITTER_START`]).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.train_inputs.nrows() == 0
    }
}

/// Train on `data` with fixed hyperparameters. Errors on an empty dataset or if the
/// covariance cannot be factorized at any jitter level.
pub fn fit(data: &Dataset, hp: &Hyperparams) -> Result<FittedGP, GpError> {
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    if data.dims() != hp.dims() {
        return Err(GpError::InvalidData(format!(
            "dataset has {} input dimensions, hyperparameters have {}",
            data.dims(),
            hp.dims()
        )));
    }
    let x = data.inputs();
    let sq = squared_distances(&x);
    let mut kx = correlation_from_sqdists(&sq, hp.lengthscales());
    let a2 = hp.amplitude * hp.amplitude;
    kx.mapv_inplace(|v| v * a2);

    let Factorized { fact, jitter } = factorize_with_jitter(&kx, hp.noise_std * hp.noise_std)?;
    let alpha_vector = fact
        .solvec(&data.targets())
        .map_err(|_| GpError::CholeskyFailed { final_jitter: jitter })?;
    let ky_inv = fact
        .invc()
        .map_err(|_| GpError::CholeskyFailed { final_jitter: jitter })?;
    let mut chol_factor = fact.factor;
    // LAPACK leaves the strict upper triangle untouched; zero it so the factor is a
    // genuine lower-triangular matrix.
    let n = chol_factor.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            chol_factor[(i, j)] = 0.0;
        }
    }
    Ok(FittedGP {
        hyperparams: hp.clone(),
        train_inputs: x,
        alpha_vector,
        chol_factor,
        ky_inv,
        jitter,
    })
}

/// Predictive mean and standard deviation of the latent function at each query row.
pub fn predict(model: &FittedGP, queries: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    assert_eq!(
        queries.ncols(),
        model.hyperparams.dims(),
        "query dimension mismatch"
    );
    let ks = cross_kernel(&model.train_inputs, queries, &model.hyperparams);
    let mean = ks.t().dot(&model.alpha_vector);
    // Predictive variance: α² − Σ_i K_*[i, j] · (K_y⁻¹ K_*)[i, j]; one GEMM covers
    // all queries.
    let w = model.ky_inv.dot(&ks);
    let a2 = model.hyperparams.amplitude * model.hyperparams.amplitude;
    let m = queries.nrows();
    let mut std = Array1::zeros(m);
    for j in 0..m {
        let mut quad = 0.0;
        for i in 0..ks.nrows() {
            quad += ks[(i, j)] * w[(i, j)];
        }
        std[j] = (a2 - quad).max(0.0).sqrt();
    }
    (mean, std)
}

/// Prior prediction for an untrained model: zero mean, standard deviation `α`.
pub fn predict_prior(hp: &Hyperparams, queries: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let m = queries.nrows();
    (Array1::zeros(m), Array1::from_elem(m, hp.amplitude))
}

/// Log marginal likelihood of `data` under `hp`.
pub fn log_marginal_likelihood(data: &Dataset, hp: &Hyperparams) -> Result<f64, GpError> {
    let (lml, _) = lml_and_gradient_impl(data, hp, false)?;
    Ok(lml)
}

/// Gradient of the log marginal likelihood with respect to the *logarithms* of the
/// hyperparameters, ordered `[log α, log ℓ_1, …, log ℓ_D, log σ]`.
pub fn lml_gradient(data: &Dataset, hp: &Hyperparams) -> Result<Array1<f64>, GpError> {
    let (_, grad) = lml_and_gradient_impl(data, hp, true)?;
    Ok(Array1::from_vec(grad.expect("requested")))
}

fn lml_and_gradient_impl(
    data: &Dataset,
    hp: &Hyperparams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>), GpError> {
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    let x = data.inputs();
    let sq = squared_distances(&x);
    lml_and_gradient_with_sqdists(&sq, &data.targets(), hp, want_grad)
}

/// Core likelihood/gradient evaluation reusing precomputed squared distances.
fn lml_and_gradient_with_sqdists(
    sqdists: &[Array2<f64>],
    y: &Array1<f64>,
    hp: &Hyperparams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>), GpError> {
    let n = y.len();
    let mut kx = correlation_from_sqdists(sqdists, hp.lengthscales());
    let a2 = hp.amplitude * hp.amplitude;
    kx.mapv_inplace(|v| v * a2);

    let Factorized { fact, jitter } = factorize_with_jitter(&kx, hp.noise_std * hp.noise_std)?;
    let alpha = fact
        .solvec(y)
        .map_err(|_| GpError::CholeskyFailed { final_jitter: jitter })?;
    let ln_det = fact.ln_detc();
    let lml = -0.5 * (y.dot(&alpha) + ln_det + n as f64 * (2.0 * std::f64::consts::PI).ln());
    if !want_grad {
        return Ok((lml, None));
    }

    let ky_inv = fact
        .invc()
        .map_err(|_| GpError::CholeskyFailed { final_jitter: jitter })?;
    // A = ααᵀ − K_y⁻¹; each gradient is ½ Σ_ij A[i,j] · (∂K_y/∂θ)[i,j].
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| alpha[i] * alpha[j]);
    a -= &ky_inv;

    let dims = hp.dims();
    let mut grad = vec![0.0; dims + 2];
    // ∂K_y/∂log α = 2 K_x  →  grad = Σ A ∘ K_x.
    grad[0] = Zip::from(&a).and(&kx).fold(0.0, |acc, &av, &kv| acc + av * kv);
    // ∂K_y/∂log ℓ_d = K_x ∘ S_d / ℓ_d².
    for d in 0..dims {
        let inv_l2 = 1.0 / (hp.lengthscales[d] * hp.lengthscales[d]);
        let s = &sqdists[d];
        grad[1 + d] = 0.5
            * Zip::from(&a)
                .and(&kx)
                .and(s)
                .fold(0.0, |acc, &av, &kv, &sv| acc + av * kv * sv * inv_l2);
    }
    // ∂K_y/∂log σ = 2σ² I  →  grad = σ² tr(A).
    let s2 = hp.noise_std * hp.noise_std;
    grad[dims + 1] = s2 * a.diag().sum();
    Ok((lml, Some(grad)))
}

/// Result of hyperparameter optimization.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub hyperparams: Hyperparams,
    pub lml: f64,
    /// Set when the ascent hit a numerical problem and stopped early; the returned
    /// hyperparameters are still the best point seen.
    pub warning: Option<String>,
}

const ADAM_STEP: f64 = 0.01;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Maximize the log marginal likelihood with `iterations` Adam steps in log-parameter
/// space, starting from `init`.
///
/// Never errors: numerical failures (a covariance that cannot be factorized, a
/// non-finite likelihood) stop the ascent with a warning, and the best
/// hyperparameters seen so far — at worst `init` itself — are returned. The returned
/// likelihood is therefore never below the starting point's.
pub fn optimize_hyperparams(
    data: &Dataset,
    init: &Hyperparams,
    iterations: usize,
) -> OptimizeOutcome {
    if data.is_empty() {
        return OptimizeOutcome {
            hyperparams: init.clone(),
            lml: f64::NAN,
            warning: Some("empty dataset: nothing to optimize".into()),
        };
    }
    let x = data.inputs();
    let y = data.targets();
    let sq = squared_distances(&x);
    let eval = |theta: &[f64]| -> Result<(f64, Vec<f64>), GpError> {
        let hp = Hyperparams::from_log_vec(theta);
        let (lml, grad) = lml_and_gradient_with_sqdists(&sq, &y, &hp, true)?;
        Ok((lml, grad.expect("requested")))
    };

    let mut theta = init.to_log_vec();
    let p = theta.len();
    let mut best_theta;
    let mut best_lml;
    let mut grad = match eval(&theta) {
        Ok((lml, g)) if lml.is_finite() => {
            best_theta = theta.clone();
            best_lml = lml;
            g
        }
        Ok(_) | Err(_) => {
            return OptimizeOutcome {
                hyperparams: init.clone(),
                lml: f64::NAN,
                warning: Some("likelihood not evaluable at the starting point".into()),
            };
        }
    };

    let mut warning = None;
    let mut m = vec![0.0; p];
    let mut v = vec![0.0; p];
    for t in 1..=iterations {
        let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for k in 0..p {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * grad[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
            theta[k] += ADAM_STEP * (m[k] / bc1) / ((v[k] / bc2).sqrt() + ADAM_EPS);
        }
        match eval(&theta) {
            Ok((lml, g)) if lml.is_finite() && g.iter().all(|gv| gv.is_finite()) => {
                if lml > best_lml {
                    best_lml = lml;
                    best_theta = theta.clone();
                }
                grad = g;
            }
            Ok(_) => {
                warning = Some(format!(
                    "non-finite likelihood at step {t}; kept best point so far"
                ));
                break;
            }
            Err(e) => {
                warning = Some(format!("stopped at step {t}: {e}; kept best point so far"));
                break;
            }
        }
    }
    OptimizeOutcome {
        hyperparams: Hyperparams::from_log_vec(&best_theta),
        lml: best_lml,
        warning,
    }
}
