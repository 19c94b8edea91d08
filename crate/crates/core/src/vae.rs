//! Variational autoencoder over the standardized (A, D, T) vectors.
//!
//! Encoder: `x (3) -> tanh (H) -> mu (2), log_var (2)`.
//! Decoder: `z (2) -> tanh (H) -> x_hat (3)`.
//! Loss per country is `||x - x_hat||^2 + KL(q(z|x) || N(0, I))`, averaged
//! over countries and minimized by full-batch gradient descent with
//! hand-written backpropagation.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AspirationDelta;
use crate::rng::{derive_seed, seeded};
use crate::stats::{pearson, StandardizedFeatures};

pub const INPUT_DIM: usize = 3;
pub const LATENT_DIM: usize = 2;

type Input = [f64; INPUT_DIM];
type Latent = [f64; LATENT_DIM];

/// KL divergence of `N(mu, diag(exp(log_var)))` from the standard normal.
pub fn kl_divergence(mu: &Latent, log_var: &Latent) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// `mu + exp(log_var / 2) * noise`.
pub fn reparameterize(mu: &Latent, log_var: &Latent, noise: &Latent) -> Latent {
    std::array::from_fn(|j| mu[j] + (0.5 * log_var[j]).exp() * noise[j])
}

pub fn readiness_index(mu: &Latent, alpha: f64) -> f64 {
    alpha * mu[0] + (1.0 - alpha) * mu[1]
}

/// Network weights. Matrices are row-major `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeParams {
    pub hidden: usize,
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub logvar_w: Vec<f64>,
    pub logvar_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl VaeParams {
    pub fn zeros(hidden: usize) -> Self {
        VaeParams {
            hidden,
            enc_w: vec![0.0; hidden * INPUT_DIM],
            enc_b: vec![0.0; hidden],
            mu_w: vec![0.0; LATENT_DIM * hidden],
            mu_b: vec![0.0; LATENT_DIM],
            logvar_w: vec![0.0; LATENT_DIM * hidden],
            logvar_b: vec![0.0; LATENT_DIM],
            dec_w: vec![0.0; hidden * LATENT_DIM],
            dec_b: vec![0.0; hidden],
            out_w: vec![0.0; INPUT_DIM * hidden],
            out_b: vec![0.0; INPUT_DIM],
        }
    }

    /// Weights drawn from `U(-0.5, 0.5) / sqrt(fan_in)`, biases zero.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut p = VaeParams::zeros(hidden);
        let mut fill = |w: &mut Vec<f64>, fan_in: usize| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = (rng.random::<f64>() - 0.5) * scale;
            }
        };
        fill(&mut p.enc_w, INPUT_DIM);
        fill(&mut p.mu_w, hidden);
        fill(&mut p.logvar_w, hidden);
        fill(&mut p.dec_w, LATENT_DIM);
        fill(&mut p.out_w, hidden);
        p
    }

    fn tensors(&self) -> [&Vec<f64>; 10] {
        [
            &self.enc_w,
            &self.enc_b,
            &self.mu_w,
            &self.mu_b,
            &self.logvar_w,
            &self.logvar_b,
            &self.dec_w,
            &self.dec_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.mu_w,
            &mut self.mu_b,
            &mut self.logvar_w,
            &mut self.logvar_b,
            &mut self.dec_w,
            &mut self.dec_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter().copied())
            .collect()
    }

    pub fn from_flat(hidden: usize, flat: &[f64]) -> Result<Self> {
        let mut p = VaeParams::zeros(hidden);
        if flat.len() != p.num_params() {
            return Err(Error::Contract(format!(
                "expected {} parameters for hidden = {hidden}, got {}",
                p.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for t in p.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        let expected = [
            h * INPUT_DIM,
            h,
            LATENT_DIM * h,
            LATENT_DIM,
            LATENT_DIM * h,
            LATENT_DIM,
            h * LATENT_DIM,
            h,
            INPUT_DIM * h,
            INPUT_DIM,
        ];
        for (i, (t, want)) in self.tensors().iter().zip(expected).enumerate() {
            if t.len() != want {
                return Err(Error::Contract(format!(
                    "parameter tensor {i} has length {}, expected {want}",
                    t.len()
                )));
            }
        }
        Ok(())
    }

    fn axpy(&mut self, scale: f64, other: &VaeParams) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in t.iter_mut().zip(o) {
                *a += scale * b;
            }
        }
    }

    fn hidden_layer(w: &[f64], b: &[f64], input: &[f64]) -> Vec<f64> {
        let cols = input.len();
        b.iter()
            .enumerate()
            .map(|(r, bias)| {
                let row = &w[r * cols..(r + 1) * cols];
                (bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn linear<const N: usize>(w: &[f64], b: &[f64], input: &[f64]) -> [f64; N] {
        let cols = input.len();
        std::array::from_fn(|r| {
            b[r] + w[r * cols..(r + 1) * cols]
                .iter()
                .zip(input)
                .map(|(a, x)| a * x)
                .sum::<f64>()
        })
    }

    /// Posterior parameters `(mu, log_var)` for one input.
    pub fn encode(&self, x: &Input) -> (Latent, Latent) {
        let h = Self::hidden_layer(&self.enc_w, &self.enc_b, x);
        (
            Self::linear(&self.mu_w, &self.mu_b, &h),
            Self::linear(&self.logvar_w, &self.logvar_b, &h),
        )
    }

    pub fn decode(&self, z: &Latent) -> Input {
        let g = Self::hidden_layer(&self.dec_w, &self.dec_b, z);
        Self::linear(&self.out_w, &self.out_b, &g)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

/// Mean loss over `inputs` and its gradient, with the given noise draws.
pub fn loss_and_gradients(
    params: &VaeParams,
    inputs: &[Input],
    noise: &[Latent],
) -> (LossParts, VaeParams) {
    assert_eq!(inputs.len(), noise.len());
    let hn = params.hidden;
    let n = inputs.len() as f64;
    let mut grad = VaeParams::zeros(hn);
    let mut recon_sum = 0.0;
    let mut kl_sum = 0.0;

    for (x, eps) in inputs.iter().zip(noise) {
        let h = VaeParams::hidden_layer(&params.enc_w, &params.enc_b, x);
        let mu: Latent = VaeParams::linear(&params.mu_w, &params.mu_b, &h);
        let lv: Latent = VaeParams::linear(&params.logvar_w, &params.logvar_b, &h);
        let sigma: Latent = lv.map(|v| (0.5 * v).exp());
        let z = reparameterize(&mu, &lv, eps);
        let g = VaeParams::hidden_layer(&params.dec_w, &params.dec_b, &z);
        let xh: Input = VaeParams::linear(&params.out_w, &params.out_b, &g);

        let resid: Input = std::array::from_fn(|k| xh[k] - x[k]);
        recon_sum += resid.iter().map(|r| r * r).sum::<f64>();
        kl_sum += kl_divergence(&mu, &lv);

        // decoder output layer
        let d_xh: Input = resid.map(|r| 2.0 * r / n);
        let mut d_g = vec![0.0; hn];
        for k in 0..INPUT_DIM {
            grad.out_b[k] += d_xh[k];
            for j in 0..hn {
                grad.out_w[k * hn + j] += d_xh[k] * g[j];
                d_g[j] += params.out_w[k * hn + j] * d_xh[k];
            }
        }
        // decoder hidden layer
        let mut d_z = [0.0; LATENT_DIM];
        for j in 0..hn {
            let d_a = d_g[j] * (1.0 - g[j] * g[j]);
            grad.dec_b[j] += d_a;
            for l in 0..LATENT_DIM {
                grad.dec_w[j * LATENT_DIM + l] += d_a * z[l];
                d_z[l] += params.dec_w[j * LATENT_DIM + l] * d_a;
            }
        }
        // reparameterization and KL
        let d_mu: Latent = std::array::from_fn(|l| d_z[l] + mu[l] / n);
        let d_lv: Latent = std::array::from_fn(|l| {
            d_z[l] * eps[l] * 0.5 * sigma[l] + 0.5 * (lv[l].exp() - 1.0) / n
        });
        // encoder heads
        let mut d_h = vec![0.0; hn];
        for l in 0..LATENT_DIM {
            grad.mu_b[l] += d_mu[l];
            grad.logvar_b[l] += d_lv[l];
            for j in 0..hn {
                grad.mu_w[l * hn + j] += d_mu[l] * h[j];
                grad.logvar_w[l * hn + j] += d_lv[l] * h[j];
                d_h[j] += params.mu_w[l * hn + j] * d_mu[l] + params.logvar_w[l * hn + j] * d_lv[l];
            }
        }
        // encoder hidden layer
        for j in 0..hn {
            let d_a = d_h[j] * (1.0 - h[j] * h[j]);
            grad.enc_b[j] += d_a;
            for k in 0..INPUT_DIM {
                grad.enc_w[j * INPUT_DIM + k] += d_a * x[k];
            }
        }
    }

    let reconstruction = recon_sum / n;
    let kl = kl_sum / n;
    (
        LossParts {
            reconstruction,
            kl,
            total: reconstruction + kl,
        },
        grad,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeHyper {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub alpha: f64,
}

impl VaeHyper {
    pub fn with_seed(seed: u64) -> Self {
        VaeHyper {
            hidden: 8,
            epochs: 2000,
            learning_rate: 0.01,
            seed,
            alpha: 0.5,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.hidden == 0 {
            v.push("vae.hidden must be at least 1".to_string());
        }
        if self.epochs == 0 {
            v.push("vae.epochs must be at least 1".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            v.push(format!(
                "vae.learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            v.push(format!("vae.alpha must lie in [0, 1], got {}", self.alpha));
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss before the update of each epoch, epoch 1 first.
    pub epochs: Vec<LossParts>,
    pub seed: u64,
    pub hyper: VaeHyper,
}

/// Trains with one fresh standard-normal draw per country per epoch.
pub fn vae_train(
    features: &StandardizedFeatures,
    hyper: &VaeHyper,
) -> Result<(VaeParams, TrainReport)> {
    let mut rng = seeded(derive_seed(hyper.seed, 1));
    vae_train_with_noise(features, hyper, |_, _| {
        [rng.sample(StandardNormal), rng.sample(StandardNormal)]
    })
}

/// Like [`vae_train`] but with noise supplied by `noise(epoch, row)`;
/// it is called for every row in order within an epoch.
pub fn vae_train_with_noise<F>(
    features: &StandardizedFeatures,
    hyper: &VaeHyper,
    mut noise: F,
) -> Result<(VaeParams, TrainReport)>
where
    F: FnMut(usize, usize) -> Latent,
{
    let problems = hyper.violations();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    if features.len() < 4 {
        return Err(Error::insufficient("VAE training", 4, features.len()));
    }
    let mut params = VaeParams::init(hyper.hidden, derive_seed(hyper.seed, 0));
    let mut epochs = Vec::with_capacity(hyper.epochs);
    let mut draws = vec![[0.0; LATENT_DIM]; features.len()];

    for epoch in 1..=hyper.epochs {
        for (i, d) in draws.iter_mut().enumerate() {
            *d = noise(epoch, i);
        }
        let (loss, grad) = loss_and_gradients(&params, &features.z, &draws);
        if !loss.total.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                last_finite: Box::new(params),
            });
        }
        epochs.push(loss);
        let mut next = params.clone();
        next.axpy(-hyper.learning_rate, &grad);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                last_finite: Box::new(params),
            });
        }
        params = next;
    }

    Ok((
        params,
        TrainReport {
            epochs,
            seed: hyper.seed,
            hyper: hyper.clone(),
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbedding {
    pub country: String,
    pub mu: Latent,
    pub log_var: Latent,
    pub z_sample: Option<Latent>,
    pub readiness: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )))
    }
}

/// Deterministic embedding from the posterior means.
pub fn embed(
    params: &VaeParams,
    features: &StandardizedFeatures,
    alpha: f64,
) -> Result<Vec<LatentEmbedding>> {
    params.validate()?;
    check_alpha(alpha)?;
    Ok(features
        .countries
        .iter()
        .zip(&features.z)
        .map(|(country, x)| {
            let (mu, log_var) = params.encode(x);
            LatentEmbedding {
                country: country.clone(),
                mu,
                log_var,
                z_sample: None,
                readiness: readiness_index(&mu, alpha),
            }
        })
        .collect())
}

/// [`embed`] plus one seeded posterior sample per country.
pub fn embed_with_samples(
    params: &VaeParams,
    features: &StandardizedFeatures,
    alpha: f64,
    seed: u64,
) -> Result<Vec<LatentEmbedding>> {
    let mut rng = seeded(seed);
    let mut out = embed(params, features, alpha)?;
    for e in &mut out {
        let eps = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        e.z_sample = Some(reparameterize(&e.mu, &e.log_var, &eps));
    }
    Ok(out)
}

/// Pearson correlation of readiness with the ICT delta over matched countries.
pub fn readiness_ict_correlation(
    embeddings: &[LatentEmbedding],
    deltas: &[AspirationDelta],
) -> Result<(f64, usize)> {
    let (r, ict): (Vec<f64>, Vec<f64>) = embeddings
        .iter()
        .filter_map(|e| {
            let d = deltas.iter().find(|d| d.country == e.country)?;
            Some((e.readiness, d.delta_ict?))
        })
        .unzip();
    if r.len() < 3 {
        return Err(Error::insufficient(
            "readiness / ICT correlation",
            3,
            r.len(),
        ));
    }
    let n = r.len();
    pearson(&r, &ict).map(|c| (c, n))
}

/// Correlation of the readiness index with each standardized input; the
/// latent axes are only identified up to rotation and sign.
pub fn orientation_diagnostics(
    embeddings: &[LatentEmbedding],
    features: &StandardizedFeatures,
) -> [Option<f64>; 3] {
    let r: Vec<f64> = embeddings.iter().map(|e| e.readiness).collect();
    std::array::from_fn(|j| {
        let col: Vec<f64> = features.z.iter().map(|x| x[j]).collect();
        pearson(&r, &col).ok()
    })
}
