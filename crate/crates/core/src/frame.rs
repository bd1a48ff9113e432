//! Boundary-condition linear algebra at a single boundary point.
//!
//! At a boundary point `p` of a Lagrangian `M` whose boundary lies on a second
//! Lagrangian `Σ`, the frame consists of orthonormal tangent vectors
//! `e_1..e_{n-1}` of `∂M`, the outward conormal `μ ∈ T_pM` and the
//! conormal `ν ∈ T_pΣ`. Everything lives in `R^{2n} = Cⁿ` with coordinates
//! `(x_1, y_1, …, x_n, y_n)` and `J(x_k, y_k) = (-y_k, x_k)`.
//!
//! The normal bundle of `M` at `p` is spanned by
//! `f_I = Je_I - ⟨Je_I, μ⟩μ` and `f_n = -⟨Jν, μ⟩ν + ⟨ν, μ⟩Jν`, with Gram
//! matrix `G` and its closed-form inverse. All projections onto `NM` in this
//! module go through `(f_i, G^{-1})`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

/// Threshold on `1 - ⟨ν,μ⟩²` and `1 - |τ|²` below which a frame is rejected.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

const ORTHONORMAL_TOL: f64 = 1e-12;
const OMEGA_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("identity violated: {name} residual {residual:e}")]
    IdentityViolation { name: &'static str, residual: f64 },
}

/// Standard complex structure on `R^{2n}`.
pub fn j(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for k in 0..v.len() / 2 {
        out[2 * k] = -v[2 * k + 1];
        out[2 * k + 1] = v[2 * k];
    }
    out
}

/// Symplectic form `ω(a, b) = ⟨Ja, b⟩`.
pub fn omega(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    j(a).dot(b)
}

/// Orthonormal frame at a boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientFrame {
    n: usize,
    e: Vec<DVector<f64>>,
    mu: DVector<f64>,
    nu: DVector<f64>,
}

impl AmbientFrame {
    pub fn new(n: usize, e: Vec<DVector<f64>>, mu: DVector<f64>, nu: DVector<f64>) -> Result<Self, FrameError> {
        if n < 2 {
            return Err(FrameError::InvalidFrame(format!("n = {n} < 2")));
        }
        if e.len() != n - 1 {
            return Err(FrameError::InvalidFrame(format!(
                "expected {} tangent vectors, got {}",
                n - 1,
                e.len()
            )));
        }
        if e.iter().chain([&mu, &nu]).any(|v| v.len() != 2 * n) {
            return Err(FrameError::InvalidFrame(format!("vectors must lie in R^{}", 2 * n)));
        }
        let frame = Self { n, e, mu, nu };
        let with_mu = frame.m_basis();
        let with_nu = frame.sigma_basis();
        for (name, basis) in [("{e, μ}", &with_mu), ("{e, ν}", &with_nu)] {
            let dev = gram_deviation(basis);
            if dev >= ORTHONORMAL_TOL {
                return Err(FrameError::InvalidFrame(format!(
                    "{name} not orthonormal (deviation {dev:e})"
                )));
            }
        }
        let lag = with_nu
            .iter()
            .flat_map(|a| with_nu.iter().map(move |b| omega(a, b).abs()))
            .fold(0.0, f64::max);
        if lag >= ORTHONORMAL_TOL {
            return Err(FrameError::InvalidFrame(format!(
                "span{{e, ν}} not Lagrangian (|ω| = {lag:e})"
            )));
        }
        Ok(frame)
    }

    /// Builds the frame `e_I = U ε_I`, `ν = U ε_n` and
    /// `μ = c (sin α ν + cos α Jν) + τ^I Je_I` with `c = √(1 - |τ|²)`,
    /// which satisfies the Neumann relation for `alpha` by construction.
    pub fn from_unitary(unitary: &DMatrix<Complex<f64>>, alpha: f64, tau_comps: &[f64]) -> Result<Self, FrameError> {
        let n = unitary.nrows();
        if unitary.ncols() != n || tau_comps.len() + 1 != n {
            return Err(FrameError::InvalidFrame("shape mismatch".into()));
        }
        let tau_sq: f64 = tau_comps.iter().map(|t| t * t).sum();
        if tau_sq >= 1.0 {
            return Err(FrameError::InvalidFrame(format!("|τ|² = {tau_sq} ≥ 1")));
        }
        let column = |k: usize| realify(&unitary.column(k).into_owned());
        let e: Vec<DVector<f64>> = (0..n - 1).map(column).collect();
        let nu = column(n - 1);
        let c = (1.0 - tau_sq).sqrt();
        let mut mu = (&nu * alpha.sin() + j(&nu) * alpha.cos()) * c;
        for (ei, t) in e.iter().zip(tau_comps) {
            mu += j(ei) * *t;
        }
        Self::new(n, e, mu, nu)
    }

    /// The same frame with every vector mapped by the unitary `u`.
    pub fn transformed(&self, u: &DMatrix<Complex<f64>>) -> Self {
        let map = |v: &DVector<f64>| realify(&(u * complexify(v)));
        Self {
            n: self.n,
            e: self.e.iter().map(map).collect(),
            mu: map(&self.mu),
            nu: map(&self.nu),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e(&self) -> &[DVector<f64>] {
        &self.e
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    /// `e_1..e_{n-1}, μ`: orthonormal basis of `T_pM`.
    pub fn m_basis(&self) -> Vec<DVector<f64>> {
        self.e.iter().cloned().chain([self.mu.clone()]).collect()
    }

    /// `e_1..e_{n-1}, ν`: orthonormal basis of `T_pΣ`.
    pub fn sigma_basis(&self) -> Vec<DVector<f64>> {
        self.e.iter().cloned().chain([self.nu.clone()]).collect()
    }
}

fn gram_deviation(basis: &[DVector<f64>]) -> f64 {
    let mut dev: f64 = 0.0;
    for (a, u) in basis.iter().enumerate() {
        for (b, v) in basis.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            dev = dev.max((u.dot(v) - target).abs());
        }
    }
    dev
}

fn realify(z: &DVector<Complex<f64>>) -> DVector<f64> {
    DVector::from_fn(2 * z.len(), |i, _| if i % 2 == 0 { z[i / 2].re } else { z[i / 2].im })
}

fn complexify(v: &DVector<f64>) -> DVector<Complex<f64>> {
    DVector::from_fn(v.len() / 2, |k, _| Complex::new(v[2 * k], v[2 * k + 1]))
}

/// Decomposition of `μ` against `ν, Jν, Je_I` plus the `NM` Gram data.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionData {
    pub tau: DVector<f64>,
    pub nu_mu: f64,
    pub jnu_mu: f64,
    pub tau_comps: Vec<f64>,
    /// `f_1..f_n`, spanning the normal space of `M`.
    pub f: Vec<DVector<f64>>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl ProjectionData {
    pub fn tau_norm_sq(&self) -> f64 {
        self.tau_comps.iter().map(|t| t * t).sum()
    }

    /// Orthogonal projection onto `NM`, `⟨x, f_i⟩ G^{ij} f_j`.
    pub fn project_nm(&self, x: &DVector<f64>) -> DVector<f64> {
        let inner = DVector::from_iterator(self.f.len(), self.f.iter().map(|fi| fi.dot(x)));
        let coeffs = &self.g_inv * inner;
        self.f
            .iter()
            .zip(coeffs.iter())
            .fold(DVector::zeros(x.len()), |acc, (fj, c)| acc + fj * *c)
    }
}

/// Splits `μ = τ + ⟨ν,μ⟩ν + ⟨Jν,μ⟩Jν` and builds `G`, `G^{-1}`.
pub fn decompose_mu(frame: &AmbientFrame) -> Result<ProjectionData, FrameError> {
    let n = frame.n;
    let mu = &frame.mu;
    let nu = &frame.nu;
    let jnu = j(nu);
    let je: Vec<DVector<f64>> = frame.e.iter().map(j).collect();
    let tau_comps: Vec<f64> = je.iter().map(|v| mu.dot(v)).collect();
    let tau = je
        .iter()
        .zip(&tau_comps)
        .fold(DVector::zeros(2 * n), |acc, (v, t)| acc + v * *t);
    let tau_sq: f64 = tau_comps.iter().map(|t| t * t).sum();
    let nu_mu = nu.dot(mu);
    let jnu_mu = jnu.dot(mu);
    if 1.0 - tau_sq < DEGENERACY_THRESHOLD {
        return Err(FrameError::DegenerateFrame(format!("|τ|² = {tau_sq}")));
    }
    if 1.0 - nu_mu * nu_mu < DEGENERACY_THRESHOLD {
        return Err(FrameError::DegenerateFrame(format!("⟨ν,μ⟩ = {nu_mu}")));
    }

    let mut f: Vec<DVector<f64>> = je.iter().map(|v| v - mu * v.dot(mu)).collect();
    f.push(nu * (-jnu_mu) + &jnu * nu_mu);
    let g = DMatrix::from_fn(n, n, |a, b| f[a].dot(&f[b]));
    let g_inv = DMatrix::from_fn(n, n, |a, b| {
        if a == n - 1 || b == n - 1 {
            if a == b {
                1.0 / (1.0 - tau_sq)
            } else {
                0.0
            }
        } else {
            let delta = if a == b { 1.0 } else { 0.0 };
            delta + tau_comps[a] * tau_comps[b] / (1.0 - tau_sq)
        }
    });
    Ok(ProjectionData {
        tau,
        nu_mu,
        jnu_mu,
        tau_comps,
        f,
        g,
        g_inv,
    })
}

/// `cos α ⟨ν,μ⟩ - sin α ⟨Jν,μ⟩`, zero exactly when the Neumann relation holds.
pub fn neumann_residual(frame: &AmbientFrame, alpha: f64) -> f64 {
    alpha.cos() * frame.nu.dot(&frame.mu) - alpha.sin() * j(&frame.nu).dot(&frame.mu)
}

/// `|ω|²` restricted to `T_pM`, returned as `2|τ|²`.
///
/// When `alpha` is given and the frame satisfies the Neumann relation for it,
/// the value is also checked against `2 - 2⟨Jν,μ⟩²/cos²α`.
pub fn omega_norm_boundary(frame: &AmbientFrame, alpha: Option<f64>) -> Result<f64, FrameError> {
    let tau_sq: f64 = frame.e.iter().map(|e| frame.mu.dot(&j(e)).powi(2)).sum();
    let value = 2.0 * tau_sq;
    if let Some(alpha) = alpha {
        if neumann_residual(frame, alpha).abs() < 1e-10 {
            let jnu_mu = j(&frame.nu).dot(&frame.mu);
            let other = 2.0 - 2.0 * jnu_mu * jnu_mu / alpha.cos().powi(2);
            let residual = (value - other).abs();
            if residual > OMEGA_TOL {
                return Err(FrameError::IdentityViolation {
                    name: "omega_tau",
                    residual,
                });
            }
        }
    }
    Ok(value)
}

/// `Σ_{a,b} ω(a,b)²` over the orthonormal basis of `T_pM`.
pub fn omega_norm_direct(frame: &AmbientFrame) -> f64 {
    let basis = frame.m_basis();
    basis
        .iter()
        .flat_map(|a| basis.iter().map(move |b| omega(a, b).powi(2)))
        .sum()
}

/// Residuals of the boundary identities at one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub mu_eqn: f64,
    pub mod_mu: f64,
    pub g_inverse: f64,
    pub tildemu: f64,
    pub nuasf: f64,
    pub muinperps: f64,
    pub nuinperps: f64,
    pub omega_tau: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.mu_eqn,
            self.mod_mu,
            self.g_inverse,
            self.tildemu,
            self.nuasf,
            self.muinperps,
            self.nuinperps,
            self.omega_tau,
        ]
    }

    /// One JSON line `{"seed":…,"residuals":[…]}`.
    pub fn to_json_line(&self, seed: u64) -> String {
        serde_json::json!({ "seed": seed, "residuals": self.as_array() }).to_string()
    }
}

/// Evaluates every boundary identity on `frame`.
pub fn verify_projection_identities(frame: &AmbientFrame) -> Result<IdentityReport, FrameError> {
    let pd = decompose_mu(frame)?;
    let mu = &frame.mu;
    let nu = &frame.nu;
    let jnu = j(nu);
    let c = pd.nu_mu;
    let d = pd.jnu_mu;
    let tau_sq = pd.tau_norm_sq();
    let sup = |v: DVector<f64>| v.amax();

    let mu_eqn = sup(mu - (&pd.tau + nu * c + &jnu * d));
    let mod_mu = (1.0 - c * c - tau_sq - d * d).abs();
    let g_inverse = (&pd.g * &pd.g_inv - DMatrix::identity(frame.n, frame.n)).amax();

    let tau_nm = pd.project_nm(&pd.tau);
    let tildemu = sup(&tau_nm - (&pd.tau - mu * tau_sq));

    let nu_nm = pd.project_nm(nu);
    let f_n = &pd.f[frame.n - 1];
    let nuasf = sup(&nu_nm - (&tau_nm * (-c / (1.0 - tau_sq)) + f_n * (-d / (1.0 - tau_sq))));

    // NΣ = J TΣ has the orthonormal basis Je_I, Jν.
    let mu_nsigma = frame
        .sigma_basis()
        .iter()
        .map(j)
        .fold(DVector::zeros(2 * frame.n), |acc, b| {
            let coef = b.dot(mu);
            acc + b * coef
        });
    let scale = 1.0 / (1.0 - c * c);
    let muinperps = sup(mu - (&mu_nsigma + &nu_nm * c) * scale);
    let nuinperps = sup(nu - (&nu_nm + &mu_nsigma * c) * scale);

    let omega_tau = (omega_norm_direct(frame) - 2.0 * tau_sq).abs();

    Ok(IdentityReport {
        mu_eqn,
        mod_mu,
        g_inverse,
        tildemu,
        nuasf,
        muinperps,
        nuinperps,
        omega_tau,
    })
}

/// Unitary matrix from the QR factorisation of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex<f64>> {
    let z = DMatrix::from_fn(n, n, |_, _| {
        Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    z.qr().q()
}

/// Random frame satisfying the Neumann relation for `alpha`, with
/// `|τ| < 0.9`. Deterministic in `seed`.
pub fn random_boundary_frame(n: usize, alpha: f64, seed: u64) -> Result<AmbientFrame, FrameError> {
    if n < 2 {
        return Err(FrameError::InvalidFrame(format!("n = {n} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    let dir: Vec<f64> = (0..n - 1).map(|_| StandardNormal.sample(&mut rng)).collect();
    let len = dir.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
    let radius = 0.9 * rng.random::<f64>();
    let tau: Vec<f64> = if len > 0.0 {
        dir.iter().map(|x| x * radius / len).collect()
    } else {
        vec![0.0; n - 1]
    };
    AmbientFrame::from_unitary(&u, alpha, &tau)
}
