//! Spectral densities, the bath correlation function and the expansion of
//! e^{-iωt} that turns the bath into a finite set of collective modes.
//!
//! Units: ħ = 1, energies and frequencies in eV, times in eV⁻¹.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{hermitian_eigen, symmetric_eigen};
use crate::error::{invalid, HeomError, Result};
use crate::quadrature::GaussLegendre;
use crate::special::{bessel_j_sequence, chebyshev_t_sequence};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    /// ω_i in eV/ħ.
    pub frequency: f64,
    /// d_i in eV.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// J(ω) = V_I (ω/Ω) √(1 − (ω/Ω)²) on [0, Ω], extended as an odd function.
    OhmicCircular { strength: f64, cutoff: f64 },
    /// J(ω) = Σ_i d_i² δ(ω − ω_i).
    Discrete { modes: Vec<BathMode> },
}

impl SpectralDensity {
    pub fn ohmic_circular(strength: f64, cutoff: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(invalid(
                "strength",
                format!("V_I must be ≥ 0, got {strength}"),
            ));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(invalid("cutoff", format!("Ω must be > 0, got {cutoff}")));
        }
        Ok(Self::OhmicCircular { strength, cutoff })
    }

    pub fn discrete(modes: Vec<BathMode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(invalid("modes", "a discrete bath needs at least one mode"));
        }
        for m in &modes {
            if !(m.frequency.is_finite() && m.frequency > 0.0) {
                return Err(invalid(
                    "modes",
                    format!("frequency must be > 0, got {}", m.frequency),
                ));
            }
            if !m.coupling.is_finite() {
                return Err(invalid("modes", "coupling must be finite"));
            }
        }
        Ok(Self::Discrete { modes })
    }

    /// Pointwise J(ω). A discrete density has no pointwise value and returns 0.
    pub fn eval(&self, omega: f64) -> f64 {
        match *self {
            Self::OhmicCircular { strength, cutoff } => {
                let x = omega.abs() / cutoff;
                if x >= 1.0 {
                    return 0.0;
                }
                let v = strength * x * (1.0 - x * x).sqrt();
                if omega < 0.0 {
                    -v
                } else {
                    v
                }
            }
            Self::Discrete { .. } => 0.0,
        }
    }

    /// Upper edge of the support: Ω, or the largest mode frequency.
    pub fn cutoff(&self) -> f64 {
        match self {
            Self::OhmicCircular { cutoff, .. } => *cutoff,
            Self::Discrete { modes } => modes.iter().map(|m| m.frequency).fold(0.0, f64::max),
        }
    }

    /// lim_{ω→0} J(ω)/ω.
    fn slope_at_origin(&self) -> f64 {
        match *self {
            Self::OhmicCircular { strength, cutoff } => strength / cutoff,
            Self::Discrete { .. } => 0.0,
        }
    }

    /// Σ_i d_i²/ħω_i, or ∫₀^Ω J(ω)/ω dω.
    pub fn counter_term(&self, quad: QuadratureSpec) -> Result<f64> {
        match self {
            Self::Discrete { modes } => Ok(modes
                .iter()
                .map(|m| m.coupling * m.coupling / m.frequency)
                .sum()),
            Self::OhmicCircular { cutoff, .. } => {
                quad.validate()?;
                // ω = Ω cos θ; J(ω)/ω · Ω sin θ is smooth in θ
                let rule = GaussLegendre::new(quad.nodes);
                let c = *cutoff;
                Ok(rule.integrate(0.0, 0.5 * PI, |theta| {
                    let omega = c * theta.cos();
                    let ratio = if omega > 0.0 {
                        self.eval(omega) / omega
                    } else {
                        self.slope_at_origin()
                    };
                    ratio * c * theta.sin()
                }))
            }
        }
    }
}

/// J(ω) as a free function for callers that hold the parameters separately.
pub fn eval_spectral_density(omega: f64, density: &SpectralDensity) -> f64 {
    density.eval(omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Zero,
    /// Inverse temperature β in eV⁻¹.
    Finite {
        beta: f64,
    },
}

impl Temperature {
    /// β = ∞ maps to [`Temperature::Zero`].
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta == f64::INFINITY {
            Ok(Self::Zero)
        } else if beta.is_finite() && beta > 0.0 {
            Ok(Self::Finite { beta })
        } else {
            Err(invalid("beta", format!("β must be > 0 or ∞, got {beta}")))
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Self::Zero => f64::INFINITY,
            Self::Finite { beta } => beta,
        }
    }

    /// Bose–Einstein occupation n_β(ω) for ω > 0.
    pub fn occupation(&self, omega: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Finite { beta } => 1.0 / (beta * omega).exp_m1(),
        }
    }

    /// coth(βħω/2) = 2 n_β(ω) + 1.
    pub fn coth_factor(&self, omega: f64) -> f64 {
        2.0 * self.occupation(omega) + 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub density: SpectralDensity,
    pub temperature: Temperature,
}

impl BathSpec {
    pub fn new(density: SpectralDensity, temperature: Temperature) -> Self {
        Self {
            density,
            temperature,
        }
    }

    /// J(ω)/(1 − e^{−βħω}) on [−Ω, Ω], with the removable point at ω = 0
    /// replaced by its limit V_I/(βħΩ).
    pub fn thermal_weight(&self, omega: f64) -> f64 {
        match self.temperature {
            Temperature::Zero => {
                if omega > 0.0 {
                    self.density.eval(omega)
                } else {
                    0.0
                }
            }
            Temperature::Finite { beta } => {
                if omega == 0.0 {
                    return self.density.slope_at_origin() / beta;
                }
                let x = beta * omega;
                self.density.eval(omega) / -(-x).exp_m1()
            }
        }
    }

    /// Quadrature nodes ω_i and weights W_i such that
    /// ∫ dω J(ω)/(1−e^{−βħω}) g(ω) ≈ Σ_i W_i g(ω_i).
    ///
    /// The rule is Gauss–Legendre in θ with ω = Ω cos θ, over θ ∈ (0, π/2)
    /// at zero temperature and over both (0, π/2) and (π/2, π) otherwise.
    /// The substitution removes the square-root edge of the circular cutoff.
    fn weighted_nodes(&self, quad: QuadratureSpec) -> Result<Vec<(f64, f64)>> {
        quad.validate()?;
        let cutoff = match self.density {
            SpectralDensity::OhmicCircular { cutoff, .. } => cutoff,
            SpectralDensity::Discrete { .. } => {
                return Err(HeomError::Unsupported(
                    "quadrature nodes requested for a discrete density".into(),
                ))
            }
        };
        // the negative-frequency half gets its own rule so a steep thermal
        // factor near ω = 0 never straddles a panel
        let panels: &[(f64, f64)] = match self.temperature {
            Temperature::Zero => &[(0.0, 0.5 * PI)],
            Temperature::Finite { .. } => &[(0.0, 0.5 * PI), (0.5 * PI, PI)],
        };
        let rule = GaussLegendre::new(quad.nodes);
        Ok(panels
            .iter()
            .flat_map(|&(a, b)| rule.mapped(a, b))
            .map(|(theta, w)| {
                let omega = cutoff * theta.cos();
                (omega, w * cutoff * theta.sin() * self.thermal_weight(omega))
            })
            .collect())
    }

    /// Discrete modes as (ω, weight) pairs with both thermal branches:
    /// d²(n+1) at +ω and d²n at −ω.
    fn discrete_lines(&self) -> Option<Vec<(f64, f64)>> {
        let SpectralDensity::Discrete { modes } = &self.density else {
            return None;
        };
        let mut lines = Vec::with_capacity(2 * modes.len());
        for m in modes {
            let d2 = m.coupling * m.coupling;
            let n = self.temperature.occupation(m.frequency);
            lines.push((m.frequency, d2 * (n + 1.0)));
            if n > 0.0 {
                lines.push((-m.frequency, d2 * n));
            }
        }
        Some(lines)
    }

    fn spectral_lines(&self, quad: QuadratureSpec) -> Result<Vec<(f64, f64)>> {
        match self.discrete_lines() {
            Some(lines) => Ok(lines),
            None => self.weighted_nodes(quad),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes: 256 }
    }
}

impl QuadratureSpec {
    pub const MIN_NODES: usize = 32;

    pub fn new(nodes: usize) -> Result<Self> {
        let q = Self { nodes };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < Self::MIN_NODES {
            return Err(invalid(
                "quad_nodes",
                format!(
                    "need at least {} nodes, got {}",
                    Self::MIN_NODES,
                    self.nodes
                ),
            ));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
        }
    }
}

/// L(t)/ħ in eV² (ħ = 1).
pub fn bath_correlation(t: f64, bath: &BathSpec, quad: QuadratureSpec) -> Result<Complex64> {
    if !t.is_finite() {
        return Err(invalid("t", format!("time must be finite, got {t}")));
    }
    let lines = bath.spectral_lines(quad)?;
    Ok(lines
        .iter()
        .map(|&(omega, w)| w * Complex64::from_polar(1.0, -omega * t))
        .sum())
}

/// Im L(t)/ħ = −(π V_I Ω/8)(J₁(Ωt) + J₃(Ωt)) for the circular-cutoff density,
/// independent of temperature.
pub fn ohmic_circular_im_correlation(t: f64, strength: f64, cutoff: f64) -> f64 {
    let j = bessel_j_sequence(3, cutoff * t);
    -PI * strength * cutoff / 8.0 * (j[1] + j[3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Bessel,
    DiscreteExponential,
}

/// A set {u_k} closed under differentiation, du_k/dt = Σ C_{kk'} u_{k'},
/// with e^{−iωt} = Σ_k η_k(ω) u_k(t).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionBasis {
    kind: BasisKind,
    cutoff: f64,
    modes: Vec<BathMode>,
    derivative: Array2<Complex64>,
}

impl ExpansionBasis {
    /// u_k(t) = Ω J_{k−1}(Ωt), k = 1..K.
    pub fn bessel(size: usize, cutoff: f64) -> Result<Self> {
        if size == 0 {
            return Err(invalid("k", "the basis needs at least one function"));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(invalid("cutoff", format!("Ω must be > 0, got {cutoff}")));
        }
        let mut c = Array2::zeros((size, size));
        for k in 0..size {
            if k >= 1 {
                c[[k, k - 1]] = Complex64::new(cutoff / 2.0, 0.0);
            }
            if k + 1 < size {
                c[[k, k + 1]] = Complex64::new(-cutoff / 2.0, 0.0);
            }
        }
        if size >= 2 {
            c[[0, 1]] = Complex64::new(-cutoff, 0.0);
        }
        Ok(Self {
            kind: BasisKind::Bessel,
            cutoff,
            modes: Vec::new(),
            derivative: c,
        })
    }

    /// u_i(t) = (d_i/ħ) e^{−iω_i t}, one function per bath mode.
    pub fn discrete(modes: &[BathMode]) -> Result<Self> {
        SpectralDensity::discrete(modes.to_vec())?;
        let k = modes.len();
        let mut c = Array2::zeros((k, k));
        for (i, m) in modes.iter().enumerate() {
            c[[i, i]] = Complex64::new(0.0, -m.frequency);
        }
        Ok(Self {
            kind: BasisKind::DiscreteExponential,
            cutoff: modes.iter().map(|m| m.frequency).fold(0.0, f64::max),
            modes: modes.to_vec(),
            derivative: c,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.derivative.nrows()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// The matrix C of du_k/dt = Σ C_{kk'} u_{k'}.
    pub fn derivative(&self) -> &Array2<Complex64> {
        &self.derivative
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    /// u_k(t) for all k; t ≥ 0.
    pub fn eval_u(&self, t: f64) -> Vec<Complex64> {
        match self.kind {
            BasisKind::Bessel => bessel_j_sequence(self.size() - 1, self.cutoff * t)
                .into_iter()
                .map(|j| Complex64::new(self.cutoff * j, 0.0))
                .collect(),
            BasisKind::DiscreteExponential => self
                .modes
                .iter()
                .map(|m| m.coupling * Complex64::from_polar(1.0, -m.frequency * t))
                .collect(),
        }
    }

    /// η_k(ω) for every k of a Bessel basis.
    pub fn eta_all(&self, omega: f64) -> Result<Vec<Complex64>> {
        if self.kind != BasisKind::Bessel {
            return Err(HeomError::Unsupported(
                "expansion coefficients η_k are defined for the Bessel basis".into(),
            ));
        }
        if omega.abs() > self.cutoff {
            return Err(HeomError::Domain {
                what: "η_k(ω)",
                value: omega,
                limit: self.cutoff,
            });
        }
        let t = chebyshev_t_sequence(self.size() - 1, omega / self.cutoff);
        let mut phase = Complex64::new(1.0, 0.0);
        Ok(t.into_iter()
            .enumerate()
            .map(|(n, tn)| {
                let factor = if n == 0 { 1.0 } else { 2.0 };
                let v = phase * (factor * tn / self.cutoff);
                phase *= -I;
                v
            })
            .collect())
    }
}

/// η_k(ω) = (2 − δ_{k,1}) (−i)^{k−1} T_{k−1}(ω/Ω)/Ω, for the 1-based index k.
pub fn chebyshev_eta(k: usize, omega: f64, cutoff: f64) -> Result<Complex64> {
    if k == 0 {
        return Err(invalid("k", "η_k is indexed from 1"));
    }
    if omega.abs() > cutoff {
        return Err(HeomError::Domain {
            what: "η_k(ω)",
            value: omega,
            limit: cutoff,
        });
    }
    let t = chebyshev_t_sequence(k - 1, omega / cutoff)[k - 1];
    let factor = if k == 1 { 1.0 } else { 2.0 };
    Ok((-I).powu((k - 1) as u32) * (factor * t / cutoff))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    QuadratureNotConverged { max_change: f64 },
    NegativeEigenvalue { index: usize, value: f64 },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::QuadratureNotConverged { max_change } => write!(
                f,
                "D-matrix quadrature not converged: doubling the nodes changed an entry by {max_change:e}"
            ),
            Self::NegativeEigenvalue { index, value } => {
                write!(f, "eigenvalue λ_{} = {value:e} is negative beyond rounding", index + 1)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub matrix: Array2<Complex64>,
    pub diagnostics: Vec<Diagnostic>,
}

/// D_{kk'} = (1/ħ) ∫ dω J(ω)/(1 − e^{−βħω}) η_k(ω) η*_{k'}(ω).
pub fn compute_d(
    bath: &BathSpec,
    basis: &ExpansionBasis,
    quad: QuadratureSpec,
) -> Result<WeightMatrix> {
    if basis.kind() == BasisKind::DiscreteExponential {
        if bath.temperature != Temperature::Zero {
            return Err(HeomError::Unsupported(
                "the discrete exponential basis covers zero temperature only".into(),
            ));
        }
        return Ok(WeightMatrix {
            matrix: Array2::eye(basis.size()),
            diagnostics: Vec::new(),
        });
    }
    let matrix = d_with_nodes(bath, basis, quad)?;
    let mut diagnostics = Vec::new();
    if bath.discrete_lines().is_none() {
        let finer = d_with_nodes(bath, basis, quad.doubled())?;
        let change = matrix
            .iter()
            .zip(finer.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if change > 1e-10 {
            diagnostics.push(Diagnostic::QuadratureNotConverged { max_change: change });
        }
    }
    Ok(WeightMatrix {
        matrix,
        diagnostics,
    })
}

fn d_with_nodes(
    bath: &BathSpec,
    basis: &ExpansionBasis,
    quad: QuadratureSpec,
) -> Result<Array2<Complex64>> {
    let k = basis.size();
    let mut d = Array2::<Complex64>::zeros((k, k));
    for (omega, w) in bath.spectral_lines(quad)? {
        if w == 0.0 {
            continue;
        }
        let eta = basis.eta_all(omega.clamp(-basis.cutoff(), basis.cutoff()))?;
        for a in 0..k {
            let ea = eta[a] * w;
            for b in 0..k {
                d[[a, b]] += ea * eta[b].conj();
            }
        }
    }
    let dh = d.t().mapv(|z| z.conj());
    Ok((&d + &dh).mapv(|z| z * 0.5))
}

/// Bath data feeding the hierarchy: the eigen-decomposition of D and the
/// rotated derivative matrix and initial amplitudes.
#[derive(Debug, Clone)]
pub struct BathCoefficients {
    /// λ_k, ascending.
    pub lambda: Vec<f64>,
    /// Columns are eigenvectors of D.
    pub unitary: Array2<Complex64>,
    /// C̄_{kk'} = Σ U_{qk} C_{qq'} U*_{q'k'}.
    pub c_bar: Array2<Complex64>,
    /// v_k(0).
    pub v0: Vec<Complex64>,
    /// c̄_k = λ_k v_k*(0).
    pub c_bar_k: Vec<Complex64>,
    pub diagnostics: Vec<Diagnostic>,
}

pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-12;

pub fn build_bath_coefficients(
    d: &WeightMatrix,
    basis: &ExpansionBasis,
) -> Result<BathCoefficients> {
    let k = basis.size();
    if d.matrix.nrows() != k || d.matrix.ncols() != k {
        return Err(HeomError::DimensionMismatch(format!(
            "D is {}x{} but the basis has {k} functions",
            d.matrix.nrows(),
            d.matrix.ncols()
        )));
    }
    let (mut lambda, unitary) = match basis.kind() {
        BasisKind::Bessel => bessel_eigensystem(&d.matrix)?,
        BasisKind::DiscreteExponential => {
            let eig = hermitian_eigen(&d.matrix)?;
            (eig.values, eig.vectors)
        }
    };
    let mut diagnostics = d.diagnostics.clone();
    for (i, l) in lambda.iter_mut().enumerate() {
        if *l < 0.0 {
            if *l < -NEGATIVE_EIGENVALUE_TOLERANCE {
                diagnostics.push(Diagnostic::NegativeEigenvalue {
                    index: i,
                    value: *l,
                });
            }
            *l = 0.0;
        }
    }
    let mut coeffs = BathCoefficients::from_eigensystem(lambda, unitary, basis)?;
    coeffs.diagnostics = diagnostics;
    Ok(coeffs)
}

/// (−i)^q as an exact complex number.
fn minus_i_power(q: usize) -> Complex64 {
    match q % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// For the Bessel basis η_q carries the factor (−i)^q times a real function,
/// so D = P R P† with P = diag((−i)^q) and R real symmetric. Diagonalising R
/// gives eigenvectors U = P O with O real, the phase convention under which
/// C̄ is purely imaginary and v(0), c̄ are real.
fn bessel_eigensystem(d: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let k = d.nrows();
    let rotated = Array2::from_shape_fn((k, k), |(a, b)| {
        minus_i_power(a).conj() * d[[a, b]] * minus_i_power(b)
    });
    let scale = rotated.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let stray = rotated.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if stray > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        let eig = hermitian_eigen(d)?;
        return Ok((eig.values, eig.vectors));
    }
    let eig = symmetric_eigen(&rotated.mapv(|z| z.re))?;
    let unitary = Array2::from_shape_fn((k, k), |(q, c)| minus_i_power(q) * eig.vectors[[q, c]]);
    Ok((eig.values, unitary))
}

impl BathCoefficients {
    /// Derives C̄, v(0) and c̄ from a given eigensystem. Any column phase
    /// convention for `unitary` is accepted.
    pub fn from_eigensystem(
        lambda: Vec<f64>,
        unitary: Array2<Complex64>,
        basis: &ExpansionBasis,
    ) -> Result<Self> {
        let k = basis.size();
        if lambda.len() != k || unitary.nrows() != k || unitary.ncols() != k {
            return Err(HeomError::DimensionMismatch(format!(
                "eigensystem of size {} for a basis of {k} functions",
                lambda.len()
            )));
        }
        let c = basis.derivative();
        // C̄ = Uᵀ C U*
        let mut cu = Array2::<Complex64>::zeros((k, k));
        for q in 0..k {
            for kp in 0..k {
                let mut s = Complex64::new(0.0, 0.0);
                for qp in 0..k {
                    s += c[[q, qp]] * unitary[[qp, kp]].conj();
                }
                cu[[q, kp]] = s;
            }
        }
        let mut c_bar = Array2::<Complex64>::zeros((k, k));
        for a in 0..k {
            for b in 0..k {
                let mut s = Complex64::new(0.0, 0.0);
                for q in 0..k {
                    s += unitary[[q, a]] * cu[[q, b]];
                }
                c_bar[[a, b]] = s;
            }
        }
        let u0 = basis.eval_u(0.0);
        let v0 = rotate_to_eigenbasis(&unitary, &u0);
        let c_bar_k = lambda.iter().zip(&v0).map(|(l, v)| *l * v.conj()).collect();
        Ok(Self {
            lambda,
            unitary,
            c_bar,
            v0,
            c_bar_k,
            diagnostics: Vec::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.lambda.len()
    }

    /// Σ_k c̄_k v_k(t), which approximates L(t)/ħ.
    pub fn reconstructed_correlation(&self, t: f64, basis: &ExpansionBasis) -> Complex64 {
        let (_, v) = eval_basis(t, basis, self);
        self.c_bar_k.iter().zip(&v).map(|(c, v)| c * v).sum()
    }
}

fn rotate_to_eigenbasis(unitary: &Array2<Complex64>, u: &[Complex64]) -> Vec<Complex64> {
    let k = u.len();
    (0..k)
        .map(|a| (0..k).map(|q| unitary[[q, a]] * u[q]).sum())
        .collect()
}

/// (u_k(t), v_k(t)) with v_k = Σ_{k'} U_{k'k} u_{k'}.
pub fn eval_basis(
    t: f64,
    basis: &ExpansionBasis,
    coeffs: &BathCoefficients,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let u = basis.eval_u(t);
    let v = rotate_to_eigenbasis(&coeffs.unitary, &u);
    (u, v)
}

/// λ_{kk'}(t) = [b_k(t), b†_{k'}(0)] = (1/ħ) ∫ dω w(ω) η̄_{k'}(ω) η̄*_k(ω) e^{−iωt}
/// with η̄_k = Σ_{k'} U*_{k'k} η_{k'} and w the thermal weight used for D,
/// so that λ_{kk'}(0) = δ_{kk'} λ_k.
pub fn lambda_cross(
    t: f64,
    coeffs: &BathCoefficients,
    basis: &ExpansionBasis,
    bath: &BathSpec,
    quad: QuadratureSpec,
) -> Result<Array2<Complex64>> {
    if basis.kind() != BasisKind::Bessel {
        return Err(HeomError::Unsupported(
            "λ_{kk'}(t) is defined for the Bessel basis".into(),
        ));
    }
    if !t.is_finite() {
        return Err(invalid("t", format!("time must be finite, got {t}")));
    }
    let k = basis.size();
    let mut out = Array2::<Complex64>::zeros((k, k));
    for (omega, w) in bath.spectral_lines(quad)? {
        if w == 0.0 {
            continue;
        }
        let eta = basis.eta_all(omega.clamp(-basis.cutoff(), basis.cutoff()))?;
        let eta_bar: Vec<Complex64> = (0..k)
            .map(|a| (0..k).map(|q| coeffs.unitary[[q, a]].conj() * eta[q]).sum())
            .collect();
        let phase = Complex64::from_polar(w, -omega * t);
        for a in 0..k {
            let left = eta_bar[a].conj() * phase;
            for b in 0..k {
                out[[a, b]] += left * eta_bar[b];
            }
        }
    }
    Ok(out)
}
