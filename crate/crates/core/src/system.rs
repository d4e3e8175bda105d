//! The system on a coordinate grid: a harmonic oscillator with the bath
//! counter term, coupled through h(q) = q.
//!
//! Lengths are measured in the oscillator length q_S = √(ħ/Mω_S), so that
//! p is measured in ħ/q_S, the mass is M = ħ/(ω_S q_S²) and ħ = 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{QuadratureSpec, SpectralDensity};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    /// ħω_S in eV.
    pub omega_s: f64,
    /// Counter-term coefficient κ in eV, multiplying h²(q).
    pub kappa: f64,
}

impl SystemSpec {
    pub fn new(omega_s: f64, kappa: f64) -> Result<Self> {
        if !(omega_s.is_finite() && omega_s > 0.0) {
            return Err(invalid(
                "omega_s",
                format!("ħω_S must be > 0, got {omega_s}"),
            ));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(invalid("kappa", format!("κ must be ≥ 0, got {kappa}")));
        }
        Ok(Self { omega_s, kappa })
    }

    /// M in units of ħ/(eV⁻¹ q_S²): M = 1/ω_S.
    pub fn mass(&self) -> f64 {
        1.0 / self.omega_s
    }
}

/// Σ_i d_i²/ħω_i, or ∫₀^Ω J(ω)/ω dω for a continuous density.
pub fn counter_term_coefficient(density: &SpectralDensity, quad: QuadratureSpec) -> Result<f64> {
    density.counter_term(quad)
}

/// Finite-difference stencil for ∂ and ∂².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Second order.
    #[serde(rename = "3")]
    Three,
    /// Eighth order.
    #[default]
    #[serde(rename = "9")]
    Nine,
}

impl Stencil {
    /// Central weights c₀, c₁, … of ∂² (times Δq²).
    fn second(&self) -> &'static [f64] {
        match self {
            Self::Three => &[-2.0, 1.0],
            Self::Nine => &[
                -205.0 / 72.0,
                8.0 / 5.0,
                -1.0 / 5.0,
                8.0 / 315.0,
                -1.0 / 560.0,
            ],
        }
    }

    /// Antisymmetric weights c₁, c₂, … of ∂ (times Δq).
    fn first(&self) -> &'static [f64] {
        match self {
            Self::Three => &[0.5],
            Self::Nine => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        }
    }
}

/// Cell-centred points q_j = q_min + (j + ½)Δq, in units of q_S.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    q_min: f64,
    dq: f64,
    len: usize,
    stencil: Stencil,
}

impl Grid {
    pub fn new(q_min: f64, q_max: f64, dq: f64, stencil: Stencil) -> Result<Self> {
        if !(dq.is_finite() && dq > 0.0) {
            return Err(invalid("dq", format!("Δq must be > 0, got {dq}")));
        }
        if !(q_min.is_finite() && q_max.is_finite() && q_max > q_min) {
            return Err(invalid(
                "q_max",
                format!("need q_min < q_max, got ({q_min}, {q_max})"),
            ));
        }
        let cells = (q_max - q_min) / dq;
        let len = cells.round();
        if (cells - len).abs() > 1e-9 * cells.max(1.0) {
            return Err(invalid(
                "dq",
                format!("(q_max − q_min)/Δq = {cells} is not an integer"),
            ));
        }
        Ok(Self {
            q_min,
            dq,
            len: len as usize,
            stencil,
        })
    }

    /// (−5.5, 5.5) with Δq = 0.25: 44 points.
    pub fn benchmark() -> Self {
        Self::new(-5.5, 5.5, 0.25, Stencil::default()).expect("valid default grid")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn point(&self, j: usize) -> f64 {
        self.q_min + (j as f64 + 0.5) * self.dq
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.point(j)).collect()
    }

    /// out = ∂²x with zero values outside the grid.
    pub fn second_derivative(&self, x: &[f64], out: &mut [f64]) {
        let c = self.stencil.second();
        let scale = 1.0 / (self.dq * self.dq);
        let n = self.len;
        let (x, out) = (&x[..n], &mut out[..n]);
        for j in 0..n {
            out[j] = c[0] * scale * x[j];
        }
        for (m, &cm) in c.iter().enumerate().skip(1) {
            if m >= n {
                break;
            }
            let w = cm * scale;
            for j in m..n {
                out[j] += w * x[j - m];
            }
            for j in 0..n - m {
                out[j] += w * x[j + m];
            }
        }
    }

    /// out = ∂x with zero values outside the grid.
    pub fn first_derivative(&self, x: &[f64], out: &mut [f64]) {
        let c = self.stencil.first();
        let scale = 1.0 / self.dq;
        let n = self.len;
        for j in 0..n {
            let mut s = 0.0;
            for (i, &cm) in c.iter().enumerate() {
                let m = i + 1;
                let left = if j >= m { x[j - m] } else { 0.0 };
                let right = if j + m < n { x[j + m] } else { 0.0 };
                s += cm * (right - left);
            }
            out[j] = s * scale;
        }
    }

    /// Σ|ψ_j|²Δq.
    pub fn norm_sqr(&self, psi: &[Complex64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dq
    }

    /// Largest |eigenvalue| of −∂² on this grid, bounded by the stencil's
    /// absolute row sum.
    pub fn laplacian_bound(&self) -> f64 {
        let c = self.stencil.second();
        (c[0].abs() + 2.0 * c[1..].iter().map(|x| x.abs()).sum::<f64>()) / (self.dq * self.dq)
    }
}

/// H_S = p²/2M + ½Mω_S²q² + κh²(q) on a grid, with h(q) = q stored per point.
#[derive(Debug, Clone)]
pub struct SystemHamiltonian {
    spec: SystemSpec,
    grid: Grid,
    /// ħ²/2M.
    kinetic: f64,
    potential: Vec<f64>,
    coupling: Vec<f64>,
}

impl SystemHamiltonian {
    pub fn new(spec: SystemSpec, grid: Grid) -> Self {
        let coupling = grid.points();
        let potential = coupling
            .iter()
            .map(|&q| 0.5 * spec.omega_s * q * q + spec.kappa * q * q)
            .collect();
        Self {
            kinetic: 0.5 / spec.mass(),
            spec,
            grid,
            potential,
            coupling,
        }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// h(q_j).
    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// out = H_S x for a real vector (H_S is real symmetric).
    pub fn apply_real(&self, x: &[f64], out: &mut [f64]) {
        self.grid.second_derivative(x, out);
        for ((o, &v), &xi) in out.iter_mut().zip(&self.potential).zip(x) {
            *o = v * xi - self.kinetic * *o;
        }
    }

    /// H_S ψ.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        let mut hre = vec![0.0; psi.len()];
        let mut him = vec![0.0; psi.len()];
        self.apply_real(&re, &mut hre);
        self.apply_real(&im, &mut him);
        hre.into_iter()
            .zip(him)
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn override_for_tests(&mut self, potential: Vec<f64>, coupling: Vec<f64>) {
        self.potential = potential;
        self.coupling = coupling;
        self.kinetic = 0.0;
    }

    /// Upper bound on the spectral radius of H_S in eV.
    pub fn spectral_bound(&self) -> f64 {
        self.kinetic * self.grid.laplacian_bound()
            + self.potential.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// H_S ψ as a free function.
pub fn apply_h_s(psi: &[Complex64], hamiltonian: &SystemHamiltonian) -> Vec<Complex64> {
    hamiltonian.apply(psi)
}

#[derive(Debug, Clone)]
pub struct InitialState {
    pub psi: Vec<Complex64>,
    /// Σ|φ_j|²Δq before renormalisation.
    pub raw_norm: f64,
}

impl InitialState {
    /// True when the grid clips a visible part of the packet.
    pub fn clipped(&self) -> bool {
        self.raw_norm < 0.999
    }
}

/// φ(q) = (2πσ₀²)^{−1/4} exp(−(q−q₀)²/4σ₀²) exp(ip₀q), renormalised on the grid.
pub fn initial_gaussian(q0: f64, sigma0: f64, p0: f64, grid: &Grid) -> Result<InitialState> {
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(invalid("sigma0", format!("σ₀ must be > 0, got {sigma0}")));
    }
    if !(q0.is_finite() && p0.is_finite()) {
        return Err(invalid("q0", "q₀ and p₀ must be finite"));
    }
    let amp = (2.0 * std::f64::consts::PI * sigma0 * sigma0).powf(-0.25);
    let mut psi: Vec<Complex64> = grid
        .points()
        .into_iter()
        .map(|q| {
            let d = q - q0;
            Complex64::from_polar(amp * (-d * d / (4.0 * sigma0 * sigma0)).exp(), p0 * q)
        })
        .collect();
    let raw_norm = grid.norm_sqr(&psi);
    if raw_norm == 0.0 {
        return Err(invalid(
            "q0",
            "the initial packet has no weight on the grid",
        ));
    }
    let scale = 1.0 / raw_norm.sqrt();
    psi.iter_mut().for_each(|z| *z *= scale);
    if raw_norm < 0.999 {
        log::warn!("grid holds only {raw_norm:.6} of the initial packet's norm");
    }
    Ok(InitialState { psi, raw_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn inner(a: &[Complex64], b: &[Complex64], dq: f64) -> Complex64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex64>()
            * dq
    }

    #[test]
    fn benchmark_grid_has_44_points() {
        let g = Grid::benchmark();
        assert_eq!(g.len(), 44);
        assert_abs_diff_eq!(g.point(0), -5.375, epsilon = 1e-15);
        assert_abs_diff_eq!(g.point(43), 5.375, epsilon = 1e-15);
        assert!(Grid::new(-5.5, 5.5, 0.0, Stencil::Nine).is_err());
        assert!(Grid::new(-5.5, 5.5, 0.3, Stencil::Nine).is_err());
        assert!(Grid::new(1.0, -1.0, 0.5, Stencil::Nine).is_err());
    }

    #[test]
    fn ground_state_energy() {
        // the bare ground state is an eigenstate up to discretisation error
        let g = Grid::new(-8.0, 8.0, 0.125, Stencil::Nine).unwrap();
        let h = SystemHamiltonian::new(SystemSpec::new(2.0, 0.0).unwrap(), g.clone());
        let phi = initial_gaussian(0.0, FRAC_1_SQRT_2, 0.0, &g).unwrap().psi;
        let hphi = h.apply(&phi);
        for (a, b) in hphi.iter().zip(&phi) {
            assert_abs_diff_eq!((a - b * 1.0).norm(), 0.0, epsilon = 1e-6);
        }
        let three = SystemHamiltonian::new(
            SystemSpec::new(2.0, 0.0).unwrap(),
            Grid::new(-8.0, 8.0, 0.125, Stencil::Three).unwrap(),
        );
        let e = inner(&phi, &three.apply(&phi), 0.125).re;
        assert_abs_diff_eq!(e, 1.0, epsilon = 2e-3);
        assert!(h
            .apply(&vec![Complex64::new(0.0, 0.0); g.len()])
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn mean_energy_matches_gaussian_formula() {
        let g = Grid::benchmark();
        let omega_s = 2.0;
        let h = SystemHamiltonian::new(SystemSpec::new(omega_s, 0.0).unwrap(), g.clone());
        for &(q0, s0, p0) in &[(-1.0, FRAC_1_SQRT_2, 0.0), (0.5, 0.9, 0.7)] {
            let phi = initial_gaussian(q0, s0, p0, &g).unwrap().psi;
            let e = inner(&phi, &h.apply(&phi), g.dq()).re;
            let want = omega_s
                * (0.25 * 2.0 * s0 * s0 + 0.25 / (2.0 * s0 * s0) + q0 * q0 / 2.0 + p0 * p0 / 2.0);
            assert_abs_diff_eq!(e, want, epsilon = 1e-5);
        }
    }

    #[test]
    fn initial_gaussian_moments() {
        let g = Grid::benchmark();
        let st = initial_gaussian(-1.0, FRAC_1_SQRT_2, 0.0, &g).unwrap();
        assert!(!st.clipped());
        assert_abs_diff_eq!(g.norm_sqr(&st.psi), 1.0, epsilon = 1e-12);
        let q = g.points();
        let mean: f64 = st
            .psi
            .iter()
            .zip(&q)
            .map(|(z, q)| z.norm_sqr() * q)
            .sum::<f64>()
            * g.dq();
        let var: f64 = st
            .psi
            .iter()
            .zip(&q)
            .map(|(z, q)| z.norm_sqr() * (q - mean).powi(2))
            .sum::<f64>()
            * g.dq();
        assert_abs_diff_eq!(mean, -1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(var, 0.5, epsilon = 1e-8);

        let moving = initial_gaussian(0.0, FRAC_1_SQRT_2, 0.8, &g).unwrap().psi;
        let re: Vec<f64> = moving.iter().map(|z| z.re).collect();
        let im: Vec<f64> = moving.iter().map(|z| z.im).collect();
        let (mut dre, mut dim) = (vec![0.0; 44], vec![0.0; 44]);
        g.first_derivative(&re, &mut dre);
        g.first_derivative(&im, &mut dim);
        // ⟨p⟩ = Σ conj(ψ)(−i∂ψ)Δq
        let p: f64 = (0..44)
            .map(|j| (moving[j].conj() * Complex64::new(dim[j], -dre[j])).re)
            .sum::<f64>()
            * g.dq();
        assert_abs_diff_eq!(p, 0.8, epsilon = 1e-5);
    }

    #[test]
    fn narrow_grid_is_flagged() {
        let g = Grid::new(-1.0, 1.0, 0.25, Stencil::Nine).unwrap();
        let st = initial_gaussian(0.0, 1.0, 0.0, &g).unwrap();
        assert!(st.clipped());
        assert_abs_diff_eq!(g.norm_sqr(&st.psi), 1.0, epsilon = 1e-12);
        assert!(initial_gaussian(0.0, 0.0, 0.0, &g).is_err());
    }

    #[test]
    fn counter_term_values() {
        let q = QuadratureSpec::default();
        let d = SpectralDensity::ohmic_circular(1.0, 4.0).unwrap();
        assert_abs_diff_eq!(
            counter_term_coefficient(&d, q).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-10
        );
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for stencil in [Stencil::Three, Stencil::Nine] {
            let g = Grid::new(-5.5, 5.5, 0.25, stencil).unwrap();
            let h = SystemHamiltonian::new(SystemSpec::new(2.0, 0.785).unwrap(), g.clone());
            let a: Vec<Complex64> = (0..44).map(|_| Complex64::new(next(), next())).collect();
            let b: Vec<Complex64> = (0..44).map(|_| Complex64::new(next(), next())).collect();
            let lhs = inner(&b, &h.apply(&a), g.dq());
            let rhs = inner(&a, &h.apply(&b), g.dq()).conj();
            assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
