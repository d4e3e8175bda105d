//! Parameter sets with the benchmark defaults, and the glue that turns them
//! into a ready-to-run hierarchy or oracle.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bath::{
    build_bath_coefficients, compute_d, BathCoefficients, BathMode, BathSpec, Diagnostic,
    ExpansionBasis, QuadratureSpec, SpectralDensity, Temperature,
};
use crate::error::{invalid, Result};
use crate::hierarchy::{memory_estimate, state_count, IndexSpace, StateBudget};
use crate::observables::{member_weights, observe, reduced_density, ReducedDensity, Trajectory};
use crate::oracle::{self, ChannelsRun, Discretization, GaussianPacket, MomentsRun, Sampling};
use crate::propagator::{propagate_with, HeomOperator, HierarchyState, PropagationConfig};
use crate::system::{initial_gaussian, Grid, Stencil, SystemHamiltonian, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// ħω_S in eV.
    pub omega_s: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub dq: f64,
    pub stencil: Stencil,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_s: 2.0,
            q_min: -5.5,
            q_max: 5.5,
            dq: 0.25,
            stencil: Stencil::Nine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    #[default]
    OhmicCircular,
    Discrete,
}

/// β in eV⁻¹; serialised as a number or the string "zero".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Beta {
    #[default]
    Zero,
    Value(f64),
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Zero => s.serialize_str("zero"),
            Self::Value(b) => s.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(b) => Ok(Self::Value(b)),
            Raw::Text(t) if t == "zero" => Ok(Self::Zero),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "beta must be a number or \"zero\", got \"{t}\""
            ))),
        }
    }
}

impl Beta {
    pub fn temperature(&self) -> Result<Temperature> {
        match *self {
            Self::Zero => Ok(Temperature::Zero),
            Self::Value(b) => Temperature::from_beta(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathParams {
    pub density: DensityKind,
    /// V_I in eV.
    pub strength: f64,
    /// ħΩ in eV.
    pub cutoff: f64,
    /// Used when `density` is "discrete".
    pub modes: Vec<BathMode>,
    pub beta: Beta,
    pub quadrature_nodes: usize,
}

impl Default for BathParams {
    fn default() -> Self {
        Self {
            density: DensityKind::OhmicCircular,
            strength: 1.0,
            cutoff: 4.0,
            modes: Vec::new(),
            beta: Beta::Zero,
            quadrature_nodes: QuadratureSpec::default().nodes,
        }
    }
}

impl BathParams {
    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        match self.density {
            DensityKind::OhmicCircular => {
                SpectralDensity::ohmic_circular(self.strength, self.cutoff)
            }
            DensityKind::Discrete => SpectralDensity::discrete(self.modes.clone()),
        }
    }

    pub fn spec(&self) -> Result<BathSpec> {
        Ok(BathSpec::new(
            self.spectral_density()?,
            self.beta.temperature()?,
        ))
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::new(self.quadrature_nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    #[default]
    Bessel,
    DiscreteExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisParams {
    pub kind: BasisChoice,
    /// K for the Bessel basis; the discrete basis takes one function per mode.
    pub k: usize,
}

impl Default for BasisParams {
    fn default() -> Self {
        Self {
            kind: BasisChoice::Bessel,
            k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyParams {
    pub n_max: usize,
    pub max_states: usize,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            n_max: 5,
            max_states: StateBudget::default().max_states,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialParams {
    /// q₀/q_S.
    pub q0: f64,
    /// σ₀/q_S.
    pub sigma0: f64,
    /// p₀q_S/ħ.
    pub p0: f64,
}

impl Default for InitialParams {
    fn default() -> Self {
        Self {
            q0: -1.0,
            sigma0: std::f64::consts::FRAC_1_SQRT_2,
            p0: 0.0,
        }
    }
}

impl InitialParams {
    pub fn packet(&self) -> GaussianPacket {
        GaussianPacket {
            q0: self.q0,
            sigma0: self.sigma0,
            p0: self.p0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Bath modes M for the moments oracle (checked against 2M).
    pub modes: usize,
    pub sampling: Sampling,
    /// Per-mode phonon cutoff of the coupled-channels oracle.
    pub n_cut: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        let d = Discretization::default();
        Self {
            modes: d.modes,
            sampling: d.sampling,
            n_cut: 8,
        }
    }
}

/// Every physical and numerical parameter of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub system: SystemParams,
    pub bath: BathParams,
    pub basis: BasisParams,
    pub hierarchy: HierarchyParams,
    pub initial: InitialParams,
    pub integrator: PropagationConfig,
    pub oracle: OracleParams,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be > 0, got {v}")))
    }
}

impl ModelParams {
    /// Checks every range without building anything expensive.
    pub fn validate(&self) -> Result<()> {
        positive("system.omega_s", self.system.omega_s)?;
        positive("system.dq", self.system.dq)?;
        self.grid()?;
        self.bath.spectral_density()?;
        self.bath.beta.temperature()?;
        self.bath.quadrature()?;
        if self.basis.kind == BasisChoice::Bessel && self.basis.k == 0 {
            return Err(invalid("basis.k", "K must be ≥ 1"));
        }
        if self.basis.kind == BasisChoice::DiscreteExponential
            && self.bath.density != DensityKind::Discrete
        {
            return Err(invalid(
                "basis.kind",
                "the discrete exponential basis needs a discrete bath",
            ));
        }
        positive("initial.sigma0", self.initial.sigma0)?;
        self.integrator.validate()?;
        if self.oracle.modes == 0 {
            return Err(invalid("oracle.modes", "need at least one mode"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(
            self.system.q_min,
            self.system.q_max,
            self.system.dq,
            self.system.stencil,
        )
    }

    /// K actually used by the hierarchy.
    pub fn basis_size(&self) -> usize {
        match self.basis.kind {
            BasisChoice::Bessel => self.basis.k,
            BasisChoice::DiscreteExponential => self.bath.modes.len(),
        }
    }

    pub fn sizing(&self) -> Sizing {
        let k = self.basis_size();
        let states = state_count(k, self.hierarchy.n_max);
        let grid_points = self.grid().map(|g| g.len()).unwrap_or(0);
        Sizing {
            k,
            n_max: self.hierarchy.n_max,
            states,
            grid_points,
            memory_bytes: memory_estimate(states, k, grid_points),
        }
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let kappa = self
            .bath
            .spectral_density()?
            .counter_term(self.bath.quadrature()?)?;
        SystemSpec::new(self.system.omega_s, kappa)
    }

    pub fn system_hamiltonian(&self) -> Result<SystemHamiltonian> {
        Ok(SystemHamiltonian::new(self.system_spec()?, self.grid()?))
    }

    pub fn expansion_basis(&self) -> Result<ExpansionBasis> {
        match self.basis.kind {
            BasisChoice::Bessel => ExpansionBasis::bessel(self.basis.k, self.bath.cutoff),
            BasisChoice::DiscreteExponential => ExpansionBasis::discrete(&self.bath.modes),
        }
    }

    pub fn bath_coefficients(&self) -> Result<BathCoefficients> {
        let basis = self.expansion_basis()?;
        let d = compute_d(&self.bath.spec()?, &basis, self.bath.quadrature()?)?;
        build_bath_coefficients(&d, &basis)
    }

    /// Builds every derived quantity of the hierarchy run.
    pub fn build(&self) -> Result<Model> {
        self.validate()?;
        let system = self.system_hamiltonian()?;
        let coeffs = self.bath_coefficients()?;
        let budget = StateBudget {
            max_states: self.hierarchy.max_states,
            grid_points: system.grid().len(),
        };
        let space = IndexSpace::enumerate(coeffs.size(), self.hierarchy.n_max, budget)?;
        let initial = initial_gaussian(
            self.initial.q0,
            self.initial.sigma0,
            self.initial.p0,
            system.grid(),
        )?;
        Ok(Model {
            params: self.clone(),
            system,
            coeffs,
            space,
            phi: initial.psi,
            initial_norm: initial.raw_norm,
        })
    }

    /// Moments oracle for the same physical parameters.
    pub fn moments_oracle(&self) -> Result<(MomentsRun, f64)> {
        self.validate()?;
        let discretization = Discretization {
            modes: self.oracle.modes,
            sampling: self.oracle.sampling,
        };
        oracle::moments_oracle(
            &self.system_spec()?,
            &self.bath.spectral_density()?,
            self.bath.beta.temperature()?,
            discretization,
            &self.initial.packet(),
            &self.integrator,
        )
    }

    /// Coupled-channels oracle; needs a zero-temperature discrete bath.
    pub fn channels_oracle(&self) -> Result<(ChannelsRun, f64)> {
        self.validate()?;
        if self.bath.density != DensityKind::Discrete || self.bath.beta != Beta::Zero {
            return Err(invalid(
                "bath",
                "the coupled-channels oracle needs a zero-temperature discrete bath",
            ));
        }
        let system = self.system_hamiltonian()?;
        let phi = initial_gaussian(
            self.initial.q0,
            self.initial.sigma0,
            self.initial.p0,
            system.grid(),
        )?
        .psi;
        oracle::coupled_channels_oracle(
            &system,
            &self.bath.modes,
            self.oracle.n_cut,
            &phi,
            &self.integrator,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sizing {
    pub k: usize,
    pub n_max: usize,
    pub states: u128,
    pub grid_points: usize,
    pub memory_bytes: u128,
}

impl std::fmt::Display for Sizing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "K={} N_max={}: {} states on {} grid points, about {:.1} MiB",
            self.k,
            self.n_max,
            self.states,
            self.grid_points,
            self.memory_bytes as f64 / (1024.0 * 1024.0)
        )
    }
}

/// A hierarchy ready to propagate.
#[derive(Debug)]
pub struct Model {
    pub params: ModelParams,
    pub system: SystemHamiltonian,
    pub coeffs: BathCoefficients,
    pub space: IndexSpace,
    pub phi: Vec<Complex64>,
    /// Σ|φ|²Δq of the packet before renormalisation on the grid.
    pub initial_norm: f64,
}

/// Output of [`Model::run_with`].
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// ρ_S at each recorded time when requested.
    pub densities: Vec<ReducedDensity>,
}

impl Model {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.coeffs.diagnostics
    }

    pub fn operator(&self) -> Result<HeomOperator<'_>> {
        HeomOperator::new(&self.space, &self.coeffs, &self.system)
    }

    pub fn run(&self) -> Result<Trajectory> {
        Ok(self.run_with(false)?.trajectory)
    }

    /// Propagates with the configured integrator, optionally keeping ρ_S.
    pub fn run_with(&self, keep_densities: bool) -> Result<RunOutput> {
        let op = self.operator()?;
        let weights = member_weights(&self.space, &self.coeffs.lambda);
        let grid = self.system.grid();
        let mut state = HierarchyState::initial(&self.space, &self.phi);
        let mut out = RunOutput::default();
        propagate_with(&self.params.integrator, &op, &mut state, |_, s| {
            out.trajectory
                .points
                .push(observe(s, &self.space, &weights, grid));
            if keep_densities {
                out.densities.push(reduced_density(
                    s,
                    &self.space,
                    &self.coeffs.lambda,
                    grid.dq(),
                ));
            }
            Ok(())
        })?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_benchmark() {
        let p = ModelParams::default();
        assert_eq!(p.grid().unwrap().len(), 44);
        let s = p.sizing();
        assert_eq!((s.k, s.n_max, s.states), (10, 5, 3003));
        assert!((p.system_spec().unwrap().kappa - std::f64::consts::PI / 4.0).abs() < 1e-10);
        p.validate().unwrap();
    }

    #[test]
    fn beta_accepts_zero_and_numbers() {
        let b: Beta = serde_json::from_str("\"zero\"").unwrap();
        assert_eq!(b, Beta::Zero);
        let b: Beta = serde_json::from_str("0.5").unwrap();
        assert_eq!(b, Beta::Value(0.5));
        assert!(serde_json::from_str::<Beta>("\"hot\"").is_err());
        assert_eq!(serde_json::to_string(&Beta::Zero).unwrap(), "\"zero\"");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ModelParams>(r#"{"system":{"omegas":2}}"#).is_err());
        let p: ModelParams = serde_json::from_str(r#"{"hierarchy":{"n_max":3}}"#).unwrap();
        assert_eq!(p.hierarchy.n_max, 3);
        assert_eq!(p.basis.k, 10);
    }

    #[test]
    fn invalid_ranges_are_named() {
        let mut p = ModelParams::default();
        p.system.dq = -0.25;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("dq"), "{msg}");
    }
}
