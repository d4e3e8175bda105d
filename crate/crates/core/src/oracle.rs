//! Independent references for the hierarchy: exact Gaussian moment
//! propagation for the quadratic model with a discretised bath, and a direct
//! coupled-channels solve of the Schrödinger equation for a few bath modes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{BathMode, SpectralDensity, Temperature};
use crate::error::{invalid, HeomError, Result};
use crate::observables::{Observation, RawMoments, ReducedDensity, Trajectory};
use crate::propagator::{rk4_step, PropagationConfig, Rk4Scratch};
use crate::quadrature::GaussLegendre;
use crate::system::{SystemHamiltonian, SystemSpec};

/// Change in any ξ between M and 2M bath modes that counts as converged.
pub const MOMENTS_CONVERGENCE: f64 = 1e-4;
/// Change in any ρ_S element between n_cut and n_cut + 1 that counts as converged.
pub const CHANNELS_CONVERGENCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    pub modes: Vec<BathMode>,
}

impl DiscreteBath {
    /// Σ_i d_i²/ħω_i.
    pub fn counter_term(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.coupling * m.coupling / m.frequency)
            .sum()
    }

    /// Σ_i d_i² e^{−iω_i t}, the zero-temperature L(t)/ħ of the discrete bath.
    pub fn correlation(&self, t: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|m| m.coupling * m.coupling * Complex64::from_polar(1.0, -m.frequency * t))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// ω_i = (i − ½)Ω/M with d_i² = J(ω_i)Ω/M.
    Midpoint,
    /// Gauss–Legendre nodes in θ with ω = Ω cos θ, d_i² = J(ω_i) Ω sin θ_i w_i.
    #[default]
    GaussAngle,
}

/// Samples a continuous density with `m` modes.
pub fn discretize_bath(
    density: &SpectralDensity,
    m: usize,
    sampling: Sampling,
) -> Result<DiscreteBath> {
    if m == 0 {
        return Err(invalid("oracle_modes", "need at least one mode"));
    }
    let cutoff = match density {
        SpectralDensity::OhmicCircular { cutoff, .. } => *cutoff,
        SpectralDensity::Discrete { modes } => {
            return Ok(DiscreteBath {
                modes: modes.clone(),
            })
        }
    };
    let modes = match sampling {
        Sampling::Midpoint => {
            let dw = cutoff / m as f64;
            (1..=m)
                .map(|i| {
                    let w = (i as f64 - 0.5) * dw;
                    BathMode {
                        frequency: w,
                        coupling: (density.eval(w) * dw).sqrt(),
                    }
                })
                .collect()
        }
        Sampling::GaussAngle => GaussLegendre::new(m)
            .mapped(0.0, 0.5 * PI)
            .map(|(theta, wt)| {
                let w = cutoff * theta.cos();
                BathMode {
                    frequency: w,
                    coupling: (density.eval(w) * cutoff * theta.sin() * wt).sqrt(),
                }
            })
            .collect(),
    };
    Ok(DiscreteBath { modes })
}

/// Initial Gaussian packet, lengths in q_S and momenta in ħ/q_S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub q0: f64,
    pub sigma0: f64,
    pub p0: f64,
}

/// Means and symmetrised covariance of (q, p, x₁, p₁, …, x_M, p_M).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMomentState {
    pub mean: Vec<f64>,
    /// Row-major, size (2+2M)².
    pub covariance: Vec<f64>,
    pub dim: usize,
}

/// Linear flow ż = Az of the total Hamiltonian with bath masses m_i = 1,
/// c_i = d_i√(2ω_i) and the counter term folded into the system stiffness.
struct LinearFlow {
    inv_mass: f64,
    stiffness: f64,
    c: Vec<f64>,
    w2: Vec<f64>,
}

impl LinearFlow {
    fn new(sys: &SystemSpec, bath: &DiscreteBath) -> Self {
        let mass = sys.mass();
        Self {
            inv_mass: 1.0 / mass,
            stiffness: mass * sys.omega_s * sys.omega_s + 2.0 * sys.kappa,
            c: bath
                .modes
                .iter()
                .map(|m| m.coupling * (2.0 * m.frequency).sqrt())
                .collect(),
            w2: bath
                .modes
                .iter()
                .map(|m| m.frequency * m.frequency)
                .collect(),
        }
    }

    fn dim(&self) -> usize {
        2 + 2 * self.c.len()
    }

    /// out = A·v for each of the `cols` columns of v (stored row-major, n × cols).
    fn apply(&self, v: &[f64], out: &mut [f64], cols: usize) {
        let row = |r: usize| r * cols..(r + 1) * cols;
        let (q, p) = (row(0), row(1));
        for c in 0..cols {
            out[q.start + c] = self.inv_mass * v[p.start + c];
            out[p.start + c] = -self.stiffness * v[q.start + c];
        }
        for (i, (&ci, &w2)) in self.c.iter().zip(&self.w2).enumerate() {
            let (x, pi) = (row(2 + 2 * i), row(3 + 2 * i));
            for c in 0..cols {
                out[p.start + c] -= ci * v[x.start + c];
                out[x.start + c] = v[pi.start + c];
                out[pi.start + c] = -w2 * v[x.start + c] - ci * v[q.start + c];
            }
        }
    }

    /// Quadratic form matrix of H (so that H = ½ zᵀ H z), row-major.
    fn hamiltonian_matrix(&self) -> Vec<f64> {
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        h[0] = self.stiffness;
        h[n + 1] = self.inv_mass;
        for (i, (&ci, &w2)) in self.c.iter().zip(&self.w2).enumerate() {
            let x = 2 + 2 * i;
            h[x * n + x] = w2;
            h[(x + 1) * n + x + 1] = 1.0;
            h[x] = ci;
            h[x * n] = ci;
        }
        h
    }
}

impl GaussianMomentState {
    pub fn initial(packet: &GaussianPacket, bath: &DiscreteBath, temperature: Temperature) -> Self {
        let dim = 2 + 2 * bath.modes.len();
        let mut mean = vec![0.0; dim];
        mean[0] = packet.q0;
        mean[1] = packet.p0;
        let mut covariance = vec![0.0; dim * dim];
        covariance[0] = packet.sigma0 * packet.sigma0;
        covariance[dim + 1] = 0.25 / (packet.sigma0 * packet.sigma0);
        for (i, m) in bath.modes.iter().enumerate() {
            let x = 2 + 2 * i;
            let coth = temperature.coth_factor(m.frequency);
            covariance[x * dim + x] = 0.5 * coth / m.frequency;
            covariance[(x + 1) * dim + x + 1] = 0.5 * coth * m.frequency;
        }
        Self {
            mean,
            covariance,
            dim,
        }
    }

    fn observation(&self, t: f64) -> Observation {
        let raw = RawMoments {
            norm: 1.0,
            q: self.mean[0],
            p: self.mean[1],
            qq: self.covariance[0] + self.mean[0] * self.mean[0],
            pp: self.covariance[self.dim + 1] + self.mean[1] * self.mean[1],
        };
        Observation {
            t,
            xi_q: self.mean[0],
            xi_p: self.mean[1],
            xi_qq: self.covariance[0],
            xi_pp: self.covariance[self.dim + 1],
            norm: 1.0,
            weights: Vec::new(),
            n_mean: f64::NAN,
            raw,
        }
    }
}

/// ⟨H_tot⟩ for a Gaussian state, including the bath zero-point energy.
fn total_energy(flow: &LinearFlow, state: &GaussianMomentState) -> f64 {
    let n = state.dim;
    let h = flow.hamiltonian_matrix();
    let mut e = 0.0;
    for a in 0..n {
        for b in 0..n {
            let hab = h[a * n + b];
            if hab != 0.0 {
                e += 0.5 * hab * (state.covariance[b * n + a] + state.mean[a] * state.mean[b]);
            }
        }
    }
    e
}

/// Result of a fixed-bath moment propagation.
#[derive(Debug, Clone)]
pub struct MomentsRun {
    pub trajectory: Trajectory,
    /// ⟨H_tot⟩ at every recorded time.
    pub energy: Vec<f64>,
}

/// Propagates means and covariance for a fixed discrete bath with RK4 at
/// step Δt/4, recording on the same times as the hierarchy run.
pub fn propagate_moments(
    sys: &SystemSpec,
    bath: &DiscreteBath,
    temperature: Temperature,
    packet: &GaussianPacket,
    config: &PropagationConfig,
) -> Result<MomentsRun> {
    config.validate()?;
    let flow = LinearFlow::new(sys, bath);
    let n = flow.dim();
    let mut state = GaussianMomentState::initial(packet, bath, temperature);
    // pack mean and covariance into one vector: ż = Az, Σ̇ = AΣ + (AΣ)ᵀ
    let mut y: Vec<f64> = state
        .mean
        .iter()
        .chain(&state.covariance)
        .copied()
        .collect();
    let mut scratch = Rk4Scratch::default();
    let mut a_sigma = vec![0.0; n * n];
    let substeps = 4;
    let h = config.dt / substeps as f64;
    let mut run = MomentsRun {
        trajectory: Trajectory::default(),
        energy: Vec::new(),
    };
    let record = |state: &GaussianMomentState, t: f64, run: &mut MomentsRun| {
        run.trajectory.points.push(state.observation(t));
        run.energy.push(total_energy(&flow, state));
    };
    record(&state, 0.0, &mut run);
    for step in 1..=config.steps {
        for _ in 0..substeps {
            rk4_step(&mut y, h, &mut scratch, |y, out| {
                let (mean, sigma) = y.split_at(n);
                let (dmean, dsigma) = out.split_at_mut(n);
                flow.apply(mean, dmean, 1);
                flow.apply(sigma, &mut a_sigma, n);
                for a in 0..n {
                    for b in 0..n {
                        dsigma[a * n + b] = a_sigma[a * n + b] + a_sigma[b * n + a];
                    }
                }
            });
        }
        if step % config.stride == 0 {
            let t = step as f64 * config.dt;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(HeomError::NonFinite { step, time: t });
            }
            state.mean.copy_from_slice(&y[..n]);
            state.covariance.copy_from_slice(&y[n..]);
            record(&state, t, &mut run);
        }
    }
    Ok(run)
}

/// How the continuum is replaced by modes for the moments oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub modes: usize,
    pub sampling: Sampling,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            modes: 96,
            sampling: Sampling::GaussAngle,
        }
    }
}

/// Converged moment reference: runs with M and 2M modes and requires the
/// ξ curves to agree within [`MOMENTS_CONVERGENCE`]. Returns the 2M run and
/// the observed change.
pub fn moments_oracle(
    sys: &SystemSpec,
    density: &SpectralDensity,
    temperature: Temperature,
    discretization: Discretization,
    packet: &GaussianPacket,
    config: &PropagationConfig,
) -> Result<(MomentsRun, f64)> {
    if let SpectralDensity::Discrete { modes } = density {
        let bath = DiscreteBath {
            modes: modes.clone(),
        };
        return Ok((
            propagate_moments(sys, &bath, temperature, packet, config)?,
            0.0,
        ));
    }
    let coarse_bath = discretize_bath(density, discretization.modes, discretization.sampling)?;
    let fine_bath = discretize_bath(density, 2 * discretization.modes, discretization.sampling)?;
    let coarse = propagate_moments(sys, &coarse_bath, temperature, packet, config)?;
    let fine = propagate_moments(sys, &fine_bath, temperature, packet, config)?;
    let change = coarse
        .trajectory
        .points
        .iter()
        .zip(&fine.trajectory.points)
        .flat_map(|(a, b)| {
            [
                (a.xi_q - b.xi_q).abs(),
                (a.xi_p - b.xi_p).abs(),
                (a.xi_qq - b.xi_qq).abs(),
                (a.xi_pp - b.xi_pp).abs(),
            ]
        })
        .fold(0.0, f64::max);
    if change > MOMENTS_CONVERGENCE {
        return Err(HeomError::NotConverged(format!(
            "doubling the bath from {} modes changed the moments by {change:e}",
            discretization.modes
        )));
    }
    Ok((fine, change))
}

/// Mixed-radix product basis |n₁ … n_M⟩ with 0 ≤ n_i ≤ n_cut.
struct ProductBasis {
    modes: usize,
    radix: usize,
    size: usize,
}

impl ProductBasis {
    fn new(modes: usize, n_cut: usize) -> Result<Self> {
        let radix = n_cut + 1;
        let size = (0..modes).try_fold(1usize, |acc, _| acc.checked_mul(radix));
        match size {
            Some(size) if size <= 1 << 22 => Ok(Self { modes, radix, size }),
            _ => Err(invalid(
                "n_cut",
                format!("(n_cut+1)^M too large for {modes} modes"),
            )),
        }
    }

    fn digit(&self, index: usize, mode: usize) -> usize {
        (index / self.radix.pow(mode as u32)) % self.radix
    }

    fn stride(&self, mode: usize) -> usize {
        self.radix.pow(mode as u32)
    }
}

/// ρ_S snapshots and the full-wavefunction norm from a coupled-channels run.
#[derive(Debug, Clone)]
pub struct ChannelsRun {
    pub times: Vec<f64>,
    pub densities: Vec<ReducedDensity>,
    /// Σ_n ∫|φ_n|² dq at each recorded time.
    pub norms: Vec<f64>,
}

/// Integrates iψ̇_n = H_Sψ_n + Σ_i ω_i n_i ψ_n + h Σ_i d_i(√n_i ψ_{n−e_i} + √(n_i+1) ψ_{n+e_i})
/// for channel amplitudes ψ_n(q) at zero temperature, starting from φ ⊗ |0⟩.
pub fn propagate_channels(
    system: &SystemHamiltonian,
    modes: &[BathMode],
    n_cut: usize,
    phi: &[Complex64],
    config: &PropagationConfig,
) -> Result<ChannelsRun> {
    config.validate()?;
    let basis = ProductBasis::new(modes.len(), n_cut)?;
    let g = system.grid().len();
    let dq = system.grid().dq();
    let h = system.coupling();
    let mut y = vec![0.0; basis.size * 2 * g];
    for (i, z) in phi.iter().enumerate() {
        y[i] = z.re;
        y[g + i] = z.im;
    }
    let occupations: Vec<Vec<usize>> = (0..basis.size)
        .map(|c| (0..basis.modes).map(|m| basis.digit(c, m)).collect())
        .collect();
    let rhs = |y: &[f64], out: &mut [f64]| {
        let mut acc = vec![0.0; 2 * g];
        for (c, occ) in occupations.iter().enumerate() {
            let own = &y[2 * g * c..2 * g * (c + 1)];
            let energy: f64 = occ
                .iter()
                .zip(modes)
                .map(|(&n, m)| n as f64 * m.frequency)
                .sum();
            let (ar, ai) = acc.split_at_mut(g);
            system.apply_real(&own[..g], ar);
            system.apply_real(&own[g..], ai);
            for i in 0..g {
                ar[i] += energy * own[i];
                ai[i] += energy * own[g + i];
            }
            for (mode, m) in modes.iter().enumerate() {
                let n = occ[mode];
                let mut add = |neighbour: usize, w: f64| {
                    let other = &y[2 * g * neighbour..2 * g * (neighbour + 1)];
                    for i in 0..g {
                        ar[i] += w * h[i] * other[i];
                        ai[i] += w * h[i] * other[g + i];
                    }
                };
                if n > 0 {
                    add(c - basis.stride(mode), m.coupling * (n as f64).sqrt());
                }
                if n < n_cut {
                    add(c + basis.stride(mode), m.coupling * ((n + 1) as f64).sqrt());
                }
            }
            // ψ̇ = −i(Hψ)
            let block = &mut out[2 * g * c..2 * g * (c + 1)];
            for i in 0..g {
                block[i] = ai[i];
                block[g + i] = -ar[i];
            }
        }
    };
    let snapshot = |y: &[f64]| {
        let mut rho = ndarray::Array2::<Complex64>::zeros((g, g));
        let mut norm = 0.0;
        for c in 0..basis.size {
            let block = &y[2 * g * c..2 * g * (c + 1)];
            let psi: Vec<Complex64> = (0..g)
                .map(|i| Complex64::new(block[i], block[g + i]))
                .collect();
            for a in 0..g {
                norm += psi[a].norm_sqr() * dq;
                for b in a..g {
                    rho[[a, b]] += psi[a] * psi[b].conj();
                }
            }
        }
        for a in 0..g {
            rho[[a, a]].im = 0.0;
            for b in 0..a {
                rho[[a, b]] = rho[[b, a]].conj();
            }
        }
        (ReducedDensity { matrix: rho, dq }, norm)
    };
    let mut run = ChannelsRun {
        times: vec![0.0],
        densities: Vec::new(),
        norms: Vec::new(),
    };
    let (rho, norm) = snapshot(&y);
    run.densities.push(rho);
    run.norms.push(norm);
    let mut scratch = Rk4Scratch::default();
    for step in 1..=config.steps {
        rk4_step(&mut y, config.dt, &mut scratch, rhs);
        if step % config.stride == 0 {
            let t = step as f64 * config.dt;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(HeomError::NonFinite { step, time: t });
            }
            let (rho, norm) = snapshot(&y);
            run.times.push(t);
            run.densities.push(rho);
            run.norms.push(norm);
        }
    }
    Ok(run)
}

/// Largest elementwise difference between two ρ_S sequences.
pub fn max_density_difference(a: &[ReducedDensity], b: &[ReducedDensity]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            x.matrix
                .iter()
                .zip(y.matrix.iter())
                .map(|(p, q)| (p - q).norm())
        })
        .fold(0.0, f64::max)
}

/// Coupled-channels reference with a per-mode cutoff, checked by repeating
/// the run at n_cut + 1. Returns the n_cut run and the observed change.
pub fn coupled_channels_oracle(
    system: &SystemHamiltonian,
    modes: &[BathMode],
    n_cut: usize,
    phi: &[Complex64],
    config: &PropagationConfig,
) -> Result<(ChannelsRun, f64)> {
    if modes.is_empty() || modes.len() > 3 {
        return Err(invalid(
            "modes",
            "the coupled-channels oracle takes one to three modes",
        ));
    }
    let run = propagate_channels(system, modes, n_cut, phi, config)?;
    let check = propagate_channels(system, modes, n_cut + 1, phi, config)?;
    let change = max_density_difference(&run.densities, &check.densities);
    if change > CHANNELS_CONVERGENCE {
        return Err(HeomError::NotConverged(format!(
            "raising n_cut from {n_cut} changed ρ_S by {change:e}"
        )));
    }
    Ok((run, change))
}
