//! Reduced density matrix, moments and phonon-number statistics.
//!
//! ρ_S = Σ_j Λ_j ψ_j ψ_j† with Λ_j = Π_k λ_k^{j_k}. Moments are evaluated
//! member by member without forming ρ_S.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::hierarchy::IndexSpace;
use crate::propagator::HierarchyState;
use crate::quadrature::pairwise_sum;
use crate::system::Grid;

/// Below this trace the normalised moments are reported as NaN.
pub const NORM_FLOOR: f64 = 1e-6;

/// Λ_j for every member.
pub fn member_weights(space: &IndexSpace, lambda: &[f64]) -> Vec<f64> {
    (0..space.total())
        .map(|s| {
            space
                .occupation(s)
                .iter()
                .zip(lambda)
                .filter(|(&j, _)| j > 0)
                .map(|(&j, &l)| l.powi(j as i32))
                .product()
        })
        .collect()
}

/// Un-normalised expectation values Σ_j Λ_j⟨ψ_j|A|ψ_j⟩.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RawMoments {
    pub norm: f64,
    pub q: f64,
    pub p: f64,
    pub qq: f64,
    pub pp: f64,
}

/// Observables at one time, lengths in q_S and momenta in ħ/q_S.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    /// Time in eV⁻¹.
    pub t: f64,
    pub xi_q: f64,
    pub xi_p: f64,
    pub xi_qq: f64,
    pub xi_pp: f64,
    /// Tr ρ_S.
    pub norm: f64,
    /// w_n = Tr ρ_S^{(n)} for n = 0..=N_max.
    pub weights: Vec<f64>,
    pub n_mean: f64,
    pub raw: RawMoments,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<Observation>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

/// Per-member contributions ⟨ψ|ψ⟩, ⟨q⟩, ⟨p⟩, ⟨q²⟩, ⟨p²⟩ (all × Δq).
fn member_moments(re: &[f64], im: &[f64], grid: &Grid, scratch: &mut [f64]) -> [f64; 5] {
    let g = grid.len();
    let dq = grid.dq();
    let (d1, rest) = scratch.split_at_mut(g);
    let (d2, rest) = rest.split_at_mut(g);
    let (d3, d4) = rest.split_at_mut(g);
    grid.first_derivative(re, d1);
    grid.first_derivative(im, d2);
    grid.second_derivative(re, d3);
    grid.second_derivative(im, &mut d4[..g]);
    let (mut n, mut q, mut p, mut qq, mut pp) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..g {
        let x = grid.point(i);
        let rho = re[i] * re[i] + im[i] * im[i];
        n += rho;
        q += x * rho;
        qq += x * x * rho;
        // Re[ψ*(−i∂ψ)] and Re[ψ*(−∂²ψ)]
        p += re[i] * d2[i] - im[i] * d1[i];
        pp -= re[i] * d3[i] + im[i] * d4[i];
    }
    [n * dq, q * dq, p * dq, qq * dq, pp * dq]
}

/// All observables of a hierarchy state in one pass.
pub fn observe(
    state: &HierarchyState,
    space: &IndexSpace,
    weights: &[f64],
    grid: &Grid,
) -> Observation {
    let g = grid.len();
    let contributions: Vec<[f64; 5]> = (0..space.total())
        .into_par_iter()
        .map_init(
            || vec![0.0; 4 * g],
            |scratch, s| {
                let w = weights[s];
                if w == 0.0 {
                    return [0.0; 5];
                }
                let (re, im) = state.member_parts(s);
                member_moments(re, im, grid, scratch).map(|v| w * v)
            },
        )
        .collect();
    let column = |c: usize, range: std::ops::Range<usize>| {
        let v: Vec<f64> = contributions[range].iter().map(|m| m[c]).collect();
        pairwise_sum(&v)
    };
    let all = 0..space.total();
    let raw = RawMoments {
        norm: column(0, all.clone()),
        q: column(1, all.clone()),
        p: column(2, all.clone()),
        qq: column(3, all.clone()),
        pp: column(4, all),
    };
    let level_weights: Vec<f64> = (0..=space.n_max())
        .map(|n| column(0, space.level(n)))
        .collect();
    let (xi_q, xi_p, xi_qq, xi_pp, n_mean) = if raw.norm.abs() < NORM_FLOOR {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let q = raw.q / raw.norm;
        let p = raw.p / raw.norm;
        let total: f64 = level_weights.iter().sum();
        let n_mean = level_weights
            .iter()
            .enumerate()
            .map(|(n, w)| n as f64 * w)
            .sum::<f64>()
            / total;
        (
            q,
            p,
            raw.qq / raw.norm - q * q,
            raw.pp / raw.norm - p * p,
            n_mean,
        )
    };
    Observation {
        t: state.t,
        xi_q,
        xi_p,
        xi_qq,
        xi_pp,
        norm: raw.norm,
        weights: level_weights,
        n_mean,
        raw,
    }
}

/// (ξ_q, ξ_p, ξ_qq, ξ_pp, Tr ρ_S).
pub fn moments(
    state: &HierarchyState,
    space: &IndexSpace,
    lambda: &[f64],
    grid: &Grid,
) -> (f64, f64, f64, f64, f64) {
    let o = observe(state, space, &member_weights(space, lambda), grid);
    (o.xi_q, o.xi_p, o.xi_qq, o.xi_pp, o.norm)
}

/// (w_0, …, w_{N_max}) and ⟨n⟩.
pub fn phonon_statistics(
    state: &HierarchyState,
    space: &IndexSpace,
    lambda: &[f64],
    grid: &Grid,
) -> (Vec<f64>, f64) {
    let o = observe(state, space, &member_weights(space, lambda), grid);
    (o.weights, o.n_mean)
}

/// ρ_S(q_a, q_b) on the grid, in units of q_S⁻¹.
#[derive(Debug, Clone)]
pub struct ReducedDensity {
    pub matrix: Array2<Complex64>,
    pub dq: f64,
}

impl ReducedDensity {
    /// Σ_a ρ_aa Δq.
    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum::<f64>() * self.dq
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.matrix[[a, b]] - self.matrix[[b, a]].conj()).norm());
            }
        }
        worst
    }

    /// Tr(Aρ) for an operator given as a grid matrix.
    pub fn expectation(&self, op: &Array2<Complex64>) -> Complex64 {
        let n = self.matrix.nrows();
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                s += op[[a, b]] * self.matrix[[b, a]];
            }
        }
        s * self.dq
    }
}

pub fn reduced_density(
    state: &HierarchyState,
    space: &IndexSpace,
    lambda: &[f64],
    dq: f64,
) -> ReducedDensity {
    let weights = member_weights(space, lambda);
    let g = state.grid_len();
    let mut rho = Array2::<Complex64>::zeros((g, g));
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let psi = state.member(s);
        for a in 0..g {
            let left = psi[a] * w;
            for b in a..g {
                rho[[a, b]] += left * psi[b].conj();
            }
        }
    }
    // mirror so that ρ = ρ† holds exactly
    for a in 0..g {
        rho[[a, a]].im = 0.0;
        for b in 0..a {
            rho[[a, b]] = rho[[b, a]].conj();
        }
    }
    ReducedDensity { matrix: rho, dq }
}

/// Grid matrices of q, p = −i∂, q² and p² = −∂² built from the stencils.
pub fn grid_operators(grid: &Grid) -> [Array2<Complex64>; 4] {
    let g = grid.len();
    let mut q = Array2::zeros((g, g));
    let mut p = Array2::zeros((g, g));
    let mut qq = Array2::zeros((g, g));
    let mut pp = Array2::zeros((g, g));
    let mut unit = vec![0.0; g];
    let mut d1 = vec![0.0; g];
    let mut d2 = vec![0.0; g];
    for b in 0..g {
        unit.iter_mut().for_each(|x| *x = 0.0);
        unit[b] = 1.0;
        grid.first_derivative(&unit, &mut d1);
        grid.second_derivative(&unit, &mut d2);
        for a in 0..g {
            p[[a, b]] = Complex64::new(0.0, -d1[a]);
            pp[[a, b]] = Complex64::new(-d2[a], 0.0);
        }
        let x = grid.point(b);
        q[[b, b]] = Complex64::new(x, 0.0);
        qq[[b, b]] = Complex64::new(x * x, 0.0);
    }
    [q, p, qq, pp]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::StateBudget;
    use crate::system::{initial_gaussian, Stencil};
    use approx::assert_abs_diff_eq;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn initial_state_observables() {
        let grid = Grid::benchmark();
        let space = IndexSpace::enumerate(4, 2, StateBudget::default()).unwrap();
        let phi = initial_gaussian(-1.0, std::f64::consts::FRAC_1_SQRT_2, 0.0, &grid)
            .unwrap()
            .psi;
        let st = HierarchyState::initial(&space, &phi);
        let lambda = [0.1, 0.2, 0.3, 0.4];
        let (q, p, qq, pp, norm) = moments(&st, &space, &lambda, &grid);
        assert_abs_diff_eq!(q, -1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(qq, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(pp, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        let (w, n) = phonon_statistics(&st, &space, &lambda, &grid);
        assert_eq!(w.len(), 3);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_eq!(&w[1..], &[0.0, 0.0]);
        assert_eq!(n, 0.0);
        let rho = reduced_density(&st, &space, &lambda, grid.dq());
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weights_are_products() {
        let space = IndexSpace::enumerate(3, 3, StateBudget::default()).unwrap();
        let w = member_weights(&space, &[0.5, 0.0, 2.0]);
        for s in 0..space.total() {
            let j = space.occupation(s);
            let want = 0.5f64.powi(j[0] as i32)
                * if j[1] > 0 { 0.0 } else { 1.0 }
                * 2f64.powi(j[2] as i32);
            assert_eq!(w[s], want);
        }
    }

    #[test]
    fn zero_weight_members_do_not_contribute() {
        let grid = Grid::new(-2.0, 2.0, 0.5, Stencil::Three).unwrap();
        let space = IndexSpace::enumerate(2, 1, StateBudget::default()).unwrap();
        let mut st = HierarchyState::zeros(space.total(), grid.len());
        let psi: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new(i as f64, 1.0))
            .collect();
        st.set_member(1, &psi);
        let (w, _) = phonon_statistics(&st, &space, &[0.0, 1.0], &grid);
        assert_eq!(w, vec![0.0, 0.0]);
        let rho = reduced_density(&st, &space, &[0.0, 1.0], grid.dq());
        assert!(rho.matrix.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn streaming_matches_materialised_density() {
        for stencil in [Stencil::Three, Stencil::Nine] {
            let grid = Grid::new(-3.0, 3.0, 0.5, stencil).unwrap();
            let space = IndexSpace::enumerate(3, 2, StateBudget::default()).unwrap();
            let mut st = HierarchyState::zeros(space.total(), grid.len());
            let mut seed = 17;
            st.data_mut().iter_mut().for_each(|x| *x = lcg(&mut seed));
            let lambda = [0.3, 0.05, 0.7];
            let obs = observe(&st, &space, &member_weights(&space, &lambda), &grid);
            let rho = reduced_density(&st, &space, &lambda, grid.dq());
            let [q, p, qq, pp] = grid_operators(&grid);
            assert_abs_diff_eq!(rho.trace(), obs.raw.norm, epsilon = 1e-12);
            assert_abs_diff_eq!(
                obs.weights.iter().sum::<f64>(),
                rho.trace(),
                epsilon = 1e-12
            );
            for (op, want) in [
                (&q, obs.raw.q),
                (&p, obs.raw.p),
                (&qq, obs.raw.qq),
                (&pp, obs.raw.pp),
            ] {
                let v = rho.expectation(op);
                assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
                assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
            }
            assert_eq!(rho.hermiticity_error(), 0.0);
            assert!(rho.matrix.diag().iter().all(|z| z.re >= -1e-15));
        }
    }

    #[test]
    fn tiny_norm_gives_nan_moments() {
        let grid = Grid::new(-2.0, 2.0, 0.5, Stencil::Three).unwrap();
        let space = IndexSpace::enumerate(1, 0, StateBudget::default()).unwrap();
        let st = HierarchyState::zeros(1, grid.len());
        let (q, _, _, _, norm) = moments(&st, &space, &[1.0], &grid);
        assert_eq!(norm, 0.0);
        assert!(q.is_nan());
    }
}
