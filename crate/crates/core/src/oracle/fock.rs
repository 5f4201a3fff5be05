//! Free-fermion states written in the spin computational basis.
//!
//! Jordan-Wigner with strings running over lower sites: the spin basis state
//! with up spins at `j₁ < … < j_M` equals `c†_{j₁} ⋯ c†_{j_M} |0⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn sites_of(state: u32) -> Vec<usize> {
    (0..32).filter(|&j| state >> j & 1 == 1).collect()
}

fn states_with(n: usize, particles: usize) -> Vec<u32> {
    (0..1u32 << n).filter(|s| s.count_ones() as usize == particles).collect()
}

/// Slater determinant `f†_{k₁} ⋯ f†_{k_M} |0⟩` with `f†_k = Σ_j φ_k[j] c†_j`,
/// as a `2ⁿ` amplitude vector over `n = φ.len()` sites.
pub fn slater_state(modes: &[Vec<f64>], occupied: &[usize]) -> Vec<Complex64> {
    let n = modes.first().map_or(0, Vec::len);
    let m = occupied.len();
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << n];
    for s in states_with(n, m) {
        let sites = sites_of(s);
        let det = if m == 0 {
            1.0
        } else {
            DMatrix::from_fn(m, m, |a, b| modes[occupied[a]][sites[b]]).determinant()
        };
        psi[s as usize] = Complex64::new(det, 0.0);
    }
    psi
}

/// Applies the Gaussian unitary generated by a single-particle matrix `W`
/// (`c†_j → Σ_i W[i,j] c†_i`) to a many-body state on `W.nrows()` sites.
pub fn apply_single_particle(w: &DMatrix<Complex64>, psi: &[Complex64]) -> Vec<Complex64> {
    let n = w.nrows();
    assert_eq!(psi.len(), 1 << n, "state length must be 2^n");
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    for m in 0..=n {
        let states = states_with(n, m);
        let site_lists: Vec<Vec<usize>> = states.iter().map(|&s| sites_of(s)).collect();
        for (jdx, &j) in states.iter().enumerate() {
            let amp = psi[j as usize];
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let cols = &site_lists[jdx];
            for (idx, &i) in states.iter().enumerate() {
                let rows = &site_lists[idx];
                let det = if m == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    DMatrix::from_fn(m, m, |a, b| w[(rows[a], cols[b])]).determinant()
                };
                out[i as usize] += det * amp;
            }
        }
    }
    out
}

/// Embeds a chain state (sites `0..N`) into a larger register at bit offset
/// `offset`, with every other site down.
pub fn embed(chain: &[Complex64], offset: usize, total_sites: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << total_sites];
    for (s, &a) in chain.iter().enumerate() {
        out[s << offset] = a;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_coupling_matrix, make_uniform_spec};
    use crate::fermion::analyze_modes;
    use crate::oracle::hamiltonian::SpinHamiltonian;
    use crate::oracle::Evolver;

    #[test]
    fn slater_states_are_chain_eigenstates() {
        let mut spec = make_uniform_spec(5, 1.0, 0.0, 0.0).unwrap();
        spec.kappa = vec![1.0, 0.8, 1.3, 0.9];
        let k = build_coupling_matrix(&spec).unwrap();
        let modes = analyze_modes(&k).unwrap();
        let h = SpinHamiltonian::from_couplings(&k.interior(), 16).unwrap().to_dense();
        for occ in [vec![], vec![2], vec![0, 3], vec![1, 2, 4], vec![0, 1, 2, 3, 4]] {
            let psi = slater_state(&modes.modes, &occ);
            let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            let energy: f64 = occ.iter().map(|&k| modes.energies[k]).sum();
            for r in 0..32 {
                let hpsi: Complex64 = (0..32).map(|c| psi[c] * h[(r, c)]).sum();
                assert!((hpsi - psi[r] * energy).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_unitary_matches_spin_evolution() {
        let mut spec = make_uniform_spec(4, 1.0, 0.0, 0.0).unwrap();
        spec.kappa = vec![0.7, 1.2, 1.0];
        spec.onsite = vec![0.1, 0.0, -0.2, 0.3];
        let k = build_coupling_matrix(&spec).unwrap().interior();
        let t = 2.7;
        let w = crate::fermion::propagator(&k, t).unwrap();
        let h = SpinHamiltonian::from_couplings(&k, 16).unwrap();
        let ev = Evolver::new(&h);
        for s in 0..16u32 {
            let want = ev.evolve_basis(s, t).unwrap();
            let mut psi = vec![Complex64::new(0.0, 0.0); 16];
            psi[s as usize] = Complex64::new(1.0, 0.0);
            let got = apply_single_particle(&w, &psi);
            let err = want.iter().zip(&got).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "state {s:04b}: {err:e}");
        }
    }
}
