//! Single-particle analysis of the chain after Jordan-Wigner fermionization.
//!
//! Mode indices are 0-based positions in the ascending energy list. For a
//! clean chain this ordering reverses the textbook `k = 1..N` labelling of
//! `E_k = 2κ cos(kπ/(N+1))`, which leaves every index parity `(-1)^{k+z}`
//! unchanged. For positive couplings the parity also equals the relative sign
//! of `t_k^L t_k^R` against `t_z^L t_z^R` (Sturm sign-change counting).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};

pub const RESONANCE_TOL: f64 = 1e-9;
pub const DARK_MODE_TOL: f64 = 1e-12;
/// Default ceiling on `max(g_L, g_R) / g_target` for asymmetry compensation.
pub const DEFAULT_COMPENSATION_CAP: f64 = 10.0;

/// Eigenmodes of the interior chain and their couplings to the end qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAnalysis {
    pub energies: Vec<f64>,
    /// `modes[k][j]` is the amplitude of mode `k` on chain site `j + 1`.
    pub modes: Vec<Vec<f64>>,
    pub t_left: Vec<f64>,
    pub t_right: Vec<f64>,
    pub participation: Vec<f64>,
    /// Mean intra-chain coupling; the unit for all relative tolerances.
    pub energy_scale: f64,
}

impl ModeAnalysis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Resonant tunneling rate `√(|t^L t^R|)` of mode `k`.
    pub fn tunneling(&self, k: usize) -> f64 {
        (self.t_left[k].abs() * self.t_right[k].abs()).sqrt()
    }

    /// End amplitudes `(φ_k[1], φ_k[N])`.
    pub fn end_amplitudes(&self, k: usize) -> (f64, f64) {
        let m = &self.modes[k];
        (m[0], m[m.len() - 1])
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::invalid(format!("mode index {k} out of range for {} modes", self.len())));
        }
        Ok(())
    }
}

fn eigen_sorted(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::numeric(format!(
            "symmetric eigensolver did not converge ({n}×{n}, max |entry| {:e})",
            m.amax()
        ))
    })?;
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!("non-finite eigenvalues for {n}×{n} matrix")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

fn mean_offdiagonal(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    if n < 2 {
        return 1.0;
    }
    let sum: f64 = (0..n - 1).map(|i| k[(i, i + 1)].abs()).sum();
    let mean = sum / (n - 1) as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Diagonalizes the interior chain block of `k`.
///
/// Each mode is signed so its first component is non-negative; a mode with a
/// vanishing first component is signed by its last component instead.
pub fn analyze_modes(k: &CouplingMatrix) -> Result<ModeAnalysis> {
    let size = k.size();
    if size < 3 {
        return Err(Error::invalid("coupling matrix must include at least one chain site"));
    }
    let n = size - 2;
    let inner = k.interior();
    let (energies, vectors) = eigen_sorted(inner.as_matrix())?;
    let g_left = k.get(0, 1);
    let g_right = k.get(n, n + 1);
    let mut modes = Vec::with_capacity(n);
    for c in 0..n {
        let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
        let first = v[0];
        let last = v[n - 1];
        let flip = if first.abs() > 1e-12 { first < 0.0 } else { last < 0.0 };
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        modes.push(v);
    }
    let t_left = modes.iter().map(|m| g_left * m[0]).collect();
    let t_right = modes.iter().map(|m| g_right * m[n - 1]).collect();
    let participation = modes.iter().map(|m| 1.0 / m.iter().map(|x| x.powi(4)).sum::<f64>()).collect();
    Ok(ModeAnalysis {
        energies,
        modes,
        t_left,
        t_right,
        participation,
        energy_scale: mean_offdiagonal(inner.as_matrix()),
    })
}

/// Mode chosen for resonant transfer at a given end detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub mode_index: usize,
    /// `E_z - Δ`.
    pub detuning: f64,
    /// Distance in `|E_k - Δ|` to the runner-up mode (infinite for `N = 1`).
    pub runner_up_gap: f64,
}

/// Picks `argmin_k |E_k - Δ|`.
pub fn pick_resonant_mode(modes: &ModeAnalysis, delta: f64) -> Result<Resonance> {
    if modes.is_empty() {
        return Err(Error::invalid("no modes to choose from"));
    }
    let mut order: Vec<usize> = (0..modes.len()).collect();
    let dist = |k: usize| (modes.energies[k] - delta).abs();
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
    let best = order[0];
    let runner_up_gap = match order.get(1) {
        Some(&second) => {
            let gap = dist(second) - dist(best);
            if gap < RESONANCE_TOL * modes.energy_scale {
                return Err(Error::DegenerateResonance { first: best, second, gap });
            }
            gap
        }
        None => f64::INFINITY,
    };
    Ok(Resonance { mode_index: best, detuning: modes.energies[best] - delta, runner_up_gap })
}

fn dark_mode_check(modes: &ModeAnalysis, z: usize) -> Result<()> {
    modes.check_index(z)?;
    let (l, r) = (modes.t_left[z].abs(), modes.t_right[z].abs());
    let floor = DARK_MODE_TOL * modes.energy_scale;
    if l < floor || r < floor {
        return Err(Error::DarkMode { mode: z, left: l, right: r });
    }
    Ok(())
}

/// `τ = π / (√2 t_z)` with `t_z` the geometric mean of the end couplings.
pub fn transfer_time(modes: &ModeAnalysis, z: usize) -> Result<f64> {
    dark_mode_check(modes, z)?;
    Ok(PI / (SQRT_2 * modes.tunneling(z)))
}

/// A runnable transfer schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub mode_index: usize,
    pub tau: f64,
    pub g_left: f64,
    pub g_right: f64,
    pub delta: f64,
    pub t_z: f64,
}

/// Mode analysis, resonance selection and transfer time for one chain.
pub fn plan_transfer(spec: &crate::chain::ChainSpec) -> Result<(ModeAnalysis, TransferPlan)> {
    let k = crate::chain::build_coupling_matrix(spec)?;
    let modes = analyze_modes(&k)?;
    let res = pick_resonant_mode(&modes, spec.delta)?;
    let tau = transfer_time(&modes, res.mode_index)?;
    let plan = TransferPlan {
        mode_index: res.mode_index,
        tau,
        g_left: spec.g_left,
        g_right: spec.g_right,
        delta: spec.delta,
        t_z: modes.tunneling(res.mode_index),
    };
    Ok((modes, plan))
}

/// Cached spectral decomposition of a coupling matrix for repeated
/// evaluation of `exp(-iKt)`.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralPropagator {
    pub fn new(k: &CouplingMatrix) -> Result<Self> {
        let (energies, vectors) = eigen_sorted(k.as_matrix())?;
        Ok(SpectralPropagator { energies, vectors })
    }

    pub fn at(&self, t: f64) -> Result<DMatrix<Complex64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("propagation time {t} must be finite and >= 0")));
        }
        let n = self.energies.len();
        if t == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        let phases: Vec<Complex64> = self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
        let q = &self.vectors;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|m| phases[m] * (q[(i, m)] * q[(j, m)])).sum()
        }))
    }

    /// Single column `exp(-iKt) e_j`, cheaper than the full matrix.
    pub fn column(&self, j: usize, t: f64) -> DVector<Complex64> {
        let n = self.energies.len();
        let q = &self.vectors;
        DVector::from_fn(n, |i, _| {
            (0..n)
                .map(|m| Complex64::from_polar(q[(i, m)] * q[(j, m)], 0.0) * Complex64::from_polar(1.0, -self.energies[m] * t))
                .sum()
        })
    }
}

/// `U = exp(-iKt)` from the full eigendecomposition of `K`.
pub fn propagator(k: &CouplingMatrix, t: f64) -> Result<DMatrix<Complex64>> {
    SpectralPropagator::new(k)?.at(t)
}

/// The `0 → N+1` amplitude `U[N+1, 0]`.
pub fn end_to_end_amplitude(u: &DMatrix<Complex64>) -> Complex64 {
    u[(u.nrows() - 1, 0)]
}

/// Ratio terms `(k, t_k / (E_k - E_z))` over all off-resonant modes.
fn off_resonant_terms(modes: &ModeAnalysis, z: usize) -> Result<Vec<(usize, f64, f64)>> {
    modes.check_index(z)?;
    let ez = modes.energies[z];
    let mut out = Vec::with_capacity(modes.len().saturating_sub(1));
    for k in (0..modes.len()).filter(|&k| k != z) {
        let gap = modes.energies[k] - ez;
        if gap.abs() < RESONANCE_TOL * modes.energy_scale {
            return Err(Error::ResonanceCollision { mode: k, gap });
        }
        out.push((k, modes.tunneling(k) / gap, gap));
    }
    Ok(out)
}

/// Leakage estimate `Σ_{k≠z} (5/3)(t_k/E_k)² [1 + (-1)^{k+z} cos(E_k τ)]`,
/// energies measured from `E_z`.
pub fn analytic_infidelity(modes: &ModeAnalysis, z: usize, tau: f64) -> Result<f64> {
    Ok(off_resonant_terms(modes, z)?
        .into_iter()
        .map(|(k, ratio, gap)| {
            let parity = if (k + z).is_multiple_of(2) { 1.0 } else { -1.0 };
            5.0 / 3.0 * ratio * ratio * (1.0 + parity * (gap * tau).cos())
        })
        .sum())
}

/// Upper envelope `Σ_{k≠z} (10/3)(t_k/E_k)²` of [`analytic_infidelity`].
pub fn infidelity_bound(modes: &ModeAnalysis, z: usize) -> Result<f64> {
    Ok(off_resonant_terms(modes, z)?.into_iter().map(|(_, r, _)| 10.0 / 3.0 * r * r).sum())
}

/// Largest end-coupling scale meeting a target infidelity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingLimit {
    /// Multiplier on the end couplings the modes were analysed with; equals
    /// `g_max` when those couplings are 1.
    pub g_max: f64,
    pub tau_min: f64,
}

/// Inverts the quadratic bound: `g_max = √(ε₀ / bound(g = 1))`.
pub fn max_coupling(modes_at_unit_g: &ModeAnalysis, z: usize, epsilon0: f64) -> Result<CouplingLimit> {
    if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
        return Err(Error::invalid(format!("target infidelity {epsilon0} must lie in (0, 1)")));
    }
    dark_mode_check(modes_at_unit_g, z)?;
    let unit_bound = infidelity_bound(modes_at_unit_g, z)?;
    let g_max = if unit_bound > 0.0 { (epsilon0 / unit_bound).sqrt() } else { f64::INFINITY };
    let tau_min = PI / (SQRT_2 * g_max * modes_at_unit_g.tunneling(z));
    Ok(CouplingLimit { g_max, tau_min })
}

/// Chooses `g_L, g_R` so both ends couple equally to mode `z`, with
/// `g_L g_R = g_target²`, capped so `max(g_L, g_R) ≤ 10·g_target`.
pub fn compensate_asymmetry(modes: &ModeAnalysis, z: usize, g_target: f64) -> Result<(f64, f64)> {
    compensate_asymmetry_capped(modes, z, g_target, DEFAULT_COMPENSATION_CAP)
}

pub fn compensate_asymmetry_capped(modes: &ModeAnalysis, z: usize, g_target: f64, cap: f64) -> Result<(f64, f64)> {
    modes.check_index(z)?;
    if !(g_target >= 0.0 && cap >= 1.0) {
        return Err(Error::invalid("g_target must be >= 0 and cap >= 1"));
    }
    let (l, r) = modes.end_amplitudes(z);
    let (l, r) = (l.abs(), r.abs());
    if l < DARK_MODE_TOL || r < DARK_MODE_TOL {
        return Err(Error::DarkMode { mode: z, left: l, right: r });
    }
    let mut g_left = g_target * (r / l).sqrt();
    let mut g_right = g_target * (l / r).sqrt();
    let largest = g_left.max(g_right);
    if largest > cap * g_target {
        let shrink = cap * g_target / largest;
        g_left *= shrink;
        g_right *= shrink;
    }
    Ok((g_left, g_right))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhReport {
    pub is_symmetric: bool,
    pub zero_mode_gap: f64,
}

/// Checks `E ↔ -E` pairing of the spectrum and reports `min |E_k|`.
pub fn ph_spectrum_check(modes: &ModeAnalysis) -> PhReport {
    let e = &modes.energies;
    let n = e.len();
    let tol = RESONANCE_TOL * modes.energy_scale;
    let is_symmetric = (0..n).all(|i| (e[i] + e[n - 1 - i]).abs() < tol);
    let zero_mode_gap = e.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs()));
    PhReport { is_symmetric, zero_mode_gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_coupling_matrix, make_uniform_spec, ChainSpec};
    use approx::assert_abs_diff_eq;

    fn uniform_modes(n: usize, g: f64) -> ModeAnalysis {
        analyze_modes(&build_coupling_matrix(&make_uniform_spec(n, 1.0, g, 0.0).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn n7_zero_mode_and_band_edge() {
        let m = uniform_modes(7, 0.01);
        assert_abs_diff_eq!(m.energies[3], 0.0, epsilon = 1e-14);
        let expect = [0.5, 0.0, -0.5, 0.0, 0.5, 0.0, -0.5];
        for (a, b) in m.modes[3].iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        // numeric eigendecomposition of the 7×7 hopping block
        assert_abs_diff_eq!(m.energies[6], 1.8477590650225735, epsilon = 1e-12);
        assert_abs_diff_eq!(m.energies[0], -1.8477590650225735, epsilon = 1e-12);
    }

    #[test]
    fn modes_are_orthonormal() {
        let spec = ChainSpec {
            n_chain: 6,
            kappa: vec![1.0, 0.7, 1.3, 0.9, 1.1],
            onsite: vec![0.1, -0.2, 0.0, 0.3, 0.0, -0.1],
            g_left: 0.02,
            g_right: 0.03,
            delta: 0.0,
        };
        let m = analyze_modes(&build_coupling_matrix(&spec).unwrap()).unwrap();
        for a in 0..6 {
            assert!(m.modes[a][0] >= 0.0);
            for b in 0..6 {
                let dot: f64 = m.modes[a].iter().zip(&m.modes[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
            assert_abs_diff_eq!(m.t_left[a], 0.02 * m.modes[a][0], epsilon = 1e-15);
            assert_abs_diff_eq!(m.t_right[a], 0.03 * m.modes[a][5], epsilon = 1e-15);
        }
        assert!(m.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_first_component_signs_by_last() {
        // K = [[0,1,0],[1,0,0],[0,0,0]] has a mode localized on the last site.
        let mut k = DMatrix::zeros(5, 5);
        k[(1, 2)] = 1.0;
        k[(2, 1)] = 1.0;
        let m = analyze_modes(&CouplingMatrix::from_dense(k).unwrap()).unwrap();
        let isolated = m.modes.iter().find(|v| v[0].abs() < 1e-12).unwrap();
        assert!(isolated[2] > 0.0);
    }

    #[test]
    fn resonance_selection() {
        assert_eq!(pick_resonant_mode(&uniform_modes(7, 0.01), 0.0).unwrap().mode_index, 3);

        let m = uniform_modes(2, 0.01);
        let r = pick_resonant_mode(&m, 1.0).unwrap();
        assert_abs_diff_eq!(m.energies[r.mode_index], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.runner_up_gap, 2.0, epsilon = 1e-12);

        assert!(matches!(
            pick_resonant_mode(&uniform_modes(4, 0.01), 0.0),
            Err(Error::DegenerateResonance { .. })
        ));
        let single = uniform_modes(1, 0.1);
        assert_eq!(pick_resonant_mode(&single, 0.0).unwrap().runner_up_gap, f64::INFINITY);
    }

    #[test]
    fn transfer_times() {
        let m = uniform_modes(7, 0.01);
        assert_abs_diff_eq!(m.tunneling(3), 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(transfer_time(&m, 3).unwrap(), PI * SQRT_2 / 0.01, epsilon = 1e-9);
        assert_abs_diff_eq!(transfer_time(&m, 3).unwrap(), 444.28829381583664, epsilon = 1e-9);

        let m = uniform_modes(3, 0.1);
        assert_abs_diff_eq!(m.tunneling(1), 0.1 / SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(transfer_time(&m, 1).unwrap(), PI / 0.1, epsilon = 1e-10);

        let base = make_uniform_spec(5, 1.0, 0.0, 0.0).unwrap();
        let a = analyze_modes(&build_coupling_matrix(&base.with_ends(0.01, 0.03)).unwrap()).unwrap();
        let b = analyze_modes(&build_coupling_matrix(&base.with_ends(0.03, 0.01)).unwrap()).unwrap();
        let (ta, tb) = (transfer_time(&a, 2).unwrap(), transfer_time(&b, 2).unwrap());
        assert!((ta - tb).abs() < 1e-12 * ta);

        let dark = uniform_modes(5, 0.0);
        assert!(matches!(transfer_time(&dark, 2), Err(Error::DarkMode { .. })));
    }

    #[test]
    fn propagator_limits() {
        let k = build_coupling_matrix(&make_uniform_spec(4, 1.0, 0.1, 0.0).unwrap()).unwrap();
        let u = propagator(&k, 0.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((u[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        assert_eq!(end_to_end_amplitude(&u).norm(), 0.0);

        let g = 0.3;
        let two = CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0])).unwrap();
        let u = propagator(&two, PI / (2.0 * g)).unwrap();
        assert_abs_diff_eq!(u[(1, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(end_to_end_amplitude(&u).norm(), 1.0, epsilon = 1e-14);

        assert!(propagator(&two, -1.0).is_err());
    }

    #[test]
    fn planned_transfer_reaches_far_end() {
        let spec = make_uniform_spec(7, 1.0, 0.01, 0.0).unwrap();
        let (_, plan) = plan_transfer(&spec).unwrap();
        let u = propagator(&build_coupling_matrix(&spec).unwrap(), plan.tau).unwrap();
        assert!(end_to_end_amplitude(&u).norm() >= 0.999);
        let sp = SpectralPropagator::new(&build_coupling_matrix(&spec).unwrap()).unwrap();
        let col = sp.column(0, plan.tau);
        for i in 0..9 {
            assert!((col[i] - u[(i, 0)]).norm() < 1e-13);
        }
    }

    /// Closed-form oracle: the clean bound is `(10/3) Σ_{k≠z} (g/A)² sin²θ_k / (2 cos θ_k)²`.
    fn uniform_bound_oracle(n: usize, g: f64) -> f64 {
        let a2 = (n as f64 + 1.0) / 2.0;
        let z = (n + 1) / 2;
        (1..=n)
            .filter(|&k| k != z)
            .map(|k| {
                let th = k as f64 * PI / (n as f64 + 1.0);
                10.0 / 3.0 * g * g / a2 * th.sin().powi(2) / (2.0 * th.cos()).powi(2)
            })
            .sum()
    }

    #[test]
    fn bounds_match_closed_forms() {
        let m = uniform_modes(7, 0.01);
        let b = infidelity_bound(&m, 3).unwrap();
        assert_abs_diff_eq!(b, 35.0 / 12.0 * 1e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(b, uniform_bound_oracle(7, 0.01), epsilon = 1e-15);
        // Σ_{k≠4} tan²(kπ/8) = 14 for N = 7
        let tan_sum: f64 = (1..=7).filter(|&k| k != 4).map(|k| (k as f64 * PI / 8.0).tan().powi(2)).sum();
        assert_abs_diff_eq!(tan_sum, 14.0, epsilon = 1e-12);

        let m = uniform_modes(3, 0.1);
        assert_abs_diff_eq!(infidelity_bound(&m, 1).unwrap(), 10.0 / 3.0 * 2.0 * 0.01 / 8.0, epsilon = 1e-15);

        for n in [5, 9, 15, 21] {
            let m = uniform_modes(n, 0.02);
            let z = (n - 1) / 2;
            let got = infidelity_bound(&m, z).unwrap();
            assert!((got - uniform_bound_oracle(n, 0.02)).abs() < 1e-12 * got);
        }
    }

    #[test]
    fn analytic_infidelity_behaviour() {
        let m = uniform_modes(7, 0.01);
        let tau = transfer_time(&m, 3).unwrap();
        let a = analytic_infidelity(&m, 3, tau).unwrap();
        let b = infidelity_bound(&m, 3).unwrap();
        assert!(a > 0.0 && a <= b, "{a} vs {b}");
        assert!(b <= 2.917e-4);

        // every term carries t_k², so at fixed τ the value scales as g²
        let small = uniform_modes(7, 1e-4);
        let a_small = analytic_infidelity(&small, 3, tau).unwrap();
        assert!((a_small / a - 1e-4).abs() < 1e-12);
        assert!(a_small < 1e-8);

        let m3 = uniform_modes(3, 0.1);
        let b3 = infidelity_bound(&m3, 1).unwrap();
        assert_abs_diff_eq!(b3, 8.333333333333333e-3, epsilon = 1e-15);
        let mut seen_low = false;
        let mut seen_high = false;
        for i in 0..400 {
            let v = analytic_infidelity(&m3, 1, i as f64 * 0.05).unwrap();
            assert!(v <= b3 + 1e-18);
            seen_low |= v < 0.1 * b3;
            seen_high |= v > 0.9 * b3;
        }
        assert!(seen_low && seen_high);
    }

    #[test]
    fn parity_matches_end_sign_product() {
        let base = make_uniform_spec(9, 1.0, 0.01, 0.0).unwrap();
        let spec = ChainSpec { kappa: vec![0.8, 1.2, 0.95, 1.25, 0.7, 1.1, 0.9, 1.3], ..base };
        let m = analyze_modes(&build_coupling_matrix(&spec).unwrap()).unwrap();
        let z = 4;
        let sz = (m.t_left[z] * m.t_right[z]).signum();
        for k in 0..9 {
            let s = (m.t_left[k] * m.t_right[k]).signum() * sz;
            let parity = if (k + z).is_multiple_of(2) { 1.0 } else { -1.0 };
            assert_eq!(s, parity);
        }
    }

    #[test]
    fn resonance_collision_detected() {
        let m = uniform_modes(4, 0.01);
        // modes 1 and 2 sit at ±0.618; pretend they collide by duplicating an energy
        let mut m2 = m.clone();
        m2.energies[2] = m2.energies[1];
        assert!(matches!(infidelity_bound(&m2, 1), Err(Error::ResonanceCollision { .. })));
        assert!(infidelity_bound(&m, 1).is_ok());
    }

    #[test]
    fn max_coupling_n7() {
        let m = uniform_modes(7, 1.0);
        let lim = max_coupling(&m, 3, 1e-3).unwrap();
        let g = (1e-3f64 * 12.0 / 35.0).sqrt();
        assert_abs_diff_eq!(lim.g_max, g, epsilon = 1e-12);
        assert_abs_diff_eq!(lim.g_max, 0.018516, epsilon = 1e-6);
        assert_abs_diff_eq!(lim.tau_min, PI * SQRT_2 / g, epsilon = 1e-8);
        assert!((lim.tau_min - 239.9).abs() < 0.1);

        let four = max_coupling(&m, 3, 4e-3).unwrap();
        assert_abs_diff_eq!(four.g_max, 2.0 * lim.g_max, epsilon = 1e-12);
        assert_abs_diff_eq!(four.tau_min, lim.tau_min / 2.0, epsilon = 1e-9);

        assert!(max_coupling(&m, 3, 0.0).is_err());
        assert!(max_coupling(&m, 3, 1.0).is_err());
    }

    #[test]
    fn compensation() {
        let m = uniform_modes(7, 0.01);
        let (l, r) = compensate_asymmetry(&m, 3, 0.01).unwrap();
        assert_abs_diff_eq!(l, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.01, epsilon = 1e-15);

        let spec = ChainSpec { n_chain: 3, kappa: vec![1.0, 2.0], onsite: vec![0.0; 3], g_left: 0.01, g_right: 0.01, delta: 0.0 };
        let m = analyze_modes(&build_coupling_matrix(&spec).unwrap()).unwrap();
        let z = pick_resonant_mode(&m, 0.0).unwrap().mode_index;
        let (a, b) = m.end_amplitudes(z);
        assert_abs_diff_eq!(b / a, -0.5, epsilon = 1e-12);
        let (l, r) = compensate_asymmetry(&m, z, 0.01).unwrap();
        assert_abs_diff_eq!(r, 2.0 * l, epsilon = 1e-15);
        assert_abs_diff_eq!(l * r, 1e-4, epsilon = 1e-18);
        assert!((l * a.abs() - r * b.abs()).abs() < 1e-12);

        let (l, r) = compensate_asymmetry_capped(&m, z, 0.01, 1.2).unwrap();
        assert_abs_diff_eq!(r, 0.012, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 2.0 * l, epsilon = 1e-15);

        // middle-site-localized mode is dark at the ends
        let mut k = DMatrix::zeros(5, 5);
        k[(0, 1)] = 0.1;
        k[(1, 0)] = 0.1;
        k[(3, 4)] = 0.1;
        k[(4, 3)] = 0.1;
        let m = analyze_modes(&CouplingMatrix::from_dense(k).unwrap()).unwrap();
        let dark = (0..3).find(|&i| m.modes[i][1].abs() > 0.99).unwrap();
        assert!(matches!(compensate_asymmetry(&m, dark, 0.01), Err(Error::DarkMode { .. })));
    }

    #[test]
    fn particle_hole_report() {
        let r = ph_spectrum_check(&uniform_modes(8, 0.01));
        assert!(r.is_symmetric);
        assert!(r.zero_mode_gap > 0.1);
        let r = ph_spectrum_check(&uniform_modes(9, 0.01));
        assert!(r.is_symmetric && r.zero_mode_gap < 1e-14);

        let mut spec = make_uniform_spec(9, 1.0, 0.01, 0.0).unwrap();
        spec.onsite = vec![0.1, -0.3, 0.2, 0.0, 0.25, -0.1, 0.05, 0.3, -0.2];
        let r = ph_spectrum_check(&analyze_modes(&build_coupling_matrix(&spec).unwrap()).unwrap());
        assert!(!r.is_symmetric);
        assert!(r.zero_mode_gap > 1e-6);
    }

    #[test]
    fn participation_of_clean_chain() {
        // Σ_j sin⁴(jkπ/(N+1)) / A⁴ = 3/(2(N+1)) for modes away from k = (N+1)/2
        let n = 9;
        let m = uniform_modes(n, 0.01);
        for k in 0..n {
            let th = (k + 1) as f64 * PI / (n as f64 + 1.0);
            let a2 = (n as f64 + 1.0) / 2.0;
            let inv: f64 = (1..=n).map(|j| (j as f64 * th).sin().powi(4) / (a2 * a2)).sum();
            assert!((m.participation[n - 1 - k] - 1.0 / inv).abs() < 1e-9);
        }
        assert_abs_diff_eq!(m.participation[0], 2.0 * (n as f64 + 1.0) / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.participation[4], (n as f64 + 1.0) / 2.0, epsilon = 1e-9);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn leakage_tracks_bound(half in 1usize..8, g in 0.001f64..0.02, kappa in 0.5f64..2.0) {
            let n = 2 * half + 1;
            let spec = make_uniform_spec(n, kappa, g * kappa, 0.0).unwrap();
            let (modes, plan) = plan_transfer(&spec).unwrap();
            let k = build_coupling_matrix(&spec).unwrap();
            let u = propagator(&k, plan.tau).unwrap();
            let defect = (u.adjoint() * &u - DMatrix::<Complex64>::identity(n + 2, n + 2)).camax();
            proptest::prop_assert!(defect < 1e-12);
            let norms_ok = (0..n + 2).all(|c| (u.column(c).norm_squared() - 1.0).abs() < 1e-12);
            proptest::prop_assert!(norms_ok);
            // the cosine term can push leakage to 6/5 of the bound, never further
            let leak = 1.0 - end_to_end_amplitude(&u).norm_sqr();
            let bound = infidelity_bound(&modes, plan.mode_index).unwrap();
            proptest::prop_assert!(5.0 / 6.0 * leak <= bound * 1.05, "leak {leak:e} bound {bound:e}");
        }
    }
}
