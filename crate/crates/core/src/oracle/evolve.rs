//! Sector-by-sector unitary evolution `exp(-iHt)ψ`.
//!
//! Sectors up to [`DENSE_SECTOR_LIMIT`] states use a cached dense
//! eigendecomposition; larger ones use a Lanczos (Krylov) exponential with
//! adaptive time stepping.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::{Sector, SpinHamiltonian};
use crate::error::{Error, Result};

pub const DENSE_SECTOR_LIMIT: usize = 4096;
pub const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_DIM: usize = 40;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug)]
struct DenseSector {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DenseSector {
    fn new(sector: &Sector) -> Result<Self> {
        let m = sector.to_dense();
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or_else(|| {
            Error::numeric(format!("dense eigensolver failed on sector {} (dim {})", sector.particles, sector.dim()))
        })?;
        Ok(DenseSector { energies: eig.eigenvalues.as_slice().to_vec(), vectors: eig.eigenvectors })
    }

    fn evolve(&self, x: &[Complex64], t: f64) -> Vec<Complex64> {
        let q = &self.vectors;
        let d = x.len();
        let coeff: Vec<Complex64> = (0..d)
            .map(|m| {
                let c: Complex64 = (0..d).map(|r| x[r] * q[(r, m)]).sum();
                c * Complex64::from_polar(1.0, -self.energies[m] * t)
            })
            .collect();
        (0..d).map(|r| (0..d).map(|m| coeff[m] * q[(r, m)]).sum()).collect()
    }
}

/// Evolution engine bound to one Hamiltonian. Dense sector decompositions are
/// computed on first use and shared across threads.
pub struct Evolver<'h> {
    ham: &'h SpinHamiltonian,
    dense_limit: usize,
    cache: Vec<OnceLock<std::result::Result<DenseSector, Error>>>,
}

impl<'h> Evolver<'h> {
    pub fn new(ham: &'h SpinHamiltonian) -> Self {
        Self::with_dense_limit(ham, DENSE_SECTOR_LIMIT)
    }

    pub fn with_dense_limit(ham: &'h SpinHamiltonian, dense_limit: usize) -> Self {
        let cache = (0..ham.sectors().len()).map(|_| OnceLock::new()).collect();
        Evolver { ham, dense_limit, cache }
    }

    pub fn hamiltonian(&self) -> &SpinHamiltonian {
        self.ham
    }

    fn evolve_sector(&self, particles: usize, x: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let sector = self.ham.sector(particles);
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        if sector.dim() <= self.dense_limit {
            let dense = self.cache[particles].get_or_init(|| DenseSector::new(sector));
            match dense {
                Ok(d) => Ok(d.evolve(x, t)),
                Err(e) => Err(e.clone()),
            }
        } else {
            krylov_expm(|a, b| sector.apply(a, b), x, t, KRYLOV_TOL)
        }
    }

    /// `exp(-iHt)ψ` for a full-space state vector.
    pub fn evolve(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        if psi.len() != self.ham.dim() {
            return Err(Error::invalid(format!("state has length {}, expected {}", psi.len(), self.ham.dim())));
        }
        if !(t.is_finite()) {
            return Err(Error::invalid("evolution time must be finite"));
        }
        let mut out = vec![ZERO; psi.len()];
        for sector in self.ham.sectors() {
            let x: Vec<Complex64> = sector.states.iter().map(|&s| psi[s as usize]).collect();
            if x.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            let y = self.evolve_sector(sector.particles, &x, t)?;
            for (&s, v) in sector.states.iter().zip(y) {
                out[s as usize] = v;
            }
        }
        Ok(out)
    }

    /// `exp(-iHt)|s⟩` for a computational basis state.
    pub fn evolve_basis(&self, state: u32, t: f64) -> Result<Vec<Complex64>> {
        let mut psi = vec![ZERO; self.ham.dim()];
        psi[state as usize] = Complex64::new(1.0, 0.0);
        self.evolve(&psi, t)
    }
}

/// `exp(-iHt)ψ` for a normalized state.
pub fn evolve_state(ham: &SpinHamiltonian, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("state norm² {norm} is not 1")));
    }
    Evolver::new(ham).evolve(psi, t)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Lanczos exponential `exp(-iHt) v` for Hermitian `H` given by `apply`.
///
/// Each step builds a Krylov basis (full reorthogonalization) and accepts the
/// largest step `dt` whose a-posteriori error `β_m |e_mᵀ exp(-iT dt) e_1|`
/// stays below `tol·dt/t`.
pub fn krylov_expm<F>(apply: F, v: &[Complex64], t: f64, tol: f64) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let d = v.len();
    let mut w = v.to_vec();
    let total = t.abs();
    if total == 0.0 || d == 0 {
        return Ok(w);
    }
    let sign = t.signum();
    let mut done = 0.0;
    let max_dim = KRYLOV_MAX_DIM.min(d);
    while done < total {
        let beta0 = norm(&w);
        if beta0 == 0.0 {
            return Ok(w);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![w.iter().map(|c| c / beta0).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut tmp = vec![ZERO; d];
        let mut residual_norm = 0.0;
        for j in 0..max_dim {
            apply(&basis[j], &mut tmp);
            let a = dot(&basis[j], &tmp).re;
            alpha.push(a);
            for q in &basis {
                let c = dot(q, &tmp);
                tmp.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            // second pass keeps the basis orthogonal to working precision
            for q in &basis {
                let c = dot(q, &tmp);
                tmp.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let b = norm(&tmp);
            residual_norm = b;
            if b < 1e-14 * beta0.max(1.0) || j + 1 == max_dim {
                break;
            }
            beta.push(b);
            basis.push(tmp.iter().map(|c| c / b).collect());
        }
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(tri, f64::EPSILON, 0)
            .ok_or_else(|| Error::numeric("Lanczos tridiagonal eigensolver failed"))?;
        let small = |dt: f64| -> Vec<Complex64> {
            (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            Complex64::from_polar(eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)], 0.0)
                                * Complex64::from_polar(1.0, -sign * eig.eigenvalues[k] * dt)
                        })
                        .sum()
                })
                .collect()
        };
        let mut dt = total - done;
        let invariant = residual_norm < 1e-14 * beta0.max(1.0);
        let y = loop {
            let y = small(dt);
            let err = if invariant { 0.0 } else { residual_norm * y[m - 1].norm() * beta0 };
            if err <= tol * dt / total || invariant {
                break y;
            }
            dt *= 0.5;
            if dt < total * 1e-12 {
                return Err(Error::numeric(format!(
                    "Krylov evolution stalled: residual {err:e} at step {dt:e}"
                )));
            }
        };
        w = vec![ZERO; d];
        for (k, q) in basis.iter().take(m).enumerate() {
            let c = y[k] * beta0;
            w.iter_mut().zip(q).for_each(|(x, qv)| *x += c * qv);
        }
        done += dt;
    }
    Ok(w)
}
