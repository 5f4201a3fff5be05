use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::{build_coupling_matrix, ChainSpec, CouplingMatrix};
use crate::error::{Error, Result};

/// Largest system (in sites) the oracle accepts by default.
pub const DEFAULT_SITE_CAP: usize = 16;

/// One fixed-magnetization block of the Hamiltonian in CSR form.
#[derive(Debug, Clone)]
pub struct Sector {
    pub particles: usize,
    /// Computational basis states of this sector, ascending.
    pub states: Vec<u32>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// `y = H x` restricted to this sector.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[p]] * self.vals[p];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for r in 0..d {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[p])] += self.vals[p];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// XX spin Hamiltonian `Σ_{i≠j} K_ij S⁺_i S⁻_j + Σ_i K_ii n_i` on the full
/// `2ⁿ` space, stored block-diagonally by number of up spins.
///
/// Basis: site 0 is the least significant bit, up spin = bit set.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    sites: usize,
    sectors: Vec<Sector>,
    /// Position of each basis state inside its sector.
    position: Vec<u32>,
}

impl SpinHamiltonian {
    pub fn from_couplings(k: &CouplingMatrix, site_cap: usize) -> Result<SpinHamiltonian> {
        let n = k.size();
        if n > site_cap || n > 30 {
            return Err(Error::SizeCapExceeded { sites: n, cap: site_cap.min(30) });
        }
        let full = 1usize << n;
        let mut by_count: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
        for s in 0..full as u32 {
            by_count[s.count_ones() as usize].push(s);
        }
        let mut position = vec![0u32; full];
        for states in &by_count {
            for (i, &s) in states.iter().enumerate() {
                position[s as usize] = i as u32;
            }
        }
        let links: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && k.get(i, j) != 0.0)
            .map(|(i, j)| (i, j, k.get(i, j)))
            .collect();
        let onsite: Vec<f64> = (0..n).map(|i| k.get(i, i)).collect();

        let sectors = by_count
            .into_iter()
            .enumerate()
            .map(|(particles, states)| {
                let mut row_ptr = Vec::with_capacity(states.len() + 1);
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                row_ptr.push(0);
                for &s in &states {
                    let mut row: Vec<(usize, f64)> = Vec::new();
                    let diag: f64 = (0..n).filter(|&i| s >> i & 1 == 1).map(|i| onsite[i]).sum();
                    if diag != 0.0 {
                        row.push((position[s as usize] as usize, diag));
                    }
                    // <s|H|s'> with s = s' + up(i) - up(j): S⁺_i S⁻_j moves an up spin j → i
                    for &(i, j, c) in &links {
                        if s >> i & 1 == 1 && s >> j & 1 == 0 {
                            let from = s ^ (1 << i) ^ (1 << j);
                            row.push((position[from as usize] as usize, c));
                        }
                    }
                    row.sort_by_key(|e| e.0);
                    for (c, v) in row {
                        cols.push(c);
                        vals.push(v);
                    }
                    row_ptr.push(cols.len());
                }
                Sector { particles, states, row_ptr, cols, vals }
            })
            .collect();
        Ok(SpinHamiltonian { sites: n, sectors, position })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn sector(&self, particles: usize) -> &Sector {
        &self.sectors[particles]
    }

    /// Index of a basis state within its sector.
    pub fn position(&self, state: u32) -> usize {
        self.position[state as usize] as usize
    }

    /// Dense `2ⁿ × 2ⁿ` matrix; only for small systems and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for sec in &self.sectors {
            let block = sec.to_dense();
            for (a, &sa) in sec.states.iter().enumerate() {
                for (b, &sb) in sec.states.iter().enumerate() {
                    m[(sa as usize, sb as usize)] = block[(a, b)];
                }
            }
        }
        m
    }

    /// Full spectrum, ascending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let mut all = Vec::with_capacity(self.dim());
        for sec in &self.sectors {
            if sec.dim() == 0 {
                continue;
            }
            let eig = sec.to_dense().symmetric_eigenvalues();
            if eig.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!("sector {} eigenvalues not finite", sec.particles)));
            }
            all.extend(eig.iter().copied());
        }
        all.sort_by(f64::total_cmp);
        Ok(all)
    }
}

/// Full-space Hamiltonian of a chain spec (end qubits included).
pub fn build_spin_hamiltonian(spec: &ChainSpec) -> Result<SpinHamiltonian> {
    build_spin_hamiltonian_capped(spec, DEFAULT_SITE_CAP)
}

pub fn build_spin_hamiltonian_capped(spec: &ChainSpec, site_cap: usize) -> Result<SpinHamiltonian> {
    let k = build_coupling_matrix(spec)?;
    SpinHamiltonian::from_couplings(&k, site_cap)
}
