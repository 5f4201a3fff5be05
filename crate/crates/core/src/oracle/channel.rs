//! Single-qubit channels in the Pauli transfer representation.
//!
//! Qubit basis index 0 is spin down, 1 is spin up; Paulis are the standard
//! matrices in that basis, so `Z|↓⟩ = +|↓⟩`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Mat2 = [[Complex64; 2]; 2];

pub const TRACE_TOL: f64 = 1e-10;
pub const CP_FLOOR: f64 = -1e-9;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const CI: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn paulis() -> [Mat2; 4] {
    [
        [[C1, C0], [C0, C1]],
        [[C0, C1], [C1, C0]],
        [[C0, -CI], [CI, C0]],
        [[C1, C0], [C0, -C1]],
    ]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn trace(a: &Mat2) -> Complex64 {
    a[0][0] + a[1][1]
}

/// The six pure probe states `|0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩` as amplitudes.
pub fn probe_states() -> [[Complex64; 2]; 6] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = Complex64::new(h, 0.0);
    let i = Complex64::new(0.0, h);
    [[C1, C0], [C0, C1], [r, r], [r, -r], [r, i], [r, -i]]
}

/// `R[i][j] = ½ Tr[σ_i ℰ(σ_j)]`, `i, j ∈ {I, x, y, z}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    /// Rows of the 4×4 Pauli transfer matrix (row-major).
    pub r: [[f64; 4]; 4],
}

impl ChannelMatrix {
    pub fn identity() -> Self {
        let mut r = [[0.0; 4]; 4];
        (0..4).for_each(|i| r[i][i] = 1.0);
        ChannelMatrix { r }
    }

    /// Builds the channel from its action on the Paulis, `ℰ(σ_j)`.
    pub fn from_pauli_images(images: &[Mat2; 4]) -> Self {
        let p = paulis();
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = 0.5 * trace(&mat_mul(&p[i], &images[j])).re;
            }
        }
        ChannelMatrix { r }
    }

    /// Builds the channel from the output density matrices of the six
    /// [`probe_states`], in that order.
    pub fn from_probe_outputs(out: &[Mat2; 6]) -> Self {
        let comb = |a: &Mat2, b: &Mat2, s: f64| {
            let mut m = [[C0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = a[i][j] + b[i][j] * s;
                }
            }
            m
        };
        // |0⟩ = ↓ is the +1 eigenstate of Z in this basis
        let images = [
            comb(&out[0], &out[1], 1.0),
            comb(&out[2], &out[3], -1.0),
            comb(&out[4], &out[5], -1.0),
            comb(&out[0], &out[1], -1.0),
        ];
        Self::from_pauli_images(&images)
    }

    /// `ℰ(ρ)` for a 2×2 density matrix.
    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let p = paulis();
        // complex coefficients: rho need not be Hermitian (Choi construction)
        let coeffs: Vec<Complex64> = (0..4).map(|j| trace(&mat_mul(&p[j], rho))).collect();
        let mut out = [[C0; 2]; 2];
        for i in 0..4 {
            let c: Complex64 = (0..4).map(|j| coeffs[j] * self.r[i][j]).sum::<Complex64>() * 0.5;
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] += p[i][a][b] * c;
                }
            }
        }
        out
    }

    /// Largest deviation of the first row from `(1, 0, 0, 0)`.
    pub fn trace_defect(&self) -> f64 {
        let row = self.r[0];
        [(row[0] - 1.0).abs(), row[1].abs(), row[2].abs(), row[3].abs()].into_iter().fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_defect() < TRACE_TOL
    }

    /// Eigenvalues of the Choi matrix `Σ_ab |a⟩⟨b| ⊗ ℰ(|a⟩⟨b|)`, ascending.
    pub fn choi_eigenvalues(&self) -> Vec<f64> {
        let mut choi = DMatrix::<Complex64>::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                let mut unit = [[C0; 2]; 2];
                unit[a][b] = C1;
                let img = self.apply(&unit);
                for i in 0..2 {
                    for j in 0..2 {
                        choi[(2 * a + i, 2 * b + j)] = img[i][j];
                    }
                }
            }
        }
        // symmetrize away rounding before the Hermitian solver
        let herm = (&choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_completely_positive(&self) -> bool {
        self.choi_eigenvalues()[0] >= CP_FLOOR
    }

    /// Elementwise mean of several channels, in the given order.
    pub fn mean(channels: &[ChannelMatrix]) -> ChannelMatrix {
        let mut r = [[0.0; 4]; 4];
        for c in channels {
            for i in 0..4 {
                for j in 0..4 {
                    r[i][j] += c.r[i][j];
                }
            }
        }
        let n = channels.len().max(1) as f64;
        r.iter_mut().flatten().for_each(|x| *x /= n);
        ChannelMatrix { r }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serializes")
    }
}

/// `F = ½ + (1/12) Σ_{i=x,y,z} Tr[σ_i ℰ(σ_i)] = ½ + (1/6) Σ_i R[i][i]`.
pub fn average_fidelity(channel: &ChannelMatrix) -> f64 {
    0.5 + (channel.r[1][1] + channel.r[2][2] + channel.r[3][3]) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outputs_of(f: impl Fn(&Mat2) -> Mat2) -> [Mat2; 6] {
        probe_states().map(|psi| {
            let mut rho = [[C0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] = psi[i] * psi[j].conj();
                }
            }
            f(&rho)
        })
    }

    #[test]
    fn identity_depolarizing_dephasing() {
        let id = ChannelMatrix::from_probe_outputs(&outputs_of(|r| *r));
        assert!((average_fidelity(&id) - 1.0).abs() < 1e-15);
        let eye = ChannelMatrix::identity();
        assert!((0..4).all(|i| (0..4).all(|j| (id.r[i][j] - eye.r[i][j]).abs() < 1e-15)));

        let half = Complex64::new(0.5, 0.0);
        let dep = ChannelMatrix::from_probe_outputs(&outputs_of(|_| [[half, C0], [C0, half]]));
        assert!((average_fidelity(&dep) - 0.5).abs() < 1e-15);

        let deph = ChannelMatrix::from_probe_outputs(&outputs_of(|r| [[r[0][0], C0], [C0, r[1][1]]]));
        assert!((average_fidelity(&deph) - 2.0 / 3.0).abs() < 1e-15);
        for c in [id, dep, deph] {
            assert!(c.is_trace_preserving());
            assert!(c.is_completely_positive());
        }
    }

    #[test]
    fn replacement_channel_rows() {
        let down = ChannelMatrix::from_probe_outputs(&outputs_of(|_| [[C1, C0], [C0, C0]]));
        let want = [[1.0, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 4], [1.0, 0.0, 0.0, 0.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert!((down.r[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
        assert!((average_fidelity(&down) - 0.5).abs() < 1e-15);
        assert!(down.is_completely_positive());
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let t = ChannelMatrix::from_probe_outputs(&outputs_of(|r| [[r[0][0], r[1][0]], [r[0][1], r[1][1]]]));
        assert!(t.is_trace_preserving());
        assert!(!t.is_completely_positive());
        assert!((t.choi_eigenvalues()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_is_row_major() {
        let mut c = ChannelMatrix::identity();
        c.r[0][3] = 0.25;
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["r"][0][3], 0.25);
        assert_eq!(serde_json::from_str::<ChannelMatrix>(&c.to_json()).unwrap(), c);
    }
}
