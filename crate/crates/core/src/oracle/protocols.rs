//! Transfer protocols simulated on the full spin Hilbert space with the chain
//! at infinite temperature.
//!
//! The maximally mixed chain is represented exactly as the uniform average
//! over its computational basis states (every quantity here is linear in the
//! chain density matrix), or estimated from a seeded sample of them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::channel::{average_fidelity, probe_states, ChannelMatrix, Mat2};
use super::evolve::Evolver;
use super::hamiltonian::{SpinHamiltonian, DEFAULT_SITE_CAP};
use crate::chain::{build_coupling_matrix, ChainSpec, CouplingMatrix};
use crate::error::{Error, Result};
use crate::par::Exec;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which chain basis states stand in for the infinite-temperature ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Ensemble {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

impl Ensemble {
    /// Chain basis states (bit `j` = chain site `j + 1`) in evaluation order.
    pub fn chain_states(&self, n_chain: usize) -> Result<Vec<u32>> {
        match *self {
            Ensemble::Exhaustive => {
                if n_chain > 24 {
                    return Err(Error::invalid("exhaustive ensemble over more than 2^24 chain states"));
                }
                Ok((0..1u32 << n_chain).collect())
            }
            Ensemble::Sampled { count, seed } => {
                if count == 0 {
                    return Err(Error::invalid("sampled ensemble needs at least one state"));
                }
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                Ok((0..count).map(|_| rng.random_range(0..1u32 << n_chain)).collect())
            }
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self, Ensemble::Sampled { .. })
    }
}

/// Averaged channel of an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub channel: ChannelMatrix,
    pub average_fidelity: f64,
    /// Standard error of the fidelity over sampled chain states.
    pub standard_error: Option<f64>,
    pub chain_states: usize,
    pub sampled: bool,
}

/// Outcome of a full protocol simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub schema_version: u32,
    pub average_fidelity: f64,
    pub infidelity: f64,
    pub channel: Option<ChannelMatrix>,
    pub sampled: bool,
    pub chain_states: usize,
    pub standard_error: Option<f64>,
    /// z-rotation angle applied to the output qubit, calibrated on the chain vacuum.
    pub phase_correction: f64,
    /// Largest residual logical phase over chain states after correction.
    pub max_phase_deviation: f64,
}

impl ProtocolResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol result serializes")
    }
}

/// `X_ab[i][j] = Σ_rest v_a[i, rest] v_b[j, rest]*` for qubit `site`.
fn reduced_cross(va: &[Complex64], vb: &[Complex64], site: usize) -> Mat2 {
    let mut x = [[C0; 2]; 2];
    let bit = 1usize << site;
    for r in (0..va.len()).filter(|r| r & bit == 0) {
        let a = [va[r], va[r | bit]];
        let b = [vb[r], vb[r | bit]];
        for i in 0..2 {
            for j in 0..2 {
                x[i][j] += a[i] * b[j].conj();
            }
        }
    }
    x
}

/// Output density matrices of the six probe states given the reduced cross
/// terms of the two evolved logical basis vectors.
fn probe_outputs(cross: &[[Mat2; 2]; 2]) -> [Mat2; 6] {
    probe_states().map(|p| {
        let mut rho = [[C0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let w = p[a] * p[b].conj();
                for i in 0..2 {
                    for j in 0..2 {
                        rho[i][j] += w * cross[a][b][i][j];
                    }
                }
            }
        }
        rho
    })
}

fn cross_terms(v: &[Vec<Complex64>; 2], site: usize) -> [[Mat2; 2]; 2] {
    let mut out = [[[[C0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = reduced_cross(&v[a], &v[b], site);
        }
    }
    out
}

struct Member {
    channel: ChannelMatrix,
    fidelity: f64,
    relative_phase: Option<f64>,
}

fn summarize(members: &[Member], ensemble: &Ensemble) -> ChannelEstimate {
    let channels: Vec<ChannelMatrix> = members.iter().map(|m| m.channel).collect();
    let channel = ChannelMatrix::mean(&channels);
    let f = average_fidelity(&channel);
    let standard_error = if ensemble.is_sampled() && members.len() > 1 {
        let n = members.len() as f64;
        let mean = members.iter().map(|m| m.fidelity).sum::<f64>() / n;
        let var = members.iter().map(|m| (m.fidelity - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    } else {
        None
    };
    ChannelEstimate { channel, average_fidelity: f, standard_error, chain_states: members.len(), sampled: ensemble.is_sampled() }
}

/// Bare single-qubit transfer `0 → N+1` through an infinite-temperature chain.
///
/// The target qubit starts down. Each chain basis state contributes the
/// channel obtained by evolving `|q⟩ ⊗ |s⟩ ⊗ |↓⟩` for `q ∈ {↓, ↑}`, tracing out
/// everything but site `N+1`, and reading off the six probe outputs.
pub fn single_transfer_channel(spec: &ChainSpec, tau: f64, ensemble: Ensemble) -> Result<ChannelEstimate> {
    single_transfer_channel_with(spec, tau, ensemble, DEFAULT_SITE_CAP, Exec::default())
}

pub fn single_transfer_channel_with(
    spec: &ChainSpec,
    tau: f64,
    ensemble: Ensemble,
    site_cap: usize,
    exec: Exec,
) -> Result<ChannelEstimate> {
    check_time(tau)?;
    let k = build_coupling_matrix(spec)?;
    let ham = SpinHamiltonian::from_couplings(&k, site_cap)?;
    let ev = Evolver::new(&ham);
    let target = spec.n_chain + 1;
    let states = ensemble.chain_states(spec.n_chain)?;
    let members = exec.map_slice(&states, |&c| -> Result<Member> {
        let base = c << 1;
        let v = [ev.evolve_basis(base, tau)?, ev.evolve_basis(base | 1, tau)?];
        let channel = ChannelMatrix::from_probe_outputs(&probe_outputs(&cross_terms(&v, target)));
        Ok(Member { fidelity: average_fidelity(&channel), channel, relative_phase: None })
    });
    let members = members.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize(&members, &ensemble))
}

fn check_time(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("transfer time {tau} must be finite and >= 0")));
    }
    Ok(())
}

/// Register layout of the encoded protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedLayout {
    pub a: usize,
    pub b: usize,
    pub a_prime: usize,
    pub b_prime: usize,
    pub n_chain: usize,
}

impl EncodedLayout {
    /// `a = 0`, chain `1..=N`, `b = N+1`, `a' = N+2`, `b' = N+3`.
    pub fn new(n_chain: usize) -> Self {
        EncodedLayout { a: 0, b: n_chain + 1, a_prime: n_chain + 2, b_prime: n_chain + 3, n_chain }
    }

    pub fn sites(&self) -> usize {
        self.n_chain + 4
    }

    /// Coupling matrix for one transfer leg: `left ↔ 1` and `N ↔ right`
    /// active, the other register pair decoupled.
    pub fn leg(&self, spec: &ChainSpec, left: usize, right: usize) -> Result<CouplingMatrix> {
        let base = build_coupling_matrix(spec)?;
        let n = self.sites();
        let nc = self.n_chain;
        let mut m = DMatrix::zeros(n, n);
        for i in 1..=nc {
            for j in 1..=nc {
                m[(i, j)] = base.get(i, j);
            }
        }
        m[(left, 1)] = spec.g_left;
        m[(1, left)] = spec.g_left;
        m[(right, nc)] = spec.g_right;
        m[(nc, right)] = spec.g_right;
        m[(left, left)] = spec.delta;
        m[(right, right)] = spec.delta;
        CouplingMatrix::from_dense(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedOptions {
    /// Apply the CNOT (control `b`, target `b'`) decode step.
    pub decode: bool,
    pub site_cap: usize,
    pub exec: Exec,
}

impl Default for EncodedOptions {
    fn default() -> Self {
        EncodedOptions { decode: true, site_cap: DEFAULT_SITE_CAP, exec: Exec::default() }
    }
}

/// Two-qubit encoded transfer: encode on `(a, a')`, transfer `a → b` for `τ`,
/// then `a' → b'` for `τ`, decode with CNOT(`b → b'`), correct a fixed
/// z-phase on `b`, and report the logical channel on `b`.
pub fn encoded_transfer(spec: &ChainSpec, tau: f64, ensemble: Ensemble) -> Result<ProtocolResult> {
    encoded_transfer_with(spec, tau, ensemble, EncodedOptions::default())
}

pub fn encoded_transfer_with(
    spec: &ChainSpec,
    tau: f64,
    ensemble: Ensemble,
    opts: EncodedOptions,
) -> Result<ProtocolResult> {
    check_time(tau)?;
    spec.validate()?;
    let lay = EncodedLayout::new(spec.n_chain);
    if lay.sites() > opts.site_cap {
        return Err(Error::SizeCapExceeded { sites: lay.sites(), cap: opts.site_cap });
    }
    let h1 = SpinHamiltonian::from_couplings(&lay.leg(spec, lay.a, lay.b)?, opts.site_cap)?;
    let h2 = SpinHamiltonian::from_couplings(&lay.leg(spec, lay.a_prime, lay.b_prime)?, opts.site_cap)?;
    let (ev1, ev2) = (Evolver::new(&h1), Evolver::new(&h2));
    let logical_one = (1u32 << lay.a) | (1u32 << lay.a_prime);
    let b_bit = 1usize << lay.b;
    let bp_bit = 1usize << lay.b_prime;

    let run = |chain: u32| -> Result<[Vec<Complex64>; 2]> {
        let base = chain << 1;
        let mut out: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for (l, slot) in out.iter_mut().enumerate() {
            let s = if l == 1 { base | logical_one } else { base };
            let v = ev2.evolve(&ev1.evolve_basis(s, tau)?, tau)?;
            *slot = if opts.decode {
                let mut w = vec![C0; v.len()];
                for (idx, amp) in v.into_iter().enumerate() {
                    let t = if idx & b_bit != 0 { idx ^ bp_bit } else { idx };
                    w[t] = amp;
                }
                w
            } else {
                v
            };
        }
        Ok(out)
    };

    let relative = |v: &[Vec<Complex64>; 2]| -> Complex64 {
        (0..v[0].len()).filter(|r| r & b_bit == 0).map(|r| v[0][r].conj() * v[1][r | b_bit]).sum()
    };

    // calibrate on the chain vacuum
    let vac = run(0)?;
    let (a0, a1) = (vac[0][0], vac[1][b_bit]);
    let phase_correction = if a0.norm() > 1e-12 && a1.norm() > 1e-12 { (a1 / a0).arg() } else { 0.0 };
    if !phase_correction.is_finite() {
        return Err(Error::numeric("phase calibration produced a non-finite angle"));
    }
    let fix = Complex64::from_polar(1.0, -phase_correction);

    let states = ensemble.chain_states(spec.n_chain)?;
    let members = opts.exec.map_slice(&states, |&c| -> Result<Member> {
        let mut v = run(c)?;
        for vec in v.iter_mut() {
            for (idx, amp) in vec.iter_mut().enumerate() {
                if idx & b_bit != 0 {
                    *amp *= fix;
                }
            }
        }
        let rel = relative(&v);
        let channel = ChannelMatrix::from_probe_outputs(&probe_outputs(&cross_terms(&v, lay.b)));
        Ok(Member {
            fidelity: average_fidelity(&channel),
            channel,
            relative_phase: (rel.norm() > 1e-6).then(|| rel.arg()),
        })
    });
    let members = members.into_iter().collect::<Result<Vec<_>>>()?;
    let max_phase_deviation = members.iter().filter_map(|m| m.relative_phase).fold(0.0_f64, |a, p| a.max(p.abs()));
    let est = summarize(&members, &ensemble);
    Ok(ProtocolResult {
        schema_version: 1,
        average_fidelity: est.average_fidelity,
        infidelity: 1.0 - est.average_fidelity,
        channel: Some(est.channel),
        sampled: est.sampled,
        chain_states: est.chain_states,
        standard_error: est.standard_error,
        phase_correction,
        max_phase_deviation,
    })
}
