//! Physical system definition: an intermediate XX chain of `N` spins with
//! two end qubits, its single-particle coupling matrix, and seeded disorder.
//!
//! Site indexing runs `0..=N+1`; sites `0` and `N+1` are the end qubits.
//! All intra-chain couplings are stored positive: on a bipartite chain local
//! phase flips remove any sign, so signs carry no physics here.
//!
//! The end detuning `Δ(S^z_0 + S^z_{N+1})` enters the coupling matrix as
//! `Δ·n` on both end sites; the constant `-Δ/2` per end spin is a global phase.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fmt_f64, fmt_list, parse_key_values};

/// Full parameterization of one chain with its two end qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_chain: usize,
    pub kappa: Vec<f64>,
    pub onsite: Vec<f64>,
    pub g_left: f64,
    pub g_right: f64,
    pub delta: f64,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_chain;
        if n < 1 {
            return Err(Error::invalid("n_chain must be at least 1"));
        }
        if self.kappa.len() != n - 1 {
            return Err(Error::invalid(format!(
                "kappa has {} entries, expected n_chain-1 = {}",
                self.kappa.len(),
                n - 1
            )));
        }
        if self.onsite.len() != n {
            return Err(Error::invalid(format!(
                "onsite has {} entries, expected n_chain = {n}",
                self.onsite.len()
            )));
        }
        if let Some((j, k)) = self.kappa.iter().enumerate().find(|(_, &k)| !(k > 0.0 && k.is_finite())) {
            return Err(Error::invalid(format!("kappa[{j}] = {k} must be positive and finite")));
        }
        if let Some((j, h)) = self.onsite.iter().enumerate().find(|(_, h)| !h.is_finite()) {
            return Err(Error::invalid(format!("onsite[{j}] = {h} is not finite")));
        }
        for (name, g) in [("g_left", self.g_left), ("g_right", self.g_right)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("{name} = {g} must be non-negative and finite")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta is not finite"));
        }
        Ok(())
    }

    /// Total number of sites including both end qubits.
    pub fn total_sites(&self) -> usize {
        self.n_chain + 2
    }

    /// Mean intra-chain coupling. A single-site chain has no couplings and
    /// uses the unit energy scale.
    pub fn mean_coupling(&self) -> f64 {
        if self.kappa.is_empty() {
            1.0
        } else {
            self.kappa.iter().sum::<f64>() / self.kappa.len() as f64
        }
    }

    /// Same chain with different end couplings.
    pub fn with_ends(&self, g_left: f64, g_right: f64) -> ChainSpec {
        ChainSpec { g_left, g_right, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ChainSpec serializes")
    }

    pub fn from_json(text: &str) -> Result<ChainSpec> {
        let spec: ChainSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Line-oriented `key = value` form; lists are comma separated.
    pub fn to_key_values(&self) -> String {
        format!(
            "n_chain = {}\nkappa = {}\nonsite = {}\ng_left = {}\ng_right = {}\ndelta = {}\n",
            self.n_chain,
            fmt_list(&self.kappa),
            fmt_list(&self.onsite),
            fmt_f64(self.g_left),
            fmt_f64(self.g_right),
            fmt_f64(self.delta),
        )
    }

    pub fn from_key_values(text: &str) -> Result<ChainSpec> {
        let sections = parse_key_values(text)?;
        let mut entries = sections.into_iter().flat_map(|s| s.entries).collect::<Vec<_>>();
        entries.sort_by_key(|e| e.line);
        let find = |key: &str| {
            entries
                .iter()
                .rev()
                .find(|e| e.key == key)
                .ok_or_else(|| Error::Parse { line: 0, message: format!("missing key `{key}`") })
        };
        let spec = ChainSpec {
            n_chain: find("n_chain")?.parse_usize()?,
            kappa: find("kappa")?.parse_f64_list()?,
            onsite: find("onsite")?.parse_f64_list()?,
            g_left: find("g_left")?.parse_f64()?,
            g_right: find("g_right")?.parse_f64()?,
            delta: find("delta")?.parse_f64()?,
        };
        if let Some(e) = entries.iter().find(|e| {
            !matches!(e.key.as_str(), "n_chain" | "kappa" | "onsite" | "g_left" | "g_right" | "delta")
        }) {
            return Err(e.err("unknown key"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Uniform chain: all couplings `kappa`, no on-site fields, symmetric ends.
pub fn make_uniform_spec(n: usize, kappa: f64, g: f64, delta: f64) -> Result<ChainSpec> {
    if n < 1 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid(format!("kappa = {kappa} must be positive")));
    }
    let spec = ChainSpec {
        n_chain: n,
        kappa: vec![kappa; n - 1],
        onsite: vec![0.0; n],
        g_left: g,
        g_right: g,
        delta,
    };
    spec.validate()?;
    Ok(spec)
}

/// Real symmetric single-particle matrix `K` with `H = Σ K_ij S⁺_i S⁻_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    matrix: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Wraps an arbitrary matrix, rejecting anything not exactly symmetric.
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<CouplingMatrix> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("coupling matrix must be square and non-empty"));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::invalid(format!("coupling matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coupling matrix has non-finite entries"));
        }
        Ok(CouplingMatrix { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Chain-only block (sites `1..=N`) of an end-qubit matrix.
    pub fn interior(&self) -> CouplingMatrix {
        let n = self.size();
        assert!(n >= 3, "interior block needs at least one chain site");
        CouplingMatrix { matrix: self.matrix.view((1, 1), (n - 2, n - 2)).into_owned() }
    }

    /// Largest `|i - j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        let n = self.size();
        let mut bw = 0;
        for i in 0..n {
            for j in 0..n {
                if self.matrix[(i, j)] != 0.0 {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }
}

/// Builds the `(N+2)×(N+2)` tridiagonal coupling matrix for a chain spec.
pub fn build_coupling_matrix(spec: &ChainSpec) -> Result<CouplingMatrix> {
    spec.validate()?;
    let n = spec.n_chain;
    let size = n + 2;
    let mut k = DMatrix::zeros(size, size);
    let mut link = |i: usize, j: usize, c: f64| {
        k[(i, j)] = c;
        k[(j, i)] = c;
    };
    link(0, 1, spec.g_left);
    link(n, n + 1, spec.g_right);
    for (j, &c) in spec.kappa.iter().enumerate() {
        link(j + 1, j + 2, c);
    }
    for (j, &h) in spec.onsite.iter().enumerate() {
        k[(j + 1, j + 1)] = h;
    }
    k[(0, 0)] = spec.delta;
    k[(n + 1, n + 1)] = spec.delta;
    Ok(CouplingMatrix { matrix: k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    Coupling,
    Onsite,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Multipliers (or shifts) drawn uniformly from `[-s, s]` around the base.
    UniformRelative,
    /// Standard normal draws scaled by `s`.
    GaussianRelative,
}

impl std::str::FromStr for DisorderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupling" => Ok(DisorderKind::Coupling),
            "onsite" => Ok(DisorderKind::Onsite),
            "both" => Ok(DisorderKind::Both),
            _ => Err(Error::invalid(format!("unknown disorder kind `{s}`"))),
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-relative" => Ok(Distribution::UniformRelative),
            "gaussian-relative" => Ok(Distribution::GaussianRelative),
            _ => Err(Error::invalid(format!("unknown distribution `{s}`"))),
        }
    }
}

/// Disorder ensemble definition.
///
/// Realization `r` of seed `s` is drawn from ChaCha20 seeded with
/// `seed_from_u64(s)` on stream `r`, so every realization is reproducible on
/// any platform independently of the others. Coupling draws come first (one
/// per bond, left to right), then on-site draws (one per site).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderModel {
    pub kind: DisorderKind,
    pub distribution: Distribution,
    pub strength: f64,
    pub seed: u64,
}

impl DisorderModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::invalid(format!("disorder strength {} must be >= 0", self.strength)));
        }
        if self.distribution == Distribution::UniformRelative
            && self.strength >= 1.0
            && self.kind != DisorderKind::Onsite
        {
            return Err(Error::invalid(format!(
                "uniform-relative coupling disorder needs strength < 1, got {}",
                self.strength
            )));
        }
        Ok(())
    }

    fn rng(&self, realization: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(realization);
        rng
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> f64 {
        match self.distribution {
            Distribution::UniformRelative => rng.random_range(-1.0..1.0),
            Distribution::GaussianRelative => rng.sample(StandardNormal),
        }
    }
}

/// Draws one disorder realization of `base`.
///
/// Coupling disorder multiplies each `κ_j` by `1 + s·ξ_j`; Gaussian draws that
/// would make a coupling non-positive are redrawn. On-site disorder adds
/// `s·κ̄·ξ_j`. End couplings and detuning are never randomized.
pub fn sample_disorder(base: &ChainSpec, model: &DisorderModel, realization_index: u64) -> Result<ChainSpec> {
    base.validate()?;
    model.validate()?;
    if model.strength == 0.0 {
        return Ok(base.clone());
    }
    let mut rng = model.rng(realization_index);
    let mut out = base.clone();
    let s = model.strength;
    if matches!(model.kind, DisorderKind::Coupling | DisorderKind::Both) {
        for k in out.kappa.iter_mut() {
            let factor = loop {
                let f = 1.0 + s * model.draw(&mut rng);
                if f > 0.0 {
                    break f;
                }
            };
            *k *= factor;
        }
    }
    if matches!(model.kind, DisorderKind::Onsite | DisorderKind::Both) {
        let scale = s * base.mean_coupling();
        for h in out.onsite.iter_mut() {
            *h += scale * model.draw(&mut rng);
        }
    }
    Ok(out)
}
