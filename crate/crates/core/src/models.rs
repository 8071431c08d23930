//! Spin-chain dynamics on `L` qubits (`d = 2^L`), observables, the
//! reflection (bit-reversal) symmetry and symmetry-adapted random-matrix
//! baselines.
//!
//! Site `j` (1-based) is the `j`-th tensor factor from the left, i.e. the
//! most significant bit of a computational basis index is site 1. All chains
//! use free (open) boundaries: bond sums run over `j = 1..L−1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen, I};
use crate::rng;

pub const MAX_SITES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> CMatrix {
        match self {
            Axis::X => CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
            Axis::Y => CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]),
            Axis::Z => CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        }
    }

    fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

fn check_sites(sites: usize) -> Result<()> {
    if !(2..=MAX_SITES).contains(&sites) {
        return Err(Error::InvalidParameter(format!("chain length L={sites} outside 2..={MAX_SITES}")));
    }
    Ok(())
}

pub fn hilbert_dim(sites: usize) -> usize {
    1 << sites
}

/// Tilted-field Ising chain, kicked (Floquet) or time independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub sites: usize,
    pub coupling: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub kicked: bool,
}

impl IsingParams {
    pub fn new(sites: usize, coupling: f64, h_x: f64, h_z: f64, kicked: bool) -> Self {
        Self { sites, coupling, h_x, h_z, kicked }
    }

    pub fn validate(&self) -> Result<()> {
        check_sites(self.sites)?;
        for (name, v) in [("J", self.coupling), ("h_x", self.h_x), ("h_z", self.h_z)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// How the impurity term `H_si` is normalized: Pauli `σ^a_l` or spin
/// `s^a_l = σ^a_l / 2`. The prefactor `g/2` is applied in both cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpurityNorm {
    Pauli,
    Spin,
}

impl ImpurityNorm {
    /// z impurities use Pauli normalization, y impurities the spin one.
    pub fn default_for(axis: Axis) -> Self {
        match axis {
            Axis::Y => ImpurityNorm::Spin,
            _ => ImpurityNorm::Pauli,
        }
    }
}

impl FromStr for ImpurityNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pauli" | "sigma" => Ok(ImpurityNorm::Pauli),
            "spin" | "s" => Ok(ImpurityNorm::Spin),
            other => Err(Error::InvalidParameter(format!("unknown impurity normalization '{other}'"))),
        }
    }
}

/// Heisenberg XXZ chain with a single-site impurity field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XXZParams {
    pub sites: usize,
    pub j_xy: f64,
    pub j_zz: f64,
    pub g: f64,
    /// 1-based.
    pub impurity_site: usize,
    pub impurity_axis: Axis,
    pub impurity_norm: ImpurityNorm,
}

impl XXZParams {
    /// Impurity on the central site along `z`.
    pub fn new(sites: usize, j_xy: f64, j_zz: f64, g: f64) -> Self {
        Self {
            sites,
            j_xy,
            j_zz,
            g,
            impurity_site: sites.div_ceil(2),
            impurity_axis: Axis::Z,
            impurity_norm: ImpurityNorm::Pauli,
        }
    }

    pub fn with_impurity(mut self, site: usize, axis: Axis) -> Self {
        self.impurity_site = site;
        self.impurity_axis = axis;
        self.impurity_norm = ImpurityNorm::default_for(axis);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_sites(self.sites)?;
        if self.impurity_site == 0 || self.impurity_site > self.sites {
            return Err(Error::InvalidParameter(format!(
                "impurity site {} outside 1..={}",
                self.impurity_site, self.sites
            )));
        }
        Ok(())
    }
}

/// A Hermitian observable with a human-readable label.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub matrix: CMatrix,
    pub label: String,
}

impl Observable {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `single` on site `site` (1-based), identity elsewhere.
pub fn embed_site(single: &CMatrix, site: usize, sites: usize) -> CMatrix {
    let left = hilbert_dim(site - 1);
    let right = hilbert_dim(sites - site);
    CMatrix::identity(left, left).kronecker(single).kronecker(&CMatrix::identity(right, right))
}

/// Spin operator `s^a_j = σ^a_j / 2`.
pub fn site_observable(axis: Axis, site: usize, sites: usize) -> Result<Observable> {
    check_sites(sites)?;
    if site == 0 || site > sites {
        return Err(Error::InvalidParameter(format!("site {site} outside 1..={sites}")));
    }
    let m = embed_site(&(axis.pauli() * c(0.5)), site, sites);
    Ok(Observable { matrix: m, label: format!("s{site}{axis}") })
}

/// `Σ s^{a_i}_{j_i}` over the listed `(axis, site)` pairs.
pub fn sum_site_observable(terms: &[(Axis, usize)], sites: usize) -> Result<Observable> {
    if terms.is_empty() {
        return Err(Error::InvalidParameter("empty observable sum".into()));
    }
    let d = hilbert_dim(sites);
    let mut m = CMatrix::zeros(d, d);
    let mut labels = Vec::with_capacity(terms.len());
    for &(axis, site) in terms {
        let o = site_observable(axis, site, sites)?;
        m += o.matrix;
        labels.push(o.label);
    }
    Ok(Observable { matrix: m, label: labels.join("+") })
}

/// Collective spin `S_a = ½ Σ_j σ^a_j`.
pub fn collective_observable(axis: Axis, sites: usize) -> Result<Observable> {
    let terms: Vec<_> = (1..=sites).map(|j| (axis, j)).collect();
    let mut o = sum_site_observable(&terms, sites)?;
    o.label = format!("S{axis}");
    Ok(o)
}

/// Parses `s1y`, `Sx`, `s2y+s4y`, ... into an observable on `sites` qubits.
pub fn parse_observable(label: &str, sites: usize) -> Result<Observable> {
    let label = label.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse observable '{label}'"));
    if let Some(rest) = label.strip_prefix('S') {
        if rest.len() == 1 {
            return collective_observable(rest.parse().map_err(|_| bad())?, sites);
        }
        return Err(bad());
    }
    let mut terms = Vec::new();
    for part in label.split('+') {
        let part = part.trim();
        let body = part.strip_prefix('s').ok_or_else(bad)?;
        if body.len() < 2 {
            return Err(bad());
        }
        let (site, axis) = body.split_at(body.len() - 1);
        let site: usize = site.parse().map_err(|_| bad())?;
        terms.push((axis.parse::<Axis>()?, site));
    }
    sum_site_observable(&terms, sites)
}

/// Diagonal of `Σ_{j=1}^{L−1} σᶻ_j σᶻ_{j+1}` in the computational basis.
fn zz_bond_diagonal(sites: usize) -> Vec<f64> {
    (0..hilbert_dim(sites))
        .map(|b| {
            (1..sites)
                .map(|j| {
                    let zj = spin_sign(b, j, sites);
                    let zk = spin_sign(b, j + 1, sites);
                    zj * zk
                })
                .sum()
        })
        .collect()
}

/// `+1` if site `j` of basis state `b` is |0⟩, `−1` otherwise.
fn spin_sign(b: usize, site: usize, sites: usize) -> f64 {
    if (b >> (sites - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Floquet map `exp(−iJ Σ σᶻσᶻ) · exp(−i Σ (h_z σᶻ + h_x σˣ))` of the kicked
/// tilted-field Ising chain; Ising factor on the left.
pub fn tki_floquet(p: &IsingParams) -> Result<CMatrix> {
    p.validate()?;
    if !p.kicked {
        return Err(Error::InvalidParameter("tki_floquet needs kicked = true".into()));
    }
    let d = hilbert_dim(p.sites);
    // kick: tensor product of exp(−i h·σ) = cos|h| − i sin|h| (ĥ·σ)
    let h = (p.h_x * p.h_x + p.h_z * p.h_z).sqrt();
    let kick1 = if h == 0.0 {
        CMatrix::identity(2, 2)
    } else {
        let n_dot_sigma = (Axis::X.pauli() * c(p.h_x) + Axis::Z.pauli() * c(p.h_z)) / c(h);
        CMatrix::identity(2, 2) * c(h.cos()) - n_dot_sigma * (I * h.sin())
    };
    let mut kick = CMatrix::identity(1, 1);
    for _ in 0..p.sites {
        kick = kick.kronecker(&kick1);
    }
    let zz = zz_bond_diagonal(p.sites);
    let mut u = kick;
    for (row, &e) in zz.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -p.coupling * e);
        for col in 0..d {
            u[(row, col)] *= phase;
        }
    }
    Ok(u)
}

/// `H_TI = J Σ_{j<L} σᶻ_jσᶻ_{j+1} + Σ_j (h_z σᶻ_j + h_x σˣ_j)`.
pub fn ti_hamiltonian(p: &IsingParams) -> Result<CMatrix> {
    p.validate()?;
    let d = hilbert_dim(p.sites);
    let mut h = CMatrix::zeros(d, d);
    for (b, e) in zz_bond_diagonal(p.sites).into_iter().enumerate() {
        h[(b, b)] = c(p.coupling * e);
    }
    let field = Axis::Z.pauli() * c(p.h_z) + Axis::X.pauli() * c(p.h_x);
    for j in 1..=p.sites {
        h += embed_site(&field, j, p.sites);
    }
    Ok(h)
}

/// `exp(−i t H_TI)`.
pub fn ti_unitary(p: &IsingParams, t: f64) -> Result<CMatrix> {
    if p.kicked {
        return Err(Error::InvalidParameter("ti_unitary needs kicked = false".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("evolution time {t} must be finite and non-negative")));
    }
    Ok(linalg::expm_hermitian(&ti_hamiltonian(p)?, t))
}

/// `H = Σ_{j<L} (J_xy/4)(σˣσˣ + σʸσʸ) + (J_zz/4) σᶻσᶻ + (g/2) H_si`.
pub fn xxz_hamiltonian(p: &XXZParams) -> Result<CMatrix> {
    p.validate()?;
    let d = hilbert_dim(p.sites);
    let mut h = CMatrix::zeros(d, d);
    let (x, y, z) = (Axis::X.pauli(), Axis::Y.pauli(), Axis::Z.pauli());
    let xx = x.kronecker(&x);
    let yy = y.kronecker(&y);
    let zz = z.kronecker(&z);
    let bond = (xx + yy) * c(p.j_xy / 4.0) + zz * c(p.j_zz / 4.0);
    for j in 1..p.sites {
        let left = hilbert_dim(j - 1);
        let right = hilbert_dim(p.sites - j - 1);
        h += CMatrix::identity(left, left).kronecker(&bond).kronecker(&CMatrix::identity(right, right));
    }
    let scale = match p.impurity_norm {
        ImpurityNorm::Pauli => 1.0,
        ImpurityNorm::Spin => 0.5,
    };
    h += embed_site(&(p.impurity_axis.pauli() * c(p.g / 2.0 * scale)), p.impurity_site, p.sites);
    Ok(h)
}

fn reverse_bits(b: usize, sites: usize) -> usize {
    (0..sites).fold(0, |acc, k| acc | (((b >> k) & 1) << (sites - 1 - k)))
}

/// Permutation `|b_1 … b_L⟩ ↦ |b_L … b_1⟩`.
pub fn reflection_operator(sites: usize) -> Result<CMatrix> {
    check_sites(sites)?;
    let d = hilbert_dim(sites);
    let mut r = CMatrix::zeros(d, d);
    for b in 0..d {
        r[(reverse_bits(b, sites), b)] = c(1.0);
    }
    Ok(r)
}

/// Real orthogonal eigenbasis of the reflection. Columns `0..even` span the
/// `+1` sector, the rest the `−1` sector. Returns `(basis, even)`.
pub fn reflection_eigenbasis(sites: usize) -> Result<(DMatrix<f64>, usize)> {
    check_sites(sites)?;
    let d = hilbert_dim(sites);
    let mut even_cols = Vec::new();
    let mut odd_cols = Vec::new();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for b in 0..d {
        let rb = reverse_bits(b, sites);
        let mut v = vec![0.0; d];
        if rb == b {
            v[b] = 1.0;
            even_cols.push(v);
        } else if b < rb {
            v[b] = s;
            v[rb] = s;
            even_cols.push(v.clone());
            v[rb] = -s;
            odd_cols.push(v);
        }
    }
    let even = even_cols.len();
    let cols: Vec<_> = even_cols.into_iter().chain(odd_cols).collect();
    Ok((DMatrix::from_fn(d, d, |i, j| cols[j][i]), even))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-random `n×n` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| Complex64::new(standard_normal(rng) * s, standard_normal(rng) * s));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Real symmetric GOE block `(A + Aᵀ)/2` with i.i.d. standard normal `A`.
fn goe_block<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    (&a + a.transpose()) * 0.5
}

/// Rotates a block-diagonal matrix (blocks in reflection-sector order) back
/// to the computational basis.
fn from_reflection_basis(blocks: &CMatrix, basis: &DMatrix<f64>) -> CMatrix {
    let v = basis.map(c);
    &v * blocks * v.transpose()
}

/// GOE Hamiltonian, block diagonal in the reflection eigenbasis.
pub fn goe_sample_with<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> Result<CMatrix> {
    let (basis, even) = reflection_eigenbasis(sites)?;
    let d = basis.nrows();
    let mut blocks = CMatrix::zeros(d, d);
    for (start, len) in [(0, even), (even, d - even)] {
        let g = goe_block(len, rng);
        for i in 0..len {
            for j in 0..len {
                blocks[(start + i, start + j)] = c(g[(i, j)]);
            }
        }
    }
    Ok(linalg::hermitian_part(&from_reflection_basis(&blocks, &basis)))
}

/// COE unitary `WᵀW` per reflection sector, `W` Haar in the sector.
pub fn coe_sample_with<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> Result<CMatrix> {
    let (basis, even) = reflection_eigenbasis(sites)?;
    let d = basis.nrows();
    let mut blocks = CMatrix::zeros(d, d);
    for (start, len) in [(0, even), (even, d - even)] {
        let w = haar_unitary(len, rng);
        let u = w.transpose() * &w;
        for i in 0..len {
            for j in 0..len {
                blocks[(start + i, start + j)] = u[(i, j)];
            }
        }
    }
    Ok(from_reflection_basis(&blocks, &basis))
}

pub fn goe_sample(sites: usize, seed: u64) -> Result<CMatrix> {
    goe_sample_with(sites, &mut rng::seeded(seed))
}

pub fn coe_sample(sites: usize, seed: u64) -> Result<CMatrix> {
    coe_sample_with(sites, &mut rng::seeded(seed))
}

/// Mean consecutive level-spacing ratio `⟨min(s_i, s_{i+1}) / max(s_i, s_{i+1})⟩`
/// of an ascending spectrum. `None` with fewer than three levels.
pub fn mean_spacing_ratio(sorted_levels: &[f64]) -> Option<f64> {
    if sorted_levels.len() < 3 {
        return None;
    }
    let gaps: Vec<f64> = sorted_levels.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = gaps
        .windows(2)
        .filter_map(|w| {
            let (lo, hi) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            (hi > 0.0).then(|| lo / hi)
        })
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Eigenvalues of a Hermitian matrix restricted to each reflection sector,
/// returned as `(even, odd)` ascending spectra.
pub fn sector_spectra(h: &CMatrix, sites: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (basis, even) = reflection_eigenbasis(sites)?;
    let v = basis.map(c);
    let rotated = v.transpose() * h * &v;
    let d = rotated.nrows();
    let even_block = rotated.view((0, 0), (even, even)).into_owned();
    let odd_block = rotated.view((even, even), (d - even, d - even)).into_owned();
    Ok((HermitianEigen::new(&even_block).values, HermitianEigen::new(&odd_block).values))
}
