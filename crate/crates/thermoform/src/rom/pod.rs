//! Proper orthogonal decomposition of snapshot matrices.
//!
//! Bases are computed by the method of snapshots: the eigenvectors of the
//! small Gram matrix `Q^T Q` give the right singular vectors, the
//! eigenvalues the squared singular values, and `phi_i = Q v_i / sigma_i`
//! recovers the spatial modes. Two passes of modified Gram-Schmidt
//! re-orthonormalize the modes against round-off from nearly rank-deficient
//! snapshot sets. Modes are ordered by decreasing singular value, so a basis
//! truncated to a smaller rank is always the leading block of a larger one.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::container::Container;
use crate::error::{Error, Result};

/// Relative singular-value cutoff below which modes count as numerical null
/// space. Eigenvalues of the Gram matrix carry round-off of order
/// `eps * sigma_1^2`, so singular values below roughly `sqrt(eps) * sigma_1`
/// are indistinguishable from noise.
const RANK_TOL: f64 = 1e-7;

/// How many modes a basis keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Exactly this many modes (clamped to the numerical rank, with a
    /// warning).
    Fixed(usize),
    /// Smallest rank whose cumulative energy ratio reaches the threshold.
    EnergyThreshold(f64),
    /// Every mode above the numerical-rank cutoff.
    FullRank,
}

/// POD basis with the full singular-value ladder of its snapshot set.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// Orthonormal modes, `n x r`, ordered by decreasing singular value.
    pub phi: DMatrix<f64>,
    /// All snapshot singular values (descending), not just the kept ones.
    pub sigma: Vec<f64>,
}

impl PodBasis {
    pub fn n_nodes(&self) -> usize {
        self.phi.nrows()
    }

    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    /// Cumulative energy ratio `eps(r)` of the snapshot set. With
    /// `on_squares` the ratio is taken over squared singular values
    /// (captured variance); otherwise over first powers.
    pub fn energy_ratio(&self, r: usize, on_squares: bool) -> f64 {
        let weight = |s: f64| if on_squares { s * s } else { s };
        let total: f64 = self.sigma.iter().map(|&s| weight(s)).sum();
        if total == 0.0 {
            return 0.0;
        }
        let head: f64 = self.sigma.iter().take(r).map(|&s| weight(s)).sum();
        head / total
    }

    /// Reduced coordinates of a full state: `x = phi^T q`.
    pub fn reduce(&self, q: &DVector<f64>) -> DVector<f64> {
        self.phi.tr_mul(q)
    }

    /// Full-space reconstruction of reduced coordinates: `q = phi x`.
    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi * x
    }

    /// Basis restricted to its leading `r` modes.
    pub fn truncated(&self, r: usize) -> PodBasis {
        let r = r.min(self.rank());
        PodBasis {
            phi: self.phi.columns(0, r).clone_owned(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container::new("pod-basis");
        c.push("phi", self.phi.clone());
        c.push_vec("sigma", &self.sigma);
        c.save(path)
    }

    pub fn load(path: &Path) -> Result<PodBasis> {
        let display = path.display().to_string();
        let mut c = Container::load(path)?;
        c.expect_kind("pod-basis", &display)?;
        let phi = c.take("phi", &display)?;
        let sigma = c.take_column("sigma", &display)?;
        if phi.ncols() > sigma.len() {
            return Err(Error::ShapeMismatch {
                context: format!("basis in {display}"),
                expected: "at least as many singular values as modes".into(),
                found: format!("{} modes, {} values", phi.ncols(), sigma.len()),
            });
        }
        Ok(PodBasis { phi, sigma })
    }
}

/// Computes a POD basis from a snapshot matrix (`n x l`, one state per
/// column).
pub fn pod_basis(snapshots: &DMatrix<f64>, rule: RankRule, energy_on_squares: bool) -> Result<PodBasis> {
    let (n, l) = snapshots.shape();
    if n == 0 || l == 0 {
        return Err(Error::EmptySnapshots(format!(
            "snapshot matrix is {n} x {l}"
        )));
    }

    let gram = snapshots.tr_mul(snapshots);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sigma: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();

    if !(sigma[0] > 0.0) {
        return Err(Error::EmptySnapshots("all snapshots are zero".into()));
    }
    let numerical_rank = sigma
        .iter()
        .take_while(|&&s| s > RANK_TOL * sigma[0])
        .count();

    let r = match rule {
        RankRule::Fixed(r) => {
            if r == 0 {
                return Err(Error::EmptySnapshots("requested rank 0".into()));
            }
            if r > numerical_rank {
                log::warn!(
                    "requested rank {r} exceeds numerical snapshot rank {numerical_rank}; truncating"
                );
            }
            r.min(numerical_rank)
        }
        RankRule::EnergyThreshold(eps) => {
            if !(0.0 < eps && eps <= 1.0) {
                return Err(Error::BadConfig(format!(
                    "energy threshold must lie in (0, 1], got {eps}"
                )));
            }
            let weight = |s: f64| if energy_on_squares { s * s } else { s };
            let total: f64 = sigma.iter().map(|&s| weight(s)).sum();
            let mut acc = 0.0;
            let mut r = numerical_rank;
            for (i, &s) in sigma.iter().take(numerical_rank).enumerate() {
                acc += weight(s);
                if acc >= eps * total {
                    r = i + 1;
                    break;
                }
            }
            r
        }
        RankRule::FullRank => numerical_rank,
    };

    let mut phi = DMatrix::zeros(n, r);
    for (j, &i) in order.iter().take(r).enumerate() {
        let v = eig.eigenvectors.column(i).clone_owned();
        let col = snapshots * v / sigma[j];
        phi.set_column(j, &col);
    }
    modified_gram_schmidt(&mut phi);
    modified_gram_schmidt(&mut phi);

    Ok(PodBasis { phi, sigma })
}

fn modified_gram_schmidt(phi: &mut DMatrix<f64>) {
    for j in 0..phi.ncols() {
        for i in 0..j {
            let proj = phi.column(i).dot(&phi.column(j));
            let prev = phi.column(i).clone_owned();
            let mut col = phi.column_mut(j);
            col.axpy(-proj, &prev, 1.0);
        }
        let norm = phi.column(j).norm();
        if norm > 0.0 {
            phi.column_mut(j).scale_mut(1.0 / norm);
        }
    }
}
