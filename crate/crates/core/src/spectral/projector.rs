use alloc::vec::Vec;

use crate::exact::{ceil_of_difference, floor_of_sum};
use crate::lattice::{LatticePoint, SparseAnnulus};

/// Which eigenvalue window a projector keeps, with `λ_j = |j|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProjectorKind {
    /// `P_N`: `λ_j ≤ λ_N`.
    UpToCutoff,
    /// `Q_N`: `λ_j > λ_N`.
    AboveCutoff,
    /// `λ_j < λ_N - k`.
    BelowWindow,
    /// `λ_j > λ_N + k`.
    AboveWindow,
    /// `λ_N - k ≤ λ_j ≤ λ_N + k`.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeProjector {
    pub kind: ProjectorKind,
    pub lambda_n: f64,
    pub k: f64,
}

impl ModeProjector {
    pub fn new(kind: ProjectorKind, lambda_n: f64, k: f64) -> Self {
        Self { kind, lambda_n, k }
    }

    /// Inclusive integer bounds on `|j|²`; `None` means unbounded.
    pub fn eigenvalue_range(&self) -> (Option<i64>, Option<i64>) {
        let floor_l = floor_of_sum(self.lambda_n, 0.0).0;
        match self.kind {
            ProjectorKind::UpToCutoff => (None, Some(floor_l)),
            ProjectorKind::AboveCutoff => (Some(floor_l + 1), None),
            ProjectorKind::BelowWindow => (None, Some(ceil_of_difference(self.lambda_n, self.k).0 - 1)),
            ProjectorKind::AboveWindow => (Some(floor_of_sum(self.lambda_n, self.k).0 + 1), None),
            ProjectorKind::Window => {
                (Some(ceil_of_difference(self.lambda_n, self.k).0), Some(floor_of_sum(self.lambda_n, self.k).0))
            }
        }
    }

    pub fn keeps_eigenvalue(&self, n: i64) -> bool {
        let (lo, hi) = self.eigenvalue_range();
        lo.is_none_or(|l| n >= l) && hi.is_none_or(|h| n <= h)
    }

    pub fn keeps(&self, j: LatticePoint) -> bool {
        self.keeps_eigenvalue(j.norm_sq())
    }
}

/// A cutoff `λ_N < λ_{N+1}` and window half-width `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectorFamily {
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub k: f64,
}

impl ProjectorFamily {
    pub fn new(lambda_n: f64, lambda_n1: f64, k: f64) -> Self {
        Self { lambda_n, lambda_n1, k }
    }

    pub fn p_n(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::UpToCutoff, self.lambda_n, self.k)
    }

    pub fn q_n(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::AboveCutoff, self.lambda_n, self.k)
    }

    pub fn low(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::BelowWindow, self.lambda_n, self.k)
    }

    pub fn mid(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::Window, self.lambda_n, self.k)
    }

    pub fn high(&self) -> ModeProjector {
        ModeProjector::new(ProjectorKind::AboveWindow, self.lambda_n, self.k)
    }

    pub fn gap(&self) -> f64 {
        self.lambda_n1 - self.lambda_n
    }

    /// `(λ_{N+1}^β + λ_N^β) / 2`.
    pub fn alpha(&self, beta: f64) -> f64 {
        0.5 * (libm::pow(self.lambda_n1, beta) + libm::pow(self.lambda_n, beta))
    }

    /// Achieved constant `k / λ_N^s`.
    pub fn k_over_lambda_s(&self, s: f64) -> f64 {
        self.k / libm::pow(self.lambda_n, s)
    }

    /// Hypotheses of the cone lemma that this family violates.
    pub fn violated_hypotheses(&self, s: f64) -> Vec<Hypothesis> {
        let mut out = Vec::new();
        let gap = self.gap();
        if gap < 1.0 {
            out.push(Hypothesis::GapBelowOne { gap });
        }
        if gap > self.k / 2.0 {
            out.push(Hypothesis::GapExceedsHalfWindow { gap, half_k: self.k / 2.0 });
        }
        let pow = libm::pow(self.lambda_n, s);
        if self.k < pow {
            out.push(Hypothesis::WindowTooNarrow { k: self.k, lambda_n_pow_s: pow });
        }
        out
    }
}

/// A cone-lemma hypothesis that failed for a candidate cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "hypothesis", rename_all = "snake_case"))]
pub enum Hypothesis {
    /// `λ_{N+1} - λ_N ≥ 1` failed.
    GapBelowOne { gap: f64 },
    /// `λ_{N+1} - λ_N ≤ k/2` failed.
    GapExceedsHalfWindow { gap: f64, half_k: f64 },
    /// `k ≥ λ_N^s` failed.
    WindowTooNarrow { k: f64, lambda_n_pow_s: f64 },
    /// The eigenvalue list does not bracket the annulus center.
    EigenvaluesDoNotCover { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutoffRejection {
    /// The candidate that was tested, when one could be formed.
    pub candidate: Option<ProjectorFamily>,
    pub failed: Vec<Hypothesis>,
}

/// Picks `λ_N` as the largest eigenvalue not above the annulus center and
/// `k` as the annulus half-width, then checks the cone-lemma hypotheses.
///
/// `eigs` must be the distinct eigenvalues in ascending order.
pub fn choose_cutoff(eigs: &[u64], annulus: &SparseAnnulus) -> Result<ProjectorFamily, CutoffRejection> {
    let k = annulus.half_width;
    let split = eigs.partition_point(|&e| (e as f64) <= annulus.lambda);
    if split == 0 || split == eigs.len() {
        return Err(CutoffRejection {
            candidate: None,
            failed: alloc::vec![Hypothesis::EigenvaluesDoNotCover { lambda: annulus.lambda }],
        });
    }
    let family = ProjectorFamily::new(eigs[split - 1] as f64, eigs[split] as f64, k);
    let failed = family.violated_hypotheses(annulus.s);
    if failed.is_empty() {
        Ok(family)
    } else {
        Err(CutoffRejection { candidate: Some(family), failed })
    }
}
