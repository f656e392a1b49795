//! Pythagorean fuzzy scores for granular balls.
//!
//! Each ball gets a membership `mu` from the distance of its center to its own
//! class center, a non-membership `nu` that grows with impurity, and a
//! closeness index `theta` to the ideal point (1, 0). Pure balls are scored by
//! `mu`, impure (boundary) balls by `theta`. The score caps the ball's dual
//! variable in the fuzzy twin SVM.

use crate::dataset_io::Label;
use crate::error::{Error, Result};
use crate::granular_ball::{assign_region, euclidean, BallFamily, GranularBall, Region};

/// Default `epsilon` in the membership denominator.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Lower clamp for the membership degree.
pub const MEMBERSHIP_FLOOR: f64 = 1e-6;

/// Class centers and radii computed over ball centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGeometry {
    pub center_pos: Vec<f64>,
    pub radius_pos: f64,
    pub center_neg: Vec<f64>,
    pub radius_neg: f64,
    pub epsilon: f64,
}

impl ClassGeometry {
    fn for_label(&self, label: Label) -> (&[f64], f64) {
        match label {
            Label::Positive => (&self.center_pos, self.radius_pos),
            Label::Negative => (&self.center_neg, self.radius_neg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PythagoreanScore {
    pub mu: f64,
    pub nu: f64,
    pub theta: f64,
    pub score: f64,
    pub region: Region,
}

fn mean_and_max_dist(centers: &[&[f64]]) -> (Vec<f64>, f64) {
    let d = centers[0].len();
    let mut mean = vec![0.0; d];
    for c in centers {
        for (m, v) in mean.iter_mut().zip(c.iter()) {
            *m += v;
        }
    }
    let k = centers.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    let r = centers
        .iter()
        .map(|c| euclidean(c, &mean))
        .fold(0.0, f64::max);
    (mean, r)
}

pub fn class_geometry(fam: &BallFamily, epsilon: f64) -> Result<ClassGeometry> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let centers = |label| -> Vec<&[f64]> {
        fam.balls
            .iter()
            .filter(|b| b.label == label)
            .map(|b| b.center.as_slice())
            .collect()
    };
    let pos = centers(Label::Positive);
    let neg = centers(Label::Negative);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClassFamily);
    }
    let (center_pos, radius_pos) = mean_and_max_dist(&pos);
    let (center_neg, radius_neg) = mean_and_max_dist(&neg);
    Ok(ClassGeometry {
        center_pos,
        radius_pos,
        center_neg,
        radius_neg,
        epsilon,
    })
}

/// `1 − ‖c − C^y‖ / (R^y + ε)` for the ball's own class `y`, clamped to
/// `[MEMBERSHIP_FLOOR, 1]`.
pub fn membership(gb: &GranularBall, geo: &ClassGeometry) -> f64 {
    let (center, radius) = geo.for_label(gb.label);
    let mu = 1.0 - euclidean(&gb.center, center) / (radius + geo.epsilon);
    mu.clamp(MEMBERSHIP_FLOOR, 1.0)
}

/// Ball membership as the mean of known per-sample memberships.
pub fn membership_from_samples(sample_memberships: &[f64]) -> Option<f64> {
    if sample_memberships.is_empty() {
        return None;
    }
    Some(sample_memberships.iter().sum::<f64>() / sample_memberships.len() as f64)
}

/// `ν = sqrt((1 − μ²)(1 − p))`
pub fn non_membership(mu: f64, purity: f64) -> f64 {
    ((1.0 - mu * mu) * (1.0 - purity)).max(0.0).sqrt()
}

/// `θ = sqrt((1 − ν²) / (2 − μ² − ν²))`
pub fn closeness(mu: f64, nu: f64) -> f64 {
    let (mu2, nu2) = (mu * mu, nu * nu);
    ((1.0 - nu2) / (2.0 - mu2 - nu2)).sqrt()
}

pub fn score_ball(gb: &GranularBall, geo: &ClassGeometry) -> PythagoreanScore {
    let mu = membership(gb, geo);
    let nu = non_membership(mu, gb.purity);
    let theta = closeness(mu, nu);
    let region = assign_region(gb);
    let score = match region {
        Region::Positive => mu,
        Region::Boundary => theta,
    };
    PythagoreanScore {
        mu,
        nu,
        theta,
        score,
        region,
    }
}

/// Scores aligned with `fam.balls`.
pub fn score_family(fam: &BallFamily, epsilon: f64) -> Result<Vec<PythagoreanScore>> {
    let geo = class_geometry(fam, epsilon)?;
    Ok(fam.balls.iter().map(|b| score_ball(b, &geo)).collect())
}
