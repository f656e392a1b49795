//! Granular-ball generation.
//!
//! A family of balls covers the training rows. Each ball is summarized by the
//! mean of its members (center), an enclosing or mean radius, its majority
//! label and the fraction of members carrying that label (purity).
//!
//! Generation starts from a single ball holding every row and splits balls in
//! two with a seeded 2-means until each one is pure enough. A ball is split
//! when
//!
//! * its purity is below the initial threshold `T0`, or
//! * the size-weighted purity of the tentative children strictly exceeds the
//!   parent's purity and both children have at least `min_split_size` rows.
//!
//! Balls with `min_split_size` rows or fewer, or whose members all coincide,
//! are leaves. Afterwards overlapping balls of different labels are re-split
//! (see [`DeOverlap`]).

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{Dataset, Label};
use crate::error::{Error, Result};

const LLOYD_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMode {
    /// Largest member distance to the center.
    Max,
    /// Mean member distance to the center.
    Mean,
}

/// Constraint enforced between balls of different labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeOverlap {
    /// `‖c_i − c_j‖ > |r_i − r_j|`
    Containment,
    /// `‖c_i − c_j‖ > r_i + r_j` (no overlap at all)
    Strict,
    Off,
}

impl DeOverlap {
    pub fn violated(self, dist: f64, ri: f64, rj: f64) -> bool {
        match self {
            DeOverlap::Containment => dist <= (ri - rj).abs(),
            DeOverlap::Strict => dist <= ri + rj,
            DeOverlap::Off => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Purity threshold `T0` in (0.5, 1].
    pub initial_purity: f64,
    pub radius_mode: RadiusMode,
    pub min_split_size: usize,
    pub de_overlap: DeOverlap,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            initial_purity: 1.0,
            radius_mode: RadiusMode::Max,
            min_split_size: 2,
            de_overlap: DeOverlap::Strict,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_purity > 0.5 && self.initial_purity <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "initial purity {} outside (0.5, 1]",
                self.initial_purity
            )));
        }
        if self.min_split_size < 2 {
            return Err(Error::InvalidConfig("min_split_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Positive,
    Boundary,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Positive => "positive",
            Region::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub purity: f64,
    pub label: Label,
    /// Row indices into the source dataset.
    pub members: Vec<usize>,
}

impl GranularBall {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn region(&self) -> Region {
        assign_region(self)
    }
}

/// Positive region iff every member carries the ball's label.
pub fn assign_region(gb: &GranularBall) -> Region {
    if gb.purity == 1.0 {
        Region::Positive
    } else {
        Region::Boundary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallStats {
    pub center: Vec<f64>,
    pub radius: f64,
    pub purity: f64,
    pub label: Label,
}

/// Center, radius, purity and majority label of a set of rows. A tie in the
/// label count goes to +1.
pub fn ball_stats(rows: &DMatrix<f64>, labels: &[Label], mode: RadiusMode) -> BallStats {
    let all: Vec<usize> = (0..rows.nrows()).collect();
    stats_of(rows, labels, &all, mode)
}

fn stats_of(x: &DMatrix<f64>, labels: &[Label], members: &[usize], mode: RadiusMode) -> BallStats {
    assert!(!members.is_empty(), "a ball needs at least one member");
    let d = x.ncols();
    let n = members.len() as f64;
    let mut center = vec![0.0; d];
    for &i in members {
        for (j, c) in center.iter_mut().enumerate() {
            *c += x[(i, j)];
        }
    }
    center.iter_mut().for_each(|c| *c /= n);

    let dists = members.iter().map(|&i| row_distance(x, i, &center));
    let radius = match mode {
        RadiusMode::Max => dists.fold(0.0, f64::max),
        RadiusMode::Mean => dists.sum::<f64>() / n,
    };

    let pos = members
        .iter()
        .filter(|&&i| labels[i] == Label::Positive)
        .count();
    let neg = members.len() - pos;
    let (label, majority) = if pos >= neg {
        (Label::Positive, pos)
    } else {
        (Label::Negative, neg)
    };
    BallStats {
        center,
        radius,
        purity: majority as f64 / n,
        label,
    }
}

fn purity_of(labels: &[Label], members: &[usize]) -> f64 {
    let pos = members
        .iter()
        .filter(|&&i| labels[i] == Label::Positive)
        .count();
    pos.max(members.len() - pos) as f64 / members.len() as f64
}

fn row_distance(x: &DMatrix<f64>, i: usize, p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(j, &v)| (x[(i, j)] - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn rows_distance(x: &DMatrix<f64>, i: usize, k: usize) -> f64 {
    (0..x.ncols())
        .map(|j| (x[(i, j)] - x[(k, j)]).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn make_ball(ds: &Dataset, members: Vec<usize>, mode: RadiusMode) -> GranularBall {
    let s = stats_of(ds.features(), ds.labels(), &members, mode);
    GranularBall {
        center: s.center,
        radius: s.radius,
        purity: s.purity,
        label: s.label,
        members,
    }
}

/// Farthest-pair seeds: a random member, the member farthest from it, and
/// the member farthest from that one. `None` when all members coincide.
fn farthest_pair<R: Rng>(
    x: &DMatrix<f64>,
    members: &[usize],
    rng: &mut R,
) -> Option<(usize, usize)> {
    let start = *members.choose(rng)?;
    let farthest = |from: usize| {
        members
            .iter()
            .copied()
            .map(|i| (i, rows_distance(x, from, i)))
            .fold(
                (from, 0.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    };
    let (b, _) = farthest(start);
    let (a, dist) = farthest(b);
    (dist > 0.0).then_some((a, b))
}

/// One member of each label, drawn by the seeded generator. `None` for pure
/// member sets or when the two draws coincide in feature space.
fn label_seeds<R: Rng>(
    x: &DMatrix<f64>,
    labels: &[Label],
    members: &[usize],
    rng: &mut R,
) -> Option<(usize, usize)> {
    let pos: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| labels[i] == Label::Positive)
        .collect();
    let neg: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| labels[i] == Label::Negative)
        .collect();
    let a = *pos.choose(rng)?;
    let b = *neg.choose(rng)?;
    (rows_distance(x, a, b) > 0.0).then_some((a, b))
}

fn lloyd(x: &DMatrix<f64>, members: &[usize], seeds: (usize, usize)) -> (Vec<usize>, Vec<usize>) {
    let d = x.ncols();
    let mut c0: Vec<f64> = (0..d).map(|j| x[(seeds.0, j)]).collect();
    let mut c1: Vec<f64> = (0..d).map(|j| x[(seeds.1, j)]).collect();
    // 0 = first centroid, 1 = second, 2 = not yet assigned
    let mut assign: Vec<u8> = vec![2; members.len()];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (slot, &i) in members.iter().enumerate() {
            let a = u8::from(row_distance(x, i, &c1) < row_distance(x, i, &c0));
            if a != assign[slot] {
                assign[slot] = a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut s0 = vec![0.0; d];
        let mut s1 = vec![0.0; d];
        let (mut n0, mut n1) = (0usize, 0usize);
        for (slot, &i) in members.iter().enumerate() {
            let (s, n) = if assign[slot] == 1 {
                (&mut s1, &mut n1)
            } else {
                (&mut s0, &mut n0)
            };
            for (j, v) in s.iter_mut().enumerate() {
                *v += x[(i, j)];
            }
            *n += 1;
        }
        if n0 == 0 || n1 == 0 {
            break;
        }
        c0 = s0.into_iter().map(|v| v / n0 as f64).collect();
        c1 = s1.into_iter().map(|v| v / n1 as f64).collect();
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (slot, &i) in members.iter().enumerate() {
        if assign[slot] == 1 {
            b.push(i);
        } else {
            a.push(i);
        }
    }
    (a, b)
}

/// Splits `members` into two non-empty groups with 2-means. Impure sets seed
/// one centroid per label; pure sets (and empty-child retries) use the
/// farthest pair. Returns `None` only when every member coincides.
fn two_means<R: Rng>(
    ds: &Dataset,
    members: &[usize],
    rng: &mut R,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if members.len() < 2 {
        return None;
    }
    let x = ds.features();
    if let Some(seeds) = label_seeds(x, ds.labels(), members, rng) {
        let (a, b) = lloyd(x, members, seeds);
        if !a.is_empty() && !b.is_empty() {
            return Some((a, b));
        }
    }
    let seeds = farthest_pair(x, members, rng)?;
    let (a, b) = lloyd(x, members, seeds);
    (!a.is_empty() && !b.is_empty()).then_some((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallFamily {
    pub balls: Vec<GranularBall>,
    pub config: GenerationConfig,
    /// Number of rows in the dataset the family was built from.
    pub source_n: usize,
}

impl BallFamily {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.balls.first().map_or(0, |b| b.center.len())
    }

    /// One zero-radius, pure ball per row. Training on this family is
    /// equivalent to training on the points themselves.
    pub fn singletons(ds: &Dataset) -> BallFamily {
        let balls = (0..ds.n_samples())
            .map(|i| GranularBall {
                center: ds.row(i),
                radius: 0.0,
                purity: 1.0,
                label: ds.labels()[i],
                members: vec![i],
            })
            .collect();
        BallFamily {
            balls,
            config: GenerationConfig::default(),
            source_n: ds.n_samples(),
        }
    }

    /// CSV rows `center...,radius,purity,label,size`, optionally followed by
    /// score columns `mu,nu,theta,score,region`.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        scores: Option<&[crate::pythagorean::PythagoreanScore]>,
    ) -> Result<()> {
        let io = |e| Error::io("<writer>", e);
        if let Some(s) = scores {
            if s.len() != self.len() {
                return Err(Error::ScoreMisalignment {
                    expected: self.len(),
                    got: s.len(),
                });
            }
        }
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("c{j}")).collect();
        header.extend(["radius", "purity", "label", "size"].map(String::from));
        if scores.is_some() {
            header.extend(["mu", "nu", "theta", "score", "region"].map(String::from));
        }
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for (i, b) in self.balls.iter().enumerate() {
            let mut cells: Vec<String> = b.center.iter().map(f64::to_string).collect();
            cells.push(b.radius.to_string());
            cells.push(b.purity.to_string());
            cells.push(b.label.to_string());
            cells.push(b.size().to_string());
            if let Some(s) = scores {
                let s = &s[i];
                cells.extend([
                    s.mu.to_string(),
                    s.nu.to_string(),
                    s.theta.to_string(),
                    s.score.to_string(),
                    s.region.to_string(),
                ]);
            }
            writeln!(w, "{}", cells.join(",")).map_err(io)?;
        }
        Ok(())
    }

    /// JSON sidecar describing how the family was generated.
    pub fn metadata_json(&self) -> String {
        let (pos, neg) = self.class_counts();
        let meta = serde_json::json!({
            "config": self.config,
            "source_n": self.source_n,
            "n_balls": self.len(),
            "n_positive_balls": pos,
            "n_negative_balls": neg,
            "dim": self.dim(),
        });
        serde_json::to_string_pretty(&meta).expect("plain JSON value")
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self
            .balls
            .iter()
            .filter(|b| b.label == Label::Positive)
            .count();
        (pos, self.len() - pos)
    }
}

pub fn generate_balls(ds: &Dataset, cfg: &GenerationConfig) -> Result<BallFamily> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let leaves = refine(ds, vec![(0..ds.n_samples()).collect()], cfg, &mut rng);
    let balls = de_overlap(ds, leaves, cfg, &mut rng);
    Ok(BallFamily {
        balls,
        config: *cfg,
        source_n: ds.n_samples(),
    })
}

/// Splits the given member sets breadth-first until every ball is a leaf.
fn refine<R: Rng>(
    ds: &Dataset,
    roots: Vec<Vec<usize>>,
    cfg: &GenerationConfig,
    rng: &mut R,
) -> Vec<GranularBall> {
    let labels = ds.labels();
    let mut queue: VecDeque<Vec<usize>> = roots.into();
    let mut leaves = Vec::new();

    while let Some(members) = queue.pop_front() {
        if members.len() <= cfg.min_split_size {
            leaves.push(make_ball(ds, members, cfg.radius_mode));
            continue;
        }
        let quality = purity_of(labels, &members);
        if quality == 1.0 {
            // children of a pure ball are pure, so neither split rule can fire
            leaves.push(make_ball(ds, members, cfg.radius_mode));
            continue;
        }
        let Some((a, b)) = two_means(ds, &members, rng) else {
            leaves.push(make_ball(ds, members, cfg.radius_mode));
            continue;
        };
        let split = if quality < cfg.initial_purity {
            true
        } else {
            let weighted = (a.len() as f64 * purity_of(labels, &a)
                + b.len() as f64 * purity_of(labels, &b))
                / members.len() as f64;
            weighted > quality && a.len() >= cfg.min_split_size && b.len() >= cfg.min_split_size
        };
        if split {
            queue.push_back(a);
            queue.push_back(b);
        } else {
            leaves.push(make_ball(ds, members, cfg.radius_mode));
        }
    }
    leaves
}

/// Re-splits the larger ball of every heterogeneous pair that violates the
/// active constraint until none remain, capped at `4 * m` passes for the
/// current ball count `m`.
fn de_overlap<R: Rng>(
    ds: &Dataset,
    mut balls: Vec<GranularBall>,
    cfg: &GenerationConfig,
    rng: &mut R,
) -> Vec<GranularBall> {
    if cfg.de_overlap == DeOverlap::Off {
        return balls;
    }
    // the cap tracks the current family size; every pass splits at least one
    // ball, so the loop also ends once all balls are singletons
    let mut pass = 0;
    while pass < 4 * balls.len() {
        pass += 1;
        let splittable: Vec<bool> = balls
            .iter()
            .map(|b| b.size() >= 2 && b.radius > 0.0)
            .collect();
        let mut marked = vec![false; balls.len()];
        let mut any = false;
        for i in 0..balls.len() {
            for j in (i + 1)..balls.len() {
                let (bi, bj) = (&balls[i], &balls[j]);
                if bi.label == bj.label {
                    continue;
                }
                let dist = euclidean(&bi.center, &bj.center);
                if !cfg.de_overlap.violated(dist, bi.radius, bj.radius) {
                    continue;
                }
                let (larger, smaller) = if (bj.radius, bj.size()) > (bi.radius, bi.size()) {
                    (j, i)
                } else {
                    (i, j)
                };
                let pick = if splittable[larger] {
                    Some(larger)
                } else if splittable[smaller] {
                    Some(smaller)
                } else {
                    None
                };
                if let Some(p) = pick {
                    marked[p] = true;
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        let mut next = Vec::with_capacity(balls.len() + marked.len());
        for (ball, split) in balls.into_iter().zip(marked) {
            if !split {
                next.push(ball);
                continue;
            }
            // children go back through the splitting rules so quality >= T0 still holds
            match two_means(ds, &ball.members, rng) {
                Some((a, b)) => next.extend(refine(ds, vec![a, b], cfg, rng)),
                None => next.push(ball),
            }
        }
        balls = next;
    }
    balls
}

/// Ball centers and radii grouped by label, in family order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    /// m+ x d
    pub centers_pos: DMatrix<f64>,
    pub radii_pos: DVector<f64>,
    /// m- x d
    pub centers_neg: DMatrix<f64>,
    pub radii_neg: DVector<f64>,
    /// Family index of each positive row.
    pub pos_index: Vec<usize>,
    pub neg_index: Vec<usize>,
}

pub fn split_by_class(fam: &BallFamily) -> Result<ClassSplit> {
    let (pos_index, neg_index): (Vec<usize>, Vec<usize>) =
        (0..fam.len()).partition(|&i| fam.balls[i].label == Label::Positive);
    if pos_index.is_empty() || neg_index.is_empty() {
        return Err(Error::SingleClassFamily);
    }
    let d = fam.dim();
    let centers =
        |idx: &[usize]| DMatrix::from_fn(idx.len(), d, |r, j| fam.balls[idx[r]].center[j]);
    let radii =
        |idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&i| fam.balls[i].radius));
    Ok(ClassSplit {
        centers_pos: centers(&pos_index),
        radii_pos: radii(&pos_index),
        centers_neg: centers(&neg_index),
        radii_neg: radii(&neg_index),
        pos_index,
        neg_index,
    })
}
