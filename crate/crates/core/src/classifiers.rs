//! Linear twin SVMs: the point-based TWSVM baseline, GBTWSVM on granular
//! balls, and GBFTSVM with per-ball score-weighted penalties.
//!
//! All three share one dual form. For the plane near the positive class,
//! `E = [A e]` holds the own-class rows and `F = [B e]` the opposite class;
//! the dual is maximized over `0 ≤ α ≤ upper` and the plane is recovered as
//! `[w1; b1] = −(EᵀE + εI)⁻¹ Fᵀ α`. The negative-class plane swaps roles and
//! flips the sign: `[w2; b2] = (BᵀB + εI)⁻¹ Aᵀ γ` with `B`, `A` augmented.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::box_qp::{DualAssembly, QpSolution, SolverOptions, DEFAULT_TOL};
use crate::dataset_io::{Dataset, Label, MinMaxScaler};
use crate::error::{Error, Result};
use crate::granular_ball::{assign_region, split_by_class, BallFamily};
use crate::pythagorean::PythagoreanScore;

pub const DEFAULT_REG_EPS: f64 = 1e-4;
const MODEL_HEADER: &str = "gbtsvm-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Twsvm,
    Gbtwsvm,
    Gbftsvm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Twsvm, Method::Gbtwsvm, Method::Gbftsvm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Twsvm => "twsvm",
            Method::Gbtwsvm => "gbtwsvm",
            Method::Gbftsvm => "gbftsvm",
        }
    }

    pub fn uses_balls(self) -> bool {
        self != Method::Twsvm
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twsvm" => Ok(Method::Twsvm),
            "gbtwsvm" => Ok(Method::Gbtwsvm),
            "gbftsvm" => Ok(Method::Gbftsvm),
            _ => Err(Error::InvalidConfig(format!("unknown method {s:?}"))),
        }
    }
}

/// Penalties and solver settings. `c1`/`c2` bound the duals of TWSVM and
/// GBTWSVM; GBFTSVM uses `c3`/`c4` scaled by the ball scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub reg_eps: f64,
    pub qp_tol: f64,
    /// `None` uses the solver default `10 m + 1000`.
    pub qp_max_iter: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            reg_eps: DEFAULT_REG_EPS,
            qp_tol: DEFAULT_TOL,
            qp_max_iter: None,
        }
    }
}

impl TrainConfig {
    /// Sets `c1 = c3 = first` and `c2 = c4 = second`.
    pub fn with_penalties(mut self, first: f64, second: f64) -> Self {
        self.c1 = first;
        self.c3 = first;
        self.c2 = second;
        self.c4 = second;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("reg_eps", self.reg_eps),
            ("qp_tol", self.qp_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.qp_tol,
            max_iter: self.qp_max_iter,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinModel {
    pub w1: Vec<f64>,
    pub b1: f64,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub trained_by: Method,
    pub config: TrainConfig,
    /// Both dual solves reached tolerance.
    pub converged: bool,
    /// Applied to inputs before the planes are evaluated.
    pub scaler: Option<MinMaxScaler>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TwinModel {
    pub fn dim(&self) -> usize {
        self.w1.len()
    }

    pub fn with_scaler(mut self, scaler: MinMaxScaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    fn check_planes(&self) -> Result<(f64, f64)> {
        let (n1, n2) = (norm(&self.w1), norm(&self.w2));
        if !(n1 > 0.0) || !n1.is_finite() {
            return Err(Error::DegenerateModel { plane: 1 });
        }
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::DegenerateModel { plane: 2 });
        }
        Ok((n1, n2))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Normalized distances `|w_t·x + b_t| / ‖w_t‖` to both planes.
    pub fn distances(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x.len())?;
        let (n1, n2) = self.check_planes()?;
        Ok(self.distances_unchecked(x, n1, n2))
    }

    fn distances_unchecked(&self, x: &[f64], n1: f64, n2: f64) -> (f64, f64) {
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                let mut row = x.to_vec();
                s.transform_row(&mut row);
                scaled = row;
                &scaled[..]
            }
            None => x,
        };
        (
            (dot(&self.w1, x) + self.b1).abs() / n1,
            (dot(&self.w2, x) + self.b2).abs() / n2,
        )
    }

    /// Serializes the model in the versioned text format. Floats carry 17
    /// significant digits so that parsing restores them bit for bit.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let vec = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "method {}", self.trained_by)?;
        writeln!(w, "dim {}", self.dim())?;
        let c = &self.config;
        writeln!(w, "c1 {}", fmt_f64(c.c1))?;
        writeln!(w, "c2 {}", fmt_f64(c.c2))?;
        writeln!(w, "c3 {}", fmt_f64(c.c3))?;
        writeln!(w, "c4 {}", fmt_f64(c.c4))?;
        writeln!(w, "reg_eps {}", fmt_f64(c.reg_eps))?;
        writeln!(w, "qp_tol {}", fmt_f64(c.qp_tol))?;
        match c.qp_max_iter {
            Some(n) => writeln!(w, "qp_max_iter {n}")?,
            None => writeln!(w, "qp_max_iter auto")?,
        }
        writeln!(w, "converged {}", self.converged)?;
        writeln!(w, "w1 {}", vec(&self.w1))?;
        writeln!(w, "b1 {}", fmt_f64(self.b1))?;
        writeln!(w, "w2 {}", vec(&self.w2))?;
        writeln!(w, "b2 {}", fmt_f64(self.b2))?;
        if let Some(s) = &self.scaler {
            writeln!(w, "scale_min {}", vec(&s.min))?;
            writeln!(w, "scale_max {}", vec(&s.max))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is ASCII")
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<TwinModel> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::ModelFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }
        let bad = |line: usize, message: String| Error::ModelFormat { line, message };
        let mut it = lines.iter();
        match it.next() {
            Some((_, h)) if h.trim() == MODEL_HEADER => {}
            Some((n, h)) => {
                return Err(bad(
                    *n,
                    format!("expected header {MODEL_HEADER:?}, found {h:?}"),
                ))
            }
            None => return Err(bad(1, "empty model file".into())),
        }

        let mut fields = std::collections::BTreeMap::new();
        for (n, line) in it {
            let (key, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            if fields
                .insert(key.to_string(), (*n, rest.trim().to_string()))
                .is_some()
            {
                return Err(bad(*n, format!("duplicate key {key:?}")));
            }
        }
        let get = |key: &str| -> Result<(usize, &str)> {
            fields
                .get(key)
                .map(|(n, v)| (*n, v.as_str()))
                .ok_or_else(|| bad(0, format!("missing key {key:?}")))
        };
        let scalar = |key: &str| -> Result<f64> {
            let (n, v) = get(key)?;
            v.parse::<f64>().map_err(|e| bad(n, format!("{key}: {e}")))
        };
        let vector = |key: &str, dim: usize| -> Result<Vec<f64>> {
            let (n, v) = get(key)?;
            let out = v
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| bad(n, format!("{key}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if out.len() != dim {
                return Err(bad(
                    n,
                    format!("{key}: expected {dim} values, found {}", out.len()),
                ));
            }
            Ok(out)
        };

        let (n, m) = get("method")?;
        let trained_by = m.parse::<Method>().map_err(|e| bad(n, e.to_string()))?;
        let (n, d) = get("dim")?;
        let dim: usize = d.parse().map_err(|e| bad(n, format!("dim: {e}")))?;
        let (n, mi) = get("qp_max_iter")?;
        let qp_max_iter = match mi {
            "auto" => None,
            v => Some(v.parse().map_err(|e| bad(n, format!("qp_max_iter: {e}")))?),
        };
        let (n, cv) = get("converged")?;
        let converged = cv.parse().map_err(|e| bad(n, format!("converged: {e}")))?;
        let scaler = match (
            fields.contains_key("scale_min"),
            fields.contains_key("scale_max"),
        ) {
            (false, false) => None,
            (true, true) => Some(MinMaxScaler {
                min: vector("scale_min", dim)?,
                max: vector("scale_max", dim)?,
            }),
            _ => {
                return Err(bad(
                    0,
                    "scale_min and scale_max must appear together".into(),
                ))
            }
        };
        Ok(TwinModel {
            w1: vector("w1", dim)?,
            b1: scalar("b1")?,
            w2: vector("w2", dim)?,
            b2: scalar("b2")?,
            trained_by,
            config: TrainConfig {
                c1: scalar("c1")?,
                c2: scalar("c2")?,
                c3: scalar("c3")?,
                c4: scalar("c4")?,
                reg_eps: scalar("reg_eps")?,
                qp_tol: scalar("qp_tol")?,
                qp_max_iter,
            },
            converged,
            scaler,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<TwinModel> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        TwinModel::parse(std::io::BufReader::new(f))
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The two dual problems of one training run, before solving.
#[derive(Debug, Clone)]
pub struct TwinDuals {
    /// Plane near the positive class; one coordinate per negative-class row.
    pub first: DualAssembly,
    /// Plane near the negative class; one coordinate per positive-class row.
    pub second: DualAssembly,
    /// Negative-class rows kept in `first` (rows with a zero bound are dropped).
    pub first_rows: Vec<usize>,
    /// Positive-class rows kept in `second`.
    pub second_rows: Vec<usize>,
}

/// Solved duals together with the resulting model.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: TwinModel,
    pub first: QpSolution,
    pub second: QpSolution,
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Builds both duals. Coordinates whose upper bound is exactly zero are
/// removed, which is the same as pinning them at zero.
pub fn assemble_twin_duals(
    pos: &DMatrix<f64>,
    pos_radii: &DVector<f64>,
    neg: &DMatrix<f64>,
    neg_radii: &DVector<f64>,
    upper_first: &DVector<f64>,
    upper_second: &DVector<f64>,
    reg_eps: f64,
) -> Result<TwinDuals> {
    let keep = |u: &DVector<f64>| -> Result<Vec<usize>> {
        if let Some(bad) = u.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dual upper bound {bad} is negative or not finite"
            )));
        }
        Ok((0..u.len()).filter(|&i| u[i] > 0.0).collect())
    };
    let first_rows = keep(upper_first)?;
    let second_rows = keep(upper_second)?;
    if first_rows.is_empty() {
        return Err(Error::DegenerateModel { plane: 1 });
    }
    if second_rows.is_empty() {
        return Err(Error::DegenerateModel { plane: 2 });
    }
    let sub = |v: &DVector<f64>, rows: &[usize]| {
        DVector::from_iterator(rows.len(), rows.iter().map(|&i| v[i]))
    };
    let (neg_k, pos_k);
    let (neg_used, pos_used) =
        if first_rows.len() == neg.nrows() && second_rows.len() == pos.nrows() {
            (neg, pos)
        } else {
            neg_k = select_rows(neg, &first_rows);
            pos_k = select_rows(pos, &second_rows);
            (&neg_k, &pos_k)
        };
    let first = DualAssembly::new(
        pos,
        neg_used,
        &sub(neg_radii, &first_rows),
        reg_eps,
        sub(upper_first, &first_rows),
    )?;
    let second = DualAssembly::new(
        neg,
        pos_used,
        &sub(pos_radii, &second_rows),
        reg_eps,
        sub(upper_second, &second_rows),
    )?;
    Ok(TwinDuals {
        first,
        second,
        first_rows,
        second_rows,
    })
}

/// Solves both duals (concurrently) and recovers the planes.
pub fn solve_twin_duals(
    duals: &TwinDuals,
    method: Method,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let opts = cfg.solver_options();
    let (first, second) = rayon::join(
        || crate::box_qp::solve_with(&duals.first.qp, &opts),
        || crate::box_qp::solve_with(&duals.second.qp, &opts),
    );
    let (first, second) = (first?, second?);
    for (plane, s) in [(1, &first), (2, &second)] {
        if !s.converged {
            log::warn!(
                "dual {plane} stopped at kkt_residual {:.3e} after {} iterations; using best iterate",
                s.kkt_residual,
                s.iterations
            );
        }
    }
    let u = -duals.first.recover(&first.alpha);
    let v = duals.second.recover(&second.alpha);
    let d = u.len() - 1;
    let model = TwinModel {
        w1: u.rows(0, d).iter().copied().collect(),
        b1: u[d],
        w2: v.rows(0, d).iter().copied().collect(),
        b2: v[d],
        trained_by: method,
        config: *cfg,
        converged: first.converged && second.converged,
        scaler: None,
    };
    model.check_planes()?;
    Ok(TrainReport {
        model,
        first,
        second,
    })
}

fn rows_of(ds: &Dataset, label: Label) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..ds.n_samples())
        .filter(|&i| ds.labels()[i] == label)
        .collect();
    select_rows(ds.features(), &idx)
}

pub fn twsvm_duals(ds: &Dataset, cfg: &TrainConfig) -> Result<TwinDuals> {
    cfg.validate()?;
    if !ds.has_both_classes() {
        return Err(Error::SingleClassDataset);
    }
    let a = rows_of(ds, Label::Positive);
    let b = rows_of(ds, Label::Negative);
    assemble_twin_duals(
        &a,
        &DVector::zeros(a.nrows()),
        &b,
        &DVector::zeros(b.nrows()),
        &DVector::from_element(b.nrows(), cfg.c1),
        &DVector::from_element(a.nrows(), cfg.c2),
        cfg.reg_eps,
    )
}

pub fn gbtwsvm_duals(fam: &BallFamily, cfg: &TrainConfig) -> Result<TwinDuals> {
    cfg.validate()?;
    let s = split_by_class(fam)?;
    assemble_twin_duals(
        &s.centers_pos,
        &s.radii_pos,
        &s.centers_neg,
        &s.radii_neg,
        &DVector::from_element(s.neg_index.len(), cfg.c1),
        &DVector::from_element(s.pos_index.len(), cfg.c2),
        cfg.reg_eps,
    )
}

pub fn gbftsvm_duals(
    fam: &BallFamily,
    scores: &[PythagoreanScore],
    cfg: &TrainConfig,
) -> Result<TwinDuals> {
    cfg.validate()?;
    if scores.len() != fam.len() {
        return Err(Error::ScoreMisalignment {
            expected: fam.len(),
            got: scores.len(),
        });
    }
    for (i, (b, s)) in fam.balls.iter().zip(scores).enumerate() {
        if s.region != assign_region(b) {
            return Err(Error::InvalidConfig(format!(
                "score {i} is for a {} ball but ball {i} is in the {} region",
                s.region,
                assign_region(b)
            )));
        }
        if !(0.0..=1.0).contains(&s.score) {
            return Err(Error::InvalidConfig(format!(
                "score {i} = {} outside [0, 1]",
                s.score
            )));
        }
    }
    let s = split_by_class(fam)?;
    let caps = |idx: &[usize], c: f64| {
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| c * scores[i].score))
    };
    assemble_twin_duals(
        &s.centers_pos,
        &s.radii_pos,
        &s.centers_neg,
        &s.radii_neg,
        &caps(&s.neg_index, cfg.c3),
        &caps(&s.pos_index, cfg.c4),
        cfg.reg_eps,
    )
}

pub fn train_twsvm(ds: &Dataset, cfg: &TrainConfig) -> Result<TwinModel> {
    solve_twin_duals(&twsvm_duals(ds, cfg)?, Method::Twsvm, cfg).map(|r| r.model)
}

pub fn train_gbtwsvm(fam: &BallFamily, cfg: &TrainConfig) -> Result<TwinModel> {
    solve_twin_duals(&gbtwsvm_duals(fam, cfg)?, Method::Gbtwsvm, cfg).map(|r| r.model)
}

pub fn train_gbftsvm(
    fam: &BallFamily,
    scores: &[PythagoreanScore],
    cfg: &TrainConfig,
) -> Result<TwinModel> {
    solve_twin_duals(&gbftsvm_duals(fam, scores, cfg)?, Method::Gbftsvm, cfg).map(|r| r.model)
}

/// `+1` when the point is strictly closer to the first plane or equidistant.
pub fn predict(model: &TwinModel, x: &[f64]) -> Result<Label> {
    let (d1, d2) = model.distances(x)?;
    Ok(if d1 <= d2 {
        Label::Positive
    } else {
        Label::Negative
    })
}

pub fn predict_batch(model: &TwinModel, xs: &DMatrix<f64>) -> Result<Vec<Label>> {
    if xs.nrows() == 0 {
        return Ok(Vec::new());
    }
    model.check_dim(xs.ncols())?;
    let (n1, n2) = model.check_planes()?;
    let mut row = vec![0.0; xs.ncols()];
    Ok((0..xs.nrows())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = xs[(i, j)];
            }
            let (d1, d2) = model.distances_unchecked(&row, n1, n2);
            if d1 <= d2 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect())
}
