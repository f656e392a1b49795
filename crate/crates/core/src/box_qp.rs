//! Box-constrained concave QP: maximize `qᵀα − ½ αᵀQα` subject to
//! `0 ≤ α ≤ upper`.
//!
//! The solver is a spectral projected gradient method (Barzilai–Borwein step
//! lengths with a Grippo–Lampariello–Lucidi nonmonotone line search). Because
//! the objective is quadratic, the line search works on exact values from one
//! Hessian-vector product per iteration. Once the projected-gradient residual
//! is below tolerance, or the budget runs out, a primal active-set pass
//! warm-started from the iterate solves the free coordinates exactly.
//!
//! Optimality is measured by the projected-gradient residual
//! `‖α − Π(α + (q − Qα))‖_∞`.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;

const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;
const GLL_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const GRADIENT_REFRESH: usize = 64;
const POLISH_MAX_FREE: usize = 1500;
const POLISH_MIN_WORK: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQp {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxQp {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let m = linear.len();
        if hessian.nrows() != m || hessian.ncols() != m || upper.len() != m {
            return Err(Error::InvalidProblem(format!(
                "dimensions: Q {}x{}, q {}, upper {}",
                hessian.nrows(),
                hessian.ncols(),
                m,
                upper.len()
            )));
        }
        if hessian.iter().chain(linear.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite entries".into()));
        }
        if let Some(u) = upper.iter().find(|u| !(**u > 0.0) || !u.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "upper bound {u} is not positive"
            )));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (hessian[(i, j)], hessian[(j, i)]);
                if (a - b).abs() > 1e-8 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidProblem(format!(
                        "Q not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(BoxQp {
            hessian,
            linear,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// `qᵀα − ½ αᵀQα`
    pub fn objective(&self, alpha: &DVector<f64>) -> f64 {
        self.linear.dot(alpha) - 0.5 * alpha.dot(&(&self.hessian * alpha))
    }

    pub fn kkt_residual(&self, alpha: &DVector<f64>) -> f64 {
        let ascent = &self.linear - &self.hessian * alpha;
        self.residual_from_ascent(alpha, &ascent)
    }

    fn residual_from_ascent(&self, alpha: &DVector<f64>, ascent: &DVector<f64>) -> f64 {
        (0..alpha.len())
            .map(|i| (alpha[i] - (alpha[i] + ascent[i]).clamp(0.0, self.upper[i])).abs())
            .fold(0.0, f64::max)
    }

    fn project(&self, v: &mut DVector<f64>) {
        for (x, &u) in v.iter_mut().zip(self.upper.iter()) {
            *x = x.clamp(0.0, u);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub alpha: DVector<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `10 m + 1000`.
    pub max_iter: Option<usize>,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: None,
            polish: true,
        }
    }
}

pub fn default_max_iter(m: usize) -> usize {
    10 * m + 1000
}

pub fn solve(qp: &BoxQp, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_with(
        qp,
        &SolverOptions {
            tol,
            max_iter: Some(max_iter),
            polish: true,
        },
    )
}

/// Runs the solver from α = 0. When the iteration budget runs out the best
/// iterate seen is returned with `converged = false`.
pub fn solve_with(qp: &BoxQp, opts: &SolverOptions) -> Result<QpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let m = qp.dim();
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(m));
    let q = &qp.hessian;

    // minimize g(α) = ½ αᵀQα − qᵀα; `grad` is ∇g
    let mut alpha = DVector::zeros(m);
    let mut grad = -qp.linear.clone();
    let mut g_val = 0.0;
    let mut history: VecDeque<f64> = VecDeque::from([g_val]);
    let mut best = (alpha.clone(), g_val);

    let mut lambda = {
        let mut probe = &alpha - &grad;
        qp.project(&mut probe);
        let step = (&probe - &alpha).amax();
        if step > 0.0 {
            (1.0 / step).clamp(LAMBDA_MIN, LAMBDA_MAX)
        } else {
            1.0
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut direction = DVector::zeros(m);
    while iterations <= max_iter {
        let neg = -&grad;
        let residual = qp.residual_from_ascent(&alpha, &neg);
        log::trace!(
            "iter={} objective={:.17e} kkt_residual={:.6e}",
            iterations,
            -g_val,
            residual
        );
        if residual <= opts.tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        iterations += 1;

        direction.copy_from(&alpha);
        direction.axpy(-lambda, &grad, 1.0);
        qp.project(&mut direction);
        direction -= &alpha;
        let qd = q * &direction;
        let gd = grad.dot(&direction);
        let dqd = direction.dot(&qd);
        if gd >= 0.0 {
            // no descent left at machine precision
            break;
        }

        let g_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let mut g_new = g_val + gd + 0.5 * dqd;
        while g_new > g_ref + ARMIJO * t * gd {
            let t_star = if dqd > 0.0 { -gd / dqd } else { 0.5 * t };
            t = t_star.clamp(0.1 * t, 0.5 * t);
            g_new = g_val + t * gd + 0.5 * t * t * dqd;
            if t < 1e-20 {
                break;
            }
        }

        alpha.axpy(t, &direction, 1.0);
        qp.project(&mut alpha);
        if iterations % GRADIENT_REFRESH == 0 {
            grad = q * &alpha - &qp.linear;
            g_val = 0.5 * alpha.dot(&(&grad - &qp.linear));
        } else {
            grad.axpy(t, &qd, 1.0);
            g_val = g_new;
        }

        let ss = t * t * direction.norm_squared();
        let sy = t * t * dqd;
        lambda = if sy > 0.0 {
            (ss / sy).clamp(LAMBDA_MIN, LAMBDA_MAX)
        } else {
            LAMBDA_MAX
        };

        history.push_back(g_val);
        if history.len() > GLL_MEMORY {
            history.pop_front();
        }
        if g_val < best.1 {
            best = (alpha.clone(), g_val);
        }
    }

    if !converged {
        log::debug!(
            "box QP stopped after {iterations} iterations without reaching tol {}",
            opts.tol
        );
        alpha = best.0;
    }
    let mut residual = qp.kkt_residual(&alpha);
    if opts.polish {
        // same order of work as the gradient phase, with a floor for small problems
        let budget = ((iterations.max(1) * m * m) as f64).max(POLISH_MIN_WORK);
        if let Some(p) = polish(qp, &alpha, budget) {
            let r = qp.kkt_residual(&p);
            if r <= residual
                && qp.objective(&p)
                    >= qp.objective(&alpha) - 1e-14 * (1.0 + qp.objective(&alpha).abs())
            {
                alpha = p;
                residual = r;
            }
        }
    }
    converged = converged || residual <= opts.tol;
    Ok(QpSolution {
        objective_value: qp.objective(&alpha),
        kkt_residual: residual,
        alpha,
        iterations,
        converged,
    })
}

/// Primal active-set refinement warm-started from `start`. The free block is
/// minimized through its eigendecomposition, so a singular reduced Hessian is
/// handled by stepping along a zero-curvature descent direction until a bound
/// blocks. Stops with the current iterate once the estimated flop count
/// exceeds `budget`. `None` when the free set grows past `POLISH_MAX_FREE`.
fn polish(qp: &BoxQp, start: &DVector<f64>, budget: f64) -> Option<DVector<f64>> {
    let m = qp.dim();
    let snap = |i: usize| 1e-10 * qp.upper[i].max(1.0);
    let mut alpha = start.clone();
    let mut free = vec![false; m];
    for i in 0..m {
        if alpha[i] <= snap(i) {
            alpha[i] = 0.0;
        } else if alpha[i] >= qp.upper[i] - snap(i) {
            alpha[i] = qp.upper[i];
        } else {
            free[i] = true;
        }
    }
    let q_scale = qp.hessian.amax().max(qp.linear.amax()).max(1.0);
    let mut stationary = false;
    let mut work = 0.0;
    for _ in 0..(2 * m + 20) {
        if work > budget {
            break;
        }
        let grad = &qp.hessian * &alpha - &qp.linear;
        let idx: Vec<usize> = (0..m).filter(|&i| free[i]).collect();
        if idx.len() > POLISH_MAX_FREE {
            return None;
        }
        let k = idx.len() as f64;
        work += (m * m) as f64 + if stationary { 0.0 } else { 10.0 * k * k * k };
        let step = if stationary {
            None
        } else {
            free_step(qp, &idx, &grad, q_scale)
        };
        stationary = false;
        match step {
            Some((dir, newton)) => {
                // ratio test against the box
                let mut tau = if newton { 1.0 } else { f64::INFINITY };
                let mut block = None;
                for (a, &i) in idx.iter().enumerate() {
                    let t = if dir[a] > 0.0 {
                        (qp.upper[i] - alpha[i]) / dir[a]
                    } else if dir[a] < 0.0 {
                        -alpha[i] / dir[a]
                    } else {
                        continue;
                    };
                    if t < tau {
                        tau = t;
                        block = Some(i);
                    }
                }
                if !tau.is_finite() {
                    return None;
                }
                for (a, &i) in idx.iter().enumerate() {
                    alpha[i] = (alpha[i] + tau * dir[a]).clamp(0.0, qp.upper[i]);
                }
                match block {
                    Some(i) => {
                        alpha[i] = if alpha[i] > 0.5 * qp.upper[i] {
                            qp.upper[i]
                        } else {
                            0.0
                        };
                        free[i] = false;
                    }
                    None => stationary = newton,
                }
            }
            None => {
                // free block optimal; release the bound with the worst multiplier
                let mut worst = (0.0, None);
                for i in (0..m).filter(|&i| !free[i]) {
                    let v = if alpha[i] == 0.0 { -grad[i] } else { grad[i] };
                    if v > worst.0 {
                        worst = (v, Some(i));
                    }
                }
                match worst.1 {
                    Some(i) if worst.0 > 1e-13 * q_scale => free[i] = true,
                    _ => return Some(alpha),
                }
            }
        }
    }
    Some(alpha)
}

/// Descent direction on the free coordinates, flagged `true` when it is the
/// full Newton step. `None` when the free block is already stationary.
fn free_step(
    qp: &BoxQp,
    idx: &[usize],
    grad: &DVector<f64>,
    q_scale: f64,
) -> Option<(DVector<f64>, bool)> {
    let k = idx.len();
    if k == 0 {
        return None;
    }
    let g = DVector::from_fn(k, |a, _| grad[idx[a]]);
    if g.amax() <= 1e-14 * q_scale {
        return None;
    }
    let qff = DMatrix::from_fn(k, k, |a, b| qp.hessian[(idx[a], idx[b])]);
    if let Some(chol) = Cholesky::new(qff.clone()) {
        let d = -chol.solve(&g);
        return (d.amax() > 1e-15 * q_scale).then_some((d, true));
    }
    let eig = qff.symmetric_eigen();
    let cut = eig.eigenvalues.amax() * 1e-12 * k as f64;
    let mut newton = DVector::zeros(k);
    let mut null = DVector::zeros(k);
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        let c = v.dot(&g);
        if lam > cut {
            newton.axpy(-c / lam, &v, 1.0);
        } else {
            null.axpy(-c, &v, 1.0);
        }
    }
    if null.amax() > 1e-12 * g.amax().max(1e-300) {
        Some((null, false))
    } else if newton.amax() > 1e-15 * q_scale {
        Some((newton, true))
    } else {
        None
    }
}

/// Appends a column of ones: `[X e]`.
pub fn augment(centers: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = centers.shape();
    DMatrix::from_fn(r, c + 1, |i, j| if j < c { centers[(i, j)] } else { 1.0 })
}

/// Dual of one twin-SVM subproblem together with the factorization needed to
/// map the dual solution back to a hyperplane.
///
/// With `E = [own e]` and `F = [other e]`, the Hessian is
/// `F (EᵀE + εI)⁻¹ Fᵀ` and the linear term is `e + r_other`.
#[derive(Debug, Clone)]
pub struct DualAssembly {
    pub qp: BoxQp,
    gram: Cholesky<f64, Dyn>,
    other_aug: DMatrix<f64>,
}

impl DualAssembly {
    pub fn new(
        own_centers: &DMatrix<f64>,
        other_centers: &DMatrix<f64>,
        other_radii: &DVector<f64>,
        reg_eps: f64,
        upper: DVector<f64>,
    ) -> Result<Self> {
        if own_centers.nrows() == 0 || other_centers.nrows() == 0 {
            return Err(Error::InvalidProblem(
                "both center matrices need at least one row".into(),
            ));
        }
        if own_centers.ncols() != other_centers.ncols() {
            return Err(Error::DimensionMismatch {
                expected: own_centers.ncols(),
                got: other_centers.ncols(),
            });
        }
        if other_radii.len() != other_centers.nrows() {
            return Err(Error::InvalidProblem(
                "one radius per opposite-class center".into(),
            ));
        }
        if !(reg_eps > 0.0) || !reg_eps.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "reg_eps must be positive, got {reg_eps}"
            )));
        }
        let e = augment(own_centers);
        let f = augment(other_centers);
        let mut gram = e.tr_mul(&e);
        for i in 0..gram.nrows() {
            gram[(i, i)] += reg_eps;
        }
        let gram = Cholesky::new(gram)
            .ok_or_else(|| Error::NumericalFailure("EᵀE + εI is not positive definite".into()))?;
        let x = gram.solve(&f.transpose());
        let mut hessian = &f * x;
        let m = hessian.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (hessian[(i, j)] + hessian[(j, i)]);
                hessian[(i, j)] = v;
                hessian[(j, i)] = v;
            }
        }
        let linear = other_radii.map(|r| 1.0 + r);
        Ok(DualAssembly {
            qp: BoxQp::new(hessian, linear, upper)?,
            gram,
            other_aug: f,
        })
    }

    /// `(EᵀE + εI)⁻¹ Fᵀ α`, the augmented normal `[w; b]` up to sign.
    pub fn recover(&self, alpha: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(&self.other_aug.tr_mul(alpha))
    }
}

pub fn assemble_dual(
    own_centers: &DMatrix<f64>,
    other_centers: &DMatrix<f64>,
    other_radii: &DVector<f64>,
    reg_eps: f64,
    upper: DVector<f64>,
) -> Result<BoxQp> {
    DualAssembly::new(own_centers, other_centers, other_radii, reg_eps, upper).map(|d| d.qp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(q: f64, lin: f64, up: f64) -> BoxQp {
        BoxQp::new(
            DMatrix::from_element(1, 1, q),
            DVector::from_element(1, lin),
            DVector::from_element(1, up),
        )
        .unwrap()
    }

    #[test]
    fn scalar_interior_optimum() {
        let s = solve(&scalar(1.0, 1.0, 2.0), 1e-10, 100).unwrap();
        assert!(s.converged);
        assert_relative_eq!(s.alpha[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(s.objective_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scalar_bound_active() {
        let s = solve(&scalar(1.0, 3.0, 2.0), 1e-10, 100).unwrap();
        assert_eq!(s.alpha[0], 2.0);
        assert_relative_eq!(s.objective_value, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_hessian_goes_to_upper_bounds() {
        let qp = BoxQp::new(
            DMatrix::zeros(3, 3),
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DVector::from_vec(vec![0.5, 1.0, 2.0]),
        )
        .unwrap();
        let s = solve(&qp, 1e-9, 100).unwrap();
        assert_eq!(s.alpha.as_slice(), &[0.5, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_problems() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        let ones = DVector::from_element(2, 1.0);
        assert!(BoxQp::new(asym, ones.clone(), ones.clone()).is_err());
        let zero_upper = DVector::from_vec(vec![1.0, 0.0]);
        assert!(BoxQp::new(DMatrix::identity(2, 2), ones.clone(), zero_upper).is_err());
        assert!(BoxQp::new(DMatrix::identity(3, 3), ones.clone(), ones.clone()).is_err());
        let qp = BoxQp::new(DMatrix::identity(2, 2), ones.clone(), ones).unwrap();
        assert!(solve(&qp, 0.0, 10).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_reports_unconverged() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let qp = BoxQp::new(
            h,
            DVector::from_element(3, 1.0),
            DVector::from_element(3, 10.0),
        )
        .unwrap();
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: Some(1),
            polish: false,
        };
        let s = solve_with(&qp, &opts).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 1);
        assert!(s.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
        assert!(s.objective_value >= 0.0);
    }

    #[test]
    fn dual_assembly_matches_dense_formula() {
        // single ball at the origin on each side, as a 2x2 system with bias
        let own = DMatrix::from_row_slice(1, 1, &[0.0]);
        let other = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let radii = DVector::from_vec(vec![0.0, 0.5]);
        let eps = 0.1;
        let qp = assemble_dual(&own, &other, &radii, eps, DVector::from_element(2, 1.0)).unwrap();
        // EᵀE + εI = [[0.1, 0], [0, 1.1]] -> inverse diag(10, 1/1.1)
        // Q_ij = 10 x_i x_j + 1/1.1
        let k = 1.0 / 1.1;
        let expected = [[10.0 + k, 20.0 + k], [20.0 + k, 40.0 + k]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(qp.hessian()[(i, j)], expected[i][j], max_relative = 1e-12);
            }
        }
        assert_eq!(qp.linear().as_slice(), &[1.0, 1.5]);
    }

    #[test]
    fn zero_radii_give_all_ones_linear_term() {
        let own = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let other = DMatrix::from_row_slice(3, 2, &[3.0, 3.0, 4.0, 3.0, 3.0, 4.0]);
        let qp = assemble_dual(
            &own,
            &other,
            &DVector::zeros(3),
            1e-4,
            DVector::from_element(3, 1.0),
        )
        .unwrap();
        assert_eq!(qp.linear().as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn large_regularization_flattens_hessian() {
        let own = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let other = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let upper = DVector::from_element(2, 2.0);
        let qp = assemble_dual(&own, &other, &DVector::zeros(2), 1e8, upper).unwrap();
        assert!(qp.hessian().amax() < 1e-6);
        let s = solve(&qp, 1e-9, 1000).unwrap();
        // with Q ~ 0 the ascent direction q = e pushes both coordinates to the cap
        assert_eq!(s.alpha.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn recover_solves_normal_equations() {
        let own = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let other = DMatrix::from_row_slice(2, 2, &[3.0, 3.0, 4.0, 2.0]);
        let d = DualAssembly::new(
            &own,
            &other,
            &DVector::zeros(2),
            1e-3,
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let alpha = DVector::from_vec(vec![0.3, 0.7]);
        let u = d.recover(&alpha);
        let e = augment(&own);
        let f = augment(&other);
        let mut gram = e.tr_mul(&e);
        for i in 0..3 {
            gram[(i, i)] += 1e-3;
        }
        let lhs = gram * &u;
        let rhs = f.tr_mul(&alpha);
        for i in 0..3 {
            assert_relative_eq!(lhs[i], rhs[i], epsilon = 1e-10);
        }
    }
}
