//! The log-periodic power law
//!
//! ```text
//! R(t) = A + B·τ^m + C·τ^m·cos(ω·ln τ + φ),   τ = t_c − t
//! ```
//!
//! with the linear amplitudes (A, B, C) slaved to the nonlinear quadruple
//! (t_c, m, ω, φ) by an exact least-squares solve at every evaluation.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::SearchBounds;
use crate::timeseries::TimeSeries;

/// Normal-equation condition numbers above this are treated as singular.
pub const CONDITION_THRESHOLD: f64 = 1e12;

/// Relative finite-difference step for the residual Jacobian.
pub const JACOBIAN_REL_STEP: f64 = 1e-6;

/// Absolute floor on finite-difference steps.
pub const JACOBIAN_MIN_STEP: f64 = 1e-8;

pub const PARAM_NAMES: [&str; 4] = ["tc", "m", "omega", "phi"];

/// How the log-periodic argument is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillationForm {
    /// `cos(ω·ln τ + φ)`
    #[default]
    Standard,
    /// `cos(ln(ω·τ) + φ)`, the argument exactly as typeset in some sources.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearParams {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
}

impl NonlinearParams {
    pub fn new(tc: f64, m: f64, omega: f64, phi: f64) -> Self {
        Self { tc, m, omega, phi }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.tc, self.m, self.omega, self.phi]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl LinearParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }
}

/// Result of eliminating the linear amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slaved {
    pub lin: LinearParams,
    /// Condition estimate of the 3x3 normal-equation matrix.
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Model {
    pub form: OscillationForm,
}

impl Model {
    pub fn new(form: OscillationForm) -> Self {
        Self { form }
    }

    fn phase(&self, nl: &NonlinearParams, tau: f64) -> f64 {
        match self.form {
            OscillationForm::Standard => nl.omega * tau.ln() + nl.phi,
            OscillationForm::Literal => (nl.omega * tau).ln() + nl.phi,
        }
    }

    /// Basis functions `[1, τ^m, τ^m·cos(..)]` at time `t`.
    pub fn basis(&self, nl: &NonlinearParams, t: f64) -> Result<[f64; 3]> {
        let tau = nl.tc - t;
        if !(tau > 0.0) {
            return Err(Error::Domain { t, tc: nl.tc });
        }
        let power = tau.powf(nl.m);
        Ok([1.0, power, power * self.phase(nl, tau).cos()])
    }

    pub fn value(&self, nl: &NonlinearParams, lin: &LinearParams, t: f64) -> Result<f64> {
        let [_, p, q] = self.basis(nl, t)?;
        Ok(lin.a + lin.b * p + lin.c * q)
    }

    /// Least-squares (A, B, C) for fixed nonlinear parameters.
    pub fn slave_linear(&self, nl: &NonlinearParams, data: &TimeSeries) -> Result<Slaved> {
        let n = data.len();
        if n < 3 {
            return Err(Error::InsufficientData { needed: 3, got: n });
        }
        let mut cols = [vec![1.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, &t) in data.times().iter().enumerate() {
            let [_, p, q] = self.basis(nl, t)?;
            cols[1][i] = p;
            cols[2][i] = q;
        }
        let mut rhs = data.values().to_vec();
        let (coef, condition) = pivoted_qr_solve(cols, &mut rhs)?;
        Ok(Slaved {
            lin: LinearParams::new(coef[0], coef[1], coef[2]),
            condition,
        })
    }

    /// `data_i − R(t_i)` for given amplitudes.
    pub fn residuals_with(
        &self,
        nl: &NonlinearParams,
        lin: &LinearParams,
        data: &TimeSeries,
    ) -> Result<Vec<f64>> {
        data.iter()
            .map(|(t, y)| self.value(nl, lin, t).map(|v| y - v))
            .collect()
    }

    /// Residual vector with the amplitudes slaved at `nl`.
    pub fn residuals(&self, nl: &NonlinearParams, data: &TimeSeries) -> Result<(Vec<f64>, LinearParams)> {
        let lin = self.slave_linear(nl, data)?.lin;
        Ok((self.residuals_with(nl, &lin, data)?, lin))
    }

    /// Sum of squared residuals after slaving.
    pub fn objective(&self, nl: &NonlinearParams, data: &TimeSeries) -> Result<f64> {
        let (r, _) = self.residuals(nl, data)?;
        Ok(r.iter().map(|x| x * x).sum())
    }

    /// Central finite-difference Jacobian of the slaved residuals with respect
    /// to `(tc, m, omega, phi)`, one row per observation.
    pub fn residual_jacobian(
        &self,
        nl: &NonlinearParams,
        data: &TimeSeries,
        bounds: &SearchBounds,
    ) -> Result<DMatrix<f64>> {
        self.residual_jacobian_with_step(nl, data, bounds, JACOBIAN_REL_STEP)
    }

    pub fn residual_jacobian_with_step(
        &self,
        nl: &NonlinearParams,
        data: &TimeSeries,
        bounds: &SearchBounds,
        rel_step: f64,
    ) -> Result<DMatrix<f64>> {
        let n = data.len();
        let base = nl.to_array();
        let t_last = data.last_time();
        let mut jac = DMatrix::zeros(n, 4);
        let mut center: Option<Vec<f64>> = None;

        let eval = |p: [f64; 4]| -> Option<Vec<f64>> {
            let q = NonlinearParams::from_array(p);
            if !bounds.contains(&q) {
                return None;
            }
            self.residuals(&q, data).ok().map(|(r, _)| r)
        };

        for j in 0..4 {
            // tc is measured from the last observation, not from year zero.
            let magnitude = if j == 0 { base[0] - t_last } else { base[j] };
            let h = (rel_step * magnitude.abs()).max(JACOBIAN_MIN_STEP);
            let mut plus = base;
            plus[j] += h;
            let mut minus = base;
            minus[j] -= h;
            let (column, width): (Vec<f64>, f64) = match (eval(plus), eval(minus)) {
                (Some(rp), Some(rm)) => (
                    rp.iter().zip(&rm).map(|(a, b)| a - b).collect(),
                    2.0 * h,
                ),
                (Some(rp), None) => {
                    let r0 = center.get_or_insert_with(|| self.residuals(nl, data).map(|x| x.0).unwrap_or_default());
                    if r0.len() != n {
                        return Err(Error::Jacobian { parameter: PARAM_NAMES[j] });
                    }
                    (rp.iter().zip(r0.iter()).map(|(a, b)| a - b).collect(), h)
                }
                (None, Some(rm)) => {
                    let r0 = center.get_or_insert_with(|| self.residuals(nl, data).map(|x| x.0).unwrap_or_default());
                    if r0.len() != n {
                        return Err(Error::Jacobian { parameter: PARAM_NAMES[j] });
                    }
                    (r0.iter().zip(&rm).map(|(a, b)| a - b).collect(), h)
                }
                (None, None) => return Err(Error::Jacobian { parameter: PARAM_NAMES[j] }),
            };
            for (i, d) in column.into_iter().enumerate() {
                jac[(i, j)] = d / width;
            }
        }
        Ok(jac)
    }
}

/// Householder QR with column pivoting on an n×3 design, solving the
/// least-squares system in place. Returns the coefficients and the condition
/// estimate of the normal equations, `(σ_max / σ_min)²` of R.
fn pivoted_qr_solve(mut cols: [Vec<f64>; 3], rhs: &mut [f64]) -> Result<([f64; 3], f64)> {
    let n = rhs.len();
    let mut perm = [0usize, 1, 2];

    for k in 0..3 {
        let tail_norm2 = |c: &Vec<f64>| c[k..].iter().map(|x| x * x).sum::<f64>();
        let pivot = (k..3)
            .max_by(|&a, &b| tail_norm2(&cols[a]).total_cmp(&tail_norm2(&cols[b])))
            .unwrap_or(k);
        cols.swap(k, pivot);
        perm.swap(k, pivot);

        let norm = tail_norm2(&cols[k]).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateBasis {
                condition: f64::INFINITY,
            });
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let beta: f64 = v.iter().map(|x| x * x).sum();
        if beta > 0.0 {
            let reflect = |target: &mut [f64]| {
                let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
                let s = 2.0 * dot / beta;
                for (t, vi) in target.iter_mut().zip(&v) {
                    *t -= s * vi;
                }
            };
            for col in cols.iter_mut().skip(k + 1) {
                reflect(&mut col[k..]);
            }
            reflect(&mut rhs[k..n]);
        }
        cols[k][k] = alpha;
        for x in cols[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
    }

    let r = Matrix3::from_fn(|i, j| if i <= j { cols[j][i] } else { 0.0 });
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(condition <= CONDITION_THRESHOLD) {
        return Err(Error::DegenerateBasis { condition });
    }

    let mut z = [0.0; 3];
    for i in (0..3).rev() {
        let mut acc = rhs[i];
        for (j, zj) in z.iter().enumerate().skip(i + 1) {
            acc -= r[(i, j)] * zj;
        }
        z[i] = acc / r[(i, i)];
    }
    let mut coef = [0.0; 3];
    for (k, &p) in perm.iter().enumerate() {
        coef[p] = z[k];
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateBasis { condition });
    }
    Ok((coef, condition))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t0: f64, dt: f64) -> Vec<f64> {
        (0..n).map(|i| t0 + i as f64 * dt).collect()
    }

    fn synth(model: &Model, nl: &NonlinearParams, lin: &LinearParams, times: Vec<f64>) -> TimeSeries {
        let values = times.iter().map(|&t| model.value(nl, lin, t).unwrap()).collect();
        TimeSeries::new(times, values, "synthetic").unwrap()
    }

    fn wide_bounds() -> SearchBounds {
        SearchBounds::from_ranges([(2007.9, 2009.0), (0.001, 1.999), (0.01, 40.0), (0.001, 6.282)]).unwrap()
    }

    #[test]
    fn value_examples() {
        let model = Model::default();
        let nl = NonlinearParams::new(10.0, 0.7, 6.0, 1.0);
        let lin = LinearParams::new(42.0, 0.0, 0.0);
        for t in [0.0, 5.0, 9.999] {
            assert_eq!(model.value(&nl, &lin, t).unwrap(), 42.0);
        }
        let nl = NonlinearParams::new(10.0, 1.0, 6.0, 1.0);
        let lin = LinearParams::new(0.0, 2.0, 0.0);
        assert!((model.value(&nl, &lin, 7.0).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn value_matches_high_precision_reference() {
        // 1 - 0.5*0.25^0.5 + 0.1*0.25^0.5*cos(8 ln 0.25 + 1), evaluated with
        // mpmath at 50 digits: 0.71067196723106675731...
        let model = Model::default();
        let nl = NonlinearParams::new(1.25, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(1.0, -0.5, 0.1);
        let v = model.value(&nl, &lin, 1.0).unwrap();
        assert!((v - 0.710_671_967_231_066_8).abs() < 1e-14, "{v}");
    }

    #[test]
    fn value_domain_error() {
        let model = Model::default();
        let nl = NonlinearParams::new(1.0, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(1.0, -0.5, 0.1);
        assert!(matches!(model.value(&nl, &lin, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(model.value(&nl, &lin, 2.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn literal_form_differs() {
        let nl = NonlinearParams::new(1.25, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(1.0, -0.5, 0.1);
        let std = Model::new(OscillationForm::Standard).value(&nl, &lin, 1.0).unwrap();
        let lit = Model::new(OscillationForm::Literal).value(&nl, &lin, 1.0).unwrap();
        let expected = 1.0 - 0.5 * 0.5 + 0.1 * 0.5 * ((8.0f64 * 0.25).ln() + 1.0).cos();
        assert!((lit - expected).abs() < 1e-15);
        assert!((std - lit).abs() > 1e-3);
    }

    #[test]
    fn slaving_recovers_generating_amplitudes() {
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(10.0, -2.0, 0.3);
        let data = synth(&model, &nl, &lin, grid(60, 2007.0, 7.0 / 365.25));
        let s = model.slave_linear(&nl, &data).unwrap();
        assert!((s.lin.a - 10.0).abs() < 1e-8);
        assert!((s.lin.b + 2.0).abs() < 1e-8);
        assert!((s.lin.c - 0.3).abs() < 1e-8);
        assert!(s.condition.is_finite() && s.condition < CONDITION_THRESHOLD);
    }

    #[test]
    fn slaving_constant_data() {
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 0.5, 8.0, 1.0);
        let times = grid(40, 2007.0, 7.0 / 365.25);
        let data = TimeSeries::new(times, vec![3.25; 40], "c").unwrap();
        let s = model.slave_linear(&nl, &data).unwrap();
        assert!((s.lin.a - 3.25).abs() < 1e-8);
        assert!(s.lin.b.abs() < 1e-8);
        assert!(s.lin.c.abs() < 1e-8);
    }

    #[test]
    fn slaving_rejects_collinear_basis() {
        // m -> 0 makes τ^m a constant column.
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 1e-14, 8.0, 1.0);
        let times = grid(40, 2007.0, 7.0 / 365.25);
        let data = TimeSeries::new(times, (0..40).map(|i| i as f64).collect(), "c").unwrap();
        assert!(matches!(
            model.slave_linear(&nl, &data),
            Err(Error::DegenerateBasis { .. })
        ));
        assert!(model.objective(&nl, &data).is_err());
    }

    #[test]
    fn objective_zero_at_generator_and_order_free() {
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(10.0, -2.0, 0.3);
        let data = synth(&model, &nl, &lin, grid(60, 2007.0, 7.0 / 365.25));
        let scale: f64 = data.values().iter().map(|v| v * v).sum();
        let f = model.objective(&nl, &data).unwrap();
        assert!(f < 1e-16 * scale, "{f}");

        let perturbed = NonlinearParams::new(2008.21, 0.52, 8.1, 1.05);
        assert!(model.objective(&perturbed, &data).unwrap() >= f);
    }

    #[test]
    fn objective_symmetric_in_point_order() {
        // TimeSeries enforces sorted times, so permute the summation instead.
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 0.4, 7.0, 2.0);
        let times = grid(30, 2007.0, 7.0 / 365.25);
        let values: Vec<f64> = times.iter().map(|t| (t * 37.0).sin()).collect();
        let data = TimeSeries::new(times, values, "x").unwrap();
        let (r, _) = model.residuals(&nl, &data).unwrap();
        let fwd: f64 = r.iter().map(|x| x * x).sum();
        let rev: f64 = r.iter().rev().map(|x| x * x).sum();
        assert!((fwd - rev).abs() <= 1e-14 * fwd);
        assert_eq!(fwd, model.objective(&nl, &data).unwrap());
    }

    #[test]
    fn jacobian_phi_column_matches_analytic() {
        // Variable-projection derivative of r = (I - P) y with P = X X⁺:
        //   dr/dφ = -(I - P) dX β - X⁺ᵀ dXᵀ r
        // where only the oscillating column depends on φ.
        let model = Model::default();
        let times = grid(12, 1.0, 0.05);
        let values: Vec<f64> = times.iter().map(|t| (3.0 * t).sin() + t * t).collect();
        let data = TimeSeries::new(times.clone(), values.clone(), "x").unwrap();
        let nl = NonlinearParams::new(2.0, 0.6, 5.0, 1.2);

        let n = times.len();
        let x = DMatrix::from_fn(n, 3, |i, j| model.basis(&nl, times[i]).unwrap()[j]);
        let dx = DMatrix::from_fn(n, 3, |i, j| {
            if j == 2 {
                let tau: f64 = nl.tc - times[i];
                -tau.powf(nl.m) * (nl.omega * tau.ln() + nl.phi).sin()
            } else {
                0.0
            }
        });
        let y = nalgebra::DVector::from_vec(values);
        let pinv = x.clone().pseudo_inverse(1e-14).unwrap();
        let beta = &pinv * &y;
        let proj = &x * &pinv;
        let eye = DMatrix::<f64>::identity(n, n);
        let r = &y - &x * &beta;
        let analytic = -(&eye - &proj) * (&dx * &beta) - pinv.transpose() * (dx.transpose() * &r);

        let b = SearchBounds::from_ranges([(1.5, 3.0), (0.001, 1.999), (0.01, 40.0), (0.001, 6.282)]).unwrap();
        let jac = model.residual_jacobian(&nl, &data, &b).unwrap();
        for i in 0..n {
            let fd = jac[(i, 3)];
            assert!((fd - analytic[i]).abs() < 1e-7 * (1.0 + analytic[i].abs()), "row {i}: {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn jacobian_step_halving_agrees() {
        let model = Model::default();
        let times = grid(50, 2007.0, 7.0 / 365.25);
        let values: Vec<f64> = times
            .iter()
            .map(|t| 5.0 - (2008.3 - t).powf(0.45) + 0.05 * (t * 40.0).sin())
            .collect();
        let data = TimeSeries::new(times, values, "x").unwrap();
        let nl = NonlinearParams::new(2008.25, 0.5, 7.0, 2.0);
        let b = wide_bounds();
        let j1 = model.residual_jacobian_with_step(&nl, &data, &b, 1e-6).unwrap();
        let j2 = model.residual_jacobian_with_step(&nl, &data, &b, 5e-7).unwrap();
        for (a, c) in j1.iter().zip(j2.iter()) {
            let scale = a.abs().max(c.abs()).max(1e-8);
            assert!((a - c).abs() / scale < 1e-4, "{a} vs {c}");
        }
    }

    #[test]
    fn jacobian_one_sided_at_boundary() {
        let model = Model::default();
        let times = grid(50, 2007.0, 7.0 / 365.25);
        let values: Vec<f64> = times.iter().map(|t| (2008.3 - t).powf(0.5)).collect();
        let data = TimeSeries::new(times, values, "x").unwrap();
        let b = wide_bounds();
        let nl = NonlinearParams::new(2008.25, b.hi()[1], 7.0, 2.0);
        let j = model.residual_jacobian(&nl, &data, &b).unwrap();
        assert!(j.iter().all(|x| x.is_finite()));

        let collapsed = SearchBounds::from_ranges([
            (2008.25, 2008.25),
            (0.5, 0.5),
            (7.0, 7.0),
            (2.0, 2.0),
        ])
        .unwrap();
        let nl = NonlinearParams::new(2008.25, 0.5, 7.0, 2.0);
        assert!(matches!(
            model.residual_jacobian(&nl, &data, &collapsed),
            Err(Error::Jacobian { parameter: "tc" })
        ));
    }

    #[test]
    fn gradient_vanishes_at_exact_interpolant() {
        let model = Model::default();
        let nl = NonlinearParams::new(2008.2, 0.5, 8.0, 1.0);
        let lin = LinearParams::new(10.0, -2.0, 0.3);
        let data = synth(&model, &nl, &lin, grid(60, 2007.0, 7.0 / 365.25));
        let (r, _) = model.residuals(&nl, &data).unwrap();
        let j = model.residual_jacobian(&nl, &data, &wide_bounds()).unwrap();
        let g = 2.0 * j.transpose() * nalgebra::DVector::from_vec(r);
        let scale = data.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(g.norm() < 1e-6 * scale, "{}", g.norm());
    }
}
