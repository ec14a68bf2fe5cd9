//! Curvature of the background metric ḡ on X^{n+1}, from metric jets:
//! Christoffels, Riemann, Ricci, scalar, Schouten, Weyl, Cotton, Bach and
//! the covariant derivatives the hypersurface formulas consume.
//!
//! Conventions: R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z with components
//! R(∂i,∂j)∂k = R_{ijk}^l ∂l, lowered on the last slot; Ric_{jk} = R_{ijk}^i;
//! 2(d−1)J = scal; (d−2)P = Ric − Jg; R = W − P⊙g;
//! C_{ijk} = ∇_k(P)_{ij} − ∇_j(P)_{ik}; B_{ij} = ∇^k(C)_{ijk} + P^{kl}W_{iklj}.
//! Covariant-derivative tensors carry the derivative slot last.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jets::Jet;
use crate::tensor::{invert_sym2, kulkarni_nomizu, Tensor, Variance};

use Variance::{Lower, Upper};

/// Analytic metric on the ambient space: symmetric matrix of expressions in
/// the ambient coordinates.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub dim: usize,
    pub comps: Vec<Vec<Expr>>,
}

impl MetricField {
    pub fn new(dim: usize, comps: Vec<Vec<Expr>>) -> Result<MetricField> {
        if comps.len() != dim || comps.iter().any(|row| row.len() != dim) {
            return Err(Error::Shape("metric component matrix must be dim x dim".into()));
        }
        Ok(MetricField { dim, comps })
    }

    pub fn flat(dim: usize) -> MetricField {
        MetricField {
            dim,
            comps: (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
                        .collect()
                })
                .collect(),
        }
    }

    /// e^{2φ} · this, φ an analytic function of the ambient coordinates.
    pub fn conformal_rescale(&self, phi: &Expr) -> MetricField {
        let factor = Expr::exp(Expr::constant(2.0) * phi.clone());
        MetricField {
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| Expr::mul(factor.clone(), e.clone()))
                        .collect()
                })
                .collect(),
        }
    }

    /// Stereographic model of the round unit sphere S^dim:
    /// ḡ = 4 (1+|x|²)^{−2} δ.
    pub fn round_sphere(dim: usize) -> MetricField {
        let mut norm2 = Expr::constant(1.0);
        for i in 0..dim {
            norm2 = norm2 + Expr::var(i) * Expr::var(i);
        }
        let conf = Expr::div(Expr::constant(4.0), Expr::mul(norm2.clone(), norm2));
        MetricField {
            dim,
            comps: (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            if i == j {
                                conf.clone()
                            } else {
                                Expr::constant(0.0)
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Jets of the metric components at `x`, to the given order.
    pub fn metric_jets(&self, x: &[f64], order: usize) -> Result<Tensor<Jet>> {
        let d = self.dim;
        if x.len() != d {
            return Err(Error::Shape(format!("point length {} != dim {d}", x.len())));
        }
        let vars: Vec<Jet> = (0..d).map(|i| Jet::variable(d, order, i, x[i])).collect();
        let mut cache = std::collections::HashMap::new();
        let mut comps = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                comps.push(self.comps[i][j].eval_jet_cached(&vars, &mut cache)?);
            }
        }
        let g = Tensor::new(d, vec![Lower, Lower], comps);
        // positive definiteness at the point: elimination pivots of the values
        let mut m: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| g.get(&[i, j]).val()).collect())
            .collect();
        for k in 0..d {
            if m[k][k] <= 0.0 {
                return Err(Error::SingularMetric(format!(
                    "metric not positive definite at pivot {k}"
                )));
            }
            for r in k + 1..d {
                let f = m[r][k] / m[k][k];
                for c in k..d {
                    m[r][c] -= f * m[k][c];
                }
            }
        }
        Ok(g)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "comps": self.comps.iter().map(|row| {
                row.iter().map(|e| e.to_json()).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value, pointer: &str) -> Result<MetricField> {
        let dim = v
            .get("dim")
            .and_then(|d| d.as_u64())
            .ok_or_else(|| Error::schema(format!("{pointer}/dim"), "expected integer"))?
            as usize;
        let rows = v
            .get("comps")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::schema(format!("{pointer}/comps"), "expected array"))?;
        if rows.len() != dim {
            return Err(Error::schema(
                format!("{pointer}/comps"),
                format!("expected {dim} rows"),
            ));
        }
        let mut comps = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let cells = row.as_array().ok_or_else(|| {
                Error::schema(format!("{pointer}/comps/{i}"), "expected array")
            })?;
            if cells.len() != dim {
                return Err(Error::schema(
                    format!("{pointer}/comps/{i}"),
                    format!("expected {dim} entries"),
                ));
            }
            let mut r = Vec::new();
            for (j, cell) in cells.iter().enumerate() {
                r.push(Expr::from_json(cell, &format!("{pointer}/comps/{i}/{j}"))?);
            }
            comps.push(r);
        }
        MetricField::new(dim, comps)
    }
}

/// Covariant derivative of an all-lower jet tensor; derivative slot appended
/// last. `gamma` holds Γ^k_{ij} with variance [Upper, Lower, Lower].
pub fn covariant_derivative(t: &Tensor<Jet>, gamma: &Tensor<Jet>) -> Tensor<Jet> {
    let out_order = t.comps[0].order() - 1;
    covariant_derivative_to(t, gamma, out_order)
}

/// Covariant derivative at the value level only (for tensors consumed
/// pointwise): (∇T)_{…;k}.val = ∂_k T.val − Γ-corrections, all in f64.
pub fn covariant_derivative_values(t: &Tensor<Jet>, gamma: &Tensor<Jet>) -> Tensor<f64> {
    let d = t.dim;
    let rank = t.rank();
    let tv: Vec<f64> = t.comps.iter().map(|c| c.val()).collect();
    let gv: Vec<f64> = gamma.comps.iter().map(|c| c.val()).collect();
    let mut var = t.variance.clone();
    var.push(Lower);
    let strides: Vec<usize> = (0..rank).map(|s| d.pow((rank - 1 - s) as u32)).collect();
    Tensor::from_fn(d, var, |ix| {
        let (idx, k) = (&ix[..rank], ix[rank]);
        let mut flat = 0;
        for &i in idx {
            flat = flat * d + i;
        }
        // ∂_k value = coefficient of the degree-1 monomial e_k
        let mut acc = t.comps[flat].coeffs[1 + k];
        for (s, &stride) in strides.iter().enumerate() {
            let base = flat - idx[s] * stride;
            for m in 0..d {
                acc -= gv[(m * d + k) * d + idx[s]] * tv[base + m * stride];
            }
        }
        acc
    })
}

/// Covariant derivative truncated to `out_order`, keeping every product at
/// that order.
pub fn covariant_derivative_to(
    t: &Tensor<Jet>,
    gamma: &Tensor<Jet>,
    out_order: usize,
) -> Tensor<Jet> {
    let d = t.dim;
    let rank = t.rank();
    let mut var = t.variance.clone();
    var.push(Lower);
    Tensor::from_fn(d, var, |ix| {
        let (idx, k) = (&ix[..rank], ix[rank]);
        let mut acc = t.get(idx).deriv_trunc(k, out_order);
        let mut tmp = idx.to_vec();
        for s in 0..rank {
            let orig = tmp[s];
            for m in 0..d {
                tmp[s] = m;
                acc.mul_acc(gamma.get(&[m, k, orig]), t.get(&tmp), -1.0);
            }
            tmp[s] = orig;
        }
        acc
    })
}

/// All curvature data of the background metric at one point, jet-valued so
/// that it can be composed with chart jets of an embedding.
pub struct AmbientCurvature {
    pub dim: usize,
    pub order: usize,
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
    /// Γ^k_{ij}, variance [Upper, Lower, Lower], indices [k, i, j].
    pub gamma: Tensor<Jet>,
    /// Lowered curvature tensor R_{ijkl}.
    pub riemann: Tensor<Jet>,
    pub ric: Tensor<Jet>,
    pub scal: Jet,
    /// J = scal / (2 (dim − 1)).
    pub jj: Jet,
    pub schouten: Tensor<Jet>,
    pub weyl: Tensor<Jet>,
    /// C_{ijk} = ∇_k P_{ij} − ∇_j P_{ik}.
    pub cotton: Tensor<Jet>,
    pub bach: Tensor<Jet>,
    /// (∇P)_{ij;k}, derivative slot last.
    pub nabla_schouten: Tensor<Jet>,
    /// (∇W)_{ijkl;m} values, derivative slot last.
    pub nabla_weyl: Tensor<f64>,
    /// (∇Ric)_{ij;k}.
    pub nabla_ric: Tensor<Jet>,
    /// (∇∇Ric)_{ij;k;l} values: second covariant derivative, outer slot last.
    pub nabla2_ric: Tensor<f64>,
    /// (∇J)_k = ∂_k J.
    pub dj: Tensor<Jet>,
    /// Hess(J)_{ij} values.
    pub hess_j: Tensor<f64>,
}

impl AmbientCurvature {
    pub fn from_metric(m: &MetricField, x: &[f64], order: usize) -> Result<AmbientCurvature> {
        let g = m.metric_jets(x, order)?;
        AmbientCurvature::from_metric_jets(g)
    }

    pub fn from_metric_jets(g: Tensor<Jet>) -> Result<AmbientCurvature> {
        let d = g.dim;
        if d < 3 {
            return Err(Error::Dimension(
                "ambient curvature requires dim >= 3".into(),
            ));
        }
        let order = g.comps[0].order();
        if order < 4 {
            return Err(Error::Order(
                "metric jets must have order >= 4 (Bach and second Ricci derivatives)".into(),
            ));
        }
        let g_inv = invert_sym2(&g)?;

        // Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
        let gamma = Tensor::from_fn(d, vec![Upper, Lower, Lower], |ix| {
            let (k, i, j) = (ix[0], ix[1], ix[2]);
            let mut acc = Jet::zero(d, order - 1);
            for l in 0..d {
                let mut term = g.get(&[j, l]).deriv(i);
                term.acc(&g.get(&[i, l]).deriv(j), 1.0);
                term.acc(&g.get(&[i, j]).deriv(l), -1.0);
                acc.mul_acc(g_inv.get(&[k, l]), &term, 1.0);
            }
            acc.scale(0.5)
        });

        // R_{ijk}^l = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{im} Γ^m_{jk} − Γ^l_{jm} Γ^m_{ik};
        // antisymmetric in (i,j), so compute i < j and mirror
        let zero2 = Jet::zero(d, order - 2);
        let mut ru = vec![zero2.clone(); d * d * d * d];
        let at = |i: usize, j: usize, k: usize, l: usize| ((i * d + j) * d + k) * d + l;
        for i in 0..d {
            for j in i + 1..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut acc = gamma.get(&[l, j, k]).deriv_trunc(i, order - 2);
                        acc.acc(&gamma.get(&[l, i, k]).deriv_trunc(j, order - 2), -1.0);
                        for m2 in 0..d {
                            acc.mul_acc(gamma.get(&[l, i, m2]), gamma.get(&[m2, j, k]), 1.0);
                            acc.mul_acc(gamma.get(&[l, j, m2]), gamma.get(&[m2, i, k]), -1.0);
                        }
                        ru[at(j, i, k, l)] = acc.scale(-1.0);
                        ru[at(i, j, k, l)] = acc;
                    }
                }
            }
        }
        let riem_upper = Tensor::new(d, vec![Lower, Lower, Lower, Upper], ru);
        let mut rl = vec![zero2.clone(); d * d * d * d];
        for i in 0..d {
            for j in i + 1..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut acc = Jet::zero(d, order - 2);
                        for m in 0..d {
                            acc.mul_acc(riem_upper.get(&[i, j, k, m]), g.get(&[m, l]), 1.0);
                        }
                        rl[at(j, i, k, l)] = acc.scale(-1.0);
                        rl[at(i, j, k, l)] = acc;
                    }
                }
            }
        }
        let riemann = Tensor::new(d, vec![Lower, Lower, Lower, Lower], rl);

        // Ric_{jk} = R_{ijk}^i
        let ric = Tensor::from_fn(d, vec![Lower, Lower], |ix| {
            let (j, k) = (ix[0], ix[1]);
            let mut acc = Jet::zero(d, order - 2);
            for i in 0..d {
                acc.acc(riem_upper.get(&[i, j, k, i]), 1.0);
            }
            acc
        });

        let mut scal = Jet::zero(d, order - 2);
        for j in 0..d {
            for k in 0..d {
                scal.mul_acc(g_inv.get(&[j, k]), ric.get(&[j, k]), 1.0);
            }
        }
        let jj = scal.scale(1.0 / (2.0 * (d as f64 - 1.0)));

        // (d−2) P = Ric − J g
        let schouten = Tensor::from_fn(d, vec![Lower, Lower], |ix| {
            (ric.get(ix) - &jj.mul_jet(g.get(ix))).scale(1.0 / (d as f64 - 2.0))
        });

        // R = W − P⊙g  =>  W = R + P⊙g
        let pg = kulkarni_nomizu(&schouten, &g)?;
        let weyl = riemann.add(&pg);

        let nabla_schouten = covariant_derivative_to(&schouten, &gamma, 1);
        let cotton = Tensor::from_fn(d, vec![Lower, Lower, Lower], |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            nabla_schouten.get(&[i, j, k]) - nabla_schouten.get(&[i, k, j])
        });

        let nabla_weyl = covariant_derivative_values(&weyl, &gamma);
        let nabla_ric = covariant_derivative_to(&ric, &gamma, 1);
        let nabla2_ric = covariant_derivative_values(&nabla_ric, &gamma);

        // B_{ij} = ∇^k C_{ijk} + P^{kl} W_{iklj}  (value level; Bach is only
        // consumed pointwise)
        let nabla_cotton = covariant_derivative_to(&cotton, &gamma, 0);
        let giv: Vec<f64> = g_inv.comps.iter().map(|c| c.val()).collect();
        let mut p_up = vec![0.0; d * d];
        for k in 0..d {
            for l in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += giv[k * d + a] * giv[l * d + b] * schouten.get(&[a, b]).val();
                    }
                }
                p_up[k * d + l] = acc;
            }
        }
        let bach = Tensor::from_fn(d, vec![Lower, Lower], |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = 0.0;
            for k in 0..d {
                for l in 0..d {
                    acc += giv[k * d + l] * nabla_cotton.get(&[i, j, k, l]).val();
                    acc += p_up[k * d + l] * weyl.get(&[i, k, l, j]).val();
                }
            }
            Jet::constant(d, 0, acc)
        });

        let dj = Tensor::from_fn(d, vec![Lower], |ix| jj.deriv(ix[0]));
        let hess_j = covariant_derivative_values(&dj, &gamma);

        Ok(AmbientCurvature {
            dim: d,
            order,
            g,
            g_inv,
            gamma,
            riemann,
            ric,
            scal,
            jj,
            schouten,
            weyl,
            cotton,
            bach,
            nabla_schouten,
            nabla_weyl,
            nabla_ric,
            nabla2_ric,
            dj,
            hess_j,
        })
    }

    /// Max |value| over all single traces of the Weyl tensor.
    pub fn weyl_trace_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let mut t1 = 0.0;
                let mut t2 = 0.0;
                let mut t3 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let gi = self.g_inv.get(&[i, j]).val();
                        t1 += gi * self.weyl.get(&[i, a, b, j]).val();
                        t2 += gi * self.weyl.get(&[i, j, a, b]).val();
                        t3 += gi * self.weyl.get(&[a, i, j, b]).val();
                    }
                }
                worst = worst.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
        }
        worst
    }

    /// |2 ∇^i Ric_{ij} − ∂_j scal| (contracted second Bianchi identity).
    pub fn bianchi_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let mut div = 0.0;
            for i in 0..d {
                for k in 0..d {
                    div += self.g_inv.get(&[i, k]).val() * self.nabla_ric.get(&[k, j, i]).val();
                }
            }
            let dscal = self.scal.deriv(j).val();
            worst = worst.max((2.0 * div - dscal).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn perturbed_metric(dim: usize, eps: f64) -> MetricField {
        // δ + eps · analytic symmetric perturbation, positive definite near 0
        let mut comps: Vec<Vec<Expr>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        for i in 0..dim {
            for j in i..dim {
                let bump = Expr::mul(
                    Expr::constant(eps * (1.0 + 0.3 * (i as f64) + 0.17 * (j as f64))),
                    Expr::sin(
                        Expr::var((i + j) % dim)
                            + Expr::constant(0.7) * Expr::var((i + 2 * j + 1) % dim),
                    ),
                );
                let e = Expr::add(comps[i][j].clone(), bump);
                comps[i][j] = e.clone();
                if i != j {
                    comps[j][i] = e;
                }
            }
        }
        MetricField { dim, comps }
    }

    #[test]
    fn flat_metric_is_flat() {
        let m = MetricField::flat(5);
        let c = AmbientCurvature::from_metric(&m, &[0.3, -0.2, 0.5, 0.1, -0.4], 4).unwrap();
        assert!(c.riemann.max_abs() < 1e-12);
        assert!(c.ric.max_abs() < 1e-12);
        assert!(c.weyl.max_abs() < 1e-12);
        assert!(c.cotton.max_abs() < 1e-12);
        assert!(c.bach.max_abs() < 1e-12);
    }

    #[test]
    fn round_sphere_curvature() {
        let m = MetricField::round_sphere(5);
        for x in [[0.0; 5], [0.2, -0.1, 0.3, 0.05, -0.25]] {
            let c = AmbientCurvature::from_metric(&m, &x, 4).unwrap();
            assert!((c.scal.val() - 20.0).abs() < 1e-9, "scal = {}", c.scal.val());
            assert!((c.jj.val() - 2.5).abs() < 1e-10);
            for i in 0..5 {
                for j in 0..5 {
                    let p = c.schouten.get(&[i, j]).val();
                    let g = c.g.get(&[i, j]).val();
                    assert!((p - 0.5 * g).abs() < 1e-9);
                }
            }
            assert!(c.weyl.max_abs() < 1e-9);
        }
    }

    #[test]
    fn conformally_flat_weyl_and_bach_vanish() {
        let phi = Expr::constant(0.2) * Expr::var(0)
            + Expr::constant(-0.15) * Expr::var(1) * Expr::var(2)
            + Expr::constant(0.1) * Expr::sin(Expr::var(3));
        let m = MetricField::flat(5).conformal_rescale(&phi);
        let c = AmbientCurvature::from_metric(&m, &[0.1, 0.2, -0.1, 0.05, 0.15], 4).unwrap();
        let scale = 1.0 + c.riemann.max_abs();
        assert!(c.weyl.max_abs() < 1e-9 * scale);
        assert!(c.bach.max_abs() < 1e-9 * scale);
    }

    #[test]
    fn curvature_invariants_on_random_metric() {
        let m = perturbed_metric(5, 0.08);
        let x = [0.12, -0.3, 0.21, 0.05, -0.17];
        let c = AmbientCurvature::from_metric(&m, &x, 4).unwrap();
        let scale = 1.0 + c.weyl.max_abs();
        assert!(c.weyl_trace_residual() < 1e-10 * scale);
        assert!(crate::tensor::riemann_symmetry_residual(&c.riemann) < 1e-10 * scale);
        assert!(crate::tensor::bianchi_residual(&c.riemann) < 1e-10 * scale);
        assert!(c.bianchi_residual() < 1e-9 * scale);
        for i in 0..5 {
            for j in 0..5 {
                let lhs = 3.0 * c.schouten.get(&[i, j]).val();
                let rhs = c.ric.get(&[i, j]).val() - c.jj.val() * c.g.get(&[i, j]).val();
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }
        let mut tr = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                tr += c.g_inv.get(&[i, j]).val() * c.bach.get(&[i, j]).val();
            }
        }
        assert!(tr.abs() < 1e-9 * (1.0 + c.bach.max_abs()));
    }

    #[test]
    fn metricity() {
        let m = perturbed_metric(4, 0.1);
        let x = [0.2, -0.1, 0.3, 0.0];
        let c = AmbientCurvature::from_metric(&m, &x, 4).unwrap();
        let nabla_g = covariant_derivative(&c.g, &c.gamma);
        assert!(nabla_g.max_abs() < 1e-11);
    }

    #[test]
    fn cotton_is_divergence_of_weyl() {
        let m = perturbed_metric(5, 0.07);
        let x = [0.1, 0.15, -0.2, 0.05, -0.1];
        let c = AmbientCurvature::from_metric(&m, &x, 4).unwrap();
        let d = 5;
        let scale = 1.0 + c.cotton.max_abs();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut divw = 0.0;
                    for l in 0..d {
                        for m2 in 0..d {
                            divw += c.g_inv.get(&[l, m2]).val()
                                * c.nabla_weyl.get(&[l, i, j, k, m2]);
                        }
                    }
                    let lhs = (d as f64 - 3.0) * c.cotton.get(&[i, j, k]).val();
                    assert!(
                        (lhs - divw).abs() < 1e-8 * scale,
                        "cotton identity at ({i},{j},{k}): {lhs} vs {divw}"
                    );
                }
            }
        }
    }

    #[test]
    fn weyl_conformal_weight() {
        let m = perturbed_metric(5, 0.06);
        let phi = Expr::constant(0.11) * Expr::var(0)
            + Expr::constant(0.07) * Expr::var(1) * Expr::var(3)
            + Expr::constant(-0.09) * Expr::cos(Expr::var(2));
        let mh = m.conformal_rescale(&phi);
        let x = [0.07, -0.12, 0.2, 0.14, -0.06];
        let c0 = AmbientCurvature::from_metric(&m, &x, 4).unwrap();
        let c1 = AmbientCurvature::from_metric(&mh, &x, 4).unwrap();
        let f = (2.0 * phi.eval(&x).unwrap()).exp();
        let scale = 1.0 + c0.weyl.max_abs();
        for (a, b) in c0.weyl.comps.iter().zip(&c1.weyl.comps) {
            assert!((f * a.val() - b.val()).abs() < 1e-9 * scale);
        }
    }
}
