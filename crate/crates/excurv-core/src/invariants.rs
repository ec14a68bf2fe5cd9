//! Local conformal invariants of the embedding: the quartic Weyl/λ̊ family
//! I₁–I₇, the normal-derivative invariants J₁–J₅, the fourth-order invariant
//! C, the Wm density, the conformally covariant operator D on trace-free
//! symmetric 2-tensors, the S-tensor, and the numerical conformal-variation
//! driver used to verify the variation formulas.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jets::Jet;
use crate::scenario::Scenario;
use crate::surface::{Frame, FrameDepth};
use crate::tensor::{Tensor, Variance};

use Variance::Lower;

/// A named invariant value with its conformal weight.
#[derive(Clone, Debug)]
pub struct InvariantValue {
    pub name: String,
    pub value: f64,
    pub weight: i32,
    pub n: usize,
}

/// Shared contractions of one frame, computed once and reused by every
/// invariant, operator and expansion-coefficient formula.
pub struct Basics {
    pub n: usize,
    pub h_mean: f64,
    pub lo_norm2: f64,
    pub tr_lo3: f64,
    pub tr_lo4: f64,
    pub j: f64,
    pub p_norm2: f64,
    pub lo_p: f64,
    pub lo2_p: f64,
    pub lo_w: f64,
    pub lo2_w: f64,
    pub w_norm2: f64,
    pub p_w: f64,
    pub lo_ndw: f64,
    pub lo_ndp: f64,
    pub tt_ndp: f64,
    pub lo_ndriem: f64,
    pub pbar00: f64,
    pub jbar: f64,
    pub jbar_n: f64,
    pub jbar_nn: f64,
    pub ricbar00: f64,
    pub ndric00: f64,
    pub nd2ric00: f64,
    pub bbar00: f64,
    pub bbar_tt: f64,
    pub lo_gbar: f64,
    pub lo2_gbar: f64,
    pub gbar_norm2: f64,
    pub lo_cbar0: f64,
    pub lo_pbar: f64,
    pub lo2_pbar: f64,
    pub pbar_tt: f64,
    pub pbar_norm2: f64,
    pub pbar0_norm2: f64,
    pub pbar0_dh: f64,
    pub dh_norm2: f64,
    pub lap_h: f64,
    pub lo_hess_h: f64,
    pub delta_lo_norm2: f64,
    pub dd_lo: f64,
    pub dd_lo2: f64,
    pub lap_lo2: f64,
    pub div_lo_dlo: f64,
    pub dd_wring: f64,
    pub div_lo_w0: f64,
    pub lo_div_w0: f64,
    pub w0_norm2: f64,
    pub lap_j: Option<f64>,
    pub i3: f64,
    pub i5bar: f64,
    pub i5: Option<f64>,
    pub w_intr_norm2: Option<f64>,
    pub lo_fial: f64,
}

impl Basics {
    pub fn new(fr: &Frame) -> Result<Basics> {
        let n = fr.n;
        let [_, lo2n, tr3, tr4] = fr.lo_traces();
        let hv = fr.hmean.val();
        let (jv, pn2, lo_p, lo2_p, p_w) = match &fr.p_h {
            Some(p) => (
                fr.j_h.val(),
                fr.dot_sym2(p, p),
                fr.dot_sym2(&fr.lo, p),
                fr.dot_sym2(&fr.lo2, p),
                fr.dot_sym2(p, &fr.wring),
            ),
            None => (fr.j_h.val(), 0.0, 0.0, 0.0, 0.0),
        };
        let lo_w = fr.dot_sym2(&fr.lo, &fr.wring);
        let lo2_w = fr.dot_sym2(&fr.lo2, &fr.wring);
        let w_norm2 = fr.dot_sym2(&fr.wring, &fr.wring);
        let lo_ndw = fr.dot_sym2_vals(&fr.ndw, &fr.lo);
        let lo_ndp = fr.dot_sym2_vals(&fr.ndp, &fr.lo);
        let lo_ndriem = fr.dot_sym2_vals(&fr.ndriem, &fr.lo);
        let mut tt_ndp = 0.0;
        for a in 0..n {
            for b in 0..n {
                tt_ndp += fr.h_inv.get(&[a, b]).val() * fr.ndp.get(&[a, b]);
            }
        }
        let lo_gbar = fr.dot_sym2_vals(&fr.gbar_nn, &fr.lo);
        let lo2_gbar = fr.dot_sym2_vals(&fr.gbar_nn, &fr.lo2);
        let gbar_norm2 = fr.dot_sym2_vv(&fr.gbar_nn, &fr.gbar_nn);
        let lo_cbar0 = fr.dot_sym2_vals(&fr.cbar0, &fr.lo);
        let lo_pbar = fr.dot_sym2(&fr.lo, &fr.pbar);
        let lo2_pbar = fr.dot_sym2(&fr.lo2, &fr.pbar);
        let mut pbar_tt = 0.0;
        for a in 0..n {
            for b in 0..n {
                pbar_tt += fr.h_inv.get(&[a, b]).val() * fr.pbar.get(&[a, b]).val();
            }
        }
        let pbar_norm2 = fr.dot_sym2(&fr.pbar, &fr.pbar);
        let pbar0_norm2 = fr.dot_form(&fr.pbar0, &fr.pbar0);
        let pbar0_dh = fr.dot_form(&fr.pbar0, &fr.dh);
        let dh_norm2 = fr.dot_form(&fr.dh, &fr.dh);
        let lap_h = fr.div_form(&fr.dh).val();
        let hess_h = fr.hessian(&fr.hmean);
        let lo_hess_h = fr.dot_sym2(&fr.lo, &hess_h);
        let delta_lo_norm2 = fr.dot_form(&fr.delta_lo, &fr.delta_lo);
        let dd_lo = fr.div_form(&fr.delta_lo).val();
        let dd_lo2 = fr.div_div_sym2(&fr.lo2).val();
        let lap_lo2 = fr.laplacian(&fr.lo_norm2).val();
        let lo_dlo = fr.apply_sym2_form(&fr.lo, &fr.delta_lo);
        let div_lo_dlo = fr.div_form(&lo_dlo).val();
        let dd_wring = fr.div_div_sym2(&fr.wring).val();
        let div_lo_w0 = fr.div_form(&fr.lo_w0_form()).val();
        let lo_div_w0 = fr.lo_div_w0();
        let w0_norm2 = fr.w0_norm2();
        let lap_j = match fr.depth {
            FrameDepth::Full => Some(fr.laplacian(&fr.j_h).val()),
            FrameDepth::Light => None,
        };
        let i3 = fr.weyl_restricted_norm2();
        let i5bar = fr.lo_lo_weyl_bar();
        let (i5, w_intr_norm2) = if n >= 4 {
            (
                Some(fr.lo_lo_weyl_intrinsic()?),
                Some(fr.weyl_intrinsic_norm2()?),
            )
        } else {
            (None, None)
        };
        let lo_fial = if n >= 3 {
            let f = fr.fialkow()?;
            fr.dot_sym2_vals(&f, &fr.lo)
        } else {
            0.0
        };
        Ok(Basics {
            n,
            h_mean: hv,
            lo_norm2: lo2n,
            tr_lo3: tr3,
            tr_lo4: tr4,
            j: jv,
            p_norm2: pn2,
            lo_p,
            lo2_p,
            lo_w,
            lo2_w,
            w_norm2,
            p_w,
            lo_ndw,
            lo_ndp,
            tt_ndp,
            lo_ndriem,
            pbar00: fr.pbar00.val(),
            jbar: fr.jbar.val(),
            jbar_n: fr.jbar_n,
            jbar_nn: fr.jbar_nn,
            ricbar00: fr.ricbar00,
            ndric00: fr.ndric00,
            nd2ric00: fr.nd2ric00,
            bbar00: fr.bbar00,
            bbar_tt: fr.bbar_tt,
            lo_gbar,
            lo2_gbar,
            gbar_norm2,
            lo_cbar0,
            lo_pbar,
            lo2_pbar,
            pbar_tt,
            pbar_norm2,
            pbar0_norm2,
            pbar0_dh,
            dh_norm2,
            lap_h,
            lo_hess_h,
            delta_lo_norm2,
            dd_lo,
            dd_lo2,
            lap_lo2,
            div_lo_dlo,
            dd_wring,
            div_lo_w0,
            lo_div_w0,
            w0_norm2,
            lap_j,
            i3,
            i5bar,
            i5,
            w_intr_norm2,
            lo_fial,
        })
    }
}

/// Stable catalog of invariant names exposed to the CLI.
pub fn catalog() -> Vec<&'static str> {
    vec![
        "I1", "I2", "I3", "I4", "I5", "I5bar", "I6", "I7", "J1", "J2", "J3", "J4", "J5", "C",
        "Wm", "DLL",
    ]
}

/// Evaluate a cataloged invariant on a frame.
pub fn evaluate(name: &str, fr: &Frame) -> Result<InvariantValue> {
    let b = Basics::new(fr)?;
    evaluate_with(name, fr, &b)
}

pub fn evaluate_with(name: &str, fr: &Frame, b: &Basics) -> Result<InvariantValue> {
    let n = fr.n;
    let mk = |value: f64| InvariantValue {
        name: name.to_string(),
        value,
        weight: -4,
        n,
    };
    Ok(match name {
        "I1" => mk(b.lo_norm2 * b.lo_norm2),
        "I2" => mk(b.tr_lo4),
        "I3" => mk(b.i3),
        "I4" => mk(b.w_norm2),
        "I5" => mk(b
            .i5
            .ok_or_else(|| Error::Dimension("I5 needs the intrinsic Weyl tensor (n >= 4)".into()))?),
        "I5bar" => mk(b.i5bar),
        "I6" => mk(b.lo2_w),
        "I7" => mk(b.w0_norm2),
        "J1" => mk(j1_general(b, n)?),
        "J2" => mk(j2_general(b, n)?),
        "J3" => mk(j3(b, n)?),
        "J4" => mk(j4(b, n)?),
        "J5" => mk(j5(fr, b)?),
        "C" => mk(c_invariant(b, n)?),
        "Wm" => mk(wm(fr, b)?),
        "DLL" => mk(d_action_on_lo(fr, b)?),
        other => return Err(Error::UnknownInvariant(other.to_string())),
    })
}

/// The first normal-derivative invariant, general dimensions (poles at 3, 6).
pub fn j1_general(b: &Basics, n: usize) -> Result<f64> {
    if n == 3 || n == 6 {
        return Err(Error::Pole {
            n,
            what: "first normal-derivative invariant".into(),
        });
    }
    let nf = n as f64;
    Ok(b.lo_ndw + 2.0 * b.h_mean * b.lo_w
        + (nf - 2.0) / ((nf - 1.0) * (nf - 1.0)) * b.delta_lo_norm2
        - (nf - 2.0) / (nf - 3.0) * b.lo2_p
        - (nf - 2.0) / ((nf - 3.0) * (nf - 6.0)) * b.j * b.lo_norm2
        + (nf - 4.0) / ((nf - 3.0) * (nf - 6.0)) * b.lap_lo2
        - 1.0 / (nf - 3.0) * b.dd_lo2)
}

/// The second normal-derivative invariant, general dimensions.
pub fn j2_general(b: &Basics, n: usize) -> Result<f64> {
    if n == 3 || n == 6 {
        return Err(Error::Pole {
            n,
            what: "second normal-derivative invariant".into(),
        });
    }
    let nf = n as f64;
    Ok(b.lo_ndp + b.lo_hess_h + b.h_mean * b.lo_p
        - (nf - 3.0) / (nf - 2.0) * b.h_mean * b.lo_w
        + nf / ((nf - 1.0) * (nf - 1.0)) * b.delta_lo_norm2
        - b.pbar00 * b.lo_norm2
        - 1.0 / ((nf - 3.0) * (nf - 6.0)) * b.j * b.lo_norm2
        - 1.5 * b.h_mean * b.h_mean * b.lo_norm2
        - (nf - 3.0) / (nf - 2.0) * b.h_mean * b.tr_lo3
        + (nf - 4.0) / (nf - 3.0) * b.lo2_p
        - 1.0 / (nf - 3.0) * b.dd_lo2
        + (nf - 5.0) / (2.0 * (nf - 3.0) * (nf - 6.0)) * b.lap_lo2)
}

/// The fourth-order invariant combining both normal-derivative terms (n = 4);
/// equals −4·J1 + 2·J2.
pub fn c_invariant(b: &Basics, n: usize) -> Result<f64> {
    if n != 4 {
        return Err(Error::Dimension(
            "the combined invariant is defined in dimension 4".into(),
        ));
    }
    Ok(2.0 * b.lo_ndp - 4.0 * b.lo_ndw + 2.0 * b.lo_hess_h + 2.0 * b.h_mean * b.lo_p
        - 9.0 * b.h_mean * b.lo_w
        + 8.0 * b.lo2_p
        - 2.0 * b.pbar00 * b.lo_norm2
        - 3.0 * b.j * b.lo_norm2
        - 3.0 * b.h_mean * b.h_mean * b.lo_norm2
        - b.h_mean * b.tr_lo3
        + 2.0 * b.dd_lo2
        + 0.5 * b.lap_lo2)
}

/// Weyl/Bach invariant (n = 4): vanishes for conformally flat backgrounds.
pub fn j3(b: &Basics, n: usize) -> Result<f64> {
    if n != 4 {
        return Err(Error::Dimension("J3 is defined in dimension 4".into()));
    }
    Ok(0.5 * b.lo_ndw + b.h_mean * b.lo_w + b.p_w - b.bbar00 + 0.5 * b.dd_wring)
}

/// The Bach-coupled invariant (n = 4); satisfies J3 = J4 − J1.
pub fn j4(b: &Basics, n: usize) -> Result<f64> {
    if n != 4 {
        return Err(Error::Dimension("J4 is defined in dimension 4".into()));
    }
    Ok(2.0 / 9.0 * b.delta_lo_norm2 - 2.0 * b.lo2_p + b.j * b.lo_norm2 - 2.0 * b.p_w
        + 2.0 * b.bbar00
        - b.dd_lo2
        - b.dd_wring)
}

/// S_{ij} = ∇̄_N W̄(N,·,·,N) − C̄(·,·;N) − C̄(·,·;N)ᵀ + 4H W̊ (values).
pub fn s_tensor(fr: &Frame) -> Tensor<f64> {
    let n = fr.n;
    let hv = fr.hmean.val();
    Tensor::from_fn(n, vec![Lower, Lower], |ix| {
        let (i, j) = (ix[0], ix[1]);
        fr.ndw.get(&[i, j]) - fr.cbar0.get(&[i, j]) - fr.cbar0.get(&[j, i])
            + 4.0 * hv * fr.wring.get(&[i, j]).val()
    })
}

/// J5 = (λ̊, S).
pub fn j5(fr: &Frame, _b: &Basics) -> Result<f64> {
    let s = s_tensor(fr);
    Ok(fr.dot_sym2_vals(&s, &fr.lo))
}

/// The Wm density (n = 4).
pub fn wm(fr: &Frame, b: &Basics) -> Result<f64> {
    if fr.n != 4 {
        return Err(Error::Dimension("Wm is defined in dimension 4".into()));
    }
    let boch = fr.bochner_sym2(&fr.lo);
    let lo_lap_lo = fr.dot_sym2(&fr.lo, &boch);
    Ok(0.5 * lo_lap_lo + 4.0 / 3.0 * b.div_lo_dlo + 1.5 * b.lap_lo2 - 6.0 * b.lo_cbar0
        + 4.0 * b.lo2_p
        - 3.5 * b.j * b.lo_norm2
        + 6.0 * b.h_mean * b.lo_w)
}

/// The conformally covariant operator on trace-free symmetric 2-tensors,
/// applied to a jet field t (≥ 2 chart orders); returns values.
pub fn d_operator(fr: &Frame, t: &Tensor<Jet>) -> Result<Tensor<f64>> {
    let n = fr.n;
    if n < 3 {
        return Err(Error::Dimension("the operator needs n >= 3".into()));
    }
    let mut tr = 0.0;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            tr += fr.h_inv.get(&[i, j]).val() * t.get(&[i, j]).val();
            scale = scale.max(t.get(&[i, j]).val().abs());
        }
    }
    if tr.abs() > 1e-8 * (1.0 + scale) {
        return Err(Error::NotTraceFree(format!("input trace {tr}")));
    }
    let nf = n as f64;
    let p = fr
        .p_h
        .as_ref()
        .ok_or_else(|| Error::Dimension("needs the Schouten tensor".into()))?;
    let boch = fr.bochner_sym2(t);
    let div_t = fr.div_sym2(t);
    let grad_div = fr.cov_deriv(&div_t);
    let jv = fr.j_h.val();
    let p_t = fr.dot_sym2(p, t);
    let dd_t = fr.div_form(&div_t).val();
    let hi = |a: usize, b: usize| fr.h_inv.get(&[a, b]).val();
    Ok(Tensor::from_fn(n, vec![Lower, Lower], |ix| {
        let (i, j) = (ix[0], ix[1]);
        let mut v = boch.get(&[i, j]).val();
        for k in 0..n {
            for l in 0..n {
                v -= 2.0
                    * hi(k, l)
                    * (p.get(&[i, k]).val() * t.get(&[l, j]).val()
                        + t.get(&[i, k]).val() * p.get(&[l, j]).val());
            }
        }
        v -= (nf / 2.0 - 1.0) * jv * t.get(&[i, j]).val();
        v -= 4.0 / (nf + 2.0) * (grad_div.get(&[j, i]).val() + grad_div.get(&[i, j]).val());
        v += 4.0 / nf * fr.h.get(&[i, j]).val() * p_t;
        v += 8.0 / (nf * (nf + 2.0)) * fr.h.get(&[i, j]).val() * dd_t;
        v
    }))
}

/// (D(λ̊), λ̊).
pub fn d_action_on_lo(fr: &Frame, _b: &Basics) -> Result<f64> {
    let d = d_operator(fr, &fr.lo)?;
    Ok(fr.dot_sym2_vals(&d, &fr.lo))
}

/// d/dt at t = 0 of e^{w t ι*φ} · Q(e^{2tφ} ḡ), by central differences with
/// one Richardson step.
pub fn conformal_variation<Q>(
    scenario: &Scenario,
    u: &[f64],
    phi: &Expr,
    weight: f64,
    eps: f64,
    quantity: Q,
) -> Result<f64>
where
    Q: Fn(&Scenario, &[f64]) -> Result<f64>,
{
    let eval_at = |t: f64| -> Result<f64> {
        let scaled = Expr::mul(Expr::constant(t), phi.clone());
        let resc = scenario.conformal_rescale(&scaled)?;
        let fr = resc.frame(u, FrameDepth::Light)?;
        let phival = fr.ambient_scalar(phi)?.field.val();
        Ok((weight * t * phival).exp() * quantity(&resc, u)?)
    };
    let d1 = (eval_at(eps)? - eval_at(-eps)?) / (2.0 * eps);
    let d2 = (eval_at(eps / 2.0)? - eval_at(-eps / 2.0)?) / eps;
    Ok((4.0 * d2 - d1) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, random_conformal_factor, resolve};

    fn full(s: &Scenario, u: &[f64]) -> Frame {
        s.frame(u, FrameDepth::Full).unwrap()
    }

    #[test]
    fn sphere_invariants_vanish() {
        let s = resolve("sphere4_flat").unwrap();
        let fr = full(&s, &[1.2, 0.9, 1.4, 2.0]);
        let b = Basics::new(&fr).unwrap();
        for name in catalog() {
            let v = evaluate_with(name, &fr, &b).unwrap();
            assert!(
                v.value.abs() < 1e-9,
                "{name} = {} on the round sphere",
                v.value
            );
        }
    }

    #[test]
    fn i5bar_relation_in_dim4() {
        // Ī₅ = I₅ − (7/6) I₁ + 2 I₂ + I₆
        let s = resolve("ellipsoid4_perturbed").unwrap();
        for u in s.sample_points(4, 17) {
            let fr = full(&s, &u);
            let b = Basics::new(&fr).unwrap();
            let i1 = b.lo_norm2 * b.lo_norm2;
            let lhs = b.i5bar;
            let rhs = b.i5.unwrap() - 7.0 / 6.0 * i1 + 2.0 * b.tr_lo4 + b.lo2_w;
            assert!(
                (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs.abs())),
                "{lhs} vs {rhs} at {u:?}"
            );
        }
    }

    #[test]
    fn weyl_restriction_decomposition() {
        // |W|² = |W̄|² + (7/3)I₁ − 4I₂ − 2I₄ + 4Ī₅ − 4I₆ at n = 4
        let s = resolve("ellipsoid4_perturbed").unwrap();
        for u in s.sample_points(4, 23) {
            let fr = full(&s, &u);
            let b = Basics::new(&fr).unwrap();
            let i1 = b.lo_norm2 * b.lo_norm2;
            let lhs = b.w_intr_norm2.unwrap();
            let rhs = b.i3 + 7.0 / 3.0 * i1 - 4.0 * b.tr_lo4 - 2.0 * b.w_norm2 + 4.0 * b.i5bar
                - 4.0 * b.lo2_w;
            assert!(
                (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs.abs())),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn j5_expansion_and_action_identity() {
        let s = resolve("ellipsoid4_perturbed").unwrap();
        for u in s.sample_points(3, 31) {
            let fr = full(&s, &u);
            let b = Basics::new(&fr).unwrap();
            let lhs = j5(&fr, &b).unwrap();
            let rhs = b.lo2_w + b.i5bar - b.lo_div_w0;
            assert!(
                (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs.abs())),
                "J5 expansion: {lhs} vs {rhs}"
            );
            let dll = d_action_on_lo(&fr, &b).unwrap();
            let rhs2 = -b.i5.unwrap() - 0.5 * b.w0_norm2 - b.div_lo_w0;
            assert!(
                (dll - rhs2).abs() < 1e-8 * (1.0 + dll.abs().max(rhs2.abs())),
                "action identity: {dll} vs {rhs2}"
            );
        }
    }

    #[test]
    fn c_decomposes_into_j1_j2() {
        let s = resolve("ellipsoid4_perturbed").unwrap();
        for u in s.sample_points(4, 37) {
            let fr = full(&s, &u);
            let b = Basics::new(&fr).unwrap();
            let c = c_invariant(&b, 4).unwrap();
            let j1 = j1_general(&b, 4).unwrap();
            let j2 = j2_general(&b, 4).unwrap();
            assert!(
                (c - (-4.0 * j1 + 2.0 * j2)).abs() < 1e-9 * (1.0 + c.abs()),
                "{c} vs {}",
                -4.0 * j1 + 2.0 * j2
            );
            let j3v = j3(&b, 4).unwrap();
            let j4v = j4(&b, 4).unwrap();
            // the displayed invariants satisfy J4 − J1 = −2·J3
            assert!(
                (j4v - j1 + 2.0 * j3v).abs() < 1e-9 * (1.0 + j3v.abs()),
                "J4 − J1 + 2J3 = {}",
                j4v - j1 + 2.0 * j3v
            );
        }
    }

    #[test]
    fn weight_law_on_cataloged_invariants() {
        let s = resolve("ellipsoid4_perturbed").unwrap();
        let phi = random_conformal_factor(5, 41, 0.05);
        let resc = s.conformal_rescale(&phi).unwrap();
        for u in s.sample_points(3, 43) {
            let f0 = full(&s, &u);
            let f1 = full(&resc, &u);
            let b0 = Basics::new(&f0).unwrap();
            let b1 = Basics::new(&f1).unwrap();
            let w = (4.0 * f0.ambient_scalar(&phi).unwrap().field.val()).exp();
            for name in [
                "I1", "I2", "I3", "I4", "I5", "I5bar", "I6", "I7", "J1", "J2", "J3", "J4", "J5",
                "C", "Wm",
            ] {
                let q0 = evaluate_with(name, &f0, &b0).unwrap().value;
                let q1 = evaluate_with(name, &f1, &b1).unwrap().value;
                assert!(
                    (w * q1 - q0).abs() < 1e-7 * (1.0 + q0.abs()),
                    "{name}: {} vs {}",
                    w * q1,
                    q0
                );
            }
        }
    }

    #[test]
    fn s_tensor_covariance_and_wm_decomposition() {
        let s = resolve("ellipsoid4_perturbed").unwrap();
        let phi = random_conformal_factor(5, 47, 0.05);
        let resc = s.conformal_rescale(&phi).unwrap();
        for u in s.sample_points(3, 53) {
            let f0 = full(&s, &u);
            let f1 = full(&resc, &u);
            let w = f0.ambient_scalar(&phi).unwrap().field.val().exp();
            let s0 = s_tensor(&f0);
            let s1 = s_tensor(&f1);
            let scale = 1.0 + s0.max_abs();
            for (a, bb) in s0.comps.iter().zip(&s1.comps) {
                assert!((w * bb - a).abs() < 1e-8 * scale, "S: {} vs {a}", w * bb);
            }
            let b = Basics::new(&f0).unwrap();
            let lhs = wm(&f0, &b).unwrap();
            let dll = d_action_on_lo(&f0, &b).unwrap();
            let j1 = j1_general(&b, 4).unwrap();
            let rhs = 0.5 * dll - 3.0 * j1 + 3.0 * b.i5bar + 3.0 * b.lo2_w - 1.5 * b.w0_norm2
                - 6.0 * b.div_lo_w0;
            assert!(
                (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs.abs())),
                "Wm decomposition: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn jj_difference_decompositions() {
        let s = resolve("ellipsoid4_perturbed").unwrap();
        for u in s.sample_points(3, 59) {
            let fr = full(&s, &u);
            let b = Basics::new(&fr).unwrap();
            let j1 = j1_general(&b, 4).unwrap();
            let j2 = j2_general(&b, 4).unwrap();
            let i1 = b.lo_norm2 * b.lo_norm2;
            let dll = d_action_on_lo(&fr, &b).unwrap();
            let rhs_a = dll + 3.0 * b.lo2_w + 2.0 * b.i5.unwrap() - 4.0 / 3.0 * i1
                + 3.0 * b.tr_lo4
                + b.div_lo_w0;
            let lhs = j1 - 2.0 * j2;
            assert!(
                (lhs - rhs_a).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs_a.abs())),
                "{lhs} vs {rhs_a}"
            );
            let rhs_b = -4.0 / 3.0 * i1 + 3.0 * b.tr_lo4 + b.i5.unwrap() + 3.0 * b.lo2_w
                - 0.5 * b.w0_norm2;
            assert!(
                (lhs - rhs_b).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs_b.abs())),
                "{lhs} vs {rhs_b}"
            );
        }
    }

    #[test]
    fn d_covariance() {
        // e^{(n/2−1)φ} D̂(t) = D(e^{(n/2−3)φ} t) with t = λ̊ of the base frame
        for scen in ["ellipsoid4_perturbed", "torus5_perturbed"] {
            let s = resolve(scen).unwrap();
            let nf = s.n as f64;
            let phi = random_conformal_factor(s.n + 1, 61, 0.04);
            let resc = s.conformal_rescale(&phi).unwrap();
            let u = s.sample_points(1, 67).remove(0);
            let f0 = s.frame(&u, FrameDepth::Full).unwrap();
            let f1 = resc.frame(&u, FrameDepth::Full).unwrap();
            let n = s.n;
            let phif = f0.ambient_scalar(&phi).unwrap().field;
            let ephi = phif.val().exp();
            let scaled = {
                let factor = phif.scale(nf / 2.0 - 3.0).exp_jet();
                Tensor::from_fn(n, vec![Lower, Lower], |ix| factor.mul_jet(f0.lo.get(ix)))
            };
            let rhs = d_operator(&f0, &scaled).unwrap();
            let lhs_input = {
                let factor = f1
                    .ambient_scalar(&phi)
                    .unwrap()
                    .field
                    .scale(-1.0)
                    .exp_jet();
                Tensor::from_fn(n, vec![Lower, Lower], |ix| factor.mul_jet(f1.lo.get(ix)))
            };
            let dl = d_operator(&f1, &lhs_input).unwrap();
            let scale = 1.0 + rhs.max_abs();
            for (a, b) in dl.comps.iter().zip(&rhs.comps) {
                let lhs = ephi.powf(nf / 2.0 - 1.0) * a;
                assert!(
                    (lhs - b).abs() < 1e-7 * scale,
                    "{scen}: {lhs} vs {b} (scale {scale})"
                );
            }
        }
    }

    #[test]
    fn variation_formulas() {
        let s = builtin(
            "ellipsoid_perturbed",
            &serde_json::json!({"n": 5, "axes": [1.0, 1.07, 0.95, 1.03, 1.05, 0.97], "eps": 0.04, "seed": 3}),
        )
        .unwrap();
        let phi = random_conformal_factor(6, 71, 0.5);
        let u = s.sample_points(1, 73).remove(0);
        let n = s.n;
        let nf = n as f64;
        let fr = s.frame(&u, FrameDepth::Full).unwrap();
        let b = Basics::new(&fr).unwrap();
        let sc = fr.ambient_scalar(&phi).unwrap();
        let phif = sc.field.clone();
        let dphi = fr.grad_form(&phif);
        let hessphi = fr.hessian(&phif);
        let lapphi = fr.laplacian(&phif).val();
        let d0phi = sc.dfn;
        let d00phi = sc.d2fnn;
        let eps = 1e-3;

        // weight-invariance of I₁
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            let b = Basics::new(&fr)?;
            Ok(b.lo_norm2 * b.lo_norm2)
        })
        .unwrap();
        assert!(v.abs() < 1e-5, "I1 variation: {v}");

        // (J |λ̊|²)• = −|λ̊|² Δφ
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            let b = Basics::new(&fr)?;
            Ok(b.j * b.lo_norm2)
        })
        .unwrap();
        let expect = -b.lo_norm2 * lapphi;
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "{v} vs {expect}"
        );

        // (|δλ̊|²)• = 2(n−1)(λ̊δλ̊, dφ)
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            Ok(fr.dot_form(&fr.delta_lo, &fr.delta_lo))
        })
        .unwrap();
        let lo_dlo = fr.apply_sym2_form(&fr.lo, &fr.delta_lo);
        let expect = 2.0 * (nf - 1.0) * fr.dot_form(&lo_dlo, &dphi);
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "{v} vs {expect}"
        );

        // (δδ(λ̊²))• = (n−2)δ(λ̊²dφ) − δ(|λ̊|²dφ) + (n−4)(δ(λ̊²),dφ)
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            Ok(fr.div_div_sym2(&fr.lo2).val())
        })
        .unwrap();
        let lo2_dphi = fr.apply_sym2_form(&fr.lo2, &dphi);
        let div_lo2_dphi = fr.div_form(&lo2_dphi).val();
        let lon2_dphi = Tensor::from_fn(n, vec![Lower], |ix| {
            fr.lo_norm2.mul_jet(dphi.get(&[ix[0]]))
        });
        let div_lon2_dphi = fr.div_form(&lon2_dphi).val();
        let div_lo2 = fr.div_sym2(&fr.lo2);
        let expect = (nf - 2.0) * div_lo2_dphi - div_lon2_dphi
            + (nf - 4.0) * fr.dot_form(&div_lo2, &dphi);
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "{v} vs {expect}"
        );

        // (δ(λ̊ δλ̊))• = (n−1)δ(λ̊²dφ) + (n−4)(λ̊δλ̊, dφ)
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            let lo_dlo = fr.apply_sym2_form(&fr.lo, &fr.delta_lo);
            Ok(fr.div_form(&lo_dlo).val())
        })
        .unwrap();
        let expect = (nf - 1.0) * div_lo2_dphi + (nf - 4.0) * fr.dot_form(&lo_dlo, &dphi);
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "{v} vs {expect}"
        );

        // (Δ|λ̊|²)• = (n−6)δ(|λ̊|²dφ) − (n−4)|λ̊|²Δφ
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            Ok(fr.laplacian(&fr.lo_norm2).val())
        })
        .unwrap();
        let expect = (nf - 6.0) * div_lon2_dphi - (nf - 4.0) * b.lo_norm2 * lapphi;
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "{v} vs {expect}"
        );

        // (λ̊, Hess(H) + ∇̄₀P̄)•: first normal-derivative variation display
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            let b = Basics::new(&fr)?;
            Ok(b.lo_hess_h + b.lo_ndp)
        })
        .unwrap();
        let expect = 0.5 * b.lo_norm2 * lapphi
            - 2.0 * nf / (nf - 1.0) * fr.dot_form(&lo_dlo, &dphi)
            + b.h_mean * fr.dot_sym2(&fr.lo, &hessphi)
            - b.lo_norm2 * d00phi
            - b.lo_p * d0phi
            + (nf - 3.0) / (nf - 2.0) * b.tr_lo3 * d0phi
            + 3.0 * b.h_mean * b.lo_norm2 * d0phi
            + (nf - 3.0) / (nf - 2.0) * b.lo_w * d0phi
            - 0.5 * div_lon2_dphi
            + 2.0 * div_lo2_dphi;
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "first variation display: {v} vs {expect}"
        );

        // (λ̊^{ij}∇̄₀W̄(N,·,·,N))•: second display
        let v = conformal_variation(&s, &u, &phi, 4.0, eps, |sc, u| {
            let fr = sc.frame(u, FrameDepth::Light)?;
            let b = Basics::new(&fr)?;
            Ok(b.lo_ndw)
        })
        .unwrap();
        let expect = -2.0 * b.lo_w * d0phi + 2.0 * div_lo2_dphi
            - 2.0 * fr.dot_sym2(&fr.lo2, &hessphi)
            - 2.0 * (nf - 2.0) / (nf - 1.0) * fr.dot_form(&lo_dlo, &dphi)
            + b.lo_norm2 * lapphi
            - div_lon2_dphi;
        assert!(
            (v - expect).abs() < 1e-4 * (1.0 + expect.abs()),
            "second variation display: {v} vs {expect}"
        );
    }
}
