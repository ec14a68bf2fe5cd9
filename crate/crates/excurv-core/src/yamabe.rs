//! Singular-Yamabe expansion data: volume coefficients v₁–v₄, solution
//! coefficients σ₍₂₎–σ₍₅₎, the renormalized-volume coefficients V₂–V₄, and
//! the energy functionals built from them.

use crate::error::{Error, Result};
use crate::invariants::Basics;
use crate::jets::Jet;
use crate::quad::Grid;
use crate::scenario::Scenario;
use crate::surface::{Frame, FrameDepth};

/// Expansion data at one surface point.
#[derive(Clone, Debug)]
pub struct ExpansionBundle {
    pub n: usize,
    /// v₁..v₄.
    pub v: [f64; 4],
    /// σ₍₂₎..σ₍₅₎ (σ₍₅₎ absent at its poles).
    pub sigma: [f64; 3],
    pub sigma5: Option<f64>,
    /// The critical renormalized-volume coefficient for this n (n ∈ {2,3,4}).
    pub vn: Option<f64>,
    /// Intermediate scalars: J̄, J̄′, J̄″, Δσ₂, Δ′σ₂, Δσ₃, |dσ₂|².
    pub diagnostics: [f64; 7],
}

/// Volume coefficients of the normal exponential map, from the closed forms.
pub fn volume_coeffs(fr: &Frame, b: &Basics) -> [f64; 4] {
    let n = fr.n as f64;
    let h = b.h_mean;
    let v1 = n * h;
    let v2 = 0.5 * (-b.ricbar00 - b.lo_norm2 + n * (n - 1.0) * h * h);
    let v3 = (-b.ndric00 + 2.0 * b.lo_gbar - (3.0 * n - 2.0) * h * b.ricbar00
        + 2.0 * b.tr_lo3
        - 3.0 * (n - 2.0) * h * b.lo_norm2
        + n * (n - 1.0) * (n - 2.0) * h * h * h)
        / 6.0;
    let sigma4_shape = fr.sigma4_shape();
    let v4 = (-b.nd2ric00 + 2.0 * b.lo_ndriem - (4.0 * n - 2.0) * h * b.ndric00
        + 3.0 * b.ricbar00 * b.ricbar00
        - 2.0 * b.gbar_norm2
        + 8.0 * (n - 2.0) * h * b.lo_gbar
        - 8.0 * b.lo2_gbar
        + 6.0 * b.lo_norm2 * b.ricbar00
        - 2.0 * (n - 1.0) * (3.0 * n - 4.0) * h * h * b.ricbar00
        + 24.0 * sigma4_shape)
        / 24.0;
    [v1, v2, v3, v4]
}

/// First metric variation of the Laplacian along the normal exponential map,
/// applied to a scalar field: Δ′(u) = −2(L,Hess u) − 2(δL,du) + (d tr L, du).
pub fn laplacian_variation(fr: &Frame, field: &Jet) -> f64 {
    let n = fr.n as f64;
    let hess = fr.hessian(field);
    let du = fr.grad_form(field);
    let l_hess = fr.dot_sym2(&fr.ll, &hess);
    // δ(L) = δ(λ̊) + dH
    let mut div_l_du = 0.0;
    for a in 0..fr.n {
        for c in 0..fr.n {
            div_l_du += fr.h_inv.get(&[a, c]).val()
                * (fr.delta_lo.get(&[a]).val() + fr.dh.get(&[a]).val())
                * du.get(&[c]).val();
        }
    }
    let dh_du = fr.dot_form(&fr.dh, &du);
    -2.0 * l_hess - 2.0 * div_l_du + n * dh_du
}

/// Solution coefficients σ₍₂₎..σ₍₅₎ plus the diagnostics they consume.
pub fn sigma_coeffs(fr: &Frame, b: &Basics) -> Result<ExpansionBundle> {
    let n = fr.n;
    let nf = n as f64;
    if n < 2 {
        return Err(Error::Dimension("expansion needs n >= 2".into()));
    }
    let v = volume_coeffs(fr, b);
    let [v1, v2, v3, v4] = v;
    let jbar = b.jbar;
    let jbar_n = b.jbar_n;
    let jbar_nn = b.jbar_nn;
    let s2 = v1 / (2.0 * nf);
    let s3 = 2.0 / (3.0 * (nf - 1.0)) * v2 - v1 * v1 / (3.0 * nf) + jbar / (3.0 * (nf - 1.0));
    let s4 = if n == 2 {
        f64::NAN
    } else {
        3.0 / (4.0 * (nf - 2.0)) * v3
            - (9.0 * nf * nf - 20.0 * nf + 7.0) / (12.0 * nf * (nf - 1.0) * (nf - 2.0)) * v1 * v2
            + (6.0 * nf * nf - 11.0 * nf + 1.0) / (24.0 * nf * nf * (nf - 2.0)) * v1 * v1 * v1
            + (2.0 * nf - 1.0) / (6.0 * nf * (nf - 1.0) * (nf - 2.0)) * v1 * jbar
            + 1.0 / (4.0 * (nf - 2.0)) * jbar_n
            + 1.0 / (8.0 * nf * (nf - 2.0)) * (nf * b.lap_h)
    };
    // tangential pieces: σ₂ = H/2 and σ₃ as chart fields
    let sigma2_field = fr.hmean.scale(0.5);
    let lap_s2 = fr.laplacian(&sigma2_field).val();
    let ds2 = fr.grad_form(&sigma2_field);
    let ds2_norm2 = fr.dot_form(&ds2, &ds2);
    let lap_var_s2 = laplacian_variation(fr, &sigma2_field);
    let lap_s3 = match fr.depth {
        FrameDepth::Full => {
            // σ₃ = (J − J̄ − |λ̊|²/(2(n−1)) − (n/2)H²)/3 as a field
            let s3_field = {
                let core = &(&fr.j_h - &fr.jbar)
                    - &fr.lo_norm2.scale(1.0 / (2.0 * (nf - 1.0)));
                let h2 = fr.hmean.mul_jet(&fr.hmean).scale(nf / 2.0);
                (&core - &h2).scale(1.0 / 3.0)
            };
            fr.laplacian(&s3_field).val()
        }
        FrameDepth::Light => f64::NAN,
    };
    let s5 = if n <= 3 {
        None
    } else {
        Some(
            -(nf + 1.0) / (10.0 * (nf - 3.0)) * ds2_norm2
                + 1.0 / (5.0 * (nf - 3.0)) * lap_var_s2
                + 1.0 / (5.0 * (nf - 3.0)) * lap_s3
                + (3.0 * nf - 1.0) / (20.0 * (nf - 3.0) * (nf - 2.0) * nf) * lap_s2 * v1
                + 1.0 / (10.0 * (nf - 3.0)) * jbar_nn
                + (nf - 1.0) / (4.0 * (nf - 3.0) * (nf - 2.0) * nf) * jbar_n * v1
                + 2.0 * (3.0 * nf - 5.0) / (15.0 * (nf - 3.0) * (nf - 1.0) * (nf - 1.0))
                    * jbar
                    * v2
                - (4.0 * nf - 3.0) / (20.0 * (nf - 2.0) * (nf - 1.0) * nf) * jbar * v1 * v1
                + 1.0 / (30.0 * (nf - 1.0) * (nf - 1.0)) * jbar * jbar
                + (48.0 * nf.powi(4) - 247.0 * nf.powi(3) + 387.0 * nf * nf - 179.0 * nf + 3.0)
                    / (60.0 * (nf - 3.0) * (nf - 2.0) * (nf - 1.0) * nf * nf)
                    * v1
                    * v1
                    * v2
                - 2.0 * (3.0 * nf * nf - 11.0 * nf + 10.0)
                    / (15.0 * (nf - 3.0) * (nf - 1.0) * (nf - 1.0))
                    * v2
                    * v2
                - (24.0 * nf.powi(4) - 110.0 * nf.powi(3) + 133.0 * nf * nf - 24.0 * nf - 3.0)
                    / (120.0 * (nf - 3.0) * (nf - 2.0) * nf.powi(3))
                    * v1.powi(4)
                - (16.0 * nf * nf - 53.0 * nf + 27.0) / (20.0 * (nf - 3.0) * (nf - 2.0) * nf)
                    * v1
                    * v3
                + 4.0 / (5.0 * (nf - 3.0)) * v4,
        )
    };
    let vn = match n {
        2 => Some(6.0 * s2 * s2 - 3.0 * s3 - 3.0 * s2 * v1 + v2),
        3 => Some(
            -20.0 * s2.powi(3) + 20.0 * s2 * s3 - 4.0 * s4 + 10.0 * s2 * s2 * v1 - 4.0 * s3 * v1
                - 4.0 * s2 * v2
                + v3,
        ),
        4 => s5.map(|s5| {
            70.0 * s2.powi(4) - 105.0 * s2 * s2 * s3 + 15.0 * s3 * s3 + 30.0 * s2 * s4 - 5.0 * s5
                - 35.0 * s2.powi(3) * v1
                + 30.0 * s2 * s3 * v1
                - 5.0 * s4 * v1
                + 15.0 * s2 * s2 * v2
                - 5.0 * s3 * v2
                - 5.0 * s2 * v3
                + v4
        }),
        _ => None,
    };
    Ok(ExpansionBundle {
        n,
        v,
        sigma: [s2, s3, s4],
        sigma5: s5,
        vn,
        diagnostics: [jbar, jbar_n, jbar_nn, lap_s2, lap_var_s2, lap_s3, ds2_norm2],
    })
}

/// The critical renormalized-volume coefficient V_n (n ∈ {2,3,4}).
pub fn v_coefficient(fr: &Frame, b: &Basics) -> Result<f64> {
    match fr.n {
        2 | 3 | 4 => sigma_coeffs(fr, b)?.vn.ok_or(Error::Pole {
            n: fr.n,
            what: "critical volume coefficient".into(),
        }),
        other => Err(Error::Dimension(format!(
            "critical volume coefficient defined for n in 2..=4, got {other}"
        ))),
    }
}

/// Closed form for V₂ at n = 2: ¼|λ̊|² − ½J.
pub fn v2_closed_form(b: &Basics) -> f64 {
    0.25 * b.lo_norm2 - 0.5 * b.j
}

/// Closed form for 6V₃ at n = 3: −2δδ(λ̊) − 4(λ̊,F) + ΔH.
pub fn v3_closed_form(b: &Basics) -> f64 {
    (-2.0 * b.dd_lo - 4.0 * b.lo_fial + b.lap_h) / 6.0
}

/// The critical (n = 4) integrand matching 8∫V₄ term by term after the
/// divergence terms are dropped; integrates to 8∫V₄ on closed M.
pub fn v4_integrand_closed_form(b: &Basics) -> f64 {
    let i1 = b.lo_norm2 * b.lo_norm2;
    (b.j * b.j - b.p_norm2 + 2.25 * b.w_norm2)
        + (b.lo_ndp - 2.0 * b.lo_ndw + b.lo_hess_h + b.h_mean * b.lo_p
            - 4.5 * b.h_mean * b.lo_w)
        + (4.0 * b.lo2_p - b.lo_norm2 * b.pbar00 - 1.5 * b.j * b.lo_norm2
            - 1.5 * b.h_mean * b.h_mean * b.lo_norm2
            - 0.5 * b.h_mean * b.tr_lo3)
        + (10.5 * b.lo2_w + 8.25 * b.tr_lo4 - 7.0 / 3.0 * i1)
}

/// Kind of background the energy functionals specialize to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Background {
    Flat,
    RoundSphere,
    Other,
}

pub fn detect_background(scenario: &Scenario) -> Background {
    let d = scenario.n + 1;
    let x: Vec<f64> = (0..d).map(|i| 0.1 + 0.07 * i as f64).collect();
    match crate::ambient::AmbientCurvature::from_metric(&scenario.metric, &x, 4) {
        Ok(c) => {
            if c.riemann.max_abs() < 1e-12 {
                Background::Flat
            } else {
                let mut dev: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        dev = dev.max(
                            (c.schouten.get(&[i, j]).val() - 0.5 * c.g.get(&[i, j]).val()).abs(),
                        );
                    }
                }
                if dev < 1e-10 {
                    Background::RoundSphere
                } else {
                    Background::Other
                }
            }
        }
        Err(_) => Background::Other,
    }
}

/// Energies of a closed M⁴ scenario.
#[derive(Clone, Debug)]
pub struct Energies {
    /// ∫ V₄ (the renormalized-volume energy).
    pub e_m: f64,
    /// The curvature-data route to the renormalized-area energy.
    pub e_gr_route1: f64,
    /// The invariant-decomposition route; agrees with route 1 on closed M.
    pub e_gr_route2: f64,
    /// Decomposition-form report fields (two literature variants).
    pub e_gr_ds: f64,
    pub e_gr_ch: f64,
    /// The bending energy (flat and round-sphere backgrounds only).
    pub e_g: Option<f64>,
    pub int_q4: f64,
    /// |16 ∫V₄ − ∫Q₄| / |∫Q₄|.
    pub relation_residual: f64,
    pub background: Background,
}

/// Compute every energy in one quadrature pass (shared per-node work).
pub fn energies(scenario: &Scenario, grid: &Grid) -> Result<Energies> {
    if scenario.n != 4 {
        return Err(Error::Dimension("energies are defined for n = 4".into()));
    }
    let background = detect_background(scenario);
    let r = crate::quad::integrate_rows(scenario, grid, FrameDepth::Full, 8, &|fr, out| {
        let b = Basics::new(fr).expect("basics");
        let i1 = b.lo_norm2 * b.lo_norm2;
        out[0] = sigma_coeffs(fr, &b)
            .ok()
            .and_then(|e| e.vn)
            .unwrap_or(f64::NAN);
        out[1] = crate::operators::q4(fr, &b).map(|r| r.value).unwrap_or(f64::NAN);
        out[2] = (b.dh_norm2 - b.h_mean * b.h_mean * b.lo_norm2 + 3.0 * b.h_mean.powi(4))
            + (2.0 * b.h_mean * b.tt_ndp + 4.0 * b.pbar0_dh
                + 5.0 * b.h_mean * b.h_mean * b.pbar_tt
                - 8.0 * b.pbar00 * b.h_mean * b.h_mean)
            + (-b.pbar_norm2 + b.pbar0_norm2 + b.pbar_tt * b.pbar_tt - b.bbar_tt);
        out[3] = (b.j * b.j - b.p_norm2)
            + (-b.lo2_p - b.p_w + 0.5 * b.j * b.lo_norm2 + b.delta_lo_norm2 / 9.0 + b.bbar00)
            + (i1 / 12.0 - 0.25 * b.tr_lo4)
            - (0.25 * b.w_norm2 + 0.5 * b.lo2_w);
        let pf4 = b.j * b.j - b.p_norm2 + b.w_intr_norm2.unwrap_or(0.0) / 8.0;
        let j1 = crate::invariants::j1_general(&b, fr.n).unwrap_or(f64::NAN);
        out[4] = pf4 + 0.5 * j1 - 5.0 / 24.0 * i1 + 0.25 * b.tr_lo4 - b.i3 / 8.0 - b.i5bar
            - 0.5 * b.lo2_w
            + 0.25 * b.w0_norm2;
        out[5] = pf4 + 0.5 * j1 - 5.0 / 24.0 * i1 + 0.25 * b.tr_lo4 - b.i3 / 8.0
            + 0.5 * b.w_norm2
            - b.i5bar
            + 0.25 * b.w0_norm2;
        out[6] = b.dh_norm2 + 3.0 * b.h_mean.powi(4) - b.h_mean * b.h_mean * b.lo_norm2;
        out[7] = out[6] + 6.0 * b.h_mean * b.h_mean + 3.0;
    })?;
    let e_m = r[0];
    let int_q4 = r[1];
    let e_g = match background {
        Background::Flat => Some(r[6] / 4.0),
        Background::RoundSphere => Some(r[7] / 4.0),
        Background::Other => None,
    };
    Ok(Energies {
        e_m,
        e_gr_route1: r[2] / 8.0,
        e_gr_route2: r[3] / 8.0,
        e_gr_ds: r[4] / 8.0,
        e_gr_ch: r[5] / 8.0,
        e_g,
        int_q4,
        relation_residual: (16.0 * e_m - int_q4).abs() / int_q4.abs().max(1e-300),
        background,
    })
}

/// The bending-energy integrand evaluated on arbitrary frames (used for the
/// background-rescaling invariance check); `sphere_terms` adds the
/// round-background correction.
pub fn guven_energy(scenario: &Scenario, grid: &Grid, sphere_terms: bool) -> Result<f64> {
    let r = crate::quad::integrate_rows(scenario, grid, FrameDepth::Light, 1, &|fr, out| {
        let b = Basics::new(fr).expect("basics");
        out[0] = b.dh_norm2 + 3.0 * b.h_mean.powi(4) - b.h_mean * b.h_mean * b.lo_norm2;
        if sphere_terms {
            out[0] += 6.0 * b.h_mean * b.h_mean + 3.0;
        }
    })?;
    Ok(r[0] / 4.0)
}

/// The invariant-route renormalized-area energy on arbitrary n = 4 frames
/// (conformally invariant; used for the rescaling-invariance check).
pub fn gr_energy_invariant_route(scenario: &Scenario, grid: &Grid) -> Result<f64> {
    let r = crate::quad::integrate_rows(scenario, grid, FrameDepth::Full, 1, &|fr, out| {
        let b = Basics::new(fr).expect("basics");
        let i1 = b.lo_norm2 * b.lo_norm2;
        out[0] = (b.j * b.j - b.p_norm2)
            + (-b.lo2_p - b.p_w + 0.5 * b.j * b.lo_norm2 + b.delta_lo_norm2 / 9.0 + b.bbar00)
            + (i1 / 12.0 - 0.25 * b.tr_lo4)
            - (0.25 * b.w_norm2 + 0.5 * b.lo2_w);
    })?;
    Ok(r[0] / 8.0)
}

/// Exact-jet oracle for the volume expansion: solve the normal geodesic
/// flow in (chart, r)-jet space by Picard iteration and expand
/// dvol_{h_r}/dvol_h in r. Independent of the closed-form route.
pub fn volume_expansion_oracle(scenario: &Scenario, u: &[f64]) -> Result<[f64; 4]> {
    let n = scenario.n;
    let d = n + 1;
    let fr = scenario.frame(u, FrameDepth::Light)?;
    // variables: (u_1..u_n, r), truncation order 5 (r^4 times u-degree 1)
    let dim = n + 1;
    let order = 5;
    let extend = |j: &Jet| -> Jet {
        // reinterpret an n-dim chart jet as an (n+1)-dim jet constant in r
        let mut out = Jet::zero(dim, order);
        let src_table = crate::jets::table(n, j.order().min(order));
        let dst_table = crate::jets::table(dim, order);
        for (rank, exp) in src_table.exps.iter().enumerate() {
            if rank >= j.coeffs.len() {
                break;
            }
            let mut full = exp.clone();
            full.push(0);
            if let Some(dst) = dst_table.rank_of(&full) {
                out.coeffs[dst] = j.coeffs[rank];
            }
        }
        out
    };
    let rvar = Jet::variable(dim, order, n, 0.0);
    let x0 = &fr.x0;
    let amb = crate::ambient::AmbientCurvature::from_metric(&scenario.metric, x0, 4)?;
    let base: Vec<Jet> = fr.x.iter().map(&extend).collect();
    let vel: Vec<Jet> = fr.normal.iter().map(&extend).collect();
    let mut xx: Vec<Jet> = (0..d).map(|k| &base[k] + &rvar.mul_jet(&vel[k])).collect();
    // Picard: X <- x + rN - double r-integral of Gamma(X)(X', X')
    for _ in 0..4 {
        let comp = crate::jets::Composer::new(&xx, 3);
        let xdot: Vec<Jet> = xx.iter().map(|c| c.deriv(n)).collect();
        let mut next = Vec::with_capacity(d);
        for k in 0..d {
            let mut acc = Jet::zero(dim, order - 1);
            for i in 0..d {
                let mut inner = Jet::zero(dim, order - 1);
                for j in 0..d {
                    let gkij = comp.apply(amb.gamma.get(&[k, i, j]), 3);
                    inner.mul_acc(&gkij, &xdot[j], 1.0);
                }
                acc.mul_acc(&inner, &xdot[i], 1.0);
            }
            let acc2 = integrate_r_twice(&acc, n, order);
            next.push(&(&base[k] + &rvar.mul_jet(&vel[k])) - &acc2);
        }
        xx = next;
    }
    // h_r[ab] = g(X)(d_a X, d_b X); v(r) = sqrt(det h_r / det h_0)
    let comp = crate::jets::Composer::new(&xx, 4);
    let gk: Vec<Jet> = (0..d * d).map(|f| comp.apply(&amb.g.comps[f], 4)).collect();
    let dxr: Vec<Vec<Jet>> = (0..n)
        .map(|a| xx.iter().map(|c| c.deriv(a)).collect())
        .collect();
    let mut hr_comps = Vec::with_capacity(n * n);
    for a in 0..n {
        for bm in 0..n {
            let mut acc = Jet::zero(dim, order - 1);
            for i in 0..d {
                let mut inner = Jet::zero(dim, order - 1);
                for j in 0..d {
                    inner.mul_acc(&gk[i * d + j], &dxr[bm][j], 1.0);
                }
                acc.mul_acc(&dxr[a][i], &inner, 1.0);
            }
            hr_comps.push(acc);
        }
    }
    let hr = crate::tensor::Tensor::new(
        n,
        vec![crate::tensor::Variance::Lower, crate::tensor::Variance::Lower],
        hr_comps,
    );
    let det = det_jet_generic(&hr);
    // restriction to r = 0: zero every coefficient with positive r-exponent
    let tab = crate::jets::table(dim, det.order());
    let mut det0 = det.clone();
    for (rank, exp) in tab.exps.iter().enumerate() {
        if exp[n] > 0 {
            det0.coeffs[rank] = 0.0;
        }
    }
    let ratio = det.div_jet(&det0)?;
    let v = ratio.sqrt_jet()?;
    let mut out = [0.0; 4];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut alpha = vec![0u8; dim];
        alpha[n] = (m + 1) as u8;
        let tab = crate::jets::table(dim, v.order());
        if let Some(rank) = tab.rank_of(&alpha) {
            *slot = v.coeffs[rank];
        }
    }
    Ok(out)
}

fn det_jet_generic(m: &crate::tensor::Tensor<Jet>) -> Jet {
    fn det_rec(m: &crate::tensor::Tensor<Jet>, rows: &[usize], cols: &[usize]) -> Jet {
        if rows.len() == 1 {
            return m.get(&[rows[0], cols[0]]).clone();
        }
        let mut acc: Option<Jet> = None;
        for (k, &c) in cols.iter().enumerate() {
            let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = m.get(&[rows[0], c]).mul_jet(&det_rec(m, &rows[1..], &sub));
            let signed = if k % 2 == 0 { term } else { term.scale(-1.0) };
            acc = Some(match acc {
                None => signed,
                Some(s) => &s + &signed,
            });
        }
        acc.unwrap()
    }
    let idx: Vec<usize> = (0..m.dim).collect();
    det_rec(m, &idx, &idx)
}

fn integrate_r_twice(j: &Jet, rvar: usize, out_order: usize) -> Jet {
    let int_once = |j: &Jet| -> Jet {
        let src = crate::jets::table(j.dim(), j.order());
        let mut out = Jet::zero(j.dim(), (j.order() + 1).min(out_order));
        let dst = crate::jets::table(out.dim(), out.order());
        for (rank, exp) in src.exps.iter().enumerate() {
            let c = j.coeffs[rank];
            if c == 0.0 {
                continue;
            }
            let mut target = exp.clone();
            target[rvar] += 1;
            if let Some(t) = dst.rank_of(&target) {
                out.coeffs[t] = c / target[rvar] as f64;
            }
        }
        out
    };
    int_once(&int_once(j))
}
