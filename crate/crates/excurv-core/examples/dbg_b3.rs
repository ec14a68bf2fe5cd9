use excurv_core::invariants::Basics;
use excurv_core::operators::{b3, b3_s_form, bq_divergence_combination, q4_residue_dim3};
use excurv_core::scenario::{random_conformal_factor, resolve};
use excurv_core::surface::FrameDepth;

fn main() {
    let s = resolve("ellipsoid3_perturbed").unwrap();
    let phi = random_conformal_factor(4, 83, 0.05);
    let resc = s.conformal_rescale(&phi).unwrap();
    let u = s.sample_points(1, 89).remove(0);
    let f0 = s.frame(&u, FrameDepth::Full).unwrap();
    let b0 = Basics::new(&f0).unwrap();
    let v0 = b3(&f0, &b0).unwrap();
    let vs0 = b3_s_form(&f0, &b0).unwrap();
    let res0 = q4_residue_dim3(&f0, &b0).unwrap();
    let comb0 = bq_divergence_combination(&b0);
    println!("base: complete {v0:.12}  s_form {vs0:.12}  res/24 {:.12}  comb {comb0:.3e}", res0/24.0);
    let f1 = resc.frame(&u, FrameDepth::Full).unwrap();
    let b1 = Basics::new(&f1).unwrap();
    let phival = f0.ambient_scalar(&phi).unwrap().field.val();
    for wt in [3.0, 4.0] {
        let w = (wt * phival).exp();
        let v1t = b3(&f1, &b1).unwrap();
        println!("weight {wt}: e^(w phi) * B3_hat = {:.12} vs base {v0:.12} (rel {:.2e})",
            w * v1t, ((w*v1t - v0)/v0).abs());
    }
    let w = (3.0 * phival).exp();
    let v1 = b3(&f1, &b1).unwrap();
    let vs1 = b3_s_form(&f1, &b1).unwrap();
    println!("rescaled*e3phi: complete {:.12}  s_form {:.12}", w*v1, w*vs1);
    // per-term diff
    let terms = |b: &Basics, f: &excurv_core::Frame| {
        vec![
            ("8|W̊|²", 8.0*b.w_norm2), ("4(P,W̊)", 4.0*b.p_w), ("32(λ̊²,W̊)", 32.0*b.lo2_w),
            ("12(λ̊²,P)", 12.0*b.lo2_p), ("−4J|λ̊|²", -4.0*b.j*b.lo_norm2),
            ("4|λ̊|⁴", 4.0*b.lo_norm2*b.lo_norm2), ("−8H(λ̊,W̊)", -8.0*b.h_mean*b.lo_w),
            ("−4λ̊∇̄₀W̄", -4.0*b.lo_ndw), ("−8λ̊∇ᵏW̄", -8.0*b.lo_div_w0),
            ("4|W̄₀|²", 4.0*b.w0_norm2), ("12δδλ̊²", 12.0*b.dd_lo2), ("−4Δ|λ̊|²", -4.0*b.lap_lo2),
            ("4δδW̊", 4.0*b.dd_wring), ("_f", f.n as f64 * 0.0),
        ]
    };
    let t0 = terms(&b0, &f0);
    let t1 = terms(&b1, &f1);
    for ((k, a), (_, b)) in t0.iter().zip(&t1) {
        println!("{k:>12}: base {a:+.9}  resc*w {:+.9}  diff {:+.3e}", w*b, a - w*b);
    }
}
