use excurv_core::quad::{integrate_many, Grid};
use excurv_core::scenario::{builtin, GridSpec};
use excurv_core::surface::{Frame, FrameDepth};

fn main() {
    for (label, axes) in [
        ("A", [1.0, 1.15, 0.9, 1.1, 1.05]),
        ("B", [1.0, 1.08, 0.95, 1.05, 1.02]),
    ] {
        let s = builtin("ellipsoid_flat", &serde_json::json!({"n": 4, "axes": axes})).unwrap();
        println!("axes {label}: {axes:?}");
        let mut prev = f64::NAN;
        for np in [6usize, 8, 10, 12] {
            let g = Grid::from_spec(
                &GridSpec::SphereProduct { n_polar: np, n_azimuth: 2 * np },
                &s,
            )
            .unwrap();
            let div_field = |f: &Frame| {
                let om = f.apply_sym2_form(&f.lo, &f.delta_lo);
                f.div_form(&om).val()
            };
            let norm_field = |f: &Frame| {
                let om = f.apply_sym2_form(&f.lo, &f.delta_lo);
                f.dot_form(&om, &om).sqrt()
            };
            let lonorm = |f: &Frame| f.lo_norm2.val();
            let r = integrate_many(&s, &g, FrameDepth::Light,
                &[&div_field, &norm_field, &lonorm]).unwrap();
            println!("  N={np}: div/norm = {:.3e}, int|lo|^2 = {:.12} (delta {:.2e})",
                r[0].abs() / (1.0 + r[1]), r[2], (r[2]-prev).abs());
            prev = r[2];
        }
    }
}
