use excurv_core::scenario::resolve;
use excurv_core::surface::FrameDepth;
use std::time::Instant;

fn main() {
    for name in ["sphere4_flat", "ellipsoid4_cflat", "torus5_perturbed"] {
        let s = resolve(name).unwrap();
        let pts = s.sample_points(8, 42);
        // warm up tables
        let _ = s.frame(&pts[0], FrameDepth::Full).unwrap();
        let t0 = Instant::now();
        for p in &pts {
            let f = s.frame(p, FrameDepth::Full).unwrap();
            std::hint::black_box(f.hmean.val());
        }
        let full = t0.elapsed().as_secs_f64() / pts.len() as f64;
        let t1 = Instant::now();
        for p in &pts {
            let f = s.frame(p, FrameDepth::Light).unwrap();
            std::hint::black_box(f.hmean.val());
        }
        let light = t1.elapsed().as_secs_f64() / pts.len() as f64;
        println!("{name}: full {:.1} ms, light {:.1} ms", full * 1e3, light * 1e3);
    }
}
