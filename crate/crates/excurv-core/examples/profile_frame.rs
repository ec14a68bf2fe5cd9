use excurv_core::ambient::AmbientCurvature;
use excurv_core::scenario::resolve;
use excurv_core::surface::FrameDepth;
use std::time::Instant;

fn main() {
    let s = resolve("ellipsoid4_cflat").unwrap();
    let u = [1.2, 0.9, 1.4, 2.0];
    // time ambient alone
    let f = s.frame(&u, FrameDepth::Full).unwrap();
    let x0 = f.x0.clone();
    let t = Instant::now();
    for _ in 0..10 {
        let a = AmbientCurvature::from_metric(&s.metric, &x0, 4).unwrap();
        std::hint::black_box(a.scal.val());
    }
    println!("ambient: {:.1} ms", t.elapsed().as_secs_f64() * 100.0);
    let t = Instant::now();
    for _ in 0..10 {
        let g = s.metric.metric_jets(&x0, 4).unwrap();
        std::hint::black_box(g.max_abs());
    }
    println!("metric jets: {:.1} ms", t.elapsed().as_secs_f64() * 100.0);
    let t = Instant::now();
    for _ in 0..10 {
        let f = s.frame(&u, FrameDepth::Full).unwrap();
        std::hint::black_box(f.hmean.val());
    }
    println!("frame: {:.1} ms", t.elapsed().as_secs_f64() * 100.0);
}
