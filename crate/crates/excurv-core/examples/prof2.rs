use excurv_core::scenario::resolve;
use excurv_core::surface::FrameDepth;
use std::time::Instant;
fn main() {
    let s = resolve("ellipsoid4_flat").unwrap();
    let pts = s.sample_points(40, 9);
    let _ = s.frame(&pts[0], FrameDepth::Light).unwrap();
    let t = Instant::now();
    for p in &pts {
        std::hint::black_box(s.frame(p, FrameDepth::Light).unwrap().lo_norm2.val());
    }
    println!("light frame: {:.2} ms", t.elapsed().as_secs_f64() * 1e3 / 40.0);
}
