use excurv_core::scenario::builtin;
use excurv_core::surface::FrameDepth;
use std::time::Instant;
fn main() {
    let s = builtin("ellipsoid_flat", &serde_json::json!({"n": 5, "axes": [1.0,1.1,0.9,1.05,0.95,1.08]})).unwrap();
    let pts = s.sample_points(6, 3);
    let _ = s.frame(&pts[0], FrameDepth::Full).unwrap();
    let t = Instant::now();
    for p in &pts { std::hint::black_box(s.frame(p, FrameDepth::Full).unwrap().hmean.val()); }
    println!("flat ellipsoid n=5 full: {:.1} ms", t.elapsed().as_secs_f64()*1e3/6.0);
}
