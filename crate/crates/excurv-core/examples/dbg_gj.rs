use excurv_core::quad::gauss_jacobi;
fn main() {
    let (xs, ws) = gauss_jacobi(6, 0.0);
    for (x, w) in xs.iter().zip(&ws) { println!("{x:.10} {w:.10}"); }
    let s: f64 = ws.iter().sum();
    println!("sum w = {s}");
}
