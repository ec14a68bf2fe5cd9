//! Numerical integration of frame-derived scalar fields over closed
//! parameterized hypersurfaces.
//!
//! Sphere-product charts use Gauss–Jacobi nodes in the polar cosines (the
//! Jacobi exponent matches each axis' sine power, so smooth fields on the
//! sphere integrate spectrally) and uniform azimuth; torus charts use the
//! trapezoid rule. The metric volume factor √det h is applied at integration
//! time, keeping the grid geometry-free. The reduction is a deterministic
//! pairwise sum in node order, independent of thread count.

use crate::error::{Error, Result};
use crate::scenario::{GridSpec, Scenario};
use crate::surface::{ChartKind, Frame, FrameDepth};

/// Quadrature nodes and chart-measure weights.
#[derive(Clone, Debug)]
pub struct Grid {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss–Jacobi rule for the weight (1−x²)^α on [−1,1]: Sturm bisection on
/// the Jacobi matrix for the nodes, Christoffel function for the weights.
pub fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // off-diagonal squares of the symmetric Jacobi matrix (diagonal is 0)
    let beta: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            let s = 2.0 * k + 2.0 * alpha;
            4.0 * k * (k + alpha) * (k + alpha) * (k + 2.0 * alpha)
                / (s * s * (s + 1.0) * (s - 1.0))
        })
        .collect();
    // μ0 = ∫ (1−x²)^α dx by the half-integer recurrence
    let mu0 = {
        let mut a;
        let mut val;
        if (alpha - alpha.round()).abs() < 1e-12 {
            a = 0.0;
            val = 2.0;
        } else {
            a = 0.5;
            val = std::f64::consts::FRAC_PI_2;
        }
        while a + 0.5 < alpha + 0.25 {
            a += 1.0;
            val *= 2.0 * a / (2.0 * a + 1.0);
        }
        val
    };
    // zero pivots count as negative (eigenvalue exactly at t)
    let count_below = |t: f64| -> usize {
        let mut count = 0;
        let mut q = -t;
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
        for b in &beta {
            q = -t - b / q;
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut xs = Vec::with_capacity(n);
    for j in 1..=n {
        let mut lo = -1.0;
        let mut hi = 1.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) >= j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        xs.push(0.5 * (lo + hi));
    }
    // w_j = 1 / Σ_{k<n} p̃_k(x_j)² with the orthonormal recurrence
    let ws: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut prev = 0.0;
            let mut cur = 1.0 / mu0.sqrt();
            let mut sum = cur * cur;
            for b in &beta {
                let sq = b.sqrt();
                let next = (x * cur - prev) / sq;
                prev = cur * sq;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    (xs, ws)
}

impl Grid {
    pub fn build(scenario: &Scenario) -> Result<Grid> {
        Grid::from_spec(&scenario.grid, scenario)
    }

    pub fn from_spec(spec: &GridSpec, scenario: &Scenario) -> Result<Grid> {
        let n = scenario.n;
        match spec {
            GridSpec::SphereProduct { n_polar, n_azimuth } => {
                if !matches!(scenario.embedding.chart, ChartKind::SphereProduct) {
                    return Err(Error::BadParams(
                        "sphere_product grid needs a sphere chart".into(),
                    ));
                }
                // polar axis a has sine power n−1−a
                let mut axis_nodes: Vec<Vec<(f64, f64)>> = Vec::new();
                for a in 0..n - 1 {
                    let p = (n - 1 - a) as f64;
                    let alpha = (p - 1.0) / 2.0;
                    let (xs, ws) = gauss_jacobi(*n_polar, alpha);
                    let pairs = xs
                        .iter()
                        .zip(&ws)
                        .map(|(&x, &w)| {
                            let theta = x.acos();
                            (theta, w / theta.sin().powf(p))
                        })
                        .collect();
                    axis_nodes.push(pairs);
                }
                let dphi = std::f64::consts::TAU / *n_azimuth as f64;
                let az: Vec<(f64, f64)> = (0..*n_azimuth)
                    .map(|j| (j as f64 * dphi, dphi))
                    .collect();
                axis_nodes.push(az);
                Ok(product_grid(&axis_nodes))
            }
            GridSpec::TorusTrapezoid { nodes } => {
                let periods = match &scenario.embedding.chart {
                    ChartKind::Torus { periods } => periods.clone(),
                    _ => {
                        return Err(Error::BadParams(
                            "torus_trapezoid grid needs a torus chart".into(),
                        ))
                    }
                };
                if nodes.len() != n {
                    return Err(Error::BadParams(format!(
                        "torus grid needs {n} node counts"
                    )));
                }
                let axis_nodes: Vec<Vec<(f64, f64)>> = (0..n)
                    .map(|a| {
                        let du = periods[a] / nodes[a] as f64;
                        (0..nodes[a]).map(|j| (j as f64 * du, du)).collect()
                    })
                    .collect();
                Ok(product_grid(&axis_nodes))
            }
            GridSpec::None => Err(Error::BadParams(
                "scenario has no quadrature grid (open chart)".into(),
            )),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scale every axis count by the given factor (used by the probe).
    pub fn refined_spec(spec: &GridSpec, factor: f64) -> GridSpec {
        match spec {
            GridSpec::SphereProduct { n_polar, n_azimuth } => GridSpec::SphereProduct {
                n_polar: ((*n_polar as f64 * factor).round() as usize).max(2),
                n_azimuth: ((*n_azimuth as f64 * factor).round() as usize).max(4),
            },
            GridSpec::TorusTrapezoid { nodes } => GridSpec::TorusTrapezoid {
                nodes: nodes
                    .iter()
                    .map(|&k| ((k as f64 * factor).round() as usize).max(3))
                    .collect(),
            },
            GridSpec::None => GridSpec::None,
        }
    }
}

fn product_grid(axes: &[Vec<(f64, f64)>]) -> Grid {
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let dims = axes.len();
    let mut idx = vec![0usize; dims];
    for _ in 0..total {
        let mut u = Vec::with_capacity(dims);
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            let (x, wa) = axes[a][i];
            u.push(x);
            w *= wa;
        }
        nodes.push(u);
        weights.push(w);
        for a in (0..dims).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    Grid { nodes, weights }
}

fn thread_count() -> usize {
    if let Ok(v) = std::env::var("EXCURV_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            return k.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|k| k.get())
        .unwrap_or(1)
}

/// Deterministic pairwise sum over a slice (fixed association order).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        k => {
            let half = k / 2;
            pairwise_sum(&v[..half]) + pairwise_sum(&v[half..])
        }
    }
}

/// Evaluate several frame-derived fields over a grid in one pass; returns
/// ∫ f_i dvol_h for each evaluator. Node evaluations run in parallel, the
/// reduction is deterministic.
pub fn integrate_many(
    scenario: &Scenario,
    grid: &Grid,
    depth: FrameDepth,
    evaluators: &[&(dyn Fn(&Frame) -> f64 + Sync)],
) -> Result<Vec<f64>> {
    integrate_rows(scenario, grid, depth, evaluators.len(), &|fr, out| {
        for (s, ev) in out.iter_mut().zip(evaluators.iter()) {
            *s = ev(fr);
        }
    })
}

/// Row-at-a-time variant: one closure fills all integrand values per node,
/// so per-frame shared work (contractions, expansion coefficients) is done
/// once.
pub fn integrate_rows(
    scenario: &Scenario,
    grid: &Grid,
    depth: FrameDepth,
    m: usize,
    row: &(dyn Fn(&Frame, &mut [f64]) + Sync),
) -> Result<Vec<f64>> {
    if !scenario.closed {
        return Err(Error::BadParams(format!(
            "scenario {} is not closed; surface integrals undefined",
            scenario.name
        )));
    }
    let total = grid.len();
    let mut table = vec![0.0f64; total * m];
    let threads = thread_count().min(total.max(1));
    let chunk = total.div_ceil(threads);
    let err = std::sync::Mutex::new(None::<Error>);
    {
        let table_chunks: Vec<&mut [f64]> = table.chunks_mut(chunk * m).collect();
        std::thread::scope(|scope| {
            for (t, out) in table_chunks.into_iter().enumerate() {
                let err = &err;
                scope.spawn(move || {
                    let start = t * chunk;
                    for (row_idx, slot) in out.chunks_mut(m).enumerate() {
                        let node = start + row_idx;
                        if node >= total {
                            break;
                        }
                        match scenario.frame(&grid.nodes[node], depth) {
                            Ok(frame) => {
                                let wv = grid.weights[node] * frame.sqrt_det_h.val();
                                row(&frame, slot);
                                for s in slot.iter_mut() {
                                    *s *= wv;
                                }
                            }
                            Err(e) => {
                                let mut guard = err.lock().unwrap();
                                if guard.is_none() {
                                    *guard = Some(e);
                                }
                                return;
                            }
                        }
                    }
                });
            }
        });
    }
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let col: Vec<f64> = (0..total).map(|node| table[node * m + i]).collect();
        out.push(pairwise_sum(&col));
    }
    Ok(out)
}

/// Σ wᵢ f(uᵢ) √det h(uᵢ).
pub fn integrate<F>(scenario: &Scenario, grid: &Grid, depth: FrameDepth, field: F) -> Result<f64>
where
    F: Fn(&Frame) -> f64 + Sync,
{
    Ok(integrate_many(scenario, grid, depth, &[&field])?[0])
}

/// Result of a refinement-ladder convergence probe.
#[derive(Clone, Debug)]
pub struct Convergence {
    pub values: Vec<f64>,
    /// |I_last − I_prev|: a-posteriori error estimate for the finest grid.
    pub error_estimate: f64,
    /// Observed order from successive increments, when measurable.
    pub observed_order: Option<f64>,
}

/// Integrate on a ladder of ≥ 3 refinements and estimate the error.
pub fn convergence_probe<F>(
    scenario: &Scenario,
    specs: &[GridSpec],
    depth: FrameDepth,
    field: F,
) -> Result<Convergence>
where
    F: Fn(&Frame) -> f64 + Sync,
{
    if specs.len() < 3 {
        return Err(Error::BadParams("probe needs at least 3 refinements".into()));
    }
    let mut values = Vec::new();
    for spec in specs {
        let grid = Grid::from_spec(spec, scenario)?;
        values.push(integrate(scenario, &grid, depth, &field)?);
    }
    let k = values.len();
    let e1 = (values[k - 2] - values[k - 3]).abs();
    let e2 = (values[k - 1] - values[k - 2]).abs();
    let observed_order = if e1 > 1e-15 && e2 > 1e-15 && e2 < e1 {
        Some((e1 / e2).ln() / std::f64::consts::LN_2)
    } else {
        None
    };
    Ok(Convergence {
        error_estimate: e2,
        values,
        observed_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::resolve;

    #[test]
    fn jacobi_rules_integrate_weighted_polynomials() {
        // α = 0 (Legendre): ∫ x^4 = 2/5
        let (xs, ws) = gauss_jacobi(6, 0.0);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(4)).sum();
        assert!((s - 0.4).abs() < 1e-13, "legendre x^4: {s}");
        // α = 1/2 (Chebyshev-2): nodes cos(jπ/(n+1)), weights π sin²/(n+1)
        let nn = 7;
        let (xs, ws) = gauss_jacobi(nn, 0.5);
        for (j, (x, w)) in xs.iter().zip(&ws).enumerate() {
            let t = (nn - j) as f64 * std::f64::consts::PI / (nn as f64 + 1.0);
            assert!((x - t.cos()).abs() < 1e-12, "node {j}: {x} vs {}", t.cos());
            let wref = std::f64::consts::PI / (nn as f64 + 1.0) * t.sin() * t.sin();
            assert!((w - wref).abs() < 1e-12, "weight {j}: {w} vs {wref}");
        }
        // α = 1: ∫ (1−x²) x² dx = 4/15
        let (xs, ws) = gauss_jacobi(5, 1.0);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        assert!((s - 4.0 / 15.0).abs() < 1e-13, "gegenbauer x^2: {s}");
        // α = 3/2: μ0 = 3π/8
        let (_, ws) = gauss_jacobi(4, 1.5);
        let s: f64 = ws.iter().sum();
        assert!((s - 3.0 * std::f64::consts::PI / 8.0).abs() < 1e-13, "mu0(3/2): {s}");
        for a in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let (xs, ws) = gauss_jacobi(9, a);
            for (x, w) in xs.iter().zip(&ws) {
                assert!(*w > 0.0 && x.abs() < 1.0);
            }
        }
    }

    #[test]
    fn sphere_volumes() {
        let s2 = resolve("sphere2_flat").unwrap();
        let g2 = Grid::from_spec(
            &GridSpec::SphereProduct {
                n_polar: 8,
                n_azimuth: 16,
            },
            &s2,
        )
        .unwrap();
        let v2 = integrate(&s2, &g2, FrameDepth::Light, |_| 1.0).unwrap();
        assert!(
            (v2 - 4.0 * std::f64::consts::PI).abs() < 1e-9,
            "vol S² = {v2}"
        );

        let s4 = resolve("sphere4_flat").unwrap();
        let g4 = Grid::from_spec(
            &GridSpec::SphereProduct {
                n_polar: 6,
                n_azimuth: 12,
            },
            &s4,
        )
        .unwrap();
        let v4 = integrate(&s4, &g4, FrameDepth::Light, |_| 1.0).unwrap();
        let exact = 8.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0;
        assert!((v4 - exact).abs() < 1e-8 * exact, "vol S⁴ = {v4} vs {exact}");
    }

    #[test]
    fn torus_volume_and_cosine() {
        let s = crate::scenario::builtin(
            "graph_torus",
            &serde_json::json!({"n": 4, "amplitude": 0.0}),
        )
        .unwrap();
        let g = Grid::from_spec(
            &GridSpec::TorusTrapezoid {
                nodes: vec![6, 6, 6, 6],
            },
            &s,
        )
        .unwrap();
        let tau = std::f64::consts::TAU;
        let v = integrate(&s, &g, FrameDepth::Light, |_| 1.0).unwrap();
        assert!((v - tau.powi(4)).abs() < 1e-10 * v);
        let c2 = integrate(&s, &g, FrameDepth::Light, |f| f.u[0].cos().powi(2)).unwrap();
        assert!((c2 - tau.powi(4) / 2.0).abs() < 1e-10 * v, "∫cos² = {c2}");
    }

    #[test]
    fn divergence_annihilation_and_refinement() {
        let s = resolve("ellipsoid4_flat").unwrap();
        let spec = GridSpec::SphereProduct {
            n_polar: 10,
            n_azimuth: 20,
        };
        let g = Grid::from_spec(&spec, &s).unwrap();
        let div_field = |f: &Frame| {
            // ω = λ̊ δλ̊ + |λ̊|² dH
            let mut om = f.apply_sym2_form(&f.lo, &f.delta_lo);
            for a in 0..f.n {
                let extra = f.lo_norm2.mul_jet(f.dh.get(&[a]));
                let cur = om.get(&[a]).clone();
                om.set(&[a], &cur + &extra);
            }
            f.div_form(&om).val()
        };
        let norm_field = |f: &Frame| {
            let om = f.apply_sym2_form(&f.lo, &f.delta_lo);
            f.dot_form(&om, &om).sqrt()
        };
        let res = integrate_many(
            &s,
            &g,
            FrameDepth::Full,
            &[&div_field, &norm_field],
        )
        .unwrap();
        let (div_int, norm_int) = (res[0], res[1]);
        assert!(
            div_int.abs() <= 1e-7 * (1.0 + norm_int),
            "∫δω = {div_int}, ∫|ω| = {norm_int}"
        );
        let probe = convergence_probe(
            &s,
            &[
                GridSpec::SphereProduct {
                    n_polar: 6,
                    n_azimuth: 12,
                },
                GridSpec::SphereProduct {
                    n_polar: 8,
                    n_azimuth: 16,
                },
                GridSpec::SphereProduct {
                    n_polar: 10,
                    n_azimuth: 20,
                },
            ],
            FrameDepth::Light,
            |f: &Frame| f.lo_norm2.val(),
        )
        .unwrap();
        let last = probe.values.last().unwrap().abs();
        assert!(
            probe.error_estimate <= 1e-8 * (1.0 + last),
            "refinement increments: {:?}",
            probe.values
        );
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = resolve("sphere4_flat").unwrap();
        let g = Grid::from_spec(
            &GridSpec::SphereProduct {
                n_polar: 4,
                n_azimuth: 8,
            },
            &s,
        )
        .unwrap();
        std::env::set_var("EXCURV_THREADS", "1");
        let a = integrate(&s, &g, FrameDepth::Light, |f| f.hmean.val()).unwrap();
        std::env::set_var("EXCURV_THREADS", "2");
        let b = integrate(&s, &g, FrameDepth::Light, |f| f.hmean.val()).unwrap();
        std::env::remove_var("EXCURV_THREADS");
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
