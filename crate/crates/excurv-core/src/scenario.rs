//! Built-in and user-defined (metric, embedding, topology, grid)
//! configurations, plus the conformal rescaler driving covariance tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::ambient::MetricField;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::surface::{ChartKind, Embedding, Frame, FrameDepth, NormalOrientation};

/// Quadrature grid specification (geometry-free; stored with the scenario).
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    SphereProduct { n_polar: usize, n_azimuth: usize },
    TorusTrapezoid { nodes: Vec<usize> },
    None,
}

impl GridSpec {
    pub fn to_json(&self) -> Value {
        match self {
            GridSpec::SphereProduct { n_polar, n_azimuth } => {
                json!({"kind": "sphere_product", "n_polar": n_polar, "n_azimuth": n_azimuth})
            }
            GridSpec::TorusTrapezoid { nodes } => {
                json!({"kind": "torus_trapezoid", "nodes": nodes})
            }
            GridSpec::None => json!({"kind": "none"}),
        }
    }

    pub fn from_json(v: &Value, pointer: &str) -> Result<GridSpec> {
        let kind = v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| Error::schema(format!("{pointer}/kind"), "expected string"))?;
        match kind {
            "sphere_product" => {
                let np = v.get("n_polar").and_then(|x| x.as_u64()).ok_or_else(|| {
                    Error::schema(format!("{pointer}/n_polar"), "expected integer")
                })? as usize;
                let na = v.get("n_azimuth").and_then(|x| x.as_u64()).ok_or_else(|| {
                    Error::schema(format!("{pointer}/n_azimuth"), "expected integer")
                })? as usize;
                Ok(GridSpec::SphereProduct {
                    n_polar: np,
                    n_azimuth: na,
                })
            }
            "torus_trapezoid" => {
                let nodes = v
                    .get("nodes")
                    .and_then(|x| x.as_array())
                    .ok_or_else(|| Error::schema(format!("{pointer}/nodes"), "expected array"))?
                    .iter()
                    .map(|x| x.as_u64().unwrap_or(0) as usize)
                    .collect::<Vec<_>>();
                if nodes.iter().any(|&x| x == 0) {
                    return Err(Error::schema(
                        format!("{pointer}/nodes"),
                        "node counts must be positive",
                    ));
                }
                Ok(GridSpec::TorusTrapezoid { nodes })
            }
            "none" => Ok(GridSpec::None),
            other => Err(Error::schema(
                format!("{pointer}/kind"),
                format!("unknown grid kind \"{other}\""),
            )),
        }
    }
}

/// Named (metric, embedding, orientation, topology, grid) configuration.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub metric: MetricField,
    pub embedding: Embedding,
    pub orientation: NormalOrientation,
    pub euler_characteristic: i64,
    pub grid: GridSpec,
    pub n: usize,
    pub closed: bool,
}

impl Scenario {
    pub fn frame(&self, u: &[f64], depth: FrameDepth) -> Result<Frame> {
        Frame::build(&self.metric, &self.embedding, u, self.orientation, depth)
    }

    pub fn with_orientation(&self, orientation: NormalOrientation) -> Scenario {
        let mut s = self.clone();
        s.orientation = orientation;
        s
    }

    /// New scenario with metric e^{2φ}ḡ, same embedding and grid.
    pub fn conformal_rescale(&self, phi: &Expr) -> Result<Scenario> {
        phi.check_arity(self.n + 1)?;
        let mut s = self.clone();
        s.metric = self.metric.conformal_rescale(phi);
        s.name = format!("{}+rescaled", self.name);
        Ok(s)
    }

    /// Deterministic seeded chart points away from chart boundaries.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
        let n = self.n;
        (0..count)
            .map(|_| match &self.embedding.chart {
                ChartKind::SphereProduct => {
                    let mut u = Vec::with_capacity(n);
                    for _ in 0..n - 1 {
                        u.push(rng.gen_range(0.35..std::f64::consts::PI - 0.35));
                    }
                    u.push(rng.gen_range(0.0..std::f64::consts::TAU));
                    u
                }
                ChartKind::Torus { periods } => {
                    (0..n).map(|a| rng.gen_range(0.0..periods[a])).collect()
                }
                ChartKind::Open => (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect(),
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "dimension": self.n,
            "metric": self.metric.to_json(),
            "embedding": self.embedding.to_json(),
            "normal_orientation": match self.orientation {
                NormalOrientation::AsBuilt => "as_built",
                NormalOrientation::Flipped => "flipped",
            },
            "euler_characteristic": self.euler_characteristic,
            "grid": self.grid.to_json(),
            "closed": self.closed,
        })
    }

    pub fn from_json(v: &Value) -> Result<Scenario> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::schema("", "expected object"))?;
        let name = obj
            .get("name")
            .and_then(|x| x.as_str())
            .ok_or_else(|| Error::schema("/name", "expected string"))?
            .to_string();
        let n = obj
            .get("dimension")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::schema("/dimension", "expected integer"))? as usize;
        let metric = MetricField::from_json(
            obj.get("metric")
                .ok_or_else(|| Error::schema("/metric", "missing"))?,
            "/metric",
        )?;
        let embedding = Embedding::from_json(
            obj.get("embedding")
                .ok_or_else(|| Error::schema("/embedding", "missing"))?,
            "/embedding",
        )?;
        if embedding.n != n {
            return Err(Error::schema("/embedding/n", "dimension mismatch"));
        }
        if metric.dim != n + 1 {
            return Err(Error::schema("/metric/dim", "must equal dimension + 1"));
        }
        let orientation = match obj.get("normal_orientation").and_then(|x| x.as_str()) {
            Some("as_built") | None => NormalOrientation::AsBuilt,
            Some("flipped") => NormalOrientation::Flipped,
            Some(other) => {
                return Err(Error::schema(
                    "/normal_orientation",
                    format!("unknown orientation \"{other}\""),
                ))
            }
        };
        let euler_characteristic = obj
            .get("euler_characteristic")
            .and_then(|x| x.as_i64())
            .ok_or_else(|| Error::schema("/euler_characteristic", "expected integer"))?;
        let grid = GridSpec::from_json(
            obj.get("grid")
                .ok_or_else(|| Error::schema("/grid", "missing"))?,
            "/grid",
        )?;
        let closed = obj
            .get("closed")
            .and_then(|x| x.as_bool())
            .unwrap_or(!matches!(embedding.chart, ChartKind::Open));
        Ok(Scenario {
            name,
            metric,
            embedding,
            orientation,
            euler_characteristic,
            grid,
            n,
            closed,
        })
    }

    /// Stable content hash of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let s = serde_json::to_string(&self.to_json()).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in s.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }
}

/// Direction components of the iterated spherical chart on S^n:
/// ω_1 = cos θ_1, ω_2 = sin θ_1 cos θ_2, ..., ω_{n+1} = sin θ_1 ⋯ sin θ_{n−1} sin φ.
pub fn sphere_directions(n: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut e = Expr::constant(1.0);
        for k in 0..i.min(n - 1) {
            e = e * Expr::sin(Expr::var(k));
        }
        if i < n - 1 {
            e = e * Expr::cos(Expr::var(i));
        } else if i == n - 1 {
            e = e * Expr::cos(Expr::var(n - 1));
        } else {
            e = e * Expr::sin(Expr::var(n - 1));
        }
        out.push(e);
    }
    out
}

fn sphere_chart_embedding(n: usize, scale: &[f64]) -> Result<Embedding> {
    let dirs = sphere_directions(n);
    let comps = dirs
        .into_iter()
        .enumerate()
        .map(|(i, e)| Expr::constant(scale[i]) * e)
        .collect();
    Embedding::new(n, comps, ChartKind::SphereProduct)
}

fn default_sphere_grid(n: usize) -> GridSpec {
    match n {
        2 => GridSpec::SphereProduct {
            n_polar: 16,
            n_azimuth: 32,
        },
        3 => GridSpec::SphereProduct {
            n_polar: 12,
            n_azimuth: 24,
        },
        4 => GridSpec::SphereProduct {
            n_polar: 10,
            n_azimuth: 20,
        },
        _ => GridSpec::SphereProduct {
            n_polar: 5,
            n_azimuth: 10,
        },
    }
}

fn sphere_euler(n: usize) -> i64 {
    if n % 2 == 0 {
        2
    } else {
        0
    }
}

/// Seeded analytic conformal factor with bounded coefficients; the budget
/// keeps e^{2φ} metrics uniformly positive definite on |x| ≲ 2.5.
pub fn random_conformal_factor(dim: usize, seed: u64, amp: f64) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = Expr::constant(0.0);
    for i in 0..dim {
        let c = rng.gen_range(-1.0..1.0) * amp;
        phi = phi + Expr::constant(c) * Expr::var(i);
    }
    for i in 0..dim {
        for j in i..dim {
            let c = rng.gen_range(-1.0..1.0) * amp * 0.5;
            phi = phi + Expr::constant(c) * Expr::var(i) * Expr::var(j);
        }
    }
    for i in 0..dim {
        let c = rng.gen_range(-1.0..1.0) * amp;
        phi = phi + Expr::constant(c) * Expr::sin(Expr::var(i));
    }
    phi
}

/// Seeded metric perturbation ḡ = δ + ε·(trigonometric symmetric bumps);
/// 2π-periodic in every coordinate so it restricts to flat-torus backgrounds.
pub fn perturbed_metric(dim: usize, eps: f64, seed: u64) -> MetricField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut comps: Vec<Vec<Expr>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for i in 0..dim {
        for j in i..dim {
            let c1 = rng.gen_range(-1.0..1.0) * eps;
            let c2 = rng.gen_range(-1.0..1.0) * eps;
            let v1 = rng.gen_range(0..dim);
            let v2 = rng.gen_range(0..dim);
            let bump = Expr::constant(c1) * Expr::sin(Expr::var(v1) + Expr::var(v2))
                + Expr::constant(c2) * Expr::cos(Expr::var((i + j) % dim));
            let e = Expr::add(comps[i][j].clone(), bump);
            comps[i][j] = e.clone();
            if i != j {
                comps[j][i] = e;
            }
        }
    }
    MetricField { dim, comps }
}

/// Construct a named builtin scenario.
pub fn builtin(name: &str, params: &Value) -> Result<Scenario> {
    let n = params.get("n").and_then(|x| x.as_u64()).unwrap_or(4) as usize;
    if !(2..=7).contains(&n) {
        return Err(Error::BadParams(format!("dimension n = {n} out of range")));
    }
    let d = n + 1;
    let get_axes = |params: &Value| -> Result<Vec<f64>> {
        match params.get("axes").and_then(|x| x.as_array()) {
            Some(a) => {
                let axes: Vec<f64> = a.iter().map(|x| x.as_f64().unwrap_or(1.0)).collect();
                if axes.len() != d {
                    return Err(Error::BadParams(format!(
                        "axes must have {d} entries, got {}",
                        axes.len()
                    )));
                }
                if axes.iter().any(|&a| a <= 0.0) {
                    return Err(Error::BadParams("axes must be positive".into()));
                }
                Ok(axes)
            }
            None => Err(Error::BadParams("missing axes".into())),
        }
    };
    let seed = params.get("seed").and_then(|x| x.as_u64()).unwrap_or(1);
    let amp = params.get("amp").and_then(|x| x.as_f64()).unwrap_or(0.05);

    match name {
        "hyperplane_flat" => {
            let mut comps: Vec<Expr> = (0..n).map(Expr::var).collect();
            comps.push(Expr::constant(0.0));
            Ok(Scenario {
                name: format!("hyperplane{n}_flat"),
                metric: MetricField::flat(d),
                embedding: Embedding::new(n, comps, ChartKind::Open)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: 0,
                grid: GridSpec::None,
                n,
                closed: false,
            })
        }
        "hyperplane_perturbed" => {
            let eps = params.get("eps").and_then(|x| x.as_f64()).unwrap_or(0.05);
            let mut comps: Vec<Expr> = (0..n).map(Expr::var).collect();
            comps.push(Expr::constant(0.0));
            Ok(Scenario {
                name: format!("hyperplane{n}_perturbed"),
                metric: perturbed_metric(d, eps, seed),
                embedding: Embedding::new(n, comps, ChartKind::Open)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: 0,
                grid: GridSpec::None,
                n,
                closed: false,
            })
        }
        "sphere_flat" => {
            let r = params.get("radius").and_then(|x| x.as_f64()).unwrap_or(1.0);
            if r <= 0.0 {
                return Err(Error::BadParams("radius must be positive".into()));
            }
            let axes = vec![r; d];
            let mut s = Scenario {
                name: format!("sphere{n}_flat"),
                metric: MetricField::flat(d),
                embedding: sphere_chart_embedding(n, &axes)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: sphere_euler(n),
                grid: default_sphere_grid(n),
                n,
                closed: true,
            };
            fix_convex_orientation(&mut s)?;
            Ok(s)
        }
        "ellipsoid_flat" => {
            let axes = get_axes(params)?;
            let mut s = Scenario {
                name: format!("ellipsoid{n}_flat"),
                metric: MetricField::flat(d),
                embedding: sphere_chart_embedding(n, &axes)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: sphere_euler(n),
                grid: default_sphere_grid(n),
                n,
                closed: true,
            };
            fix_convex_orientation(&mut s)?;
            Ok(s)
        }
        "star_shaped_flat" => {
            // x = ρ(ω)·ω with ρ a positive expression of the direction vector
            let rho = match params.get("rho") {
                Some(v) => Expr::from_json(v, "/rho")?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut rho = Expr::constant(1.0);
                    for i in 0..d {
                        let c = rng.gen_range(-1.0..1.0) * amp;
                        rho = rho + Expr::constant(c) * Expr::var(i);
                    }
                    for i in 0..d {
                        for j in i + 1..d {
                            let c = rng.gen_range(-1.0..1.0) * amp;
                            rho = rho + Expr::constant(c) * Expr::var(i) * Expr::var(j);
                        }
                    }
                    rho
                }
            };
            let dirs = sphere_directions(n);
            let rho_sub = substitute(&rho, &dirs)?;
            let comps = dirs
                .iter()
                .map(|dir| Expr::mul(rho_sub.clone(), dir.clone()))
                .collect();
            let mut s = Scenario {
                name: format!("star{n}_flat"),
                metric: MetricField::flat(d),
                embedding: Embedding::new(n, comps, ChartKind::SphereProduct)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: sphere_euler(n),
                grid: default_sphere_grid(n),
                n,
                closed: true,
            };
            fix_convex_orientation(&mut s)?;
            Ok(s)
        }
        "graph_torus" => {
            let height = match params.get("height") {
                Some(v) => Expr::from_json(v, "/height")?,
                None => {
                    let a = params
                        .get("amplitude")
                        .and_then(|x| x.as_f64())
                        .unwrap_or(0.3);
                    Expr::constant(a) * Expr::sin(Expr::var(0)) * Expr::cos(Expr::var(1 % n))
                }
            };
            let mut comps: Vec<Expr> = (0..n).map(Expr::var).collect();
            comps.push(height);
            Ok(Scenario {
                name: format!("torus{n}_graph"),
                metric: MetricField::flat(d),
                embedding: Embedding::new(
                    n,
                    comps,
                    ChartKind::Torus {
                        periods: vec![std::f64::consts::TAU; n],
                    },
                )?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: 0,
                grid: GridSpec::TorusTrapezoid { nodes: vec![12; n] },
                n,
                closed: true,
            })
        }
        "sphere_in_round_sphere" => {
            let r = params.get("radius").and_then(|x| x.as_f64()).unwrap_or(0.8);
            let axes = vec![r; d];
            let mut s = Scenario {
                name: format!("sphere{n}_round"),
                metric: MetricField::round_sphere(d),
                embedding: sphere_chart_embedding(n, &axes)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: sphere_euler(n),
                grid: default_sphere_grid(n),
                n,
                closed: true,
            };
            fix_convex_orientation(&mut s)?;
            Ok(s)
        }
        "ellipsoid_in_round_sphere" => {
            let axes = get_axes(params)?;
            let mut s = Scenario {
                name: format!("ellipsoid{n}_round"),
                metric: MetricField::round_sphere(d),
                embedding: sphere_chart_embedding(n, &axes)?,
                orientation: NormalOrientation::AsBuilt,
                euler_characteristic: sphere_euler(n),
                grid: default_sphere_grid(n),
                n,
                closed: true,
            };
            fix_convex_orientation(&mut s)?;
            Ok(s)
        }
        "sphere_cflat" => {
            let r = params.get("radius").and_then(|x| x.as_f64()).unwrap_or(1.0);
            let mut base = builtin("sphere_flat", &json!({"n": n, "radius": r}))?;
            base.metric =
                MetricField::flat(d).conformal_rescale(&random_conformal_factor(d, seed, amp));
            base.name = format!("sphere{n}_cflat");
            fix_convex_orientation(&mut base)?;
            Ok(base)
        }
        "ellipsoid_cflat" => {
            let axes = get_axes(params)?;
            let mut base = builtin("ellipsoid_flat", &json!({"n": n, "axes": axes}))?;
            base.metric =
                MetricField::flat(d).conformal_rescale(&random_conformal_factor(d, seed, amp));
            base.name = format!("ellipsoid{n}_cflat");
            fix_convex_orientation(&mut base)?;
            Ok(base)
        }
        "torus_cflat" => {
            let mut base = builtin("graph_torus", params)?;
            // periodic conformal factor keeps the torus background consistent
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut phi = Expr::constant(0.0);
            for i in 0..d {
                let c = rng.gen_range(-1.0..1.0) * amp;
                phi = phi + Expr::constant(c) * Expr::sin(Expr::var(i));
                let c2 = rng.gen_range(-1.0..1.0) * amp;
                phi = phi + Expr::constant(c2) * Expr::cos(Expr::var((i + 1) % d));
            }
            base.metric = base.metric.conformal_rescale(&phi);
            base.name = format!("torus{n}_cflat");
            Ok(base)
        }
        "ellipsoid_perturbed" => {
            let axes = get_axes(params)?;
            let eps = params.get("eps").and_then(|x| x.as_f64()).unwrap_or(0.04);
            let mut base = builtin("ellipsoid_flat", &json!({"n": n, "axes": axes}))?;
            base.metric = perturbed_metric(d, eps, seed);
            base.name = format!("ellipsoid{n}_perturbed");
            fix_convex_orientation(&mut base)?;
            Ok(base)
        }
        "torus_perturbed" => {
            let eps = params.get("eps").and_then(|x| x.as_f64()).unwrap_or(0.04);
            let mut base = builtin("graph_torus", params)?;
            base.metric = perturbed_metric(d, eps, seed);
            base.name = format!("torus{n}_perturbed");
            Ok(base)
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Resolve a scenario by catalog name with default parameters, or from a
/// JSON file path.
pub fn resolve(spec: &str) -> Result<Scenario> {
    if spec.ends_with(".json") {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| Error::BadParams(format!("cannot read {spec}: {e}")))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::schema("", format!("invalid JSON: {e}")))?;
        return Scenario::from_json(&v);
    }
    match spec {
        "sphere2_flat" => builtin("sphere_flat", &json!({"n": 2, "radius": 1.0})),
        "sphere3_flat" => builtin("sphere_flat", &json!({"n": 3, "radius": 1.0})),
        "sphere4_flat" => builtin("sphere_flat", &json!({"n": 4, "radius": 1.0})),
        "ellipsoid4_flat" => builtin(
            "ellipsoid_flat",
            &json!({"n": 4, "axes": [1.0, 1.08, 0.95, 1.05, 1.02]}),
        ),
        "ellipsoid3_flat" => builtin(
            "ellipsoid_flat",
            &json!({"n": 3, "axes": [1.0, 1.08, 0.94, 1.05]}),
        ),
        "ellipsoid2_flat" => builtin("ellipsoid_flat", &json!({"n": 2, "axes": [1.0, 1.09, 0.94]})),
        "ellipsoid4_cflat" => builtin(
            "ellipsoid_cflat",
            &json!({"n": 4, "axes": [1.0, 1.08, 0.95, 1.05, 1.02], "seed": 7}),
        ),
        "ellipsoid3_cflat" => builtin(
            "ellipsoid_cflat",
            &json!({"n": 3, "axes": [1.0, 1.08, 0.94, 1.05], "seed": 7}),
        ),
        "ellipsoid2_cflat" => builtin(
            "ellipsoid_cflat",
            &json!({"n": 2, "axes": [1.0, 1.09, 0.94], "seed": 7}),
        ),
        "ellipsoid4_perturbed" => builtin(
            "ellipsoid_perturbed",
            &json!({"n": 4, "axes": [1.0, 1.07, 0.95, 1.03, 1.05], "eps": 0.04, "seed": 11}),
        ),
        "ellipsoid3_perturbed" => builtin(
            "ellipsoid_perturbed",
            &json!({"n": 3, "axes": [1.0, 1.07, 0.95, 1.03], "eps": 0.05, "seed": 11}),
        ),
        "sphere4_round" => builtin("sphere_in_round_sphere", &json!({"n": 4, "radius": 0.8})),
        "ellipsoid4_round" => builtin(
            "ellipsoid_in_round_sphere",
            &json!({"n": 4, "axes": [0.8, 0.85, 0.77, 0.83, 0.8]}),
        ),
        "star4_flat" => builtin("star_shaped_flat", &json!({"n": 4, "seed": 5, "amp": 0.08})),
        "torus4_graph" => builtin("graph_torus", &json!({"n": 4, "amplitude": 0.3})),
        "torus4_cflat" => builtin("torus_cflat", &json!({"n": 4, "amplitude": 0.3, "seed": 5})),
        "hyperplane4_flat" => builtin("hyperplane_flat", &json!({"n": 4})),
        "hyperplane3_flat" => builtin("hyperplane_flat", &json!({"n": 3})),
        "torus5_perturbed" => builtin(
            "torus_perturbed",
            &json!({"n": 5, "amplitude": 0.25, "eps": 0.05, "seed": 13}),
        ),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

pub fn catalog() -> Vec<&'static str> {
    vec![
        "sphere2_flat",
        "sphere3_flat",
        "sphere4_flat",
        "ellipsoid2_flat",
        "ellipsoid3_flat",
        "ellipsoid4_flat",
        "ellipsoid2_cflat",
        "ellipsoid3_cflat",
        "ellipsoid4_cflat",
        "ellipsoid3_perturbed",
        "ellipsoid4_perturbed",
        "sphere4_round",
        "ellipsoid4_round",
        "star4_flat",
        "torus4_graph",
        "torus4_cflat",
        "torus5_perturbed",
        "hyperplane3_flat",
        "hyperplane4_flat",
    ]
}

/// Substitute the given expressions for the variables of `e`.
fn substitute(e: &Expr, subs: &[Expr]) -> Result<Expr> {
    Ok(match e {
        Expr::Const(c) => Expr::Const(*c),
        Expr::Var(i) => {
            if *i >= subs.len() {
                return Err(Error::Arity {
                    index: *i,
                    arity: subs.len(),
                });
            }
            subs[*i].clone()
        }
        Expr::Add(a, b) => Expr::add(substitute(a, subs)?, substitute(b, subs)?),
        Expr::Sub(a, b) => Expr::sub(substitute(a, subs)?, substitute(b, subs)?),
        Expr::Mul(a, b) => Expr::mul(substitute(a, subs)?, substitute(b, subs)?),
        Expr::Div(a, b) => Expr::div(substitute(a, subs)?, substitute(b, subs)?),
        Expr::Neg(a) => Expr::neg(substitute(a, subs)?),
        Expr::Pow(a, k) => Expr::pow(substitute(a, subs)?, *k),
        Expr::Sqrt(a) => Expr::sqrt(substitute(a, subs)?),
        Expr::Exp(a) => Expr::exp(substitute(a, subs)?),
        Expr::Sin(a) => Expr::sin(substitute(a, subs)?),
        Expr::Cos(a) => Expr::cos(substitute(a, subs)?),
        Expr::Log(a) => Expr::log(substitute(a, subs)?),
    })
}

/// Builtins declare the orientation that makes H > 0 on convex model
/// surfaces; probe one interior point and flip if needed.
fn fix_convex_orientation(s: &mut Scenario) -> Result<()> {
    let u: Vec<f64> = (0..s.n)
        .map(|a| if a + 1 < s.n { 1.1 + 0.1 * a as f64 } else { 2.0 })
        .collect();
    let f = s.frame(&u, FrameDepth::Light)?;
    if f.hmean.val() < 0.0 {
        s.orientation = match s.orientation {
            NormalOrientation::AsBuilt => NormalOrientation::Flipped,
            NormalOrientation::Flipped => NormalOrientation::AsBuilt,
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_directions_unit_norm() {
        for n in 2..=5 {
            let dirs = sphere_directions(n);
            let u: Vec<f64> = (0..n).map(|i| 0.4 + 0.3 * i as f64).collect();
            let mut norm = 0.0;
            for d in &dirs {
                let v = d.eval(&u).unwrap();
                norm += v * v;
            }
            assert!((norm - 1.0).abs() < 1e-14, "n={n}: |ω|² = {norm}");
        }
    }

    #[test]
    fn round_trip_canonical_json() {
        let s = resolve("sphere4_flat").unwrap();
        let j = s.to_json();
        let back = Scenario::from_json(&j).unwrap();
        assert_eq!(
            serde_json::to_string(&back.to_json()).unwrap(),
            serde_json::to_string(&j).unwrap()
        );
    }

    #[test]
    fn schema_error_pointers() {
        let mut j = resolve("sphere4_flat").unwrap().to_json();
        j.as_object_mut().unwrap().remove("euler_characteristic");
        match Scenario::from_json(&j) {
            Err(Error::Schema { pointer, .. }) => {
                assert_eq!(pointer, "/euler_characteristic")
            }
            other => panic!("expected schema error, got {other:?}"),
        }
        let mut j2 = resolve("sphere4_flat").unwrap().to_json();
        j2["metric"]["comps"][0][0] = json!({"op": "gamma", "args": []});
        match Scenario::from_json(&j2) {
            Err(Error::Schema { pointer, .. }) => {
                assert_eq!(pointer, "/metric/comps/0/0/op")
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(
            resolve("klein_bottle"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn rescale_by_zero_is_identity() {
        let s = resolve("ellipsoid4_flat").unwrap();
        let r = s.conformal_rescale(&Expr::constant(0.0)).unwrap();
        let u = [1.2, 0.9, 1.4, 2.0];
        let f0 = s.frame(&u, FrameDepth::Light).unwrap();
        let f1 = r.frame(&u, FrameDepth::Light).unwrap();
        for (a, b) in f0.h.comps.iter().zip(&f1.h.comps) {
            assert!((a.val() - b.val()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_rescale_scales_h() {
        let s = resolve("sphere4_flat").unwrap();
        let c = 0.3;
        let r = s.conformal_rescale(&Expr::constant(c)).unwrap();
        let u = [1.2, 0.9, 1.4, 2.0];
        let f0 = s.frame(&u, FrameDepth::Light).unwrap();
        let f1 = r.frame(&u, FrameDepth::Light).unwrap();
        // Ĥ = e^{−c} H for constant φ
        assert!((f1.hmean.val() - (-c).exp() * f0.hmean.val()).abs() < 1e-11);
    }

    #[test]
    fn rescale_composition() {
        let s = resolve("ellipsoid4_flat").unwrap();
        let phi = random_conformal_factor(5, 21, 0.05);
        let psi = random_conformal_factor(5, 22, 0.05);
        let a = s
            .conformal_rescale(&phi)
            .unwrap()
            .conformal_rescale(&psi)
            .unwrap();
        let b = s
            .conformal_rescale(&Expr::add(phi.clone(), psi.clone()))
            .unwrap();
        let u = [1.0, 1.3, 0.8, 3.1];
        let fa = a.frame(&u, FrameDepth::Light).unwrap();
        let fb = b.frame(&u, FrameDepth::Light).unwrap();
        let scale = 1.0 + fa.ll.max_abs();
        for (x, y) in fa.ll.comps.iter().zip(&fb.ll.comps) {
            assert!((x.val() - y.val()).abs() < 1e-10 * scale);
        }
    }
}
