//! Hypersurface frame: induced metric, unit normal, second fundamental form,
//! intrinsic curvature, ambient pullbacks with precontracted normal slots,
//! normal-derivative components, and tangential derivatives of derived
//! fields — everything the invariant and operator formulas consume.
//!
//! The whole pipeline is evaluated in chart-jet arithmetic, so tangential
//! derivatives of derived fields (δδ(λ̊²), Δ|λ̊|², δδW̊, ΔJ, ...) are exact
//! to roundoff. Index 0 is the normal slot in all pullback families.

use crate::ambient::{covariant_derivative, AmbientCurvature, MetricField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jets::Jet;
use crate::tensor::{invert_sym2, Tensor, Variance};

use Variance::{Lower, Upper};

/// Chart topology metadata used by quadrature and the scenario layer.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartKind {
    /// Iterated spherical angles (θ_1..θ_{n-1}, φ): polar angles in (0, π),
    /// azimuth with period 2π. Closed.
    SphereProduct,
    /// Periodic box chart with the given periods. Closed.
    Torus { periods: Vec<f64> },
    /// Non-compact chart (pointwise evaluation only).
    Open,
}

/// Analytic embedding M^n -> X^{n+1}: n+1 expressions in n chart variables.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub n: usize,
    pub comps: Vec<Expr>,
    pub chart: ChartKind,
}

impl Embedding {
    pub fn new(n: usize, comps: Vec<Expr>, chart: ChartKind) -> Result<Embedding> {
        if comps.len() != n + 1 {
            return Err(Error::Shape(format!(
                "embedding needs {} components, got {}",
                n + 1,
                comps.len()
            )));
        }
        Ok(Embedding { n, comps, chart })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let chart = match &self.chart {
            ChartKind::SphereProduct => serde_json::json!({"kind": "sphere_product"}),
            ChartKind::Torus { periods } => {
                serde_json::json!({"kind": "torus", "periods": periods})
            }
            ChartKind::Open => serde_json::json!({"kind": "open"}),
        };
        serde_json::json!({
            "n": self.n,
            "comps": self.comps.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
            "chart": chart,
        })
    }

    pub fn from_json(v: &serde_json::Value, pointer: &str) -> Result<Embedding> {
        let n = v
            .get("n")
            .and_then(|d| d.as_u64())
            .ok_or_else(|| Error::schema(format!("{pointer}/n"), "expected integer"))?
            as usize;
        let comps_v = v
            .get("comps")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::schema(format!("{pointer}/comps"), "expected array"))?;
        let mut comps = Vec::new();
        for (i, c) in comps_v.iter().enumerate() {
            comps.push(Expr::from_json(c, &format!("{pointer}/comps/{i}"))?);
        }
        let chart_v = v
            .get("chart")
            .ok_or_else(|| Error::schema(format!("{pointer}/chart"), "missing"))?;
        let kind = chart_v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| Error::schema(format!("{pointer}/chart/kind"), "expected string"))?;
        let chart = match kind {
            "sphere_product" => ChartKind::SphereProduct,
            "torus" => {
                let periods = chart_v
                    .get("periods")
                    .and_then(|p| p.as_array())
                    .ok_or_else(|| {
                        Error::schema(format!("{pointer}/chart/periods"), "expected array")
                    })?
                    .iter()
                    .map(|x| x.as_f64().unwrap_or(std::f64::consts::TAU))
                    .collect();
                ChartKind::Torus { periods }
            }
            "open" => ChartKind::Open,
            other => {
                return Err(Error::schema(
                    format!("{pointer}/chart/kind"),
                    format!("unknown chart kind \"{other}\""),
                ))
            }
        };
        Embedding::new(n, comps, chart)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalOrientation {
    AsBuilt,
    Flipped,
}

/// How many tangential derivative orders the frame fields support.
/// `Full` (embedding jets of order 5) enables ΔJ, Δσ fields and the
/// fourth-order operators; `Light` (order 4) covers every pointwise
/// invariant and is used for high-dimension weight-law checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameDepth {
    Light,
    Full,
}

/// Pullback family of an ambient tensor in the adapted frame (N, ∂_1..∂_n):
/// index 0 is the normal leg, 1..=n the tangents. Stored flat, row-major.
#[derive(Clone, Debug)]
pub struct Family {
    pub n: usize,
    pub rank: usize,
    pub comps: Vec<Jet>,
}

impl Family {
    pub fn get(&self, idx: &[usize]) -> &Jet {
        let mut f = 0;
        for &i in idx {
            f = f * (self.n + 1) + i;
        }
        &self.comps[f]
    }
}

fn pull_family(t: &Tensor<Jet>, legs: &[Vec<Jet>]) -> Family {
    let ambient_dim = t.dim;
    let nlegs = legs.len(); // n + 1
    let rank = t.rank();
    let chart_dim = legs[0][0].dim();
    let order = t.comps[0]
        .order()
        .min(legs.iter().map(|l| l[0].order()).min().unwrap());
    let mut cur: Vec<Jet> = t.comps.clone();
    let mut ambient_slots = rank;
    let mut leg_slots = 0usize;
    while ambient_slots > 0 {
        let a_size = ambient_dim.pow((ambient_slots - 1) as u32);
        let l_size = nlegs.pow(leg_slots as u32);
        let mut next: Vec<Jet> = Vec::with_capacity(a_size * nlegs * l_size);
        for a in 0..a_size {
            for leg in legs {
                for l in 0..l_size {
                    let mut acc = Jet::zero(chart_dim, order);
                    for (d, lv) in leg.iter().enumerate() {
                        acc.mul_acc(&cur[(a * ambient_dim + d) * l_size + l], lv, 1.0);
                    }
                    next.push(acc);
                }
            }
        }
        cur = next;
        ambient_slots -= 1;
        leg_slots += 1;
    }
    Family {
        n: nlegs - 1,
        rank,
        comps: cur,
    }
}

/// Pointwise (value-level) pullback family; works for any rank including
/// appended derivative slots.
fn pull_family_values(t: &Tensor<Jet>, legs: &[Vec<f64>]) -> Vec<f64> {
    let vals: Vec<f64> = t.comps.iter().map(|j| j.val()).collect();
    pull_family_values_f(vals, t.dim, t.rank(), legs)
}

fn pull_family_values_t(t: &Tensor<f64>, legs: &[Vec<f64>]) -> Vec<f64> {
    pull_family_values_f(t.comps.clone(), t.dim, t.rank(), legs)
}

fn pull_family_values_f(
    vals: Vec<f64>,
    ambient_dim: usize,
    rank: usize,
    legs: &[Vec<f64>],
) -> Vec<f64> {
    let nlegs = legs.len();
    let mut cur = vals;
    let mut ambient_slots = rank;
    let mut leg_slots = 0usize;
    while ambient_slots > 0 {
        let a_size = ambient_dim.pow((ambient_slots - 1) as u32);
        let l_size = nlegs.pow(leg_slots as u32);
        let mut next: Vec<f64> = Vec::with_capacity(a_size * nlegs * l_size);
        for a in 0..a_size {
            for leg in legs {
                for l in 0..l_size {
                    let mut acc = 0.0;
                    for (d, lv) in leg.iter().enumerate() {
                        acc += cur[(a * ambient_dim + d) * l_size + l] * lv;
                    }
                    next.push(acc);
                }
            }
        }
        cur = next;
        ambient_slots -= 1;
        leg_slots += 1;
    }
    cur
}

pub fn fam_idx(n: usize, idx: &[usize]) -> usize {
    let mut f = 0;
    for &i in idx {
        f = f * (n + 1) + i;
    }
    f
}

/// Intrinsic curvature from metric jets: (inverse, Γ, lowered Riemann,
/// Ricci, scal). Same conventions as the ambient module.
fn intrinsic_curvature(
    h: &Tensor<Jet>,
) -> Result<(Tensor<Jet>, Tensor<Jet>, Tensor<Jet>, Tensor<Jet>, Jet)> {
    let n = h.dim;
    let order = h.comps[0].order();
    let h_inv = invert_sym2(h)?;
    let gamma = Tensor::from_fn(n, vec![Upper, Lower, Lower], |ix| {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        let mut acc = Jet::zero(n, order - 1);
        for l in 0..n {
            let mut term = h.get(&[j, l]).deriv(i);
            term.acc(&h.get(&[i, l]).deriv(j), 1.0);
            term.acc(&h.get(&[i, j]).deriv(l), -1.0);
            acc.mul_acc(h_inv.get(&[k, l]), &term, 1.0);
        }
        acc.scale(0.5)
    });
    let riem_upper = Tensor::from_fn(n, vec![Lower, Lower, Lower, Upper], |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let mut acc = gamma.get(&[l, j, k]).deriv_trunc(i, order - 2);
        acc.acc(&gamma.get(&[l, i, k]).deriv_trunc(j, order - 2), -1.0);
        for m in 0..n {
            acc.mul_acc(gamma.get(&[l, i, m]), gamma.get(&[m, j, k]), 1.0);
            acc.mul_acc(gamma.get(&[l, j, m]), gamma.get(&[m, i, k]), -1.0);
        }
        acc
    });
    let riemann = Tensor::from_fn(n, vec![Lower, Lower, Lower, Lower], |ix| {
        let mut acc = Jet::zero(n, order - 2);
        for m in 0..n {
            acc.mul_acc(
                riem_upper.get(&[ix[0], ix[1], ix[2], m]),
                h.get(&[m, ix[3]]),
                1.0,
            );
        }
        acc
    });
    let ric = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
        let mut acc = Jet::zero(n, order - 2);
        for i in 0..n {
            acc.acc(riem_upper.get(&[i, ix[0], ix[1], i]), 1.0);
        }
        acc
    });
    let mut scal = Jet::zero(n, order - 2);
    for j in 0..n {
        for k in 0..n {
            scal.mul_acc(h_inv.get(&[j, k]), ric.get(&[j, k]), 1.0);
        }
    }
    Ok((h_inv, gamma, riemann, ric, scal))
}

/// All hypersurface data at one chart point.
pub struct Frame {
    pub n: usize,
    pub depth: FrameDepth,
    pub u: Vec<f64>,
    /// Ambient position values x(u).
    pub x0: Vec<f64>,
    /// Chart jets of the embedding components.
    pub x: Vec<Jet>,
    /// Tangents ∂_a x^i as chart jets, indexed [a][i].
    pub dx: Vec<Vec<Jet>>,
    /// Unit normal N^i (upper ambient index), chart jets.
    pub normal: Vec<Jet>,
    /// Ambient curvature bundle at x(u).
    pub ambient: AmbientCurvature,
    /// ḡ∘x and its inverse as chart-jet matrices (ambient indices).
    pub gbar: Tensor<Jet>,
    pub gbar_inv: Tensor<Jet>,

    pub h: Tensor<Jet>,
    pub h_inv: Tensor<Jet>,
    pub sqrt_det_h: Jet,
    /// Intrinsic Christoffels Γ^c_{ab}.
    pub gamma_h: Tensor<Jet>,
    /// Intrinsic lowered curvature tensor, Ricci, scalar.
    pub riem_h: Tensor<Jet>,
    pub ric_h: Tensor<Jet>,
    pub scal_h: Jet,
    /// J = scal/(2(n−1)) as a chart-jet field.
    pub j_h: Jet,
    /// Intrinsic Schouten (n ≥ 3).
    pub p_h: Option<Tensor<Jet>>,
    /// Intrinsic Weyl (zero tensor for n = 3, None for n = 2).
    pub w_h: Option<Tensor<Jet>>,

    /// Second fundamental form L, mean curvature H (field), trace-free λ̊.
    pub ll: Tensor<Jet>,
    pub hmean: Jet,
    pub lo: Tensor<Jet>,
    /// (λ̊²)_{ab} = λ̊_a^c λ̊_{cb} and |λ̊|² as fields.
    pub lo2: Tensor<Jet>,
    pub lo_norm2: Jet,

    /// ι*J̄ as a chart-jet field.
    pub jbar: Jet,
    /// P̄ pullbacks: tangential block, P̄(∂_a, N), P̄(N,N) — all fields.
    pub pbar: Tensor<Jet>,
    pub pbar0: Tensor<Jet>,
    pub pbar00: Jet,
    /// W̊_{ab} = W̄(N,∂_a,∂_b,N) field.
    pub wring: Tensor<Jet>,
    /// (W̄₀)_{abc} = W̄(∂_a,∂_b,∂_c,N) field.
    pub w0: Tensor<Jet>,
    /// Full Weyl pullback values in the adapted frame, (n+1)^4, index 0 = N.
    pub weyl_fam: Vec<f64>,
    /// Full Riemann pullback values in the adapted frame, (n+1)^4.
    pub riem_vals: Vec<f64>,
    /// Ric̄ pullback values: tangential block, (∂_a,N), (N,N).
    pub ricbar: Tensor<f64>,
    pub ricbar0: Vec<f64>,
    pub ricbar00: f64,
    /// Ḡ_{ab} = R̄(N,∂_a,∂_b,N) values.
    pub gbar_nn: Tensor<f64>,
    /// C̄ pullback values: C̄(∂_a,∂_b; N) and C̄(N,N; ∂_a).
    pub cbar0: Tensor<f64>,
    pub cbar00: Vec<f64>,
    /// B̄(N,N) and tangential trace h^{ab} B̄_{ab}.
    pub bbar00: f64,
    pub bbar_tt: f64,
    /// Normal derivatives (values): ∇̄_N P̄(∂_a,∂_b), ∇̄_N W̄(N,∂_a,∂_b,N),
    /// ∇̄_N R̄(N,∂_a,∂_b,N), ∇̄_N Ric̄(N,N), ∇̄²Ric̄(N,N;N,N), dJ̄(N), Hess̄J̄(N,N).
    pub ndp: Tensor<f64>,
    pub ndw: Tensor<f64>,
    pub ndriem: Tensor<f64>,
    pub ndric00: f64,
    pub nd2ric00: f64,
    pub jbar_n: f64,
    pub jbar_nn: f64,

    /// δ(λ̊) as a 1-form field.
    pub delta_lo: Tensor<Jet>,
    /// dH field.
    pub dh: Tensor<Jet>,
    /// Shared composition engine at this chart point.
    pub composer: crate::jets::Composer,
}

impl Frame {
    pub fn build(
        metric: &MetricField,
        emb: &Embedding,
        u: &[f64],
        orientation: NormalOrientation,
        depth: FrameDepth,
    ) -> Result<Frame> {
        let n = emb.n;
        if u.len() != n {
            return Err(Error::Shape(format!(
                "chart point length {} != n {}",
                u.len(),
                n
            )));
        }
        if metric.dim != n + 1 {
            return Err(Error::Dimension(format!(
                "ambient dim {} != n+1 = {}",
                metric.dim,
                n + 1
            )));
        }
        let xo = match depth {
            FrameDepth::Light => 4,
            FrameDepth::Full => 5,
        };
        let d = n + 1;

        // chart jets of the embedding
        let uvars: Vec<Jet> = (0..n).map(|i| Jet::variable(n, xo, i, u[i])).collect();
        let x: Vec<Jet> = emb
            .comps
            .iter()
            .map(|e| e.eval_jet(&uvars))
            .collect::<Result<_>>()?;
        let x0: Vec<f64> = x.iter().map(|j| j.val()).collect();
        let dx: Vec<Vec<Jet>> = (0..n)
            .map(|a| x.iter().map(|xi| xi.deriv(a)).collect())
            .collect();

        let ambient = AmbientCurvature::from_metric(metric, &x0, 4)?;

        // compose ambient tensors with the chart jets; the delta-power chain
        // is shared across all compositions at this point
        let composer = crate::jets::Composer::new(&x, 4);
        let compose2 = |t: &Tensor<Jet>, order: usize| -> Tensor<Jet> {
            Tensor::from_fn(d, t.variance.clone(), |ix| composer.apply(t.get(ix), order))
        };
        let gbar = compose2(&ambient.g, 4);
        let gbar_inv = invert_sym2(&gbar)?;

        // induced metric h_ab = ∂_a x^i ∂_b x^j ḡ_ij
        let h = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            let (a, b) = (ix[0], ix[1]);
            let mut acc = Jet::zero(n, xo - 1);
            for i in 0..d {
                let mut inner = Jet::zero(n, xo - 1);
                for j in 0..d {
                    inner.mul_acc(&dx[b][j], gbar.get(&[i, j]), 1.0);
                }
                acc.mul_acc(&dx[a][i], &inner, 1.0);
            }
            acc
        });
        // immersion check: h positive definite at the point
        {
            let mut m: Vec<Vec<f64>> = (0..n)
                .map(|a| (0..n).map(|b| h.get(&[a, b]).val()).collect())
                .collect();
            for k in 0..n {
                if m[k][k] <= 1e-14 {
                    return Err(Error::DegenerateEmbedding(format!(
                        "induced metric degenerate at pivot {k}"
                    )));
                }
                for r in k + 1..n {
                    let f = m[r][k] / m[k][k];
                    for c in k..n {
                        m[r][c] -= f * m[k][c];
                    }
                }
            }
        }
        let h_inv = invert_sym2(&h)?;
        let det_h = det_jet(&h);
        let sqrt_det_h = det_h.sqrt_jet()?;

        // unit normal: kernel of the tangent matrix, raised and normalized
        let conormal_flat = kernel_covector(&dx, n, d)?;
        let mut sign = {
            let mut m: Vec<Vec<f64>> = (0..n)
                .map(|a| (0..d).map(|i| dx[a][i].val()).collect())
                .collect();
            m.push(conormal_flat.iter().map(|j| j.val()).collect());
            if det_values(&m) < 0.0 {
                -1.0
            } else {
                1.0
            }
        };
        if orientation == NormalOrientation::Flipped {
            sign = -sign;
        }
        let nu: Vec<Jet> = conormal_flat.iter().map(|j| j.scale(sign)).collect();
        let mut nraw: Vec<Jet> = (0..d)
            .map(|i| {
                let mut acc = Jet::zero(n, xo - 1);
                for j in 0..d {
                    acc.mul_acc(gbar_inv.get(&[i, j]), &nu[j], 1.0);
                }
                acc
            })
            .collect();
        let mut norm2 = Jet::zero(n, xo - 1);
        for i in 0..d {
            norm2.mul_acc(&nraw[i], &nu[i], 1.0);
        }
        let inv_norm = norm2.sqrt_jet()?.recip()?;
        for nr in &mut nraw {
            *nr = nr.mul_jet(&inv_norm);
        }
        let normal = nraw;
        // lowered normal n_i = ḡ_ij N^j
        let conormal: Vec<Jet> = (0..d)
            .map(|i| {
                let mut acc = Jet::zero(n, xo - 1);
                for j in 0..d {
                    acc.mul_acc(gbar.get(&[i, j]), &normal[j], 1.0);
                }
                acc
            })
            .collect();

        // L(X,Y) = −ḡ(∇̄_X Y, N); order 2 is enough for every use of L
        let lord = 2;
        let gammabar = compose2(&ambient.gamma, lord);
        let ll = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            let (a, b) = (ix[0], ix[1]);
            let mut acc = Jet::zero(n, lord);
            for k in 0..d {
                let mut cov = dx[a][k].deriv_trunc(b, lord);
                for i in 0..d {
                    let mut inner = Jet::zero(n, lord);
                    for j in 0..d {
                        inner.mul_acc(gammabar.get(&[k, i, j]), &dx[b][j], 1.0);
                    }
                    cov.mul_acc(&inner, &dx[a][i], 1.0);
                }
                acc.mul_acc(&cov, &conormal[k], -1.0);
            }
            acc
        });
        let mut trl = Jet::zero(n, lord);
        for a in 0..n {
            for b in 0..n {
                trl.mul_acc(h_inv.get(&[a, b]), ll.get(&[a, b]), 1.0);
            }
        }
        let hmean = trl.scale(1.0 / n as f64);
        let lo = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            ll.get(ix) - &hmean.mul_jet(h.get(ix))
        });
        let lo2 = crate::tensor::matmul_sym2(&lo, &lo, &h_inv)?;
        let lo_norm2 = crate::tensor::full_contraction(&lo2, &h_inv)?;

        // intrinsic curvature of h
        let (_h_inv2, gamma_h, riem_h, ric_h, scal_h) = intrinsic_curvature(&h)?;
        let j_h = scal_h.scale(1.0 / (2.0 * (n as f64 - 1.0)));
        let p_h = if n >= 3 {
            Some(Tensor::from_fn(n, vec![Lower, Lower], |ix| {
                (ric_h.get(ix) - &j_h.mul_jet(h.get(ix))).scale(1.0 / (n as f64 - 2.0))
            }))
        } else {
            None
        };
        let w_h = match (n, &p_h) {
            (0..=2, _) => None,
            (3, _) => Some(Tensor::zeros_like(
                n,
                vec![Lower, Lower, Lower, Lower],
                &Jet::zero(n, 0),
            )),
            (_, Some(p)) => {
                let pg = crate::tensor::kulkarni_nomizu(p, &h)?;
                Some(riem_h.add(&pg))
            }
            _ => None,
        };

        // pullback legs: index 0 = normal, 1..=n tangents
        let mut legs: Vec<Vec<Jet>> = Vec::with_capacity(n + 1);
        legs.push(normal.clone());
        for row in &dx {
            legs.push(row.clone());
        }
        let legs_vals: Vec<Vec<f64>> = legs
            .iter()
            .map(|l| l.iter().map(|j| j.val()).collect())
            .collect();

        // J̄, P̄ pullbacks as fields
        let jbar = composer.apply(&ambient.jj, 2);
        let pbar_chart = compose2(&ambient.schouten, 2);
        let pfam = pull_family(&pbar_chart, &legs);
        let pbar = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            pfam.get(&[ix[0] + 1, ix[1] + 1]).clone()
        });
        let pbar0 = Tensor::from_fn(n, vec![Lower], |ix| pfam.get(&[ix[0] + 1, 0]).clone());
        let pbar00 = pfam.get(&[0, 0]).clone();

        // Weyl pullbacks: full family at the value level; only the W̊ and W̄₀
        // blocks as jet fields (contract the normal slot first)
        let weyl_fam = pull_family_values(&ambient.weyl, &legs_vals);
        let weyl_chart = compose2(&ambient.weyl, 2);
        let contract_last_n = |t: &Tensor<Jet>| -> Vec<Jet> {
            // A_{i..} = T_{i..l} N^l
            let size = d.pow((t.rank() - 1) as u32);
            (0..size)
                .map(|flat| {
                    let mut acc = Jet::zero(n, 2);
                    for l in 0..d {
                        acc.mul_acc(&t.comps[flat * d + l], &normal[l], 1.0);
                    }
                    acc
                })
                .collect()
        };
        let aa = contract_last_n(&weyl_chart); // W̄(·,·,·,N), d³ comps
        let tangent_contract = |src: &[Jet], slots_left: usize| -> Vec<Jet> {
            // contract the leading ambient slot with each tangent leg
            let size = d.pow((slots_left - 1) as u32);
            let mut res = Vec::with_capacity(size * n);
            for a in 0..n {
                for rest in 0..size {
                    let mut acc = Jet::zero(n, 2);
                    for i in 0..d {
                        acc.mul_acc(&src[i * size + rest], &dx[a][i], 1.0);
                    }
                    res.push(acc);
                }
            }
            res
        };
        // w0_{abc} = W̄(∂_a,∂_b,∂_c,N): contract three leading slots
        let s1 = tangent_contract(&aa, 3); // [a][jk]
        let mut s2 = Vec::with_capacity(n * n * d);
        for a in 0..n {
            let block = &s1[a * d * d..(a + 1) * d * d];
            s2.extend(tangent_contract(block, 2)); // [a][b][k]
        }
        let mut w0_comps = Vec::with_capacity(n * n * n);
        for ab in 0..n * n {
            let block = &s2[ab * d..(ab + 1) * d];
            w0_comps.extend(tangent_contract(block, 1)); // [a][b][c]
        }
        let w0 = Tensor::new(n, vec![Lower, Lower, Lower], w0_comps);
        // wring_{bc} = W̄(N,∂_b,∂_c,N): contract the first slot of A with N
        let dd = {
            let size = d * d;
            (0..size)
                .map(|rest| {
                    let mut acc = Jet::zero(n, 2);
                    for i in 0..d {
                        acc.mul_acc(&aa[i * size + rest], &normal[i], 1.0);
                    }
                    acc
                })
                .collect::<Vec<_>>()
        };
        let e1 = tangent_contract(&dd, 2);
        let mut wring_comps = Vec::with_capacity(n * n);
        for b in 0..n {
            let block = &e1[b * d..(b + 1) * d];
            wring_comps.extend(tangent_contract(block, 1));
        }
        let wring = Tensor::new(n, vec![Lower, Lower], wring_comps);

        // Riemann pullback values (the jet family is built on demand)
        let riem_vals = pull_family_values(&ambient.riemann, &legs_vals);
        let gbar_nn = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            riem_vals[fam_idx(n, &[0, ix[0] + 1, ix[1] + 1, 0])]
        });

        // Ricci pullbacks (values)
        let ric_vals = pull_family_values(&ambient.ric, &legs_vals);
        let ricbar = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            ric_vals[fam_idx(n, &[ix[0] + 1, ix[1] + 1])]
        });
        let ricbar0: Vec<f64> = (0..n).map(|a| ric_vals[fam_idx(n, &[a + 1, 0])]).collect();
        let ricbar00 = ric_vals[fam_idx(n, &[0, 0])];

        // Cotton and Bach pullbacks (values)
        let cot_vals = pull_family_values(&ambient.cotton, &legs_vals);
        let cbar0 = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            cot_vals[fam_idx(n, &[ix[0] + 1, ix[1] + 1, 0])]
        });
        let cbar00: Vec<f64> = (0..n)
            .map(|a| cot_vals[fam_idx(n, &[0, 0, a + 1])])
            .collect();
        let bach_vals = pull_family_values(&ambient.bach, &legs_vals);
        let bbar00 = bach_vals[fam_idx(n, &[0, 0])];
        let mut bbar_tt = 0.0;
        for a in 0..n {
            for b in 0..n {
                bbar_tt += h_inv.get(&[a, b]).val() * bach_vals[fam_idx(n, &[a + 1, b + 1])];
            }
        }

        // normal derivatives (values); derivative slot last, leg 0 = N
        let ndp_vals = pull_family_values(&ambient.nabla_schouten, &legs_vals);
        let ndp = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            ndp_vals[fam_idx(n, &[ix[0] + 1, ix[1] + 1, 0])]
        });
        let ndw_vals = pull_family_values_t(&ambient.nabla_weyl, &legs_vals);
        let ndw = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            ndw_vals[fam_idx(n, &[0, ix[0] + 1, ix[1] + 1, 0, 0])]
        });
        let ndric_vals = pull_family_values(&ambient.nabla_ric, &legs_vals);
        let ndric00 = ndric_vals[fam_idx(n, &[0, 0, 0])];
        let nd2_vals = pull_family_values_t(&ambient.nabla2_ric, &legs_vals);
        let nd2ric00 = nd2_vals[fam_idx(n, &[0, 0, 0, 0])];
        // ∇̄_N R̄(N,·,·,N) from R̄ = W̄ − P̄⊙ḡ and ∇̄ḡ = 0:
        // the Kulkarni-Nomizu block (a⊙ḡ)(N,i,j,N) collapses to −a_{NN}h − a.
        let ndp00 = ndp_vals[fam_idx(n, &[0, 0, 0])];
        let ndriem = Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            let ndw_v = ndw_vals[fam_idx(n, &[0, ix[0] + 1, ix[1] + 1, 0, 0])];
            let ndp_v = ndp_vals[fam_idx(n, &[ix[0] + 1, ix[1] + 1, 0])];
            ndw_v + ndp_v + ndp00 * h.get(ix).val()
        });
        let dj_vals = pull_family_values(&ambient.dj, &legs_vals);
        let jbar_n = dj_vals[fam_idx(n, &[0])];
        let hj_vals = pull_family_values_t(&ambient.hess_j, &legs_vals);
        let jbar_nn = hj_vals[fam_idx(n, &[0, 0])];

        let mut frame = Frame {
            n,
            depth,
            u: u.to_vec(),
            x0,
            x,
            dx,
            normal,
            ambient,
            gbar,
            gbar_inv,
            h,
            h_inv,
            sqrt_det_h,
            gamma_h,
            riem_h,
            ric_h,
            scal_h,
            j_h,
            p_h,
            w_h,
            ll,
            hmean,
            lo,
            lo2,
            lo_norm2,
            jbar,
            pbar,
            pbar0,
            pbar00,
            wring,
            w0,
            weyl_fam,
            riem_vals,
            ricbar,
            ricbar0,
            ricbar00,
            gbar_nn,
            cbar0,
            cbar00,
            bbar00,
            bbar_tt,
            ndp,
            ndw,
            ndriem,
            ndric00,
            nd2ric00,
            jbar_n,
            jbar_nn,
            delta_lo: Tensor::zeros_like(n, vec![Lower], &Jet::zero(n, 0)),
            dh: Tensor::zeros_like(n, vec![Lower], &Jet::zero(n, 0)),
            composer,
        };
        frame.delta_lo = frame.div_sym2(&frame.lo);
        frame.dh = Tensor::from_fn(n, vec![Lower], |ix| frame.hmean.deriv(ix[0]));
        Ok(frame)
    }

    // ---- tangential calculus on chart-jet fields -------------------------

    /// Intrinsic covariant derivative; derivative slot appended last.
    pub fn cov_deriv(&self, t: &Tensor<Jet>) -> Tensor<Jet> {
        covariant_derivative(t, &self.gamma_h)
    }

    /// δ(ω) = ∇^a ω_a for a 1-form field.
    pub fn div_form(&self, omega: &Tensor<Jet>) -> Jet {
        let n = self.n;
        let grad = self.cov_deriv(omega);
        let mut acc = Jet::zero(n, grad.comps[0].order());
        for a in 0..n {
            for b in 0..n {
                acc.mul_acc(self.h_inv.get(&[a, b]), grad.get(&[a, b]), 1.0);
            }
        }
        acc
    }

    /// δ(b)_a = ∇^i b_{ia} for a symmetric 2-tensor field.
    pub fn div_sym2(&self, b: &Tensor<Jet>) -> Tensor<Jet> {
        let n = self.n;
        let grad = self.cov_deriv(b);
        Tensor::from_fn(n, vec![Lower], |ix| {
            let a = ix[0];
            let mut acc = Jet::zero(n, grad.comps[0].order());
            for i in 0..n {
                for j in 0..n {
                    acc.mul_acc(self.h_inv.get(&[i, j]), grad.get(&[i, a, j]), 1.0);
                }
            }
            acc
        })
    }

    /// δδ(b) = ∇^a ∇^i b_{ia}.
    pub fn div_div_sym2(&self, b: &Tensor<Jet>) -> Jet {
        self.div_form(&self.div_sym2(b))
    }

    /// d of a scalar field.
    pub fn grad_form(&self, f: &Jet) -> Tensor<Jet> {
        Tensor::from_fn(self.n, vec![Lower], |ix| f.deriv(ix[0]))
    }

    /// Hess(f) = ∇df.
    pub fn hessian(&self, f: &Jet) -> Tensor<Jet> {
        self.cov_deriv(&self.grad_form(f))
    }

    /// Δf = δ d f (non-positive convention; Σ∂² on flat charts).
    pub fn laplacian(&self, f: &Jet) -> Jet {
        let hess = self.hessian(f);
        let mut acc = Jet::zero(self.n, hess.comps[0].order());
        for a in 0..self.n {
            for b in 0..self.n {
                acc.mul_acc(self.h_inv.get(&[a, b]), hess.get(&[a, b]), 1.0);
            }
        }
        acc
    }

    /// Bochner Laplacian of a 2-tensor field: h^{kl} (∇∇t)_{ab;k;l}.
    pub fn bochner_sym2(&self, t: &Tensor<Jet>) -> Tensor<Jet> {
        let n = self.n;
        let d2 = self.cov_deriv(&self.cov_deriv(t));
        Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            let mut acc = Jet::zero(n, d2.comps[0].order());
            for k in 0..n {
                for l in 0..n {
                    acc.mul_acc(self.h_inv.get(&[k, l]), d2.get(&[ix[0], ix[1], k, l]), 1.0);
                }
            }
            acc
        })
    }

    /// (b dφ)_a = b_a^c φ_c: a symmetric 2-tensor applied to a 1-form.
    pub fn apply_sym2_form(&self, b: &Tensor<Jet>, omega: &Tensor<Jet>) -> Tensor<Jet> {
        let n = self.n;
        Tensor::from_fn(n, vec![Lower], |ix| {
            let a = ix[0];
            let ord = omega.comps[0].order().min(b.comps[0].order());
            let mut acc = Jet::zero(n, ord);
            for c in 0..n {
                let mut inner = Jet::zero(n, ord);
                for e in 0..n {
                    inner.mul_acc(self.h_inv.get(&[c, e]), omega.get(&[e]), 1.0);
                }
                acc.mul_acc(b.get(&[a, c]), &inner, 1.0);
            }
            acc
        })
    }

    /// (ω, η) = h^{ab} ω_a η_b at the point.
    pub fn dot_form(&self, a: &Tensor<Jet>, b: &Tensor<Jet>) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.h_inv.get(&[i, j]).val() * a.get(&[i]).val() * b.get(&[j]).val();
            }
        }
        acc
    }

    /// (a, b) = a_{ij} b^{ij} at the point, for symmetric 2-tensor fields.
    pub fn dot_sym2(&self, a: &Tensor<Jet>, b: &Tensor<Jet>) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += a.get(&[i, j]).val()
                            * b.get(&[k, l]).val()
                            * self.h_inv.get(&[i, k]).val()
                            * self.h_inv.get(&[j, l]).val();
                    }
                }
            }
        }
        acc
    }

    /// (a, b) with a given by values.
    pub fn dot_sym2_vals(&self, a: &Tensor<f64>, b: &Tensor<Jet>) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += a.get(&[i, j])
                            * b.get(&[k, l]).val()
                            * self.h_inv.get(&[i, k]).val()
                            * self.h_inv.get(&[j, l]).val();
                    }
                }
            }
        }
        acc
    }

    /// (a, b) with both given by values.
    pub fn dot_sym2_vv(&self, a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += a.get(&[i, j])
                            * b.get(&[k, l])
                            * self.h_inv.get(&[i, k]).val()
                            * self.h_inv.get(&[j, l]).val();
                    }
                }
            }
        }
        acc
    }

    /// Power traces of λ̊: (tr λ̊, |λ̊|², tr λ̊³, tr λ̊⁴) at the point.
    pub fn lo_traces(&self) -> [f64; 4] {
        let p = crate::tensor::power_traces(&self.lo, &self.h_inv).unwrap();
        [p[0].val(), p[1].val(), p[2].val(), p[3].val()]
    }

    /// σ₄(L): fourth elementary symmetric function of the shape operator.
    pub fn sigma4_shape(&self) -> f64 {
        let p = crate::tensor::power_traces(&self.ll, &self.h_inv).unwrap();
        crate::tensor::sigma4_from_traces(&p).val()
    }

    // ---- common derived data ---------------------------------------------

    pub fn mean_curvature(&self) -> f64 {
        self.hmean.val()
    }

    /// Fialkow tensor F = ι*P̄ − P + Hλ̊ + ½H²h (values; n ≥ 3).
    pub fn fialkow(&self) -> Result<Tensor<f64>> {
        let p = self
            .p_h
            .as_ref()
            .ok_or_else(|| Error::Dimension("Fialkow tensor needs n >= 3".into()))?;
        let n = self.n;
        let hv = self.hmean.val();
        Ok(Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            self.pbar.get(ix).val() - p.get(ix).val()
                + hv * self.lo.get(ix).val()
                + 0.5 * hv * hv * self.h.get(ix).val()
        }))
    }

    /// Trace-free part of the Fialkow tensor.
    pub fn fialkow_tf(&self) -> Result<Tensor<f64>> {
        let f = self.fialkow()?;
        let n = self.n;
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += self.h_inv.get(&[i, j]).val() * f.get(&[i, j]);
            }
        }
        Ok(Tensor::from_fn(n, vec![Lower, Lower], |ix| {
            f.get(ix) - tr / n as f64 * self.h.get(ix).val()
        }))
    }

    /// 1-form field (λ̊, W̄₀)_a = λ̊^{ij} W̄_{a i j 0}.
    pub fn lo_w0_form(&self) -> Tensor<Jet> {
        let n = self.n;
        let lo_up = self
            .lo
            .raise(&self.h_inv, 0)
            .and_then(|t| t.raise(&self.h_inv, 1))
            .unwrap();
        Tensor::from_fn(n, vec![Lower], |ix| {
            let a = ix[0];
            let mut acc = Jet::zero(n, 1);
            for i in 0..n {
                for j in 0..n {
                    acc = &acc + &lo_up.get(&[i, j]).mul_jet(self.w0.get(&[a, i, j]));
                }
            }
            acc
        })
    }

    /// λ̊^{ij} ∇^k W̄_{kij0}: intrinsic divergence of the pullback W̄₀
    /// paired with λ̊.
    pub fn lo_div_w0(&self) -> f64 {
        let n = self.n;
        let grad = self.cov_deriv(&self.w0);
        let lo_up = self.lo_upper_vals();
        let hi = |a: usize, b: usize| self.h_inv.get(&[a, b]).val();
        let mut acc = 0.0;
        for k in 0..n {
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        acc += hi(k, m) * lo_up[i * n + j] * grad.get(&[k, i, j, m]).val();
                    }
                }
            }
        }
        acc
    }

    /// |W̄₀|² = W̄_{ijk0} W̄^{ijk0} (tangential i,j,k).
    pub fn w0_norm2(&self) -> f64 {
        let n = self.n;
        let hi = |a: usize, b: usize| self.h_inv.get(&[a, b]).val();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for p in 0..n {
                        for q in 0..n {
                            for r in 0..n {
                                acc += hi(i, p)
                                    * hi(j, q)
                                    * hi(k, r)
                                    * self.w0.get(&[i, j, k]).val()
                                    * self.w0.get(&[p, q, r]).val();
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    /// |W̄|² with all indices tangential.
    pub fn weyl_restricted_norm2(&self) -> f64 {
        let n = self.n;
        let hi = |a: usize, b: usize| self.h_inv.get(&[a, b]).val();
        let w = |i: usize, j: usize, k: usize, l: usize| {
            self.weyl_fam[fam_idx(n, &[i + 1, j + 1, k + 1, l + 1])]
        };
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut up = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for r in 0..n {
                                    for s in 0..n {
                                        up += w(p, q, r, s)
                                            * hi(i, p)
                                            * hi(j, q)
                                            * hi(k, r)
                                            * hi(l, s);
                                    }
                                }
                            }
                        }
                        acc += w(i, j, k, l) * up;
                    }
                }
            }
        }
        acc
    }

    /// λ̊^{ij} λ̊^{kl} W̄_{iklj} (tangential).
    pub fn lo_lo_weyl_bar(&self) -> f64 {
        let n = self.n;
        let lo_up = self.lo_upper_vals();
        let w = |i: usize, j: usize, k: usize, l: usize| {
            self.weyl_fam[fam_idx(n, &[i + 1, j + 1, k + 1, l + 1])]
        };
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += lo_up[i * n + j] * lo_up[k * n + l] * w(i, k, l, j);
                    }
                }
            }
        }
        acc
    }

    /// Same pairing with the intrinsic Weyl tensor (n ≥ 3; zero at n = 3).
    pub fn lo_lo_weyl_intrinsic(&self) -> Result<f64> {
        let w = self
            .w_h
            .as_ref()
            .ok_or_else(|| Error::Dimension("intrinsic Weyl needs n >= 3".into()))?;
        let n = self.n;
        let lo_up = self.lo_upper_vals();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += lo_up[i * n + j] * lo_up[k * n + l] * w.get(&[i, k, l, j]).val();
                    }
                }
            }
        }
        Ok(acc)
    }

    /// |W|² of the intrinsic Weyl tensor.
    pub fn weyl_intrinsic_norm2(&self) -> Result<f64> {
        let w = self
            .w_h
            .as_ref()
            .ok_or_else(|| Error::Dimension("intrinsic Weyl needs n >= 3".into()))?;
        let n = self.n;
        let hi = |a: usize, b: usize| self.h_inv.get(&[a, b]).val();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut up = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for r in 0..n {
                                    for s in 0..n {
                                        up += w.get(&[p, q, r, s]).val()
                                            * hi(i, p)
                                            * hi(j, q)
                                            * hi(k, r)
                                            * hi(l, s);
                                    }
                                }
                            }
                        }
                        acc += w.get(&[i, j, k, l]).val() * up;
                    }
                }
            }
        }
        Ok(acc)
    }

    /// λ̊ with both indices raised, as values (row-major n×n).
    pub fn lo_upper_vals(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += self.h_inv.get(&[i, k]).val()
                            * self.h_inv.get(&[j, l]).val()
                            * self.lo.get(&[k, l]).val();
                    }
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    /// |P|² of the intrinsic Schouten tensor.
    pub fn schouten_norm2(&self) -> Result<f64> {
        let p = self
            .p_h
            .as_ref()
            .ok_or_else(|| Error::Dimension("Schouten needs n >= 3".into()))?;
        Ok(self.dot_sym2(p, p))
    }

    /// Legs of the adapted frame (index 0 = normal) as chart jets.
    pub fn legs(&self) -> Vec<Vec<Jet>> {
        let mut legs = Vec::with_capacity(self.n + 1);
        legs.push(self.normal.clone());
        for row in &self.dx {
            legs.push(row.clone());
        }
        legs
    }

    /// Full Riemann pullback family as chart jets (built on demand).
    pub fn riemann_family(&self) -> Family {
        let d = self.n + 1;
        let riem_chart = Tensor::from_fn(d, self.ambient.riemann.variance.clone(), |ix| {
            self.composer.apply(self.ambient.riemann.get(ix), 2)
        });
        pull_family(&riem_chart, &self.legs())
    }

    /// Pull back an ambient scalar expression.
    pub fn ambient_scalar(&self, f: &Expr) -> Result<AmbientScalar> {
        let d = self.n + 1;
        let fj = f.lift(&self.x0, d, 4)?;
        let field = self.composer.apply(&fj, 4);
        let df = Tensor::from_fn(d, vec![Lower], |ix| fj.deriv(ix[0]));
        let hess = covariant_derivative(&df, &self.ambient.gamma);
        let mut dfn_field = Jet::zero(self.n, 2);
        for i in 0..d {
            let dfi = self.composer.apply(df.get(&[i]), 2);
            dfn_field.mul_acc(&dfi, &self.normal[i], 1.0);
        }
        let nvals: Vec<f64> = self.normal.iter().map(|j| j.val()).collect();
        let mut dfn = 0.0;
        let mut d2fnn = 0.0;
        for i in 0..d {
            dfn += df.get(&[i]).val() * nvals[i];
            for j in 0..d {
                d2fnn += hess.get(&[i, j]).val() * nvals[i] * nvals[j];
            }
        }
        Ok(AmbientScalar {
            field,
            dfn,
            dfn_field,
            d2fnn,
        })
    }

    /// Per-identity residual norms of the structural (Gauss/Codazzi/Fialkow/
    /// Simons) identities, as (name, residual, scale) triples.
    pub fn gauss_codazzi_residuals(&self) -> Result<Vec<(String, f64, f64)>> {
        let n = self.n;
        let mut out = Vec::new();
        let hi = |a: usize, b: usize| self.h_inv.get(&[a, b]).val();

        // Gauss equation for the curvature tensor: ι*R̄ = R + ½ L⊙L
        let ll_vals = Tensor::from_fn(n, vec![Lower, Lower], |ix| self.ll.get(ix).val());
        let lkn = crate::tensor::kulkarni_nomizu(&ll_vals, &ll_vals)?;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let lhs = self.riem_vals[fam_idx(n, &[i + 1, j + 1, k + 1, l + 1])];
                        let rhs =
                            self.riem_h.get(&[i, j, k, l]).val() + 0.5 * lkn.get(&[i, j, k, l]);
                        worst = worst.max((lhs - rhs).abs());
                        scale = scale.max(lhs.abs());
                    }
                }
            }
        }
        out.push(("gauss_curvature".into(), worst, scale));

        // Gauss equation for the Ricci tensor: ι*Ric̄ = Ric + L² − nHL + Ḡ
        let l2 = crate::tensor::matmul_sym2(&self.ll, &self.ll, &self.h_inv)?;
        let hv = self.hmean.val();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lhs = self.ricbar.get(&[i, j]);
                let rhs = self.ric_h.get(&[i, j]).val() + l2.get(&[i, j]).val()
                    - n as f64 * hv * self.ll.get(&[i, j]).val()
                    + self.gbar_nn.get(&[i, j]);
                worst = worst.max((lhs - rhs).abs());
                scale = scale.max(lhs.abs());
            }
        }
        out.push(("gauss_ricci".into(), worst, scale));

        // Gauss scalar identity: ι*J̄ = J + |λ̊|²/(2(n−1)) − (n/2)H² + P̄₀₀
        {
            let lhs = self.jbar.val();
            let rhs = self.j_h.val() + self.lo_norm2.val() / (2.0 * (n as f64 - 1.0))
                - 0.5 * n as f64 * hv * hv
                + self.pbar00.val();
            out.push(("gauss_scalar".into(), (lhs - rhs).abs(), lhs.abs()));
        }

        // Codazzi-Mainardi: ∇_j(L)_{ik} − ∇_i(L)_{jk} = R̄_{ijk0}
        let gradl = self.cov_deriv(&self.ll);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = gradl.get(&[i, k, j]).val() - gradl.get(&[j, k, i]).val();
                    let rhs = self.riem_vals[fam_idx(n, &[i + 1, j + 1, k + 1, 0])];
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs().max(rhs.abs()));
                }
            }
        }
        out.push(("codazzi_mainardi".into(), worst, scale));

        // δ(L) − n dH = (n−1) P̄₀  and  δ(λ̊) − (n−1) dH = (n−1) P̄₀
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for a in 0..n {
            let divl = self.delta_lo.get(&[a]).val() + self.dh.get(&[a]).val();
            let lhs1 = divl - n as f64 * self.dh.get(&[a]).val();
            let rhs = (n as f64 - 1.0) * self.pbar0.get(&[a]).val();
            worst = worst.max((lhs1 - rhs).abs());
            let lhs2 = self.delta_lo.get(&[a]).val() - (n as f64 - 1.0) * self.dh.get(&[a]).val();
            worst = worst.max((lhs2 - rhs).abs());
            scale = scale.max(rhs.abs()).max(lhs1.abs());
        }
        out.push(("codazzi_trace".into(), worst, scale));

        // trace-free Codazzi-Mainardi
        let gradlo = self.cov_deriv(&self.lo);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = gradlo.get(&[i, k, j]).val() - gradlo.get(&[j, k, i]).val()
                        + (self.delta_lo.get(&[j]).val() * self.h.get(&[i, k]).val()
                            - self.delta_lo.get(&[i]).val() * self.h.get(&[j, k]).val())
                            / (n as f64 - 1.0);
                    let rhs = self.w0.get(&[i, j, k]).val();
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs().max(rhs.abs()));
                }
            }
        }
        out.push(("codazzi_tracefree".into(), worst, scale));

        if n >= 3 {
            // Fialkow equation: (n−2)F = λ̊² − |λ̊|²/(2(n−1)) h + W̊
            let f = self.fialkow()?;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let lhs = (n as f64 - 2.0) * f.get(&[i, j]);
                    let rhs = self.lo2.get(&[i, j]).val()
                        - self.lo_norm2.val() / (2.0 * (n as f64 - 1.0))
                            * self.h.get(&[i, j]).val()
                        + self.wring.get(&[i, j]).val();
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs().max(rhs.abs()));
                }
            }
            out.push(("fialkow".into(), worst, scale));

            // F̊ = (λ̊² − |λ̊|² h/n + W̊)/(n−2)
            let ftf = self.fialkow_tf()?;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let lhs = ftf.get(&[i, j]);
                    let rhs = (self.lo2.get(&[i, j]).val()
                        - self.lo_norm2.val() / n as f64 * self.h.get(&[i, j]).val()
                        + self.wring.get(&[i, j]).val())
                        / (n as f64 - 2.0);
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs().max(rhs.abs()));
                }
            }
            out.push(("fialkow_tracefree".into(), worst, scale));

            // Gauss equation for the Weyl tensor: ι*W̄ = W + ½ λ̊⊙λ̊ + F⊙h
            let lo_vals = Tensor::from_fn(n, vec![Lower, Lower], |ix| self.lo.get(ix).val());
            let h_vals = Tensor::from_fn(n, vec![Lower, Lower], |ix| self.h.get(ix).val());
            let lolo = crate::tensor::kulkarni_nomizu(&lo_vals, &lo_vals)?;
            let fh = crate::tensor::kulkarni_nomizu(&f, &h_vals)?;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let lhs = self.weyl_fam[fam_idx(n, &[i + 1, j + 1, k + 1, l + 1])];
                            let wv = match &self.w_h {
                                Some(w) => w.get(&[i, j, k, l]).val(),
                                None => 0.0,
                            };
                            let rhs = wv + 0.5 * lolo.get(&[i, j, k, l]) + fh.get(&[i, j, k, l]);
                            worst = worst.max((lhs - rhs).abs());
                            scale = scale.max(lhs.abs().max(rhs.abs()));
                        }
                    }
                }
            }
            out.push(("gauss_weyl".into(), worst, scale));
        }

        // Simons identity for Δ(L)
        {
            let riem_fam = self.riemann_family();
            let boch = self.bochner_sym2(&self.ll);
            let hess_h = self.hessian(&self.hmean);
            let l2 = crate::tensor::matmul_sym2(&self.ll, &self.ll, &self.h_inv)?;
            let ltr = crate::tensor::full_contraction(&l2, &self.h_inv)?.val();
            let hv = self.hmean.val();
            let riem0 = Tensor::from_fn(n, vec![Lower, Lower, Lower], |ix| {
                riem_fam
                    .get(&[ix[0] + 1, ix[1] + 1, ix[2] + 1, 0])
                    .clone()
            });
            let grad_riem0 = self.cov_deriv(&riem0);
            let omega = Tensor::from_fn(n, vec![Lower], |ix| {
                let mut acc = Jet::zero(n, 1);
                for k in 0..n {
                    for m in 0..n {
                        acc = &acc + &self.h_inv.get(&[k, m]).mul_jet(riem0.get(&[ix[0], k, m]));
                    }
                }
                acc
            });
            let grad_omega = self.cov_deriv(&omega);
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut rhs = n as f64 * hess_h.get(&[i, j]).val()
                        + n as f64 * hv * l2.get(&[i, j]).val()
                        - self.ll.get(&[i, j]).val() * ltr;
                    for s in 0..n {
                        for t in 0..n {
                            let mut tr = 0.0;
                            for k in 0..n {
                                for m in 0..n {
                                    tr += hi(k, m)
                                        * riem_fam.get(&[i + 1, k + 1, m + 1, t + 1]).val();
                                }
                            }
                            rhs += self.ll.get(&[j, s]).val() * hi(s, t) * tr;
                        }
                    }
                    for r in 0..n {
                        for s in 0..n {
                            let mut lup = 0.0;
                            for p in 0..n {
                                for q in 0..n {
                                    lup += hi(r, p) * hi(s, q) * self.ll.get(&[p, q]).val();
                                }
                            }
                            rhs -= lup * riem_fam.get(&[r + 1, i + 1, j + 1, s + 1]).val();
                        }
                    }
                    for k in 0..n {
                        for m in 0..n {
                            rhs += hi(k, m) * grad_riem0.get(&[i, k, j, m]).val();
                        }
                    }
                    rhs += grad_omega.get(&[j, i]).val();
                    let lhs = boch.get(&[i, j]).val();
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs().max(rhs.abs()));
                }
            }
            out.push(("simons".into(), worst, scale));
        }

        Ok(out)
    }
}

/// Pullback data of an ambient scalar at a frame point.
pub struct AmbientScalar {
    /// ι*f as a chart-jet field.
    pub field: Jet,
    /// df(N) at the point.
    pub dfn: f64,
    /// df(N) as a chart-jet field (order 2).
    pub dfn_field: Jet,
    /// Hess̄f(N,N) at the point: the second derivative along the unit-speed
    /// normal geodesic (which has vanishing acceleration).
    pub d2fnn: f64,
}

fn det_jet(m: &Tensor<Jet>) -> Jet {
    let n = m.dim;
    let idx: Vec<usize> = (0..n).collect();
    det_rec(m, &idx, &idx)
}

fn det_rec(m: &Tensor<Jet>, rows: &[usize], cols: &[usize]) -> Jet {
    if rows.len() == 1 {
        return m.get(&[rows[0], cols[0]]).clone();
    }
    let mut acc: Option<Jet> = None;
    for (k, &c) in cols.iter().enumerate() {
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = m
            .get(&[rows[0], c])
            .mul_jet(&det_rec(m, &rows[1..], &sub_cols));
        let signed = if k % 2 == 0 { term } else { term.scale(-1.0) };
        acc = Some(match acc {
            None => signed,
            Some(s) => &s + &signed,
        });
    }
    acc.unwrap()
}

fn det_values(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if a[r][k].abs() > a[piv][k].abs() {
                piv = r;
            }
        }
        if a[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            a.swap(piv, k);
            det = -det;
        }
        det *= a[k][k];
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
        }
    }
    det
}

/// Covector ν with ν_i ∂_a x^i = 0 for all a, by jet Gaussian elimination on
/// the tangent matrix (free variable set to 1, then back-substitution).
fn kernel_covector(dx: &[Vec<Jet>], n: usize, d: usize) -> Result<Vec<Jet>> {
    let order = dx[0][0].order();
    let mut a: Vec<Vec<Jet>> = (0..n).map(|r| dx[r].clone()).collect();
    let mut col_of_row: Vec<usize> = Vec::new();
    let mut used = vec![false; d];
    for r in 0..n {
        let mut best = None;
        let mut best_abs = 0.0;
        for c in 0..d {
            if used[c] {
                continue;
            }
            let v = a[r][c].val().abs();
            if v > best_abs {
                best_abs = v;
                best = Some(c);
            }
        }
        let pc = best.ok_or_else(|| {
            Error::DegenerateEmbedding("tangent matrix has no usable pivot".into())
        })?;
        if best_abs < 1e-13 {
            return Err(Error::DegenerateEmbedding(
                "embedding differential rank-deficient".into(),
            ));
        }
        used[pc] = true;
        col_of_row.push(pc);
        let piv = a[r][pc].clone();
        for c in 0..d {
            a[r][c] = a[r][c].div_jet(&piv)?;
        }
        for r2 in 0..n {
            if r2 == r {
                continue;
            }
            let f = a[r2][pc].clone();
            for c in 0..d {
                a[r2][c] = &a[r2][c] - &f.mul_jet(&a[r][c]);
            }
        }
    }
    let free = (0..d).find(|&c| !used[c]).unwrap();
    let one = Jet::constant(n, order, 1.0);
    let mut nu: Vec<Jet> = (0..d).map(|_| Jet::zero(n, order)).collect();
    nu[free] = one;
    for (r, &pc) in col_of_row.iter().enumerate() {
        nu[pc] = a[r][free].scale(-1.0);
    }
    Ok(nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, Scenario};

    fn frame_of(s: &Scenario, u: &[f64]) -> Frame {
        s.frame(u, FrameDepth::Full).unwrap()
    }

    #[test]
    fn hyperplane_is_totally_geodesic() {
        let s = builtin("hyperplane_flat", &serde_json::json!({"n": 4})).unwrap();
        let f = frame_of(&s, &[0.3, -0.2, 0.7, 0.1]);
        assert!(f.ll.max_abs() < 1e-13);
        assert!(f.hmean.val().abs() < 1e-13);
        assert!(f.lo.max_abs() < 1e-13);
        assert!(f.riem_h.max_abs() < 1e-12);
        assert!(f.scal_h.val().abs() < 1e-12);
    }

    #[test]
    fn unit_sphere_frame() {
        let s = builtin("sphere_flat", &serde_json::json!({"n": 4, "radius": 1.0})).unwrap();
        let u = [1.1, 0.9, 1.3, 2.0];
        let f = frame_of(&s, &u);
        assert!((f.hmean.val() - 1.0).abs() < 1e-11, "H = {}", f.hmean.val());
        assert!(f.lo.max_abs() < 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                let l = f.ll.get(&[i, j]).val();
                let h = f.h.get(&[i, j]).val();
                assert!((l - h).abs() < 1e-10);
                let p = f.p_h.as_ref().unwrap().get(&[i, j]).val();
                assert!((p - 0.5 * h).abs() < 1e-9);
            }
        }
        assert!((f.j_h.val() - 2.0).abs() < 1e-10);
        for a in 0..4 {
            let mut dot = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    dot += f.gbar.get(&[i, j]).val() * f.normal[i].val() * f.dx[a][j].val();
                }
            }
            assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_pole_curvatures() {
        let s = builtin(
            "ellipsoid_flat",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.0, 1.0, 1.0, 2.0]}),
        )
        .unwrap();
        let u = [
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        ];
        let f = frame_of(&s, &u);
        assert!((f.x0[4] - 2.0).abs() < 1e-12);
        for c in &f.x0[..4] {
            assert!(c.abs() < 1e-12);
        }
        assert!((f.hmean.val() - 2.0).abs() < 1e-10, "H = {}", f.hmean.val());
        assert!(f.lo.max_abs() < 1e-9, "lo = {}", f.lo.max_abs());
    }

    #[test]
    fn gauss_codazzi_on_models() {
        let hp = builtin("hyperplane_flat", &serde_json::json!({"n": 4})).unwrap();
        let f = frame_of(&hp, &[0.1, 0.2, -0.3, 0.4]);
        for (name, res, _scale) in f.gauss_codazzi_residuals().unwrap() {
            assert!(res < 1e-11, "{name}: {res}");
        }
        let sp = builtin("sphere_flat", &serde_json::json!({"n": 4, "radius": 1.0})).unwrap();
        let f = frame_of(&sp, &[1.2, 0.8, 1.4, 0.5]);
        for (name, res, scale) in f.gauss_codazzi_residuals().unwrap() {
            assert!(res < 1e-9 * (1.0 + scale), "{name}: {res} (scale {scale})");
        }
    }

    #[test]
    fn gauss_codazzi_on_curved_scenario() {
        let s = builtin(
            "ellipsoid_cflat",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.1, 0.9, 1.2, 1.05], "seed": 7}),
        )
        .unwrap();
        for u in [
            [1.3, 0.9, 1.1, 0.4],
            [0.7, 1.8, 2.2, 3.0],
            [2.0, 1.2, 0.6, 5.1],
        ] {
            let f = frame_of(&s, &u);
            for (name, res, scale) in f.gauss_codazzi_residuals().unwrap() {
                assert!(
                    res < 1e-8 * (1.0 + scale),
                    "{name}: {res} (scale {scale}) at {u:?}"
                );
            }
        }
    }

    #[test]
    fn laplacian_sign_on_flat_torus() {
        let s = builtin("graph_torus", &serde_json::json!({"n": 4, "amplitude": 0.0})).unwrap();
        let u = [0.7, 1.1, 2.3, 0.2];
        let f = frame_of(&s, &u);
        let field = Jet::variable(4, 4, 0, u[0]).cos_jet();
        let lap = f.laplacian(&field);
        assert!((lap.val() + u[0].cos()).abs() < 1e-12);
        let c = Jet::constant(4, 4, 3.7);
        assert!(f.laplacian(&c).val().abs() < 1e-14);
    }

    #[test]
    fn normal_flip_parity() {
        let s = builtin(
            "ellipsoid_flat",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.3, 0.8, 1.1, 0.9]}),
        )
        .unwrap();
        let u = [1.2, 0.7, 1.9, 2.5];
        let f0 = s.frame(&u, FrameDepth::Full).unwrap();
        let s_flipped = s.with_orientation(NormalOrientation::Flipped);
        let f1 = s_flipped.frame(&u, FrameDepth::Full).unwrap();
        let scale = 1.0 + f0.ll.max_abs();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (f0.ll.get(&[i, j]).val() + f1.ll.get(&[i, j]).val()).abs() < 1e-10 * scale
                );
                assert!((f0.h.get(&[i, j]).val() - f1.h.get(&[i, j]).val()).abs() < 1e-10 * scale);
                assert!(
                    (f0.wring.get(&[i, j]).val() - f1.wring.get(&[i, j]).val()).abs()
                        < 1e-10 * scale
                );
            }
        }
        assert!((f0.hmean.val() + f1.hmean.val()).abs() < 1e-11 * scale);
        let fia = f0.fialkow().unwrap();
        let fib = f1.fialkow().unwrap();
        for (a, b) in fia.comps.iter().zip(&fib.comps) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn conformal_weights_of_frame_data() {
        let base = builtin(
            "ellipsoid_flat",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.2, 0.9, 1.1, 1.3]}),
        )
        .unwrap();
        let phi = Expr::constant(0.13) * Expr::var(0)
            + Expr::constant(-0.07) * Expr::var(1) * Expr::var(4)
            + Expr::constant(0.05) * Expr::sin(Expr::var(2));
        let resc = base.conformal_rescale(&phi).unwrap();
        let u = [1.4, 1.0, 0.8, 2.2];
        let f0 = base.frame(&u, FrameDepth::Full).unwrap();
        let f1 = resc.frame(&u, FrameDepth::Full).unwrap();
        let sc = f0.ambient_scalar(&phi).unwrap();
        let ephi = sc.field.val().exp();
        let scale = 1.0 + f0.ll.max_abs();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (f1.h.get(&[i, j]).val() - ephi * ephi * f0.h.get(&[i, j]).val()).abs()
                        < 1e-9 * scale
                );
                assert!(
                    (f1.lo.get(&[i, j]).val() - ephi * f0.lo.get(&[i, j]).val()).abs()
                        < 1e-9 * scale
                );
            }
        }
        assert!(
            (ephi * f1.hmean.val() - (f0.hmean.val() + sc.dfn)).abs() < 1e-9,
            "H law: {} vs {}",
            ephi * f1.hmean.val(),
            f0.hmean.val() + sc.dfn
        );
        let fa = f0.fialkow().unwrap();
        let fb = f1.fialkow().unwrap();
        for (a, b) in fa.comps.iter().zip(&fb.comps) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn van_and_divergence_identities() {
        let s = builtin(
            "ellipsoid_cflat",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.25, 0.85, 1.1, 1.15], "seed": 3}),
        )
        .unwrap();
        for u in [[1.2, 0.9, 1.5, 0.7], [0.8, 2.0, 1.0, 4.0]] {
            let f = frame_of(&s, &u);
            let n = f.n as f64;
            let w0form = f.lo_w0_form();
            let div_lo_w0 = f.div_form(&w0form).val();
            let dd_lo2 = f.div_div_sym2(&f.lo2).val();
            let lap_lo2 = f.laplacian(&f.lo_norm2).val();
            let lo_dlo = f.apply_sym2_form(&f.lo, &f.delta_lo);
            let div_lo_dlo = f.div_form(&lo_dlo).val();
            let lhs = div_lo_w0;
            let rhs = dd_lo2 - 0.5 * lap_lo2 - (n - 2.0) / (n - 1.0) * div_lo_dlo;
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            assert!((lhs - rhs).abs() < 1e-8 * scale, "van: {lhs} vs {rhs}");

            let lhs2 = f.w0_norm2() - 2.0 * f.lo_div_w0();
            let rhs2 = -2.0 * div_lo_w0;
            assert!(
                (lhs2 - rhs2).abs() < 1e-8 * (1.0 + lhs2.abs().max(rhs2.abs())),
                "divergence pairing: {lhs2} vs {rhs2}"
            );
        }
    }

    #[test]
    fn cotton_normal_block_identity() {
        // 2 C̄_{00k} = δ(W̊)_k + W̄_{0ajk} λ̊^{aj} on M⁴ ⊂ X⁵
        let s = builtin(
            "ellipsoid_perturbed",
            &serde_json::json!({"n": 4, "axes": [1.0, 1.15, 0.9, 1.05, 1.1], "eps": 0.04, "seed": 11}),
        )
        .unwrap();
        let f = frame_of(&s, &[1.3, 1.0, 0.7, 2.0]);
        let n = f.n;
        let div_wring = f.div_sym2(&f.wring);
        let lo_up = f.lo_upper_vals();
        for k in 0..n {
            let mut rhs = div_wring.get(&[k]).val();
            for a in 0..n {
                for j in 0..n {
                    rhs += f.weyl_fam[fam_idx(n, &[0, a + 1, j + 1, k + 1])] * lo_up[a * n + j];
                }
            }
            let lhs = 2.0 * f.cbar00[k];
            assert!(
                (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs().max(rhs.abs())),
                "at k={k}: {lhs} vs {rhs}"
            );
        }
    }
}
