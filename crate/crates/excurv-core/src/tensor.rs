//! Dense tensor algebra over real- or jet-valued components.

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Component scalar for tensors: f64 or Jet.
pub trait Scalar: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self>
    where
        Self: Sized;
    fn neg(&self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// Value at the evaluation point (constant term for jets).
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> f64 {
        0.0
    }
    fn one_like(&self) -> f64 {
        1.0
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> Result<f64> {
        if *o == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(self / o)
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn scale(&self, s: f64) -> f64 {
        self * s
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Jet {
        Jet::zero(self.dim(), self.order())
    }
    fn one_like(&self) -> Jet {
        Jet::constant(self.dim(), self.order(), 1.0)
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
    fn div(&self, o: &Jet) -> Result<Jet> {
        self.div_jet(o)
    }
    fn neg(&self) -> Jet {
        self.scale(-1.0)
    }
    fn scale(&self, s: f64) -> Jet {
        Jet::scale(self, s)
    }
    fn value(&self) -> f64 {
        self.val()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Lower,
    Upper,
}

/// Dense tensor: `comps` has length dim^rank, row-major in the slots.
#[derive(Clone, Debug)]
pub struct Tensor<T: Scalar> {
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub comps: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dim: usize, variance: Vec<Variance>, comps: Vec<T>) -> Tensor<T> {
        assert_eq!(comps.len(), dim.pow(variance.len() as u32));
        Tensor {
            dim,
            variance,
            comps,
        }
    }

    pub fn zeros_like(dim: usize, variance: Vec<Variance>, proto: &T) -> Tensor<T> {
        let n = dim.pow(variance.len() as u32);
        Tensor {
            dim,
            variance,
            comps: vec![proto.zero_like(); n],
        }
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut f = 0;
        for &i in idx {
            debug_assert!(i < self.dim);
            f = f * self.dim + i;
        }
        f
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.comps[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let f = self.flat(idx);
        self.comps[f] = v;
    }

    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> T) -> Tensor<T> {
        let rank = variance.len();
        let n = dim.pow(rank as u32);
        let mut comps = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        for flat in 0..n {
            let mut rem = flat;
            for s in (0..rank).rev() {
                idx[s] = rem % dim;
                rem /= dim;
            }
            comps.push(f(&idx));
        }
        Tensor {
            dim,
            variance,
            comps,
        }
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Tensor<T> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn add(&self, o: &Tensor<T>) -> Tensor<T> {
        assert_eq!(self.variance, o.variance);
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            comps: self
                .comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, o: &Tensor<T>) -> Tensor<T> {
        assert_eq!(self.variance, o.variance);
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            comps: self
                .comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor<T> {
        self.map(|c| c.scale(s))
    }

    /// Einstein contraction of two slots of opposite variance.
    pub fn contract(&self, slot_a: usize, slot_b: usize) -> Result<Tensor<T>> {
        let rank = self.rank();
        if slot_a == slot_b || slot_a >= rank || slot_b >= rank {
            return Err(Error::Slot(format!(
                "invalid contraction slots {slot_a}, {slot_b} for rank {rank}"
            )));
        }
        if self.variance[slot_a] == self.variance[slot_b] {
            return Err(Error::Variance(
                "contraction requires one upper and one lower slot".into(),
            ));
        }
        let (lo, hi) = (slot_a.min(slot_b), slot_a.max(slot_b));
        let mut var = Vec::new();
        for (s, &v) in self.variance.iter().enumerate() {
            if s != lo && s != hi {
                var.push(v);
            }
        }
        let dim = self.dim;
        let proto = self.comps[0].zero_like();
        let out_rank = rank - 2;
        let mut out = Tensor::zeros_like(dim, var, &proto);
        let mut out_idx = vec![0usize; out_rank];
        let mut full = vec![0usize; rank];
        let n = dim.pow(out_rank as u32);
        for flat in 0..n {
            let mut rem = flat;
            for s in (0..out_rank).rev() {
                out_idx[s] = rem % dim;
                rem /= dim;
            }
            // scatter out indices into the full index (skipping lo/hi)
            let mut oi = 0;
            for (s, slot) in full.iter_mut().enumerate() {
                if s == lo || s == hi {
                    continue;
                }
                *slot = out_idx[oi];
                oi += 1;
            }
            let mut acc = proto.clone();
            for c in 0..dim {
                full[lo] = c;
                full[hi] = c;
                acc = acc.add(self.get(&full));
            }
            out.comps[flat] = acc;
        }
        Ok(out)
    }

    /// Tensor product.
    pub fn outer(&self, o: &Tensor<T>) -> Tensor<T> {
        let mut var = self.variance.clone();
        var.extend_from_slice(&o.variance);
        let mut comps = Vec::with_capacity(self.comps.len() * o.comps.len());
        for a in &self.comps {
            for b in &o.comps {
                comps.push(a.mul(b));
            }
        }
        Tensor {
            dim: self.dim,
            variance: var,
            comps,
        }
    }

    /// Contract `slot` with a symmetric rank-2 tensor `g2` (metric or its
    /// inverse), flipping the slot variance.
    pub fn apply_metric(&self, g2: &Tensor<T>, slot: usize) -> Result<Tensor<T>> {
        if slot >= self.rank() {
            return Err(Error::Slot(format!("slot {slot} out of range")));
        }
        if g2.variance[0] == self.variance[slot] {
            return Err(Error::Variance(
                "metric slots must oppose the tensor slot".into(),
            ));
        }
        let dim = self.dim;
        let proto = self.comps[0].zero_like();
        let mut var = self.variance.clone();
        var[slot] = g2.variance[0];
        let mut out = Tensor::zeros_like(dim, var, &proto);
        let rank = self.rank();
        let mut idx = vec![0usize; rank];
        for flat in 0..out.comps.len() {
            let mut rem = flat;
            for s in (0..rank).rev() {
                idx[s] = rem % dim;
                rem /= dim;
            }
            let fixed = idx[slot];
            let mut acc = proto.clone();
            for c in 0..dim {
                idx[slot] = c;
                acc = acc.add(&self.get(&idx).mul(g2.get(&[fixed, c])));
            }
            idx[slot] = fixed;
            out.comps[flat] = acc;
        }
        Ok(out)
    }

    /// Raise or lower a slot with the metric `g` (all-lower) or its inverse.
    pub fn raise(&self, g_inv: &Tensor<T>, slot: usize) -> Result<Tensor<T>> {
        if self.variance[slot] != Variance::Lower {
            return Err(Error::Variance("slot already upper".into()));
        }
        self.apply_metric(g_inv, slot)
    }

    pub fn lower(&self, g: &Tensor<T>, slot: usize) -> Result<Tensor<T>> {
        if self.variance[slot] != Variance::Upper {
            return Err(Error::Variance("slot already lower".into()));
        }
        self.apply_metric(g, slot)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.value().abs())
            .fold(0.0, f64::max)
    }
}

/// Matrix inverse of a symmetric rank-2 all-lower tensor, by Gauss-Jordan
/// elimination with partial pivoting on constant terms.
pub fn invert_sym2<T: Scalar>(g: &Tensor<T>) -> Result<Tensor<T>> {
    let n = g.dim;
    let proto = g.comps[0].zero_like();
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect())
        .collect();
    let one = proto.one_like();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { one.clone() } else { proto.clone() })
                .collect()
        })
        .collect();
    for col in 0..n {
        // pivot on largest constant term
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].value().abs() > a[piv][col].value().abs() {
                piv = r;
            }
        }
        if a[piv][col].value().abs() < 1e-300 {
            return Err(Error::SingularMetric(format!(
                "pivot {col} vanishes; matrix not invertible"
            )));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].div(&d)?;
            inv[col][j] = inv[col][j].div(&d)?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                inv[r][j] = inv[r][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    let mut out = Tensor::zeros_like(n, vec![Variance::Upper, Variance::Upper], &proto);
    for i in 0..n {
        for j in 0..n {
            out.set(&[i, j], inv[i][j].clone());
        }
    }
    Ok(out)
}

/// Kulkarni-Nomizu product of symmetric 2-tensors:
/// (a ⊙ b)_{ijkl} = a_{ik} b_{jl} + a_{jl} b_{ik} − a_{il} b_{jk} − a_{jk} b_{il}.
pub fn kulkarni_nomizu<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.dim != b.dim || a.rank() != 2 || b.rank() != 2 {
        return Err(Error::Shape("kulkarni_nomizu requires two rank-2 tensors".into()));
    }
    let v = vec![Variance::Lower; 4];
    Ok(Tensor::from_fn(a.dim, v, |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        a.get(&[i, k])
            .mul(b.get(&[j, l]))
            .add(&a.get(&[j, l]).mul(b.get(&[i, k])))
            .sub(&a.get(&[i, l]).mul(b.get(&[j, k])))
            .sub(&a.get(&[j, k]).mul(b.get(&[i, l])))
    }))
}

/// b − (tr_g b / dim) g for symmetric b.
pub fn tracefree_part<T: Scalar>(
    b: &Tensor<T>,
    g: &Tensor<T>,
    g_inv: &Tensor<T>,
) -> Result<Tensor<T>> {
    let n = b.dim;
    let tr = full_contraction(b, g_inv)?;
    let s = tr.scale(-1.0 / n as f64);
    Ok(Tensor::from_fn(n, b.variance.clone(), |ix| {
        b.get(ix).add(&g.get(ix).mul(&s))
    }))
}

/// g^{ik} g^{jl} a_{ij} b_{kl} for all-lower symmetric a, b (uses raised b).
pub fn full_contraction<T: Scalar>(a: &Tensor<T>, g_inv: &Tensor<T>) -> Result<T> {
    // trace tr_g a = g^{ij} a_{ij}
    let n = a.dim;
    let mut acc = a.comps[0].zero_like();
    for i in 0..n {
        for j in 0..n {
            acc = acc.add(&a.get(&[i, j]).mul(g_inv.get(&[i, j])));
        }
    }
    Ok(acc)
}

/// Scalar product (a, b) = a_{ij} b^{ij} of all-lower symmetric 2-tensors.
pub fn dot_sym2<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, g_inv: &Tensor<T>) -> Result<T> {
    let n = a.dim;
    let mut acc = a.comps[0].zero_like();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    acc = acc.add(
                        &a.get(&[i, j])
                            .mul(b.get(&[k, l]))
                            .mul(g_inv.get(&[i, k]))
                            .mul(g_inv.get(&[j, l])),
                    );
                }
            }
        }
    }
    Ok(acc)
}

/// Matrix product (a ∘ b)_{ij} = a_i^k b_{kj} of all-lower symmetric tensors.
pub fn matmul_sym2<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, g_inv: &Tensor<T>) -> Result<Tensor<T>> {
    let n = a.dim;
    Ok(Tensor::from_fn(
        n,
        vec![Variance::Lower, Variance::Lower],
        |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = a.comps[0].zero_like();
            for k in 0..n {
                for l in 0..n {
                    acc = acc.add(&a.get(&[i, k]).mul(g_inv.get(&[k, l])).mul(b.get(&[l, j])));
                }
            }
            acc
        },
    ))
}

/// Traces tr(a^k) for k = 1..=4 of an all-lower symmetric 2-tensor.
pub fn power_traces<T: Scalar>(a: &Tensor<T>, g_inv: &Tensor<T>) -> Result<[T; 4]> {
    let a2 = matmul_sym2(a, a, g_inv)?;
    let a3 = matmul_sym2(&a2, a, g_inv)?;
    let a4 = matmul_sym2(&a3, a, g_inv)?;
    Ok([
        full_contraction(a, g_inv)?,
        full_contraction(&a2, g_inv)?,
        full_contraction(&a3, g_inv)?,
        full_contraction(&a4, g_inv)?,
    ])
}

/// Fourth elementary symmetric function of the eigenvalues via Newton's
/// identities from the power traces.
pub fn sigma4_from_traces<T: Scalar>(p: &[T; 4]) -> T {
    let [p1, p2, p3, p4] = p;
    let e1 = p1.clone();
    let e2 = e1.mul(p1).sub(p2).scale(0.5);
    let e3 = e2.mul(p1).sub(&e1.mul(p2)).add(p3).scale(1.0 / 3.0);
    e3.mul(p1)
        .sub(&e2.mul(p2))
        .add(&e1.mul(p3))
        .sub(p4)
        .scale(0.25)
}

/// First-Bianchi cyclic sum residual of a rank-4 all-lower tensor.
pub fn bianchi_residual<T: Scalar>(r: &Tensor<T>) -> f64 {
    let n = r.dim;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let s = r
                        .get(&[i, j, k, l])
                        .add(r.get(&[j, k, i, l]))
                        .add(r.get(&[k, i, j, l]));
                    worst = worst.max(s.value().abs());
                }
            }
        }
    }
    worst
}

/// Max deviation from the Riemann symmetries (pair antisymmetry + pair swap).
pub fn riemann_symmetry_residual<T: Scalar>(r: &Tensor<T>) -> f64 {
    let n = r.dim;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = r.get(&[i, j, k, l]).value();
                    worst = worst.max((v + r.get(&[j, i, k, l]).value()).abs());
                    worst = worst.max((v + r.get(&[i, j, l, k]).value()).abs());
                    worst = worst.max((v - r.get(&[k, l, i, j]).value()).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(n: usize) -> Tensor<f64> {
        Tensor::from_fn(n, vec![Variance::Lower, Variance::Lower], |ix| {
            if ix[0] == ix[1] {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn contract_identity() {
        let n = 5;
        let id = Tensor::from_fn(n, vec![Variance::Upper, Variance::Lower], |ix| {
            if ix[0] == ix[1] {
                1.0
            } else {
                0.0
            }
        });
        let tr = id.contract(0, 1).unwrap();
        assert_eq!(tr.comps[0], n as f64);
    }

    #[test]
    fn contract_variance_guard() {
        let t = ident(3);
        assert!(matches!(t.contract(0, 1), Err(Error::Variance(_))));
    }

    #[test]
    fn raise_lower_round_trip() {
        let n = 4;
        // random-ish SPD metric
        let g = Tensor::from_fn(n, vec![Variance::Lower, Variance::Lower], |ix| {
            let (i, j) = (ix[0], ix[1]);
            if i == j {
                2.0 + 0.3 * i as f64
            } else {
                0.1 * ((i * n + j + i.max(j)) as f64).sin()
            }
        });
        // symmetrize
        let g = Tensor::from_fn(n, g.variance.clone(), |ix| {
            0.5 * (g.get(ix) + g.get(&[ix[1], ix[0]]))
        });
        let gi = invert_sym2(&g).unwrap();
        let t = Tensor::from_fn(n, vec![Variance::Lower, Variance::Lower], |ix| {
            ((ix[0] * 7 + ix[1] * 3) as f64).cos()
        });
        let up = t.raise(&gi, 0).unwrap();
        let back = up.lower(&g, 0).unwrap();
        for (a, b) in t.comps.iter().zip(&back.comps) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn kn_convention_and_bianchi() {
        let h = ident(4);
        let hh = kulkarni_nomizu(&h, &h).unwrap();
        assert_eq!(*hh.get(&[0, 1, 0, 1]), 2.0);
        // random symmetric a, b
        let a = Tensor::from_fn(4, vec![Variance::Lower, Variance::Lower], |ix| {
            ((ix[0] + 2 * ix[1]) as f64).sin() + ((ix[1] + 2 * ix[0]) as f64).sin()
        });
        let b = Tensor::from_fn(4, vec![Variance::Lower, Variance::Lower], |ix| {
            ((3 * ix[0] + ix[1]) as f64).cos() + ((3 * ix[1] + ix[0]) as f64).cos()
        });
        let ab = kulkarni_nomizu(&a, &b).unwrap();
        assert!(bianchi_residual(&ab) < 1e-10);
        assert!(riemann_symmetry_residual(&ab) < 1e-12);
    }

    #[test]
    fn tracefree_examples() {
        let g = ident(4);
        let gi = invert_sym2(&g).unwrap();
        let tf = tracefree_part(&g, &g, &gi).unwrap();
        assert!(tf.max_abs() < 1e-15);
        let d = Tensor::from_fn(4, vec![Variance::Lower, Variance::Lower], |ix| {
            if ix == [0, 0] {
                2.0
            } else {
                0.0
            }
        });
        let tfd = tracefree_part(&d, &g, &gi).unwrap();
        assert!((tfd.get(&[0, 0]) - 1.5).abs() < 1e-15);
        assert!((tfd.get(&[1, 1]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn sigma4_eigenvalue_oracle() {
        // diag(3, -1, -1, -1): trace-free, sigma4 = product = -3
        let g = ident(4);
        let gi = invert_sym2(&g).unwrap();
        let lo = Tensor::from_fn(4, vec![Variance::Lower, Variance::Lower], |ix| {
            if ix[0] != ix[1] {
                0.0
            } else if ix[0] == 0 {
                3.0
            } else {
                -1.0
            }
        });
        let p = power_traces(&lo, &gi).unwrap();
        assert!((p[0]).abs() < 1e-14);
        assert!((p[1] - 12.0).abs() < 1e-12); // |lo|^2
        assert!((p[3] - 84.0).abs() < 1e-12); // tr(lo^4)
        let s4 = sigma4_from_traces(&p);
        assert!((s4 + 3.0).abs() < 1e-12, "sigma4 = {s4}");
        // |lo|^4 = 144
        assert!((p[1] * p[1] - 144.0).abs() < 1e-10);
    }

    #[test]
    fn newton_matches_eigen_brute_force() {
        // random symmetric 4x4, eigenvalues by Jacobi rotations
        let mut m = [[0.0f64; 4]; 4];
        let mut seed = 1234567u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..4 {
            for j in i..4 {
                let v = rnd();
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let g = ident(4);
        let gi = invert_sym2(&g).unwrap();
        let t = Tensor::from_fn(4, vec![Variance::Lower, Variance::Lower], |ix| {
            m[ix[0]][ix[1]]
        });
        let p = power_traces(&t, &gi).unwrap();
        let s4 = sigma4_from_traces(&p);
        // Jacobi eigenvalue iteration
        let mut a = m;
        for _ in 0..100 {
            let mut p_ = 0;
            let mut q_ = 1;
            let mut off = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    if a[i][j].abs() > off {
                        off = a[i][j].abs();
                        p_ = i;
                        q_ = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (2.0 * a[p_][q_]).atan2(a[q_][q_] - a[p_][p_]);
            let (s, c) = theta.sin_cos();
            let mut b = a;
            for k in 0..4 {
                b[p_][k] = c * a[p_][k] - s * a[q_][k];
                b[q_][k] = s * a[p_][k] + c * a[q_][k];
            }
            let mut b2 = b;
            for k in 0..4 {
                b2[k][p_] = c * b[k][p_] - s * b[k][q_];
                b2[k][q_] = s * b[k][p_] + c * b[k][q_];
            }
            a = b2;
        }
        let ev = [a[0][0], a[1][1], a[2][2], a[3][3]];
        let prod: f64 = ev.iter().product();
        assert!(
            (s4 - prod).abs() < 1e-9 * (1.0 + prod.abs()),
            "newton {s4} vs eigen {prod}"
        );
    }

    #[test]
    fn dim3_tracefree_quartic_identity() {
        // in dim 3, sigma4 = 0 forces 2 tr(lo^4) = |lo|^4 for trace-free lo
        let g = ident(3);
        let gi = invert_sym2(&g).unwrap();
        for s in 0..5 {
            let a = 1.0 + s as f64 * 0.7;
            let b = -0.3 - s as f64 * 0.2;
            let c = -(a + b);
            let lo = Tensor::from_fn(3, vec![Variance::Lower, Variance::Lower], |ix| {
                if ix[0] != ix[1] {
                    0.0
                } else {
                    [a, b, c][ix[0]]
                }
            });
            let p = power_traces(&lo, &gi).unwrap();
            let lhs = 2.0 * p[3];
            let rhs = p[1] * p[1];
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
    }
}
