//! Truncated multivariate Taylor (jet) arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients (∂^α f / α!) of a scalar function
//! up to a truncation order. All arithmetic is exact at the coefficient level,
//! so higher partial derivatives extracted from jets are exact to roundoff.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Monomial tables for a fixed (dim, order): graded-lex exponent list,
/// multiplication pairs grouped by output rank, parent chains for
/// composition, and per-variable differentiation maps.
#[derive(Debug)]
pub struct JetTable {
    pub dim: usize,
    pub order: usize,
    /// Exponent vector of each monomial, graded-lex order. Rank 0 is the
    /// constant monomial.
    pub exps: Vec<Vec<u8>>,
    /// For each output rank k, the (i, j) pairs with exps[i]+exps[j]=exps[k].
    mul_by_out: Vec<Vec<(u32, u32)>>,
    /// rank -> (variable, parent rank) with exps[rank] = exps[parent] + e_var;
    /// rank 0 maps to itself.
    parent: Vec<(usize, usize)>,
    /// For each variable v: (dst_rank_in_lower_table, src_rank, factor) with
    /// dst table of order-1.
    diff: Vec<Vec<(u32, u32, f64)>>,
    /// factorial(α) per rank.
    fact: Vec<f64>,
}

fn monomials(dim: usize, order: usize) -> Vec<Vec<u8>> {
    fn fill(layer: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, left: u8) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            layer.push(cur.clone());
            cur[pos] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            fill(layer, cur, pos + 1, left - e);
        }
        cur[pos] = 0;
    }
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut cur = vec![0u8; dim];
    for deg in 0..=order as u8 {
        if dim == 0 {
            if deg == 0 {
                out.push(vec![]);
            }
            continue;
        }
        fill(&mut out, &mut cur, 0, deg);
    }
    out
}

impl JetTable {
    fn build(dim: usize, order: usize) -> JetTable {
        let exps = monomials(dim, order);
        let mut rank: HashMap<Vec<u8>, usize> = HashMap::with_capacity(exps.len());
        for (r, e) in exps.iter().enumerate() {
            rank.insert(e.clone(), r);
        }
        let deg = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut mul_by_out: Vec<Vec<(u32, u32)>> = vec![Vec::new(); exps.len()];
        for (i, a) in exps.iter().enumerate() {
            let da = deg(a);
            for (j, b) in exps.iter().enumerate() {
                if da + deg(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let k = rank[&sum];
                mul_by_out[k].push((i as u32, j as u32));
            }
        }

        let mut parent = vec![(0usize, 0usize); exps.len()];
        for (r, e) in exps.iter().enumerate().skip(1) {
            let v = e.iter().position(|&x| x > 0).unwrap();
            let mut p = e.clone();
            p[v] -= 1;
            parent[r] = (v, rank[&p]);
        }

        let mut diff: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); dim];
        if order > 0 {
            let lower = monomials(dim, order - 1);
            let mut lrank: HashMap<Vec<u8>, usize> = HashMap::new();
            for (r, e) in lower.iter().enumerate() {
                lrank.insert(e.clone(), r);
            }
            for v in 0..dim {
                for (lr, e) in lower.iter().enumerate() {
                    let mut src = e.clone();
                    src[v] += 1;
                    let sr = rank[&src];
                    diff[v].push((lr as u32, sr as u32, (e[v] + 1) as f64));
                }
            }
        }

        let fact = exps
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&x| (1..=x as u64).product::<u64>() as f64)
                    .product::<f64>()
            })
            .collect();

        JetTable {
            dim,
            order,
            exps,
            mul_by_out,
            parent,
            diff,
            fact,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn rank_of(&self, alpha: &[u8]) -> Option<usize> {
        self.exps.iter().position(|e| e == alpha)
    }
}

fn registry() -> &'static Mutex<HashMap<(usize, usize), Arc<JetTable>>> {
    static REG: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetTable>>>> = OnceLock::new();
    REG.get_or_init(|| Mutex::new(HashMap::new()))
}

thread_local! {
    static LOCAL_TABLES: std::cell::RefCell<Vec<Arc<JetTable>>> =
        const { std::cell::RefCell::new(Vec::new()) };
}

pub fn table(dim: usize, order: usize) -> Arc<JetTable> {
    LOCAL_TABLES.with(|cell| {
        let mut local = cell.borrow_mut();
        for t in local.iter() {
            if t.dim == dim && t.order == order {
                return t.clone();
            }
        }
        let mut reg = registry().lock().unwrap();
        let t = reg
            .entry((dim, order))
            .or_insert_with(|| Arc::new(JetTable::build(dim, order)))
            .clone();
        local.push(t.clone());
        t
    })
}

/// Truncated Taylor expansion of a scalar in `dim` variables to `order`.
/// Coefficient at multi-index α is ∂^α f / α! at the expansion point.
#[derive(Clone)]
pub struct Jet {
    table: Arc<JetTable>,
    pub coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Jet(dim={}, order={}, val={:.6e})",
            self.dim(),
            self.order(),
            self.val()
        )
    }
}

impl Jet {
    pub fn zero(dim: usize, order: usize) -> Jet {
        let t = table(dim, order);
        let n = t.len();
        Jet {
            table: t,
            coeffs: vec![0.0; n],
        }
    }

    pub fn constant(dim: usize, order: usize, c: f64) -> Jet {
        let mut j = Jet::zero(dim, order);
        j.coeffs[0] = c;
        j
    }

    /// Jet of the coordinate function x_i at the point with x_i = value.
    pub fn variable(dim: usize, order: usize, i: usize, value: f64) -> Jet {
        let mut j = Jet::zero(dim, order);
        j.coeffs[0] = value;
        if order >= 1 {
            // rank of e_i in graded-lex: degree-1 block is ordered x_0, x_1, ...
            j.coeffs[1 + i] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    /// Value of the function at the expansion point.
    pub fn val(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// ∂^α f at the expansion point (= α! · coefficient).
    pub fn partial(&self, alpha: &[u8]) -> Result<f64> {
        if alpha.len() != self.dim() {
            return Err(Error::Shape(format!(
                "multi-index length {} != dim {}",
                alpha.len(),
                self.dim()
            )));
        }
        let deg: usize = alpha.iter().map(|&x| x as usize).sum();
        if deg > self.order() {
            return Err(Error::Order(format!(
                "|alpha| = {} exceeds jet order {}",
                deg,
                self.order()
            )));
        }
        let r = self
            .table
            .rank_of(alpha)
            .ok_or_else(|| Error::Order("multi-index not in table".into()))?;
        Ok(self.table.fact[r] * self.coeffs[r])
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let t = table(self.dim(), order);
        let n = t.len();
        Jet {
            table: t,
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    fn align(a: &Jet, b: &Jet) -> (Jet, Jet) {
        assert_eq!(a.dim(), b.dim(), "jet dim mismatch");
        if a.order() == b.order() {
            (a.clone(), b.clone())
        } else if a.order() < b.order() {
            (a.clone(), b.truncate(a.order()))
        } else {
            (a.truncate(b.order()), b.clone())
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        assert_eq!(self.dim(), other.dim(), "jet dim mismatch");
        let order = self.order().min(other.order());
        let mut out = Jet::zero(self.dim(), order);
        out.mul_acc(self, other, 1.0);
        out
    }

    /// self += sign · (a·b), truncated to self's order. Graded-lex tables are
    /// prefix-compatible across orders, so operands of any order ≥ self's
    /// order can be read directly.
    pub fn mul_acc(&mut self, a: &Jet, b: &Jet, sign: f64) {
        debug_assert_eq!(a.dim(), self.dim());
        debug_assert_eq!(b.dim(), self.dim());
        debug_assert!(a.order() >= self.order() && b.order() >= self.order());
        for (k, pairs) in self.table.mul_by_out.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in pairs {
                acc += a.coeffs[i as usize] * b.coeffs[j as usize];
            }
            self.coeffs[k] += sign * acc;
        }
    }

    /// self += sign · a, truncated to self's order.
    pub fn acc(&mut self, a: &Jet, sign: f64) {
        debug_assert!(a.order() >= self.order());
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            *c += sign * a.coeffs[k];
        }
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet> {
        assert_eq!(self.dim(), other.dim(), "jet dim mismatch");
        if other.coeffs[0] == 0.0 || !other.coeffs[0].is_finite() {
            return Err(Error::Domain(
                "division by jet with zero constant term".into(),
            ));
        }
        let order = self.order().min(other.order());
        let inv0 = 1.0 / other.coeffs[0];
        let mut out = Jet::zero(self.dim(), order);
        for k in 0..out.coeffs.len() {
            let mut acc = self.coeffs[k];
            for &(i, j) in &out.table.mul_by_out[k] {
                if j as usize == k {
                    continue; // the b[0]*c[k] term being solved for
                }
                acc -= other.coeffs[i as usize] * out.coeffs[j as usize];
            }
            out.coeffs[k] = acc * inv0;
        }
        Ok(out)
    }

    pub fn recip(&self) -> Result<Jet> {
        Jet::constant(self.dim(), self.order(), 1.0).div_jet(self)
    }

    /// Composition with a univariate power series around the constant term:
    /// result = Σ_m outer[m] (self - self.val())^m.
    fn univariate(&self, outer: &[f64]) -> Jet {
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let k = self.order();
        let mut res = Jet::constant(self.dim(), k, outer[k.min(outer.len() - 1)]);
        for m in (0..k.min(outer.len() - 1)).rev() {
            res = res.mul_jet(&u);
            res.coeffs[0] += outer[m];
        }
        res
    }

    pub fn exp_jet(&self) -> Jet {
        let c = self.val().exp();
        let k = self.order();
        let mut outer = vec![0.0; k + 1];
        let mut f = 1.0;
        for (m, o) in outer.iter_mut().enumerate() {
            if m > 0 {
                f *= m as f64;
            }
            *o = c / f;
        }
        self.univariate(&outer)
    }

    pub fn log_jet(&self) -> Result<Jet> {
        let c = self.val();
        if c <= 0.0 {
            return Err(Error::Domain(format!("log of nonpositive value {c}")));
        }
        let k = self.order();
        let mut outer = vec![0.0; k + 1];
        outer[0] = c.ln();
        for (m, o) in outer.iter_mut().enumerate().skip(1) {
            *o = -(-1.0f64).powi(m as i32) / (m as f64 * c.powi(m as i32));
        }
        Ok(self.univariate(&outer))
    }

    pub fn sqrt_jet(&self) -> Result<Jet> {
        let c = self.val();
        if c <= 0.0 {
            return Err(Error::Domain(format!("sqrt of nonpositive value {c}")));
        }
        let k = self.order();
        // binomial series: sqrt(c + u) = sqrt(c) Σ C(1/2, m) (u/c)^m
        let mut outer = vec![0.0; k + 1];
        let s = c.sqrt();
        let mut binom = 1.0;
        for (m, o) in outer.iter_mut().enumerate() {
            if m > 0 {
                binom *= (0.5 - (m as f64 - 1.0)) / m as f64;
            }
            *o = s * binom / c.powi(m as i32);
        }
        Ok(self.univariate(&outer))
    }

    pub fn sin_jet(&self) -> Jet {
        let c = self.val();
        let k = self.order();
        let (s, co) = c.sin_cos();
        let cycle = [s, co, -s, -co];
        let mut outer = vec![0.0; k + 1];
        let mut f = 1.0;
        for (m, o) in outer.iter_mut().enumerate() {
            if m > 0 {
                f *= m as f64;
            }
            *o = cycle[m % 4] / f;
        }
        self.univariate(&outer)
    }

    pub fn cos_jet(&self) -> Jet {
        let c = self.val();
        let k = self.order();
        let (s, co) = c.sin_cos();
        let cycle = [co, -s, -co, s];
        let mut outer = vec![0.0; k + 1];
        let mut f = 1.0;
        for (m, o) in outer.iter_mut().enumerate() {
            if m > 0 {
                f *= m as f64;
            }
            *o = cycle[m % 4] / f;
        }
        self.univariate(&outer)
    }

    pub fn powi_jet(&self, p: i32) -> Result<Jet> {
        if p == 0 {
            return Ok(Jet::constant(self.dim(), self.order(), 1.0));
        }
        let base = if p > 0 { self.clone() } else { self.recip()? };
        let mut e = p.unsigned_abs();
        let mut acc = Jet::constant(self.dim(), self.order(), 1.0);
        let mut sq = base;
        loop {
            if e & 1 == 1 {
                acc = acc.mul_jet(&sq);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            sq = sq.mul_jet(&sq);
        }
        Ok(acc)
    }

    /// Partial derivative as a jet of order-1 (coefficients shift down).
    pub fn deriv(&self, var: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        self.deriv_trunc(var, self.order() - 1)
    }

    /// Partial derivative truncated to `out_order` (≤ order − 1).
    pub fn deriv_trunc(&self, var: usize, out_order: usize) -> Jet {
        debug_assert!(self.order() > out_order);
        let mut out = Jet::zero(self.dim(), out_order);
        // the (out_order+1) table's diff map indexes a prefix of our coeffs
        let src_table = table(self.dim(), out_order + 1);
        for &(dst, src, f) in &src_table.diff[var] {
            out.coeffs[dst as usize] = f * self.coeffs[src as usize];
        }
        out
    }

    /// Compose this jet (in `m` ambient variables, around the point given by
    /// the constant terms of `args`) with `m` jets in chart variables.
    /// The result is the chart jet of the composite, truncated to
    /// min(self.order, args order).
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.dim(), "compose arity mismatch");
        let ad = args[0].dim();
        // the composite is valid only to min(inner, outer) order; truncating
        // up front keeps the power chain at that order
        let ao = args
            .iter()
            .map(|a| a.order())
            .min()
            .unwrap()
            .min(self.order());
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.truncate(ao);
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        let mut acc = Jet::constant(ad, ao, self.coeffs[0]);
        // powers of monomials via parent chain
        let mut pows: Vec<Option<Jet>> = vec![None; self.table.len()];
        for r in 1..self.table.len() {
            let (v, p) = self.table.parent[r];
            let pw = if p == 0 {
                deltas[v].clone()
            } else {
                pows[p].as_ref().unwrap().mul_jet(&deltas[v])
            };
            if self.coeffs[r] != 0.0 {
                for (o, c) in acc.coeffs.iter_mut().zip(pw.coeffs.iter()) {
                    *o += self.coeffs[r] * c;
                }
            }
            pows[r] = Some(pw);
        }
        acc
    }
}

/// Precomputed composition engine: powers of the chart-jet increments for a
/// fixed evaluation point, shared across every ambient object composed there.
pub struct Composer {
    outer_dim: usize,
    outer_order: usize,
    chart_dim: usize,
    chart_order: usize,
    /// pows[r] = Π (x_i − x_i(0))^{α_i} for the outer monomial of rank r.
    pows: Vec<Jet>,
}

impl Composer {
    pub fn new(args: &[Jet], outer_order: usize) -> Composer {
        let chart_dim = args[0].dim();
        let chart_order = args.iter().map(|a| a.order()).min().unwrap().min(outer_order);
        let outer_dim = args.len();
        let t = table(outer_dim, outer_order);
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.truncate(chart_order);
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        let mut pows: Vec<Jet> = Vec::with_capacity(t.len());
        pows.push(Jet::constant(chart_dim, chart_order, 1.0));
        for r in 1..t.len() {
            let (v, p) = t.parent[r];
            pows.push(pows[p].mul_jet(&deltas[v]));
        }
        Composer {
            outer_dim,
            outer_order,
            chart_dim,
            chart_order,
            pows,
        }
    }

    /// Compose an ambient jet, truncating the result to
    /// min(out_order, f.order, chart order).
    pub fn apply(&self, f: &Jet, out_order: usize) -> Jet {
        assert_eq!(f.dim(), self.outer_dim);
        let fo = f.order().min(self.outer_order);
        let oo = out_order.min(fo).min(self.chart_order);
        let mut acc = Jet::zero(self.chart_dim, oo);
        let nmono = table(self.outer_dim, fo).len();
        acc.coeffs[0] = f.coeffs[0];
        for r in 1..nmono {
            let c = f.coeffs[r];
            if c != 0.0 {
                let pw = &self.pows[r];
                for (o, p) in acc.coeffs.iter_mut().zip(pw.coeffs.iter()) {
                    *o += c * p;
                }
            }
        }
        acc
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (mut a, b) = Jet::align(self, rhs);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x += y;
        }
        a
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (mut a, b) = Jet::align(self, rhs);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x -= y;
        }
        a
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.div_jet(rhs).expect("jet division by zero constant term")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($tr:ident, $m:ident);*) => {$(
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { (&self).$m(&rhs) }
        }
    )*};
}
owned_ops!(Add, add; Sub, sub; Mul, mul; Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Checked binary operation with the strict same-shape contract.
pub fn arith(a: &Jet, b: &Jet, op: &str) -> Result<Jet> {
    if a.dim() != b.dim() || a.order() != b.order() {
        return Err(Error::Shape(format!(
            "operands (dim {}, order {}) vs (dim {}, order {})",
            a.dim(),
            a.order(),
            b.dim(),
            b.order()
        )));
    }
    match op {
        "add" => Ok(a + b),
        "sub" => Ok(a - b),
        "mul" => Ok(a.mul_jet(b)),
        "div" => a.div_jet(b),
        other => Err(Error::Shape(format!("unknown binary op {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn lift(e: &Expr, point: &[f64], order: usize) -> Jet {
        e.lift(point, point.len(), order).unwrap()
    }

    #[test]
    fn polynomial_expansion() {
        // (1+x0)(1+x1) at (0,0), order 2
        let e = (Expr::constant(1.0) + Expr::var(0)) * (Expr::constant(1.0) + Expr::var(1));
        let j = lift(&e, &[0.0, 0.0], 2);
        assert_eq!(j.partial(&[0, 0]).unwrap(), 1.0);
        assert_eq!(j.partial(&[1, 0]).unwrap(), 1.0);
        assert_eq!(j.partial(&[0, 1]).unwrap(), 1.0);
        assert_eq!(j.partial(&[1, 1]).unwrap(), 1.0);
        assert_eq!(j.partial(&[2, 0]).unwrap(), 0.0);
        assert_eq!(j.partial(&[0, 2]).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_series() {
        let e = Expr::sqrt(Expr::constant(4.0) + Expr::var(0));
        let j = lift(&e, &[0.0], 1);
        assert!((j.val() - 2.0).abs() < 1e-15);
        assert!((j.coeffs[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exp_of_square() {
        let e = Expr::exp(Expr::var(0) * Expr::var(0));
        let j = lift(&e, &[0.0], 2);
        assert!((j.partial(&[2]).unwrap() - 2.0).abs() < 1e-14);
        assert!(j.partial(&[1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mul_div_geometric() {
        let x = Jet::variable(1, 2, 0, 0.0);
        let sq = x.mul_jet(&x);
        assert_eq!(sq.coeffs[2], 1.0);
        let one = Jet::constant(1, 2, 1.0);
        let den = &one + &x;
        let g = one.div_jet(&den).unwrap();
        assert_eq!(g.coeffs, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn sqrt_of_square_is_identity() {
        let e = Expr::constant(3.0) + Expr::var(0) + Expr::sin(Expr::var(0));
        let a = lift(&e, &[0.2], 4);
        let b = a.mul_jet(&a).sqrt_jet().unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn cubic_partial() {
        let e = Expr::pow(Expr::var(0), 3);
        let j = lift(&e, &[0.0], 3);
        assert!((j.partial(&[3]).unwrap() - 6.0).abs() < 1e-15);
        assert_eq!(j.partial(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn chain_rule_partials() {
        let e = Expr::sin(Expr::var(0) + Expr::constant(2.0) * Expr::var(1));
        let j = lift(&e, &[0.0, 0.0], 3);
        assert!(j.partial(&[1, 1]).unwrap().abs() < 1e-15); // -sin(0)*2
        assert!((j.partial(&[1, 0]).unwrap() - 1.0).abs() < 1e-15); // cos(0)
    }

    #[test]
    fn partial_order_guard() {
        let j = Jet::constant(2, 2, 1.0);
        assert!(matches!(j.partial(&[2, 1]), Err(Error::Order(_))));
    }

    #[test]
    fn strict_arith_shape_guard() {
        let a = Jet::constant(2, 2, 1.0);
        let b = Jet::constant(2, 3, 1.0);
        assert!(matches!(arith(&a, &b, "add"), Err(Error::Shape(_))));
    }

    #[test]
    fn compose_matches_direct_lift() {
        // F(x,y) = exp(x) * (1 + y^2), x = u0 + u1^2, y = sin(u0 u1)
        let fx = Expr::exp(Expr::var(0)) * (Expr::constant(1.0) + Expr::var(1) * Expr::var(1));
        let xf = Expr::var(0) + Expr::var(1) * Expr::var(1);
        let yf = Expr::sin(Expr::var(0) * Expr::var(1));
        let u = [0.3, -0.2];
        let xj = lift(&xf, &u, 4);
        let yj = lift(&yf, &u, 4);
        let fj = fx.lift(&[xj.val(), yj.val()], 2, 4).unwrap();
        let composed = fj.compose(&[xj.clone(), yj.clone()]);
        // direct: substitute synthetically
        let direct = Expr::exp(xf.clone())
            * (Expr::constant(1.0) + Expr::mul(yf.clone(), yf.clone()));
        let dj = lift(&direct, &u, 4);
        for (a, b) in composed.coeffs.iter().zip(&dj.coeffs) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn finite_difference_agreement() {
        let e = Expr::exp(Expr::sin(Expr::var(0)) + Expr::var(1) * Expr::var(1));
        let p = [0.4, -0.3];
        let j = lift(&e, &p, 2);
        let h = 1e-5;
        let f = |x: f64, y: f64| e.eval(&[x, y]).unwrap();
        let dx = (f(p[0] + h, p[1]) - f(p[0] - h, p[1])) / (2.0 * h);
        let dxy = (f(p[0] + h, p[1] + h) - f(p[0] + h, p[1] - h) - f(p[0] - h, p[1] + h)
            + f(p[0] - h, p[1] - h))
            / (4.0 * h * h);
        let jx = j.partial(&[1, 0]).unwrap();
        let jxy = j.partial(&[1, 1]).unwrap();
        assert!((dx - jx).abs() < 1e-6 * (1.0 + jx.abs()));
        assert!((dxy - jxy).abs() < 1e-6 * (1.0 + jxy.abs()));
    }

    proptest::proptest! {
        #[test]
        fn leibniz_exactness(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
                             d0 in -2.0f64..2.0, d1 in -2.0f64..2.0, d2 in -2.0f64..2.0,
                             x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let p = Expr::constant(c0) + Expr::constant(c1) * Expr::var(0)
                + Expr::constant(c2) * Expr::var(0) * Expr::var(1);
            let q = Expr::constant(d0) + Expr::constant(d1) * Expr::var(1)
                + Expr::constant(d2) * Expr::var(0) * Expr::var(0);
            let pq = Expr::mul(p.clone(), q.clone());
            let point = [x, y];
            let jp = p.lift(&point, 2, 4).unwrap();
            let jq = q.lift(&point, 2, 4).unwrap();
            let jprod = jp.mul_jet(&jq);
            let jlift = pq.lift(&point, 2, 4).unwrap();
            for (a, b) in jprod.coeffs.iter().zip(&jlift.coeffs) {
                proptest::prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())));
            }
        }

        #[test]
        fn chain_exactness_exp(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, x in -1.0f64..1.0) {
            let p = Expr::constant(c0) + Expr::constant(c1) * Expr::var(0) * Expr::var(0);
            let ep = Expr::exp(p.clone());
            let jp = p.lift(&[x], 1, 5).unwrap();
            let lhs = ep.lift(&[x], 1, 5).unwrap();
            let rhs = jp.exp_jet();
            for (a, b) in lhs.coeffs.iter().zip(&rhs.coeffs) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
            }
        }
    }
}
