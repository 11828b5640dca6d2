//! Lindblad generator specialised to the two-factor product structure of the
//! composite space.
//!
//! Matrices are flat row-major `dim x dim` slices whose row index is
//! `a1 * n2 + a2`. Every operator is a short sum of `left (x) right` products
//! of sparse local matrices, so left multiplication is a set of axpy passes
//! over contiguous blocks. Right multiplication goes through the conjugate
//! transpose: `rho B = (B^dag rho^dag)^dag`.

use crate::operator::{Operator, C64, ZERO};

/// Sparse local matrix stored as `(row, col, value)` triples.
#[derive(Clone, Debug, Default)]
pub struct Local {
    entries: Vec<(usize, usize, C64)>,
}

impl Local {
    pub fn from_dense(op: &Operator) -> Self {
        let entries = op
            .indexed_iter()
            .filter(|(_, z)| **z != ZERO)
            .map(|((i, j), z)| (i, j, *z))
            .collect();
        Self { entries }
    }

    pub fn dagger(&self) -> Self {
        Self { entries: self.entries.iter().map(|&(i, j, z)| (j, i, z.conj())).collect() }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// `coeff * left (x) right`; `None` stands for the identity on that factor.
#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: C64,
    pub left: Option<Local>,
    pub right: Option<Local>,
}

/// Sum of product terms acting on the composite space.
#[derive(Clone, Debug, Default)]
pub struct ProductSum {
    pub terms: Vec<Term>,
}

impl ProductSum {
    pub fn push_left(&mut self, coeff: C64, op: &Operator) {
        self.push(coeff, Some(op), None);
    }

    pub fn push_right(&mut self, coeff: C64, op: &Operator) {
        self.push(coeff, None, Some(op));
    }

    pub fn push(&mut self, coeff: C64, left: Option<&Operator>, right: Option<&Operator>) {
        if coeff == ZERO {
            return;
        }
        self.terms.push(Term { coeff, left: left.map(Local::from_dense), right: right.map(Local::from_dense) });
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dagger(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff.conj(),
                left: t.left.as_ref().map(Local::dagger),
                right: t.right.as_ref().map(Local::dagger),
            })
            .collect();
        Self { terms }
    }
}

#[inline]
fn axpy(w: C64, src: &[C64], dst: &mut [C64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}

/// Scratch buffers for one generator evaluation.
#[derive(Clone, Debug)]
pub struct Scratch {
    t1: Vec<C64>,
    t2: Vec<C64>,
    t3: Vec<C64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        let n = dim * dim;
        Self { t1: vec![ZERO; n], t2: vec![ZERO; n], t3: vec![ZERO; n] }
    }
}

/// Product-structured Lindblad generator
/// `L rho = -i (Heff rho - rho Heff^dag) + sum_n L_n rho L_n^dag`.
#[derive(Clone, Debug)]
pub struct LindbladKernel {
    n1: usize,
    n2: usize,
    dim: usize,
    heff: ProductSum,
    heff_dag: ProductSum,
    jumps: Vec<ProductSum>,
    jumps_dag: Vec<ProductSum>,
}

impl LindbladKernel {
    pub fn new(n1: usize, n2: usize, heff: ProductSum, jumps: Vec<ProductSum>) -> Self {
        let jumps: Vec<ProductSum> = jumps.into_iter().filter(|j| !j.is_empty()).collect();
        Self {
            n1,
            n2,
            dim: n1 * n2,
            heff_dag: heff.dagger(),
            heff,
            jumps_dag: jumps.iter().map(ProductSum::dagger).collect(),
            jumps,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dst += scale * op * src`
    pub fn left_mul_add(&self, op: &ProductSum, scale: C64, src: &[C64], dst: &mut [C64], tmp: &mut [C64]) {
        let d = self.dim;
        let n2 = self.n2;
        let blk = n2 * d;
        for term in &op.terms {
            let w = scale * term.coeff;
            match (&term.left, &term.right) {
                (None, None) => axpy(w, src, dst),
                (Some(l), None) => {
                    for &(i, k, v) in &l.entries {
                        axpy(w * v, &src[k * blk..(k + 1) * blk], &mut dst[i * blk..(i + 1) * blk]);
                    }
                }
                (None, Some(r)) => {
                    for a1 in 0..self.n1 {
                        let base = a1 * n2;
                        for &(i, k, v) in &r.entries {
                            let s = (base + k) * d;
                            let t = (base + i) * d;
                            axpy(w * v, &src[s..s + d], &mut dst[t..t + d]);
                        }
                    }
                }
                (Some(l), Some(r)) => {
                    tmp.fill(ZERO);
                    for a1 in 0..self.n1 {
                        let base = a1 * n2;
                        for &(i, k, v) in &r.entries {
                            let s = (base + k) * d;
                            let t = (base + i) * d;
                            axpy(v, &src[s..s + d], &mut tmp[t..t + d]);
                        }
                    }
                    for &(i, k, v) in &l.entries {
                        axpy(w * v, &tmp[k * blk..(k + 1) * blk], &mut dst[i * blk..(i + 1) * blk]);
                    }
                }
            }
        }
    }

    /// `dst = op * src`
    pub fn left_mul(&self, op: &ProductSum, src: &[C64], dst: &mut [C64], tmp: &mut [C64]) {
        dst.fill(ZERO);
        self.left_mul_add(op, C64::new(1.0, 0.0), src, dst, tmp);
    }

    /// `dst += scale * (op * a - a * op)`; `op_dag` must be the adjoint of `op`.
    pub fn commutator_add(
        &self,
        op: &ProductSum,
        op_dag: &ProductSum,
        a: &[C64],
        scale: C64,
        dst: &mut [C64],
        s: &mut Scratch,
    ) {
        self.left_mul_add(op, scale, a, dst, &mut s.t3);
        dagger_into(a, &mut s.t1, self.dim);
        self.left_mul(op_dag, &s.t1, &mut s.t2, &mut s.t3);
        add_dagger_scaled(&s.t2, -scale, dst, self.dim);
    }

    /// `dst = op * a * op^dag`
    pub fn sandwich(&self, op: &ProductSum, a: &[C64], dst: &mut [C64], s: &mut Scratch) {
        self.left_mul(op, a, &mut s.t1, &mut s.t3);
        dagger_into(&s.t1, &mut s.t2, self.dim);
        self.left_mul(op, &s.t2, &mut s.t1, &mut s.t3);
        dagger_into(&s.t1, dst, self.dim);
    }

    fn apply_with(&self, h: &ProductSum, jumps: &[ProductSum], sign: C64, rho: &[C64], out: &mut [C64], s: &mut Scratch) {
        let d = self.dim;
        out.fill(ZERO);
        self.left_mul_add(h, sign, rho, out, &mut s.t3);
        dagger_into(rho, &mut s.t2, d);
        self.left_mul(h, &s.t2, &mut s.t1, &mut s.t3);
        add_dagger_scaled(&s.t1, -sign, out, d);
        for l in jumps {
            self.left_mul(l, rho, &mut s.t1, &mut s.t3);
            dagger_into(&s.t1, &mut s.t2, d);
            self.left_mul(l, &s.t2, &mut s.t1, &mut s.t3);
            add_dagger_scaled(&s.t1, C64::new(1.0, 0.0), out, d);
        }
    }

    /// `out = L rho`
    pub fn apply(&self, rho: &[C64], out: &mut [C64], s: &mut Scratch) {
        self.apply_with(&self.heff, &self.jumps, C64::new(0.0, -1.0), rho, out, s);
    }

    /// `out = L^dag o`, the Heisenberg-picture generator
    /// `i (Heff^dag o - o Heff) + sum_n L_n^dag o L_n`.
    pub fn apply_adjoint(&self, o: &[C64], out: &mut [C64], s: &mut Scratch) {
        self.apply_with(&self.heff_dag, &self.jumps_dag, C64::new(0.0, 1.0), o, out, s);
    }
}

/// `dst = src^dag` for flat `d x d` matrices.
pub fn dagger_into(src: &[C64], dst: &mut [C64], d: usize) {
    for i in 0..d {
        let row = &mut dst[i * d..(i + 1) * d];
        for (j, z) in row.iter_mut().enumerate() {
            *z = src[j * d + i].conj();
        }
    }
}

/// `dst += scale * src^dag`
pub fn add_dagger_scaled(src: &[C64], scale: C64, dst: &mut [C64], d: usize) {
    for i in 0..d {
        let row = &mut dst[i * d..(i + 1) * d];
        for (j, z) in row.iter_mut().enumerate() {
            *z += scale * src[j * d + i].conj();
        }
    }
}
