//! Two subsystems coupled in cascade, written in the advanced time frame of
//! the downstream subsystem.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{LindbladKernel, ProductSum, Scratch};
use crate::operator::{self, Operator, StateVector, C64, I, ONE};
use crate::subsystem::DressedSubsystem;

/// Decay rates and propagation gain, in units of the qubit frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Power transmitted from subsystem 1 to subsystem 2, in `[0, 1]`.
    pub gain: f64,
}

impl CascadeParams {
    pub fn new(kappa1: f64, kappa2: f64) -> Self {
        Self { kappa1, kappa2, gamma1: 0.0, gamma2: 0.0, gain: 1.0 }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma1 = gamma;
        self.gamma2 = gamma;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.kappa1 > 0.0 && self.kappa2 > 0.0) {
            return bad(format!("kappa1 and kappa2 must be positive, got {} and {}", self.kappa1, self.kappa2));
        }
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
            return bad(format!("gamma1 and gamma2 must be nonnegative, got {} and {}", self.gamma1, self.gamma2));
        }
        if !(0.0..=1.0).contains(&self.gain) {
            return bad(format!("gain must lie in [0, 1], got {}", self.gain));
        }
        Ok(())
    }

    /// `sqrt(G kappa1 kappa2)`, the strength of the cascade coupling.
    pub fn coupling(&self) -> f64 {
        (self.gain * self.kappa1 * self.kappa2).sqrt()
    }
}

/// Observable names understood by [`CompositeModel::observable`].
pub const OBSERVABLES: [&str; 6] = ["S1", "S2", "A1", "A2", "S1dagS1", "S2dagS2"];

/// Composite model on the product of the two kept eigenbases.
///
/// Channel order is fixed: `lindblads[0]` is the collective input/output
/// channel `sqrt(k1) A1 + sqrt(G k2) A2`, followed by the propagation-loss
/// channel and the two qubit decay channels.
#[derive(Clone, Debug)]
pub struct CompositeModel {
    pub sub1: DressedSubsystem,
    pub sub2: DressedSubsystem,
    pub params: CascadeParams,
    pub dim: usize,
    /// Hermitian Hamiltonian including the cascade coupling.
    pub h: Operator,
    pub lindblads: [Operator; 4],
    pub observables: BTreeMap<&'static str, Operator>,
    pub ground: StateVector,
    heff_diag: Vec<C64>,
    kernel: LindbladKernel,
    l0: ProductSum,
    l0_dag: ProductSum,
    s2: ProductSum,
}

fn scale(op: &Operator, c: C64) -> Operator {
    op.mapv(|z| z * c)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Hermitian part only: `H1 + H2 + (i/2) sqrt(G k1 k2) (A1^dag A2 - A1 A2^dag)`.
pub fn composite_hamiltonian(d1: &DressedSubsystem, d2: &DressedSubsystem, p: &CascadeParams) -> Result<Operator> {
    check_pair(d1, d2)?;
    p.validate()?;
    Ok(hamiltonian_unchecked(d1, d2, p))
}

fn hamiltonian_unchecked(d1: &DressedSubsystem, d2: &DressedSubsystem, p: &CascadeParams) -> Operator {
    let i1 = operator::identity(d1.dim());
    let i2 = operator::identity(d2.dim());
    let h1 = operator::tensor(&operator::real_diag(&d1.energies), &i2);
    let h2 = operator::tensor(&i1, &operator::real_diag(&d2.energies));
    let a1d_a2 = operator::tensor(&operator::dagger(&d1.a), &d2.a);
    let a1_a2d = operator::tensor(&d1.a, &operator::dagger(&d2.a));
    h1 + h2 + scale(&(a1d_a2 - a1_a2d), 0.5 * I * p.coupling())
}

fn check_pair(d1: &DressedSubsystem, d2: &DressedSubsystem) -> Result<()> {
    for d in [d1, d2] {
        let n = d.dim();
        if d.a.dim() != (n, n) || d.s.dim() != (n, n) {
            return Err(Error::Dimension(format!("dressed operators do not match {n} kept levels")));
        }
    }
    Ok(())
}

pub fn assemble(d1: &DressedSubsystem, d2: &DressedSubsystem, p: &CascadeParams) -> Result<CompositeModel> {
    check_pair(d1, d2)?;
    p.validate()?;
    let (n1, n2) = (d1.dim(), d2.dim());
    let dim = n1 * n2;
    let i1 = operator::identity(n1);
    let i2 = operator::identity(n2);
    let h = hamiltonian_unchecked(d1, d2, p);

    let a1 = operator::tensor(&d1.a, &i2);
    let a2 = operator::tensor(&i1, &d2.a);
    let s1 = operator::tensor(&d1.s, &i2);
    let s2 = operator::tensor(&i1, &d2.s);
    let g = p.gain;
    let c_in1 = p.kappa1.sqrt();
    let c_in2 = (g * p.kappa2).sqrt();
    let c_loss = ((1.0 - g) * p.kappa2).sqrt();
    let lindblads = [
        scale(&a1, real(c_in1)) + scale(&a2, real(c_in2)),
        scale(&a2, real(c_loss)),
        scale(&s1, real(p.gamma1.sqrt())),
        scale(&s2, real(p.gamma2.sqrt())),
    ];

    let mut heff_dense = h.clone();
    for l in &lindblads {
        heff_dense = heff_dense - scale(&operator::dagger(l).dot(l), 0.5 * I);
    }
    let heff_diag = heff_dense.diag().to_vec();

    // Local effective Hamiltonians h_j = diag(e_j) - (i/2) K_j; the cross
    // terms of H and of sum L^dag L combine into -i c A1 (x) A2^dag.
    let local = |d: &DressedSubsystem, kappa: f64, gamma: f64| {
        let ad = operator::dagger(&d.a);
        let sd = operator::dagger(&d.s);
        let k = scale(&ad.dot(&d.a), real(kappa)) + scale(&sd.dot(&d.s), real(gamma));
        operator::real_diag(&d.energies) - scale(&k, 0.5 * I)
    };
    let mut heff = ProductSum::default();
    heff.push_left(ONE, &local(d1, p.kappa1, p.gamma1));
    heff.push_right(ONE, &local(d2, p.kappa2, p.gamma2));
    heff.push(-I * p.coupling(), Some(&d1.a), Some(&operator::dagger(&d2.a)));

    let mut l0 = ProductSum::default();
    l0.push_left(real(c_in1), &d1.a);
    l0.push_right(real(c_in2), &d2.a);
    let mut l1 = ProductSum::default();
    l1.push_right(real(c_loss), &d2.a);
    let mut l2 = ProductSum::default();
    l2.push_left(real(p.gamma1.sqrt()), &d1.s);
    let mut l3 = ProductSum::default();
    l3.push_right(real(p.gamma2.sqrt()), &d2.s);
    let l0_dag = l0.dagger();
    let kernel = LindbladKernel::new(n1, n2, heff, vec![l0.clone(), l1, l2, l3]);

    let mut s2_local = ProductSum::default();
    s2_local.push_right(ONE, &d2.s);

    let mut observables = BTreeMap::new();
    observables.insert("S1dagS1", operator::dagger(&s1).dot(&s1));
    observables.insert("S2dagS2", operator::dagger(&s2).dot(&s2));
    observables.insert("S1", s1);
    observables.insert("S2", s2);
    observables.insert("A1", a1);
    observables.insert("A2", a2);

    Ok(CompositeModel {
        sub1: d1.clone(),
        sub2: d2.clone(),
        params: *p,
        dim,
        h,
        lindblads,
        observables,
        ground: operator::basis_vector(dim, 0),
        heff_diag,
        kernel,
        l0,
        l0_dag,
        s2: s2_local,
    })
}

impl CompositeModel {
    /// The collective input/output channel bound to the hierarchy sources.
    pub fn l0(&self) -> &Operator {
        &self.lindblads[0]
    }

    pub fn observable(&self, name: &str) -> Option<&Operator> {
        self.observables.get(name)
    }

    /// Ascending eigenvalues of `h`.
    pub fn energies(&self) -> Result<Vec<f64>> {
        operator::hermitian_eigenvalues(&self.h)
    }

    /// Diagonal of `Heff = H - (i/2) sum L^dag L`.
    pub fn heff_diagonal(&self) -> &[C64] {
        &self.heff_diag
    }

    /// Diagonal part `c_ab = -i (d_a - conj(d_b))` of the generator, flattened
    /// row-major.
    pub fn generator_diagonal(&self) -> Vec<C64> {
        let d = &self.heff_diag;
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for a in d {
            for b in d {
                out.push(-I * (a - b.conj()));
            }
        }
        out
    }

    pub fn kernel(&self) -> &LindbladKernel {
        &self.kernel
    }

    pub(crate) fn l0_terms(&self) -> (&ProductSum, &ProductSum) {
        (&self.l0, &self.l0_dag)
    }

    pub(crate) fn s2_terms(&self) -> &ProductSum {
        &self.s2
    }

    pub fn ground_projector(&self) -> Operator {
        operator::outer(&self.ground, &self.ground)
    }

    /// `S2^dag S1^dag S1 S2`, whose expectation is the equal-time correlation.
    pub fn correlation_operator(&self) -> Operator {
        let s2 = &self.observables["S2"];
        operator::dagger(s2).dot(&self.observables["S1dagS1"]).dot(s2)
    }
}

/// The composite ground state, which is the first kept product basis vector.
pub fn composite_ground(model: &CompositeModel) -> StateVector {
    model.ground.clone()
}

/// Lindblad generator applied to `rho`, which need not be Hermitian.
pub fn liouvillian_apply(model: &CompositeModel, rho: &Operator) -> Result<Operator> {
    let d = model.dim;
    if rho.dim() != (d, d) {
        return Err(Error::Dimension(format!("rho is {:?}, model dimension is {d}", rho.dim())));
    }
    let flat: Vec<C64> = rho.iter().copied().collect();
    let mut out = vec![operator::ZERO; d * d];
    model.kernel.apply(&flat, &mut out, &mut Scratch::new(d));
    Ok(Operator::from_shape_vec((d, d), out).expect("square buffer"))
}
