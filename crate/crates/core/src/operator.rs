//! Dense complex operators: tensor products, Hermitian eigendecomposition,
//! spectral functions and expectation values.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Square complex matrix in row-major order.
pub type Operator = Array2<C64>;
pub type StateVector = Array1<C64>;

/// Relative Hermiticity tolerance, measured against the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> Operator {
    Array2::from_diag_elem(n, ONE)
}

pub fn real_diag(values: &[f64]) -> Operator {
    Array2::from_diag(&Array1::from_iter(values.iter().map(|&v| C64::new(v, 0.0))))
}

pub fn dagger(a: &Operator) -> Operator {
    a.t().mapv(|z| z.conj())
}

/// `|u><v|`
pub fn outer(u: &StateVector, v: &StateVector) -> Operator {
    Array2::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j].conj())
}

pub fn basis_vector(n: usize, k: usize) -> StateVector {
    let mut v = Array1::zeros(n);
    v[k] = ONE;
    v
}

/// Kronecker product; the left factor varies slowest.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a.dot(b) - b.dot(a)
}

pub fn trace(a: &Operator) -> C64 {
    a.diag().sum()
}

/// Largest elementwise `|a - a^dag|`.
pub fn asymmetry(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &Operator) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn check_square(a: &Operator, what: &str) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Dimension(format!("{what} is {r}x{c}, expected square")));
    }
    Ok(r)
}

/// Fails unless `a` is Hermitian within [`HERMITIAN_TOL`] of its largest entry.
pub fn check_hermitian(a: &Operator) -> Result<()> {
    check_square(a, "operator")?;
    let scale = max_abs(a);
    let asym = asymmetry(a);
    if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry: asym, scale });
    }
    Ok(())
}

fn symmetrized(a: &Operator) -> Operator {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

/// Eigendecomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub basis: Operator,
}

/// Ascending eigenvalues and eigenvectors. Each eigenvector is phase-fixed so
/// its largest-magnitude component is real and positive.
pub fn hermitian_eigs(h: &Operator) -> Result<Eigen> {
    check_hermitian(h)?;
    let n = h.nrows();
    let hs = symmetrized(h);
    let m = DMatrix::from_fn(n, n, |i, j| hs[[i, j]]);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut basis = Array2::zeros((n, n));
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for r in 1..n {
            if v[r].norm() > v[pivot].norm() + 1e-14 {
                pivot = r;
            }
        }
        let phase = if v[pivot].norm() > 0.0 { v[pivot].conj() / v[pivot].norm() } else { ONE };
        for r in 0..n {
            basis[[r, col]] = v[r] * phase;
        }
    }
    Ok(Eigen { values, basis })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(h: &Operator) -> Result<Vec<f64>> {
    check_hermitian(h)?;
    let n = h.nrows();
    let hs = symmetrized(h);
    let m = DMatrix::from_fn(n, n, |i, j| hs[[i, j]]);
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `V diag(f(lambda)) V^dag` for Hermitian `h = V diag(lambda) V^dag`.
pub fn func_of_hermitian(h: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    let eig = hermitian_eigs(h)?;
    Ok(apply_spectral(&eig, f))
}

/// Spectral application on an existing decomposition.
pub fn apply_spectral(eig: &Eigen, f: impl Fn(f64) -> f64) -> Operator {
    let v = &eig.basis;
    let mut scaled = v.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let fl = f(lam);
        scaled.column_mut(j).mapv_inplace(|z| z * fl);
    }
    let out = scaled.dot(&dagger(v));
    symmetrized(&out)
}

/// `trace(op * rho)`
pub fn expect(op: &Operator, rho: &Operator) -> Result<C64> {
    let n = check_square(op, "observable")?;
    let m = check_square(rho, "state")?;
    if n != m {
        return Err(Error::Dimension(format!("observable dim {n} vs state dim {m}")));
    }
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += op[[i, j]] * rho[[j, i]];
        }
    }
    Ok(acc)
}

/// Truncated annihilation operator on `n` Fock levels.
pub fn annihilation(n: usize) -> Operator {
    let mut a = Array2::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Qubit operators in the basis (|g>, |e>).
pub mod qubit {
    use super::{Operator, C64};
    use ndarray::array;

    /// `sigma = |g><e|`
    pub fn lowering() -> Operator {
        array![[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]]
    }

    pub fn sigma_x() -> Operator {
        array![[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]]
    }

    /// `i (sigma - sigma^dag)`
    pub fn sigma_y() -> Operator {
        array![[C64::new(0.0, 0.0), C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), C64::new(0.0, 0.0)]]
    }

    /// `|e><e| - |g><g|`
    pub fn sigma_z() -> Operator {
        array![[C64::new(-1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]
    }
}
