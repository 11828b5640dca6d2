//! One qubit-cavity subsystem: bare Hamiltonian, diagonalization and the
//! dressed cavity and qubit transition operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{self, qubit, Operator, C64};

/// Physical parameters of one subsystem, in units of the qubit frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub omega_c: f64,
    pub omega_q: f64,
    /// Normalized coupling `g / omega_q`.
    pub eta: f64,
    /// Dipole mixing angle in radians, `0 <= theta < pi/2`.
    pub theta: f64,
    pub n_fock: usize,
    pub n_keep: usize,
}

impl SubsystemSpec {
    pub const DEFAULT_N_FOCK: usize = 30;
    pub const DEFAULT_N_KEEP: usize = 8;

    pub fn new(omega_c: f64, eta: f64, theta: f64) -> Self {
        Self {
            omega_c,
            omega_q: 1.0,
            eta,
            theta,
            n_fock: Self::DEFAULT_N_FOCK,
            n_keep: Self::DEFAULT_N_KEEP,
        }
    }

    pub fn with_omega_c(mut self, omega_c: f64) -> Self {
        self.omega_c = omega_c;
        self
    }

    pub fn with_truncation(mut self, n_fock: usize, n_keep: usize) -> Self {
        self.n_fock = n_fock;
        self.n_keep = n_keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return bad(format!("omega_c must be positive, got {}", self.omega_c));
        }
        if !(self.omega_q > 0.0 && self.omega_q.is_finite()) {
            return bad(format!("omega_q must be positive, got {}", self.omega_q));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.theta) {
            return bad(format!("theta must lie in [0, pi/2), got {}", self.theta));
        }
        if self.n_fock < 2 {
            return bad(format!("n_fock must be at least 2, got {}", self.n_fock));
        }
        if self.n_keep < 2 || self.n_keep > 2 * self.n_fock {
            return bad(format!("n_keep must lie in [2, 2*n_fock = {}], got {}", 2 * self.n_fock, self.n_keep));
        }
        Ok(())
    }
}

/// `a + a^dag` on `n_fock` levels.
pub fn quadrature(n_fock: usize) -> Operator {
    let a = operator::annihilation(n_fock);
    &a + &operator::dagger(&a)
}

/// Bare Hamiltonian on qubit (x) Fock, dimension `2 * n_fock`.
pub fn build_bare_hamiltonian(spec: &SubsystemSpec) -> Result<Operator> {
    spec.validate()?;
    let n = spec.n_fock;
    let eta = spec.eta;
    let (st, ct) = spec.theta.sin_cos();
    let x = quadrature(n);
    let xeig = operator::hermitian_eigs(&x)?;
    let cos2 = operator::apply_spectral(&xeig, |v| (2.0 * eta * v).cos());
    let sin2 = operator::apply_spectral(&xeig, |v| (2.0 * eta * v).sin());
    let sinsq = operator::apply_spectral(&xeig, |v| (eta * v).sin().powi(2));

    let a = operator::annihilation(n);
    let num = operator::dagger(&a).dot(&a);
    let id_f = operator::identity(n);

    let z_part = id_f.mapv(|z| z * st * st) + cos2.mapv(|z| z * ct * ct);
    let half = 0.5 * spec.omega_q;
    let mut h = operator::tensor(&operator::identity(2), &num).mapv(|z| z * spec.omega_c);
    h = h + operator::tensor(&qubit::sigma_z(), &z_part).mapv(|z| z * half);
    h = h + operator::tensor(&qubit::sigma_y(), &sin2).mapv(|z| z * half * ct);
    h = h + operator::tensor(&qubit::sigma_x(), &sinsq).mapv(|z| z * half * (2.0 * spec.theta).sin());
    Ok(h)
}

/// A diagonalized subsystem truncated to its lowest `n_keep` levels.
#[derive(Clone, Debug)]
pub struct DressedSubsystem {
    pub spec: SubsystemSpec,
    /// Ascending eigenenergies of the kept levels.
    pub energies: Vec<f64>,
    /// Dressed cavity operator, strictly upper triangular.
    pub a: Operator,
    /// Dressed qubit operator, strictly upper triangular.
    pub s: Operator,
    /// Bare-basis components of the kept eigenvectors, `2 n_fock x n_keep`.
    pub eigvecs: Operator,
}

impl DressedSubsystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }
}

fn strict_upper(m: &Operator) -> Operator {
    let mut out = m.clone();
    for ((i, j), z) in out.indexed_iter_mut() {
        if j <= i {
            *z = operator::ZERO;
        }
    }
    out
}

pub fn dress(spec: &SubsystemSpec) -> Result<DressedSubsystem> {
    let h = build_bare_hamiltonian(spec)?;
    let eig = operator::hermitian_eigs(&h)?;
    let k = spec.n_keep;
    let v = eig.basis.slice(ndarray::s![.., 0..k]).to_owned();
    let vd = operator::dagger(&v);

    let x = operator::tensor(&operator::identity(2), &quadrature(spec.n_fock));
    let (st, ct) = spec.theta.sin_cos();
    let qubit_dipole = qubit::sigma_x().mapv(|z| z * ct) + qubit::sigma_z().mapv(|z| z * st);
    let d = operator::tensor(&qubit_dipole, &operator::identity(spec.n_fock));

    let a = strict_upper(&vd.dot(&x).dot(&v));
    let s = strict_upper(&vd.dot(&d).dot(&v));
    Ok(DressedSubsystem { spec: spec.clone(), energies: eig.values[..k].to_vec(), a, s, eigvecs: v })
}

/// One truncation in a [`ConvergenceReport`].
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n_fock: usize,
    pub energies: Vec<f64>,
    pub a_norm: f64,
    pub s_norm: f64,
    /// Largest change of a kept energy relative to the previous row.
    pub shift: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub tolerance: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// True when every successive shift is within tolerance.
    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

fn frobenius(m: &Operator) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dress `spec` at each truncation and flag successive energy shifts above
/// `1e-6 omega_q`.
pub fn convergence_report(spec: &SubsystemSpec, n_fock_list: &[usize]) -> Result<ConvergenceReport> {
    let tolerance = 1e-6 * spec.omega_q;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_fock_list.len());
    for &n in n_fock_list {
        let d = dress(&SubsystemSpec { n_fock: n, ..spec.clone() })?;
        let shift = rows.last().map(|prev| {
            prev.energies.iter().zip(&d.energies).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        });
        rows.push(ConvergenceRow {
            n_fock: n,
            a_norm: frobenius(&d.a),
            s_norm: frobenius(&d.s),
            converged: shift.map_or(true, |s| s <= tolerance),
            shift,
            energies: d.energies,
        });
    }
    Ok(ConvergenceReport { tolerance, rows })
}

/// Index of the bare product state `|q, n>` in the qubit (x) Fock basis.
pub fn bare_index(excited: bool, photons: usize, n_fock: usize) -> usize {
    usize::from(excited) * n_fock + photons
}

/// Amplitude of the bare state `|q, n>` in kept level `level`.
pub fn bare_amplitude(d: &DressedSubsystem, level: usize, excited: bool, photons: usize) -> C64 {
    d.eigvecs[[bare_index(excited, photons, d.spec.n_fock), level]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn decoupled_limit_is_bare() {
        let spec = SubsystemSpec::new(1.7, 0.0, 0.4).with_truncation(6, 4);
        let h = build_bare_hamiltonian(&spec).unwrap();
        let a = operator::annihilation(6);
        let expect = operator::tensor(&operator::identity(2), &operator::dagger(&a).dot(&a)).mapv(|z| z * 1.7)
            + operator::tensor(&qubit::sigma_z(), &operator::identity(6)).mapv(|z| z * 0.5);
        assert!(operator::max_abs_diff(&h, &expect) < 1e-12);
    }

    #[test]
    fn theta_zero_has_no_sigma_x_part() {
        let spec = SubsystemSpec::new(2.0, 0.5, 0.0).with_truncation(12, 4);
        let h = build_bare_hamiltonian(&spec).unwrap();
        // Without the sigma_x term the Hamiltonian preserves the joint parity
        // of qubit and photon number.
        let n = 12;
        for i in 0..2 * n {
            for j in 0..2 * n {
                let pi = (i / n + i % n) % 2;
                let pj = (j / n + j % n) % 2;
                if pi != pj {
                    assert!(h[[i, j]].norm() < 1e-12, "parity breaking element at {i},{j}");
                }
            }
        }
        let with_theta = build_bare_hamiltonian(&SubsystemSpec { theta: PI / 5.0, ..spec }).unwrap();
        assert!(operator::max_abs_diff(&h, &with_theta) > 1e-3);
    }

    #[test]
    fn truncation_convergence_at_fig_parameters() {
        let base = SubsystemSpec::new(2.0, 0.5, PI / 5.0);
        let e: Vec<Vec<f64>> = [20, 30, 40]
            .iter()
            .map(|&n| dress(&base.clone().with_truncation(n, 8)).unwrap().energies)
            .collect();
        for k in 0..8 {
            assert!((e[0][k] - e[2][k]).abs() < 1e-8);
            assert!((e[1][k] - e[2][k]).abs() < 1e-8);
        }
    }

    #[test]
    fn uncoupled_dressed_operators_are_bare() {
        let spec = SubsystemSpec::new(1.7, 0.0, 0.0).with_truncation(10, 8);
        let d = dress(&spec).unwrap();
        let v = &d.eigvecs;
        let vd = operator::dagger(v);
        let a_bare = operator::tensor(&operator::identity(2), &operator::annihilation(10));
        let sig = operator::tensor(&qubit::lowering(), &operator::identity(10));
        assert!(operator::max_abs_diff(&d.a, &vd.dot(&a_bare).dot(v)) < 1e-12);
        assert!(operator::max_abs_diff(&d.s, &vd.dot(&sig).dot(v)) < 1e-12);
    }

    #[test]
    fn ground_state_carries_no_excitation() {
        let d = dress(&SubsystemSpec::new(2.0, 0.5, PI / 5.0)).unwrap();
        let g = operator::outer(&operator::basis_vector(8, 0), &operator::basis_vector(8, 0));
        let ada = operator::dagger(&d.a).dot(&d.a);
        let sds = operator::dagger(&d.s).dot(&d.s);
        assert_eq!(operator::expect(&ada, &g).unwrap().norm(), 0.0);
        assert_eq!(operator::expect(&sds, &g).unwrap().norm(), 0.0);
    }

    #[test]
    fn theta_opens_parity_forbidden_elements() {
        let at = |theta: f64| dress(&SubsystemSpec::new(2.0, 0.5, theta)).unwrap();
        let d0 = at(0.0);
        let d1 = at(PI / 5.0);
        assert!(d1.a[[0, 1]].norm() > 1e-3);
        // Level 2 shares the ground-state parity at theta = 0, so X cannot
        // connect them; the permanent dipole mixes parities.
        assert!(d0.a[[0, 2]].norm() < 1e-10);
        assert!(d1.a[[0, 2]].norm() > 1e-3);
    }

    #[test]
    fn strict_triangularity() {
        let d = dress(&SubsystemSpec::new(1.3, 0.5, PI / 5.0)).unwrap();
        for i in 0..8 {
            for j in 0..=i {
                assert_eq!(d.a[[i, j]], operator::ZERO);
                assert_eq!(d.s[[i, j]], operator::ZERO);
            }
        }
    }

    #[test]
    fn energies_independent_of_n_keep() {
        let base = SubsystemSpec::new(2.0, 0.5, PI / 5.0);
        let e4 = dress(&base.clone().with_truncation(30, 4)).unwrap().energies;
        let e8 = dress(&base).unwrap().energies;
        assert_eq!(e4[..], e8[..4]);
    }

    #[test]
    fn convergence_flags() {
        let zero = SubsystemSpec::new(2.0, 0.0, 0.3);
        assert!(convergence_report(&zero, &[6, 10, 20]).unwrap().converged());

        let strong = SubsystemSpec::new(2.0, 0.5, PI / 5.0);
        let bad = convergence_report(&strong, &[4, 40]).unwrap();
        assert!(!bad.converged());

        let r = convergence_report(&strong, &[8, 12, 16, 20, 24]).unwrap();
        let shifts: Vec<f64> = r.rows.iter().filter_map(|row| row.shift).collect();
        assert!(shifts.windows(2).all(|w| w[1] < w[0]), "{shifts:?}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_bare_hamiltonian(&SubsystemSpec::new(2.0, 0.5, 0.1).with_truncation(1, 2)).is_err());
        assert!(dress(&SubsystemSpec::new(2.0, 0.5, 0.1).with_truncation(3, 7)).is_err());
        assert!(SubsystemSpec::new(2.0, 0.5, 2.0).validate().is_err());
    }
}
