//! Fixed-step integrators for `du/dt = c * u + N(t, u)` with a diagonal
//! linear part `c`: classic RK4 and the exponential time-differencing RK4
//! scheme of Cox and Matthews, which treats `c` exactly.

use crate::operator::{C64, ZERO};

/// A split system with diagonal linear part.
pub trait SplitSystem {
    /// Diagonal linear coefficients, one per state entry.
    fn linear(&self) -> &[C64];
    /// `out = N(t, u)`.
    fn nonlinear(&mut self, t: f64, u: &[C64], out: &mut [C64]);
}

/// `[phi_1(z), phi_2(z), phi_3(z)]` with `phi_k(z) = sum_j z^j / (j + k)!`.
pub fn phi123(z: C64) -> [C64; 3] {
    if z.norm() < 1.0 {
        let mut out = [ZERO; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            // term_j = z^j / (j + k + 1)!
            let mut fact = 1.0;
            for m in 2..=k + 1 {
                fact *= m as f64;
            }
            let mut term = C64::new(1.0 / fact, 0.0);
            let mut acc = term;
            for j in 1..40 {
                term *= z / (j + k + 1) as f64;
                acc += term;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *slot = acc;
        }
        out
    } else {
        let p1 = (z.exp() - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

/// Per-entry ETD-RK4 weights for one step size.
#[derive(Clone, Debug)]
pub struct EtdCoefficients {
    h: f64,
    e: Vec<C64>,
    e2: Vec<C64>,
    q: Vec<C64>,
    f1: Vec<C64>,
    f2: Vec<C64>,
    f3: Vec<C64>,
}

impl EtdCoefficients {
    pub fn new(linear: &[C64], h: f64) -> Self {
        let n = linear.len();
        let mut s = Self {
            h,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &c in linear {
            let z = c * h;
            let [p1, p2, p3] = phi123(z);
            let [half1, _, _] = phi123(z * 0.5);
            s.e.push(z.exp());
            s.e2.push((z * 0.5).exp());
            s.q.push(half1 * (0.5 * h));
            s.f1.push((p1 - p2 * 3.0 + p3 * 4.0) * h);
            s.f2.push((p2 - p3 * 2.0) * h);
            s.f3.push((-p2 + p3 * 4.0) * h);
        }
        s
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Reusable ETD-RK4 stepper.
#[derive(Clone, Debug)]
pub struct EtdRk4 {
    coef: EtdCoefficients,
    nu: Vec<C64>,
    na: Vec<C64>,
    nb: Vec<C64>,
    nc: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
}

impl EtdRk4 {
    pub fn new(linear: &[C64], h: f64) -> Self {
        let n = linear.len();
        let z = || vec![ZERO; n];
        Self { coef: EtdCoefficients::new(linear, h), nu: z(), na: z(), nb: z(), nc: z(), a: z(), b: z(), c: z() }
    }

    pub fn h(&self) -> f64 {
        self.coef.h
    }

    /// Advance `u` from `t` to `t + h`.
    pub fn step<S: SplitSystem + ?Sized>(&mut self, sys: &mut S, t: f64, u: &mut [C64]) {
        let k = &self.coef;
        let h = k.h;
        sys.nonlinear(t, u, &mut self.nu);
        for i in 0..u.len() {
            self.a[i] = k.e2[i] * u[i] + k.q[i] * self.nu[i];
        }
        sys.nonlinear(t + 0.5 * h, &self.a, &mut self.na);
        for i in 0..u.len() {
            self.b[i] = k.e2[i] * u[i] + k.q[i] * self.na[i];
        }
        sys.nonlinear(t + 0.5 * h, &self.b, &mut self.nb);
        for i in 0..u.len() {
            self.c[i] = k.e2[i] * self.a[i] + k.q[i] * (self.nb[i] * 2.0 - self.nu[i]);
        }
        sys.nonlinear(t + h, &self.c, &mut self.nc);
        for i in 0..u.len() {
            u[i] = k.e[i] * u[i]
                + k.f1[i] * self.nu[i]
                + k.f2[i] * (self.na[i] + self.nb[i]) * 2.0
                + k.f3[i] * self.nc[i];
        }
    }
}

/// Classic fourth-order Runge-Kutta on the full right-hand side.
#[derive(Clone, Debug)]
pub struct Rk4 {
    dt: f64,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(len: usize, dt: f64) -> Self {
        let z = || vec![ZERO; len];
        Self { dt, k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }

    pub fn h(&self) -> f64 {
        self.dt
    }

    fn rhs<S: SplitSystem + ?Sized>(sys: &mut S, t: f64, u: &[C64], out: &mut [C64]) {
        sys.nonlinear(t, u, out);
        for ((o, c), x) in out.iter_mut().zip(sys.linear()).zip(u) {
            *o += c * x;
        }
    }

    pub fn step<S: SplitSystem + ?Sized>(&mut self, sys: &mut S, t: f64, u: &mut [C64]) {
        let h = self.dt;
        Self::rhs(sys, t, u, &mut self.k1);
        for i in 0..u.len() {
            self.tmp[i] = u[i] + self.k1[i] * (0.5 * h);
        }
        Self::rhs(sys, t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..u.len() {
            self.tmp[i] = u[i] + self.k2[i] * (0.5 * h);
        }
        Self::rhs(sys, t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..u.len() {
            self.tmp[i] = u[i] + self.k3[i] * h;
        }
        Self::rhs(sys, t + h, &self.tmp, &mut self.k4);
        for i in 0..u.len() {
            u[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }
}

/// Choice of fixed-step scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    /// Exponential RK4 with step `h`.
    Etd { h: f64 },
    /// Classic RK4 with step `dt`.
    Rk4 { dt: f64 },
}

impl StepPolicy {
    pub fn step_size(&self) -> f64 {
        match *self {
            StepPolicy::Etd { h } => h,
            StepPolicy::Rk4 { dt } => dt,
        }
    }

    pub fn halved(&self) -> Self {
        match *self {
            StepPolicy::Etd { h } => StepPolicy::Etd { h: h / 2.0 },
            StepPolicy::Rk4 { dt } => StepPolicy::Rk4 { dt: dt / 2.0 },
        }
    }
}

/// A stepper bound to a policy and a linear part.
#[derive(Clone, Debug)]
pub enum Stepper {
    Etd(EtdRk4),
    Rk4(Rk4),
}

impl Stepper {
    pub fn new(policy: StepPolicy, linear: &[C64]) -> Self {
        match policy {
            StepPolicy::Etd { h } => Stepper::Etd(EtdRk4::new(linear, h)),
            StepPolicy::Rk4 { dt } => Stepper::Rk4(Rk4::new(linear.len(), dt)),
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Stepper::Etd(s) => s.h(),
            Stepper::Rk4(s) => s.h(),
        }
    }

    pub fn step<S: SplitSystem + ?Sized>(&mut self, sys: &mut S, t: f64, u: &mut [C64]) {
        match self {
            Stepper::Etd(s) => s.step(sys, t, u),
            Stepper::Rk4(s) => s.step(sys, t, u),
        }
    }

    /// A one-off stepper of the same kind with a different step size.
    pub fn resized(&self, linear: &[C64], h: f64) -> Self {
        match self {
            Stepper::Etd(_) => Stepper::Etd(EtdRk4::new(linear, h)),
            Stepper::Rk4(_) => Stepper::Rk4(Rk4::new(linear.len(), h)),
        }
    }
}

/// Relative slack below which a remaining interval counts as zero.
const LANDING_SLACK: f64 = 1e-9;

/// Advance `u` from `t` to `t_end` with full steps and one final short step.
/// Returns the final time, exactly `t_end`.
pub fn advance<S: SplitSystem + ?Sized>(stepper: &mut Stepper, sys: &mut S, u: &mut [C64], t: f64, t_end: f64) -> f64 {
    let h = stepper.h();
    let mut t = t;
    while t_end - t >= h * (1.0 - LANDING_SLACK) {
        stepper.step(sys, t, u);
        t += h;
    }
    let rest = t_end - t;
    if rest > h * LANDING_SLACK {
        let mut short = stepper.resized(sys.linear(), rest);
        short.step(sys, t, u);
    }
    t_end
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Forced {
        c: Vec<C64>,
    }

    impl SplitSystem for Forced {
        fn linear(&self) -> &[C64] {
            &self.c
        }
        fn nonlinear(&mut self, t: f64, u: &[C64], out: &mut [C64]) {
            for (o, x) in out.iter_mut().zip(u) {
                *o = C64::new(t.cos(), 0.0) - x * x * 0.1;
            }
        }
    }

    #[test]
    fn phi_branches_agree_at_switch() {
        let inside = phi123(C64::new(0.999_999_9, 0.0));
        let outside = phi123(C64::new(1.000_000_1, 0.0));
        for k in 0..3 {
            assert!((inside[k] - outside[k]).norm() < 1e-6);
        }
        let z0 = phi123(C64::new(0.0, 0.0));
        assert!((z0[0] - 1.0).norm() < 1e-16);
        assert!((z0[1] - 0.5).norm() < 1e-16);
        assert!((z0[2] - 1.0 / 6.0).norm() < 1e-16);
    }

    #[test]
    fn etd_is_exact_on_linear_problem() {
        let c = vec![C64::new(-0.3, 2.0), C64::new(0.0, -5.0)];
        struct Lin(Vec<C64>);
        impl SplitSystem for Lin {
            fn linear(&self) -> &[C64] {
                &self.0
            }
            fn nonlinear(&mut self, _: f64, _: &[C64], out: &mut [C64]) {
                out.fill(ZERO);
            }
        }
        let mut sys = Lin(c.clone());
        let mut u = vec![C64::new(1.0, 0.0); 2];
        let mut st = Stepper::new(StepPolicy::Etd { h: 0.7 }, &c);
        advance(&mut st, &mut sys, &mut u, 0.0, 10.0);
        for (x, ci) in u.iter().zip(&c) {
            assert!((x - (ci * 10.0).exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn etd_and_rk4_converge_to_each_other() {
        let c = vec![C64::new(-0.2, 3.0), C64::new(-1.0, 0.0)];
        let run = |policy: StepPolicy| {
            let mut sys = Forced { c: c.clone() };
            let mut u = vec![C64::new(0.5, 0.0); 2];
            let mut st = Stepper::new(policy, &c);
            advance(&mut st, &mut sys, &mut u, 0.0, 5.0);
            u
        };
        let etd = run(StepPolicy::Etd { h: 0.01 });
        let rk4 = run(StepPolicy::Rk4 { dt: 0.001 });
        let etd_coarse = run(StepPolicy::Etd { h: 0.02 });
        for i in 0..2 {
            assert!((etd[i] - rk4[i]).norm() < 1e-9);
            // Fourth order: halving the step shrinks the error about 16-fold.
            assert!((etd_coarse[i] - rk4[i]).norm() > 4.0 * (etd[i] - rk4[i]).norm());
        }
    }

    #[test]
    fn advance_lands_exactly() {
        let c = vec![C64::new(-1.0, 0.0)];
        let mut sys = Forced { c: c.clone() };
        let mut u = vec![ZERO];
        let mut st = Stepper::new(StepPolicy::Etd { h: 0.3 }, &c);
        assert_eq!(advance(&mut st, &mut sys, &mut u, 0.0, 1.0), 1.0);
    }
}
