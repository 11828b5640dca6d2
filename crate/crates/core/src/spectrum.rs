//! Composite spectrum versus cavity frequency: scans, avoided crossings and
//! bare-state labels.

use rayon::prelude::*;

use crate::composite::{composite_hamiltonian, CascadeParams};
use crate::error::{Error, Result};
use crate::operator::{self, Operator, StateVector, C64, ZERO};
use crate::subsystem::{bare_index, build_bare_hamiltonian, dress, DressedSubsystem, SubsystemSpec};

/// Maps kept-eigenbasis composite vectors back to bare product amplitudes.
#[derive(Clone, Debug)]
pub struct BareDictionary {
    v1: Operator,
    v2: Operator,
    n_fock1: usize,
    n_fock2: usize,
}

/// A bare product state `|alpha beta i j>`: qubit 1, qubit 2, photons in
/// cavity 1, photons in cavity 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BareTag {
    pub excited1: bool,
    pub excited2: bool,
    pub photons1: usize,
    pub photons2: usize,
}

impl BareTag {
    pub fn parse(tag: &str) -> Option<Self> {
        let b = tag.as_bytes();
        if b.len() != 4 {
            return None;
        }
        let q = |c: u8| match c {
            b'g' => Some(false),
            b'e' => Some(true),
            _ => None,
        };
        let n = |c: u8| (c as char).to_digit(10).map(|d| d as usize);
        Some(Self { excited1: q(b[0])?, excited2: q(b[1])?, photons1: n(b[2])?, photons2: n(b[3])? })
    }

    pub fn name(&self) -> String {
        let q = |e: bool| if e { 'e' } else { 'g' };
        format!("{}{}{}{}", q(self.excited1), q(self.excited2), self.photons1, self.photons2)
    }
}

/// Photon numbers covered by the product-state part of the dictionary.
const MAX_TAGGED_PHOTONS: usize = 2;

/// Two-site combinations `(|x> + s |y>)/sqrt(2)` included in the dictionary.
const COMBINATIONS: [(&str, &str); 2] = [("gg10", "gg01"), ("ge00", "eg00")];

impl BareDictionary {
    pub fn new(d1: &DressedSubsystem, d2: &DressedSubsystem) -> Self {
        Self { v1: d1.eigvecs.clone(), v2: d2.eigvecs.clone(), n_fock1: d1.spec.n_fock, n_fock2: d2.spec.n_fock }
    }

    /// `<tag|psi>` for a composite vector in the kept product eigenbasis.
    pub fn amplitude(&self, psi: &StateVector, tag: BareTag) -> C64 {
        let n1 = self.v1.ncols();
        let n2 = self.v2.ncols();
        let r1 = self.v1.row(bare_index(tag.excited1, tag.photons1, self.n_fock1));
        let r2 = self.v2.row(bare_index(tag.excited2, tag.photons2, self.n_fock2));
        let mut acc = ZERO;
        for a1 in 0..n1 {
            let w1 = r1[a1];
            if w1 == ZERO {
                continue;
            }
            for a2 in 0..n2 {
                acc += w1 * r2[a2] * psi[a1 * n2 + a2];
            }
        }
        acc
    }

    /// All dictionary entries with their squared overlaps with `psi`.
    pub fn weights(&self, psi: &StateVector) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for excited1 in [false, true] {
            for excited2 in [false, true] {
                for photons1 in 0..=MAX_TAGGED_PHOTONS {
                    for photons2 in 0..=MAX_TAGGED_PHOTONS {
                        let tag = BareTag { excited1, excited2, photons1, photons2 };
                        out.push((tag.name(), self.amplitude(psi, tag).norm_sqr()));
                    }
                }
            }
        }
        let root_half = std::f64::consts::FRAC_1_SQRT_2;
        for (x, y) in COMBINATIONS {
            let ax = self.amplitude(psi, BareTag::parse(x).expect("valid tag"));
            let ay = self.amplitude(psi, BareTag::parse(y).expect("valid tag"));
            out.push((format!("({x}+{y})/sqrt2"), ((ax + ay) * root_half).norm_sqr()));
            out.push((format!("({x}-{y})/sqrt2"), ((ax - ay) * root_half).norm_sqr()));
        }
        out
    }

    /// Squared overlap with one named dictionary entry.
    pub fn weight(&self, psi: &StateVector, name: &str) -> Option<f64> {
        self.weights(psi).into_iter().find(|(n, _)| n == name).map(|(_, w)| w)
    }
}

/// Dictionary entry with the largest squared overlap, and that overlap.
pub fn label_state(eigvec: &StateVector, dict: &BareDictionary) -> (String, f64) {
    dict.weights(eigvec)
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty dictionary")
}

/// Lowest composite levels at one cavity frequency.
#[derive(Clone, Debug)]
pub struct SpectrumPoint {
    pub omega_c: f64,
    /// Ascending eigenvalues of the Hermitian composite Hamiltonian.
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    pub labels: Vec<(String, f64)>,
    pub dictionary: BareDictionary,
}

#[derive(Clone, Debug)]
pub struct SpectrumTable {
    pub grid: Vec<f64>,
    pub levels: usize,
    /// One entry per grid point; failures carry their message.
    pub points: Vec<std::result::Result<SpectrumPoint, String>>,
}

/// Extra Fock levels used for the per-point truncation check.
const CONVERGENCE_MARGIN: usize = 10;

fn with_omega(spec: &SubsystemSpec, omega_c: f64) -> SubsystemSpec {
    spec.clone().with_omega_c(omega_c)
}

fn check_truncation(spec: &SubsystemSpec, energies: &[f64]) -> Result<()> {
    let wider = SubsystemSpec { n_fock: spec.n_fock + CONVERGENCE_MARGIN, ..spec.clone() };
    let e = operator::hermitian_eigenvalues(&build_bare_hamiltonian(&wider)?)?;
    let shift = energies.iter().zip(&e).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if shift > 1e-6 * spec.omega_q {
        return Err(Error::NotConverged(format!(
            "omega_c = {}: kept energies move by {shift:.2e} with {} more Fock levels",
            spec.omega_c, CONVERGENCE_MARGIN
        )));
    }
    Ok(())
}

fn spectrum_point(s1: &SubsystemSpec, s2: &SubsystemSpec, p: &CascadeParams, k: usize) -> Result<SpectrumPoint> {
    let d1 = dress(s1)?;
    check_truncation(s1, &d1.energies)?;
    let d2 = if s2 == s1 { d1.clone() } else { dress(s2)? };
    if s2 != s1 {
        check_truncation(s2, &d2.energies)?;
    }
    let h = composite_hamiltonian(&d1, &d2, p)?;
    if k > h.nrows() {
        return Err(Error::InvalidParameter(format!("asked for {k} levels of a {}-dimensional space", h.nrows())));
    }
    let eig = operator::hermitian_eigs(&h)?;
    let dictionary = BareDictionary::new(&d1, &d2);
    let states: Vec<StateVector> = (0..k).map(|j| eig.basis.column(j).to_owned()).collect();
    let labels = states.iter().map(|v| label_state(v, &dictionary)).collect();
    Ok(SpectrumPoint { omega_c: s1.omega_c, energies: eig.values[..k].to_vec(), states, labels, dictionary })
}

/// Diagonalize the composite Hamiltonian at each cavity frequency of `grid`
/// (applied to both subsystems). Runs on the current rayon pool; results keep
/// grid order.
pub fn scan_spectrum(
    spec1: &SubsystemSpec,
    spec2: &SubsystemSpec,
    params: &CascadeParams,
    grid: &[f64],
    levels: usize,
) -> Result<SpectrumTable> {
    if levels < 6 {
        return Err(Error::InvalidParameter(format!("need at least 6 levels, got {levels}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("omega_c grid must be strictly ascending".into()));
    }
    spec1.validate()?;
    spec2.validate()?;
    params.validate()?;
    let points = grid
        .par_iter()
        .map(|&w| {
            spectrum_point(&with_omega(spec1, w), &with_omega(spec2, w), params, levels).map_err(|e| {
                log::warn!("spectrum point omega_c = {w} failed: {e}");
                e.to_string()
            })
        })
        .collect();
    Ok(SpectrumTable { grid: grid.to_vec(), levels, points })
}

/// Location and size of a minimum level spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub lower: usize,
    pub upper: usize,
    pub omega_c: f64,
    pub gap: f64,
}

impl SpectrumTable {
    /// Energies of level `k` along the grid; NaN at failed points.
    pub fn level(&self, k: usize) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.as_ref().ok().and_then(|p| p.energies.get(k).copied()).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn gaps(&self, n: usize, m: usize) -> Vec<f64> {
        self.level(m).iter().zip(self.level(n)).map(|(a, b)| a - b).collect()
    }

    /// Grid-level minimum of `w_m - w_n` with parabolic refinement.
    pub fn find_avoided_crossing(&self, n: usize, m: usize) -> Result<Crossing> {
        if m != n + 1 {
            return Err(Error::InvalidParameter(format!("levels must be adjacent, got {n} and {m}")));
        }
        let (omega_c, gap) = find_minimum(&self.grid, &self.gaps(n, m))?;
        Ok(Crossing { lower: n, upper: m, omega_c, gap })
    }

    /// Interior dips of the `(n, n+1)` spacing, most pronounced first.
    pub fn gap_dips(&self, n: usize) -> Vec<usize> {
        let g = self.gaps(n, n + 1);
        let mut dips: Vec<usize> = (1..g.len().saturating_sub(1))
            .filter(|&i| {
                let lo = i.saturating_sub(DIP_WINDOW);
                let hi = (i + DIP_WINDOW).min(g.len() - 1);
                let shoulder = g[lo].max(g[hi]);
                g[i].is_finite() && g[i] <= g[i - 1] && g[i] <= g[i + 1] && g[i] < DIP_DEPTH * shoulder
            })
            .collect();
        dips.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
        dips
    }
}

/// Half-width, in grid points, of the window a dip is compared against.
const DIP_WINDOW: usize = 5;
/// A dip must fall below this fraction of its shoulders.
const DIP_DEPTH: f64 = 0.9;

/// Minimum of sampled `values` over `grid`, refined by the parabola through the
/// three points around the discrete minimum.
pub fn find_minimum(grid: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if grid.len() != values.len() || grid.len() < 3 {
        return Err(Error::InvalidParameter("need at least three matching samples".into()));
    }
    let (i, _) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Crossing("no finite samples".into()))?;
    if i == 0 || i == values.len() - 1 {
        return Err(Error::Crossing(format!(
            "minimum at grid boundary omega_c = {}; widen the grid",
            grid[i]
        )));
    }
    let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if !(a > 0.0) {
        return Ok((x1, y1));
    }
    let xv = -b / (2.0 * a);
    let c = y1 - a * x1 * x1 - b * x1;
    Ok((xv, (a * xv * xv + b * xv + c).max(0.0)))
}

/// `w_m - w_n` of the composite Hamiltonian at one cavity frequency.
pub fn level_gap(spec1: &SubsystemSpec, spec2: &SubsystemSpec, params: &CascadeParams, omega_c: f64, n: usize, m: usize) -> Result<f64> {
    let e = composite_levels(spec1, spec2, params, omega_c)?;
    Ok(e[m] - e[n])
}

/// Ascending eigenvalues of the composite Hamiltonian at `omega_c`.
pub fn composite_levels(spec1: &SubsystemSpec, spec2: &SubsystemSpec, params: &CascadeParams, omega_c: f64) -> Result<Vec<f64>> {
    let d1 = dress(&with_omega(spec1, omega_c))?;
    let d2 = if spec1 == spec2 { d1.clone() } else { dress(&with_omega(spec2, omega_c))? };
    operator::hermitian_eigenvalues(&composite_hamiltonian(&d1, &d2, params)?)
}

/// Golden-section minimization of `w_m - w_n` over `[lo, hi]` by repeated
/// diagonalization.
pub fn refine_crossing(
    spec1: &SubsystemSpec,
    spec2: &SubsystemSpec,
    params: &CascadeParams,
    n: usize,
    m: usize,
    lo: f64,
    hi: f64,
) -> Result<Crossing> {
    let f = |w: f64| level_gap(spec1, spec2, params, w, n, m);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 1e-10 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let w = 0.5 * (a + b);
    Ok(Crossing { lower: n, upper: m, omega_c: w, gap: f(w)? })
}

/// Spacing below which a refined minimum counts as a true (unavoided) crossing.
pub const TRUE_CROSSING_GAP: f64 = 1e-7;

/// Avoided crossings between adjacent levels `(n, n+1)` for each `n` in
/// `lowers`, located as dips on the scan and refined by re-diagonalization.
/// Dips that refine to a vanishing gap are true crossings and are dropped, as
/// are dips whose refined minimum sits on its bracket edge.
pub fn avoided_crossings(
    table: &SpectrumTable,
    spec1: &SubsystemSpec,
    spec2: &SubsystemSpec,
    params: &CascadeParams,
    lowers: &[usize],
) -> Result<Vec<Crossing>> {
    let mut out = Vec::new();
    for &n in lowers {
        for i in table.gap_dips(n) {
            let (lo, hi) = (table.grid[i - 1], table.grid[i + 1]);
            let c = refine_crossing(spec1, spec2, params, n, n + 1, lo, hi)?;
            let edge = 1e-6 * (hi - lo);
            if c.gap > TRUE_CROSSING_GAP && c.omega_c - lo > edge && hi - c.omega_c > edge {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| a.omega_c.total_cmp(&b.omega_c));
    Ok(out)
}

/// Smallest `w_m - w_n` over `[lo, hi]`: a coarse scan with `samples` points
/// followed by golden-section refinement around the best sample.
pub fn minimum_gap(
    spec1: &SubsystemSpec,
    spec2: &SubsystemSpec,
    params: &CascadeParams,
    n: usize,
    m: usize,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<Crossing> {
    let grid: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64).collect();
    let gaps: Vec<f64> = grid.iter().map(|&w| level_gap(spec1, spec2, params, w, n, m)).collect::<Result<_>>()?;
    let (i, _) = gaps.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("samples");
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(samples - 1)];
    refine_crossing(spec1, spec2, params, n, m, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landau_zener_toy() {
        let g = 0.05;
        let grid: Vec<f64> = (0..41).map(|k| -1.0 + 0.05 * k as f64).collect();
        let gaps: Vec<f64> = grid
            .iter()
            .map(|&delta| {
                let h = ndarray::array![[C64::new(0.0, 0.0), C64::new(g, 0.0)], [C64::new(g, 0.0), C64::new(delta, 0.0)]];
                let e = operator::hermitian_eigenvalues(&h).unwrap();
                e[1] - e[0]
            })
            .collect();
        let (x, gap) = find_minimum(&grid, &gaps).unwrap();
        assert!(x.abs() < 1e-12);
        assert!((gap - 2.0 * g).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum_is_an_error() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(find_minimum(&grid, &[4.0, 3.0, 2.0, 1.0]), Err(Error::Crossing(_))));
    }

    #[test]
    fn tags_round_trip() {
        let t = BareTag::parse("eg10").unwrap();
        assert!(t.excited1 && !t.excited2 && t.photons1 == 1 && t.photons2 == 0);
        assert_eq!(t.name(), "eg10");
        assert!(BareTag::parse("xg10").is_none());
    }

    #[test]
    fn uncoupled_ground_label() {
        let s = SubsystemSpec::new(1.7, 0.0, 0.0).with_truncation(8, 6);
        let p = CascadeParams::new(0.004, 0.001);
        let table = scan_spectrum(&s, &s, &p, &[1.7], 6).unwrap();
        let pt = table.points[0].as_ref().unwrap();
        assert_eq!(pt.labels[0].0, "gg00");
        assert!((pt.labels[0].1 - 1.0).abs() < 1e-12);
    }
}
