use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::state::{BlochVector, ProductState};

use super::hamiltonian::XyzOperator;
use super::wfmc::FullStateVector;

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const POSITIVITY_TOLERANCE: f64 = -1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Full 2^N × 2^N density matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDensityMatrix {
    n_sites: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseDensityMatrix {
    pub fn zeros(n_sites: usize) -> Self {
        let dim = 1 << n_sites;
        DenseDensityMatrix {
            n_sites,
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn pure(psi: &FullStateVector) -> Self {
        let mut rho = DenseDensityMatrix::zeros(psi.n_sites());
        let amps = psi.amplitudes();
        for a in 0..rho.dim {
            for b in 0..rho.dim {
                rho.data[a * rho.dim + b] = amps[a] * amps[b].conj();
            }
        }
        rho
    }

    pub fn from_product(state: &ProductState) -> Result<Self> {
        Ok(Self::pure(&FullStateVector::from_product(state)?))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.dim + b]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ_ab ρ_ab ρ_ba = Σ_ab |ρ_ab|² for Hermitian ρ.
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in a..self.dim {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        m.symmetric_eigenvalues().min()
    }

    /// Population of the all-down basis state.
    pub fn all_down_population(&self) -> f64 {
        self.get(self.dim - 1, self.dim - 1).re
    }

    pub fn bloch(&self, site: usize) -> BlochVector {
        let m = 1 << site;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for a in 0..self.dim {
            // tr(ρ σ) = Σ_a ρ[a][a^m] ⟨a^m|σ|a⟩
            let off = self.get(a, a ^ m);
            x += off.re;
            let up = a & m == 0;
            // σ^y|up⟩ = i|down⟩, σ^y|down⟩ = -i|up⟩
            let sy = if up { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
            y += (off * sy).re;
            z += if up { self.get(a, a).re } else { -self.get(a, a).re };
        }
        BlochVector::new(x, y, z)
    }

    /// ⟨σ_i^x σ_j^x⟩ for `i != j`.
    pub fn xx(&self, i: usize, j: usize) -> f64 {
        let m = (1 << i) | (1 << j);
        (0..self.dim).map(|a| self.get(a, a ^ m).re).sum()
    }

    fn axpy(&mut self, alpha: f64, x: &DenseDensityMatrix) {
        for (y, &xv) in self.data.iter_mut().zip(&x.data) {
            *y += xv * alpha;
        }
    }

    /// Checks Hermiticity, unit trace and (optionally) positivity, then
    /// removes the accumulated round-off by symmetrizing and rescaling the trace.
    fn verify_and_restore(&mut self, check_positivity: bool) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(Error::StepSize(format!("density matrix lost Hermiticity ({herm:e})")));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOLERANCE {
            return Err(Error::StepSize(format!("density matrix trace drifted to {tr}")));
        }
        if check_positivity {
            let min = self.min_eigenvalue();
            if min < POSITIVITY_TOLERANCE {
                return Err(Error::StepSize(format!(
                    "density matrix has eigenvalue {min:e} below {POSITIVITY_TOLERANCE:e}"
                )));
            }
        }
        let d = self.dim;
        let inv = 1.0 / tr.re;
        for a in 0..d {
            for b in a..d {
                let avg = (self.data[a * d + b] + self.data[b * d + a].conj()) * (0.5 * inv);
                self.data[a * d + b] = avg;
                self.data[b * d + a] = avg.conj();
            }
        }
        Ok(())
    }
}

/// Dense Lindblad generator for one lattice and parameter set.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    op: XyzOperator,
}

impl MasterEquation {
    pub fn new(geometry: &LatticeGeometry, params: &ModelParams) -> Result<Self> {
        Ok(MasterEquation {
            op: XyzOperator::new(geometry, params)?,
        })
    }

    fn check(&self, rho: &DenseDensityMatrix) -> Result<()> {
        if rho.n_sites != self.op.n_sites {
            return Err(Error::InvalidArgument(format!(
                "density matrix has {} sites, lattice has {}",
                rho.n_sites, self.op.n_sites
            )));
        }
        Ok(())
    }

    /// `out = -i[H, ρ] + γ Σ_j (σ_j^- ρ σ_j^+ - ½{n_j, ρ})`, with `n_j = σ_j^+σ_j^-`.
    fn rhs_into(&self, rho: &DenseDensityMatrix, out: &mut DenseDensityMatrix) {
        let op = &self.op;
        let d = op.dim;
        let minus_i = Complex64::new(0.0, -1.0);
        let half_gamma = 0.5 * op.gamma;
        for a in 0..d {
            for b in 0..d {
                // Diagonal pieces of [H, ρ] and of the anticommutator.
                let r = rho.data[a * d + b];
                let comm = r * (op.diag[a] - op.diag[b]);
                let mut v = minus_i * comm
                    - r * (half_gamma * (op.n_up[a] + op.n_up[b]) as f64);
                for &(first, mask) in &op.bond_masks {
                    // (Hρ)[a][b] gets H[a][a^m] ρ[a^m][b]; (ρH)[a][b] gets ρ[a][b^m] H[b^m][b].
                    let ca = op.flip_coefficient(a, first, mask);
                    let cb = op.flip_coefficient(b, first, mask);
                    let hr = rho.data[(a ^ mask) * d + b] * ca;
                    let rh = rho.data[a * d + (b ^ mask)] * cb;
                    v += minus_i * (hr - rh);
                }
                for j in 0..op.n_sites {
                    let m = 1 << j;
                    if a & m != 0 && b & m != 0 {
                        v += rho.data[(a ^ m) * d + (b ^ m)] * op.gamma;
                    }
                }
                out.data[a * d + b] = v;
            }
        }
    }

    pub fn rhs(&self, rho: &DenseDensityMatrix) -> Result<DenseDensityMatrix> {
        self.check(rho)?;
        let mut out = DenseDensityMatrix::zeros(rho.n_sites);
        self.rhs_into(rho, &mut out);
        Ok(out)
    }

    /// RK4 integration returning ρ at each checkpoint time (ascending). The
    /// density-matrix invariants are verified and restored at every checkpoint.
    pub fn integrate_checkpoints(
        &self,
        rho0: &DenseDensityMatrix,
        checkpoints: &[f64],
        dt: f64,
    ) -> Result<Vec<DenseDensityMatrix>> {
        self.check(rho0)?;
        if !(dt > 0.0) {
            return Err(Error::config("dt", format!("must be positive, got {dt}")));
        }
        let n = rho0.n_sites;
        let mut rho = rho0.clone();
        let mut k: Vec<DenseDensityMatrix> = (0..4).map(|_| DenseDensityMatrix::zeros(n)).collect();
        let mut stage = DenseDensityMatrix::zeros(n);
        let mut t = 0.0;
        let mut out = Vec::with_capacity(checkpoints.len());
        for &target in checkpoints {
            if target < t - 1e-12 {
                return Err(Error::InvalidArgument("checkpoints must be ascending".into()));
            }
            let steps = ((target - t) / dt).round().max(0.0) as usize;
            let h = if steps > 0 { (target - t) / steps as f64 } else { 0.0 };
            for _ in 0..steps {
                self.rhs_into(&rho, &mut k[0]);
                for s in 1..4 {
                    let frac = if s == 3 { h } else { 0.5 * h };
                    stage.data.copy_from_slice(&rho.data);
                    stage.axpy(frac, &k[s - 1]);
                    let (head, tail) = k.split_at_mut(s);
                    let _ = head;
                    self.rhs_into(&stage, &mut tail[0]);
                }
                rho.axpy(h / 6.0, &k[0]);
                rho.axpy(h / 3.0, &k[1]);
                rho.axpy(h / 3.0, &k[2]);
                rho.axpy(h / 6.0, &k[3]);
            }
            t = target;
            rho.verify_and_restore(n <= 8)?;
            out.push(rho.clone());
        }
        Ok(out)
    }
}

pub fn lindblad_rhs(
    rho: &DenseDensityMatrix,
    geometry: &LatticeGeometry,
    params: &ModelParams,
) -> Result<DenseDensityMatrix> {
    MasterEquation::new(geometry, params)?.rhs(rho)
}

pub fn integrate_master_equation(
    rho0: &DenseDensityMatrix,
    geometry: &LatticeGeometry,
    params: &ModelParams,
    t: f64,
    dt: f64,
) -> Result<DenseDensityMatrix> {
    let mut v = MasterEquation::new(geometry, params)?.integrate_checkpoints(rho0, &[t], dt)?;
    Ok(v.pop().expect("one checkpoint"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::state::{init_all_plus_x, Spinor};
    use proptest::prelude::*;

    fn p(jx: f64, jy: f64, jz: f64, gamma: f64) -> ModelParams {
        ModelParams { jx, jy, jz, gamma }
    }

    /// Kronecker-product construction of H and the dissipator, independent of
    /// the bit-level implementation.
    fn reference_rhs(rho: &DenseDensityMatrix, g: &LatticeGeometry, par: &ModelParams) -> Vec<Complex64> {
        type M = DMatrix<Complex64>;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let sx = M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let sy = M::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
        let sz = M::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
        let sm = M::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        let n = g.site_count();
        // Site j is bit j, i.e. the rightmost Kronecker factor is site 0.
        let embed = |op: &M, site: usize| -> M {
            let mut out = M::identity(1, 1);
            for s in (0..n).rev() {
                let f = if s == site { op.clone() } else { M::identity(2, 2) };
                out = out.kronecker(&f);
            }
            out
        };
        let d = 1 << n;
        let mut h = M::zeros(d, d);
        for &(i, j) in g.bonds() {
            h += embed(&sx, i) * embed(&sx, j) * c(par.jx, 0.);
            h += embed(&sy, i) * embed(&sy, j) * c(par.jy, 0.);
            h += embed(&sz, i) * embed(&sz, j) * c(par.jz, 0.);
        }
        let r = M::from_row_slice(d, d, &rho.data);
        let mut out = (&h * &r - &r * &h) * c(0., -1.);
        for j in 0..n {
            let l = embed(&sm, j);
            let ld = l.adjoint();
            let nn = &ld * &l;
            out += (&l * &r * &ld * c(2., 0.) - &nn * &r - &r * &nn) * c(0.5 * par.gamma, 0.);
        }
        out.transpose().iter().copied().collect()
    }

    #[test]
    fn single_spin_rhs() {
        let g = build_lattice(1, 1).unwrap();
        let par = p(0.0, 0.0, 0.0, 1.0);
        let up = DenseDensityMatrix::from_product(&ProductState::uniform(1, Spinor::UP)).unwrap();
        let r = lindblad_rhs(&up, &g, &par).unwrap();
        // tr(σ^z rhs) = -2γ
        assert!((r.get(0, 0).re - r.get(1, 1).re + 2.0).abs() < 1e-14);
        let down = DenseDensityMatrix::from_product(&ProductState::uniform(1, Spinor::DOWN)).unwrap();
        let r = lindblad_rhs(&down, &g, &par).unwrap();
        assert!(r.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dimension_cap() {
        let g = build_lattice(11, 1).unwrap();
        assert!(matches!(
            MasterEquation::new(&g, &p(1.0, 1.0, 1.0, 1.0)),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn single_spin_decay() {
        let g = build_lattice(1, 1).unwrap();
        let rho0 = DenseDensityMatrix::from_product(&init_all_plus_x(1, false)).unwrap();
        let times = [0.5, 1.0, 2.0, 5.0];
        let out = MasterEquation::new(&g, &p(0.3, 0.7, 1.1, 1.0))
            .unwrap()
            .integrate_checkpoints(&rho0, &times, 0.01)
            .unwrap();
        for (t, rho) in times.iter().zip(&out) {
            let b = rho.bloch(0);
            assert!((b.z - (-1.0 + (-t).exp())).abs() < 1e-9);
            assert!((b.x - (-0.5 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn xxz_pair_relaxes_to_all_down() {
        let g = build_lattice(2, 1).unwrap();
        let rho0 = DenseDensityMatrix::from_product(&init_all_plus_x(2, false)).unwrap();
        let rho = integrate_master_equation(&rho0, &g, &p(0.9, 0.9, 1.0, 1.0), 60.0, 0.01).unwrap();
        assert!(rho.all_down_population() > 1.0 - 1e-8);
        assert!((rho.purity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unitary_limit_conserves_purity() {
        let g = build_lattice(2, 1).unwrap();
        let s = ProductState::from_spinors(&[
            Spinor::plus_x(),
            Spinor::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)),
        ]);
        let rho0 = DenseDensityMatrix::from_product(&s).unwrap();
        let me = MasterEquation::new(&g, &p(0.9, 1.2, 1.0, 0.0)).unwrap();
        let out = me.integrate_checkpoints(&rho0, &[1.0, 2.0, 4.0, 8.0], 0.005).unwrap();
        for rho in out {
            assert!((rho.purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn invariants_along_integration() {
        let g = build_lattice(2, 2).unwrap();
        let rho0 = DenseDensityMatrix::from_product(&init_all_plus_x(4, false)).unwrap();
        let me = MasterEquation::new(&g, &p(0.9, 1.2, 1.0, 1.0)).unwrap();
        for rho in me.integrate_checkpoints(&rho0, &[0.5, 1.0, 3.0], 0.01).unwrap() {
            assert!(rho.hermiticity_error() < HERMITICITY_TOLERANCE);
            assert!((rho.trace().re - 1.0).abs() < TRACE_TOLERANCE);
            assert!(rho.min_eigenvalue() > POSITIVITY_TOLERANCE);
        }
    }

    fn random_rho(n: usize, seed: &[f64]) -> DenseDensityMatrix {
        // ρ = A A† / tr(A A†) from arbitrary entries.
        let d = 1 << n;
        let a = DMatrix::from_fn(d, d, |r, c| {
            let k = 2 * (r * d + c);
            Complex64::new(seed[k % seed.len()] + 0.1 * r as f64, seed[(k + 1) % seed.len()] - 0.05 * c as f64)
        });
        let m = &a * a.adjoint();
        let tr: Complex64 = m.trace();
        let m = m / tr;
        let mut rho = DenseDensityMatrix::zeros(n);
        for r in 0..d {
            for c in 0..d {
                rho.data[r * d + c] = m[(r, c)];
            }
        }
        rho
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rhs_matches_kronecker_reference(
            seed in proptest::collection::vec(-1.0..1.0f64, 8..40),
            (w, h) in prop_oneof![Just((1usize, 1usize)), Just((2, 1)), Just((2, 2)), Just((3, 1))],
            jx in -2.0..2.0f64, jy in -2.0..2.0f64, jz in -2.0..2.0f64, gamma in 0.0..2.0f64,
        ) {
            let g = build_lattice(w, h).unwrap();
            let par = p(jx, jy, jz, gamma);
            let rho = random_rho(g.site_count(), &seed);
            let fast = lindblad_rhs(&rho, &g, &par).unwrap();
            let slow = reference_rhs(&rho, &g, &par);
            for (a, b) in fast.data.iter().zip(&slow) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            prop_assert!(fast.trace().norm() < 1e-12);
        }
    }
}
