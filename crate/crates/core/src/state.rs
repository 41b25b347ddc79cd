//! Site-factorized (Gutzwiller) wavefunctions of spin-1/2 lattices.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Below this norm a spinor cannot be renormalized.
pub const MIN_NORM: f64 = 1e-12;

/// Two-component amplitude of one site in the σ^z basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor {
    pub up: Complex64,
    pub down: Complex64,
}

/// Expectation values ⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩ of a single site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl Spinor {
    pub const UP: Spinor = Spinor { up: ONE, down: ZERO };
    pub const DOWN: Spinor = Spinor { up: ZERO, down: ONE };

    pub const fn new(up: Complex64, down: Complex64) -> Self {
        Spinor { up, down }
    }

    pub fn plus_x() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Spinor { up: a, down: a }
    }

    pub fn minus_x() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Spinor { up: a, down: -a }
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    #[inline]
    pub fn bloch(&self) -> BlochVector {
        bloch_components(self.up, self.down)
    }

    pub fn renormalize(&self) -> Result<Spinor> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > MIN_NORM) {
            return Err(Error::NumericalDegeneracy(format!(
                "cannot renormalize spinor with norm {norm:e}"
            )));
        }
        let inv = 1.0 / norm;
        Ok(Spinor {
            up: self.up * inv,
            down: self.down * inv,
        })
    }
}

/// Bloch components of a (not necessarily normalized) spinor, normalized by its norm.
#[inline]
pub(crate) fn bloch_components(up: Complex64, down: Complex64) -> BlochVector {
    let n2 = up.norm_sqr() + down.norm_sqr();
    let inv = 1.0 / n2;
    // conj(up) * down
    let re = up.re * down.re + up.im * down.im;
    let im = up.re * down.im - up.im * down.re;
    BlochVector {
        x: 2.0 * re * inv,
        y: 2.0 * im * inv,
        z: (up.norm_sqr() - down.norm_sqr()) * inv,
    }
}

pub fn bloch(s: &Spinor) -> BlochVector {
    s.bloch()
}

pub fn renormalize(s: &Spinor) -> Result<Spinor> {
    s.renormalize()
}

/// Product state Ψ = Π_i ψ_i, stored as two contiguous amplitude arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub(crate) up: Vec<Complex64>,
    pub(crate) down: Vec<Complex64>,
}

impl ProductState {
    pub fn uniform(n: usize, s: Spinor) -> Self {
        ProductState {
            up: vec![s.up; n],
            down: vec![s.down; n],
        }
    }

    pub fn from_spinors(spinors: &[Spinor]) -> Self {
        ProductState {
            up: spinors.iter().map(|s| s.up).collect(),
            down: spinors.iter().map(|s| s.down).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    #[inline]
    pub fn spinor(&self, i: usize) -> Spinor {
        Spinor {
            up: self.up[i],
            down: self.down[i],
        }
    }

    pub fn set_spinor(&mut self, i: usize, s: Spinor) {
        self.up[i] = s.up;
        self.down[i] = s.down;
    }

    pub fn up_amplitudes(&self) -> &[Complex64] {
        &self.up
    }

    pub fn down_amplitudes(&self) -> &[Complex64] {
        &self.down
    }

    pub fn spinors(&self) -> impl Iterator<Item = Spinor> + '_ {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(&up, &down)| Spinor { up, down })
    }

    pub fn bloch_vectors(&self) -> Vec<BlochVector> {
        let mut out = Vec::with_capacity(self.len());
        self.bloch_into(&mut out);
        out
    }

    pub fn bloch_into(&self, out: &mut Vec<BlochVector>) {
        out.clear();
        out.extend(
            self.up
                .iter()
                .zip(&self.down)
                .map(|(&u, &d)| bloch_components(u, d)),
        );
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.spinors()
            .map(|s| (s.norm_sqr().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Magnetization (M_x, M_y, M_z) averaged over sites.
    pub fn magnetization(&self) -> BlochVector {
        let n = self.len() as f64;
        let mut m = BlochVector::default();
        for s in self.spinors() {
            let b = s.bloch();
            m.x += b.x;
            m.y += b.y;
            m.z += b.z;
        }
        BlochVector::new(m.x / n, m.y / n, m.z / n)
    }

    /// Applies σ^z to every site, mapping (s_x, s_y, s_z) to (-s_x, -s_y, s_z).
    pub fn z2_flip(&self) -> ProductState {
        ProductState {
            up: self.up.clone(),
            down: self.down.iter().map(|&d| -d).collect(),
        }
    }

    /// Checkpoint rows `site_index,re_up,im_up,re_down,im_down`, written at
    /// full round-trip precision.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "site_index,re_up,im_up,re_down,im_down")?;
        for (i, s) in self.spinors().enumerate() {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?}",
                i, s.up.re, s.up.im, s.down.re, s.down.im
            )?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<ProductState> {
        let mut spinors = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("site_index") || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "snapshot line {}: expected 5 columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("snapshot line {}: {e}", lineno + 1)))
            };
            let idx: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("snapshot line {}: {e}", lineno + 1)))?;
            if idx != spinors.len() {
                return Err(Error::Parse(format!(
                    "snapshot line {}: expected site {}, found {idx}",
                    lineno + 1,
                    spinors.len()
                )));
            }
            spinors.push(Spinor::new(
                Complex64::new(parse(fields[1])?, parse(fields[2])?),
                Complex64::new(parse(fields[3])?, parse(fields[4])?),
            ));
        }
        if spinors.is_empty() {
            return Err(Error::Parse("snapshot contains no sites".into()));
        }
        Ok(ProductState::from_spinors(&spinors))
    }
}

/// All sites aligned along +x, or along -x when `negative` is set.
pub fn init_all_plus_x(n: usize, negative: bool) -> ProductState {
    let s = if negative {
        Spinor::minus_x()
    } else {
        Spinor::plus_x()
    };
    ProductState::uniform(n, s)
}

pub fn z2_flip(state: &ProductState) -> ProductState {
    state.z2_flip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: BlochVector, b: BlochVector, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && (a.z - b.z).abs() < tol
    }

    #[test]
    fn pauli_eigenstates() {
        assert_eq!(Spinor::UP.bloch(), BlochVector::new(0.0, 0.0, 1.0));
        let h = FRAC_1_SQRT_2;
        let b = Spinor::new(c(h, 0.0), c(h, 0.0)).bloch();
        assert!(close(b, BlochVector::new(1.0, 0.0, 0.0), 1e-15));
        let b = Spinor::new(c(h, 0.0), c(0.0, h)).bloch();
        assert!(close(b, BlochVector::new(0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn plus_x_initialization() {
        let s = init_all_plus_x(16, false);
        let m = s.magnetization();
        assert!(close(m, BlochVector::new(1.0, 0.0, 0.0), 1e-15));
        let one = init_all_plus_x(1, false);
        assert!(close(one.spinor(0).bloch(), BlochVector::new(1.0, 0.0, 0.0), 1e-15));
        let neg = init_all_plus_x(4, true);
        assert!((neg.magnetization().x + 1.0).abs() < 1e-15);
    }

    #[test]
    fn flip_examples() {
        let s = init_all_plus_x(9, false);
        assert!((z2_flip(&s).magnetization().x + 1.0).abs() < 1e-15);
        let down = ProductState::uniform(4, Spinor::DOWN);
        assert_eq!(z2_flip(&down).bloch_vectors(), down.bloch_vectors());
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(
            renormalize(&Spinor::new(c(2.0, 0.0), c(0.0, 0.0))).unwrap(),
            Spinor::UP
        );
        let s = Spinor::new(c(0.6, 0.0), c(0.0, 0.8));
        let r = renormalize(&s).unwrap();
        assert!((r.up - s.up).norm() < 1e-15 && (r.down - s.down).norm() < 1e-15);
        assert!(matches!(
            renormalize(&Spinor::new(c(0.0, 0.0), c(0.0, 0.0))),
            Err(Error::NumericalDegeneracy(_))
        ));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let s = ProductState::from_spinors(&[
            Spinor::new(c(0.1, -0.3), c(0.7, 0.2)).renormalize().unwrap(),
            Spinor::plus_x(),
            Spinor::DOWN,
        ]);
        let mut buf = Vec::new();
        s.write_snapshot(&mut buf).unwrap();
        let back = ProductState::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn snapshot_rejects_bad_rows() {
        assert!(ProductState::read_snapshot(&b"site_index,a\n0,1,2\n"[..]).is_err());
        assert!(ProductState::read_snapshot(&b"1,1,0,0,0\n"[..]).is_err());
        assert!(ProductState::read_snapshot(&b""[..]).is_err());
    }

    fn spinor_strategy() -> impl Strategy<Value = Spinor> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(a, b, c_, d)| a * a + b * b + c_ * c_ + d * d > 1e-3)
            .prop_map(|(a, b, c_, d)| Spinor::new(c(a, b), c(c_, d)))
    }

    proptest! {
        #[test]
        fn bloch_is_scale_invariant(s in spinor_strategy(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
            prop_assume!(re * re + im * im > 1e-4);
            let k = c(re, im);
            let scaled = Spinor::new(s.up * k, s.down * k).renormalize().unwrap();
            let base = s.renormalize().unwrap();
            prop_assert!(close(scaled.bloch(), base.bloch(), 1e-12));
        }

        #[test]
        fn normalized_bloch_has_unit_length(s in spinor_strategy()) {
            let b = s.renormalize().unwrap().bloch();
            prop_assert!((b.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn flip_is_involution_and_negates_xy(spinors in proptest::collection::vec(spinor_strategy(), 1..12)) {
            let normed: Vec<Spinor> = spinors.iter().map(|s| s.renormalize().unwrap()).collect();
            let state = ProductState::from_spinors(&normed);
            let flipped = state.z2_flip();
            for (a, b) in state.bloch_vectors().iter().zip(flipped.bloch_vectors()) {
                prop_assert_eq!(b.x, -a.x);
                prop_assert_eq!(b.y, -a.y);
                prop_assert_eq!(b.z, a.z);
            }
            prop_assert_eq!(flipped.z2_flip().bloch_vectors(), state.bloch_vectors());
        }
    }
}
