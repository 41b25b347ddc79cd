//! Bit-level action of the XYZ Hamiltonian on the 2^N computational basis.
//!
//! Bit `j` of a basis index is 0 when site `j` is spin-up and 1 when it is
//! spin-down, so a single site reproduces the (up, down) spinor ordering.

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

/// Largest lattice the dense references accept.
pub const MAX_SITES: usize = 10;

#[derive(Debug, Clone)]
pub(crate) struct XyzOperator {
    pub n_sites: usize,
    pub dim: usize,
    pub gamma: f64,
    /// Two-bit flip masks, one per bond.
    pub bond_masks: Vec<(usize, usize)>,
    pub jx: f64,
    pub jy: f64,
    /// J_z Σ σ^z σ^z on each basis state.
    pub diag: Vec<f64>,
    /// Number of spin-up sites in each basis state.
    pub n_up: Vec<u32>,
}

impl XyzOperator {
    pub fn new(geometry: &LatticeGeometry, params: &ModelParams) -> Result<Self> {
        let n = geometry.site_count();
        if n > MAX_SITES {
            return Err(Error::DimensionCap {
                sites: n,
                cap: MAX_SITES,
            });
        }
        params.validate()?;
        let dim = 1usize << n;
        let bonds: Vec<(usize, usize)> = geometry.bonds().to_vec();
        let diag = (0..dim)
            .map(|a| {
                bonds
                    .iter()
                    .map(|&(i, j)| {
                        if ((a >> i) & 1) == ((a >> j) & 1) {
                            params.jz
                        } else {
                            -params.jz
                        }
                    })
                    .sum()
            })
            .collect();
        let n_up = (0..dim).map(|a| n as u32 - (a as u32).count_ones()).collect();
        Ok(XyzOperator {
            n_sites: n,
            dim,
            gamma: params.gamma,
            bond_masks: bonds.iter().map(|&(i, j)| (i, (1 << i) | (1 << j))).collect(),
            jx: params.jx,
            jy: params.jy,
            diag,
            n_up,
        })
    }

    /// Matrix element `⟨a ^ mask| H |a⟩` of the σ^xσ^x + σ^yσ^y part of one bond.
    /// σ^yσ^y contributes -1 on aligned pairs and +1 on anti-aligned ones.
    #[inline]
    pub fn flip_coefficient(&self, a: usize, first: usize, mask: usize) -> f64 {
        let bi = (a >> first) & 1;
        let other = mask & !(1 << first);
        let bj = usize::from(a & other != 0);
        if bi == bj {
            self.jx - self.jy
        } else {
            self.jx + self.jy
        }
    }
}
