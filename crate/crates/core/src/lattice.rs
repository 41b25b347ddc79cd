//! Finite rectangular lattices with periodic boundaries.
//!
//! Sites are indexed row-major: site `i` sits at column `i % width`, row
//! `i / width`. Lattices narrower than 3 sites in either direction are
//! accepted (the exact small-system references use 1×1, 2×1 and 2×2), but the
//! periodic wrap then maps several bonds onto the same pair. Those duplicates
//! and self-bonds are dropped and the geometry is flagged as degenerate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeometry {
    width: usize,
    height: usize,
    /// CSR layout: neighbors of `i` are `neighbors[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    bonds: Vec<(usize, usize)>,
    degenerate: bool,
}

/// Minimum-image displacement between two sites, or a class of such
/// displacements when produced by [`distance_classes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementClass {
    pub dx: i64,
    pub dy: i64,
    pub distance: f64,
    pub pair_count: usize,
    /// `true` when the displacement lies along a lattice axis.
    pub axis: bool,
}

impl LatticeGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "lattice dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(4 * n);
        offsets.push(0);
        for i in 0..n {
            let (x, y) = (i % width, i / width);
            let mut adj = vec![
                y * width + (x + 1) % width,
                y * width + (x + width - 1) % width,
                ((y + 1) % height) * width + x,
                ((y + height - 1) % height) * width + x,
            ];
            adj.retain(|&j| j != i);
            adj.sort_unstable();
            adj.dedup();
            neighbors.extend_from_slice(&adj);
            offsets.push(neighbors.len());
        }
        let mut bonds = Vec::with_capacity(2 * n);
        for i in 0..n {
            for &j in &neighbors[offsets[i]..offsets[i + 1]] {
                if i < j {
                    bonds.push((i, j));
                }
            }
        }
        Ok(LatticeGeometry {
            width,
            height,
            offsets,
            neighbors,
            bonds,
            degenerate: width < 3 || height < 3,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn site_count(&self) -> usize {
        self.width * self.height
    }

    /// Set when the periodic wrap produced duplicate or self bonds; such
    /// lattices are fine for reference checks but not for production sweeps.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Unique nearest-neighbor bonds `(i, j)` with `i < j`.
    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Column and row of site `i`.
    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn site_at(&self, x: usize, y: usize) -> usize {
        (y % self.height) * self.width + (x % self.width)
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.site_count() {
            return Err(Error::InvalidArgument(format!(
                "site index {i} out of range for {} sites",
                self.site_count()
            )));
        }
        Ok(())
    }

    /// Minimum-image offset of `j` relative to `i`, reduced into
    /// `(-width/2, width/2] x (-height/2, height/2]`.
    pub fn min_image_offset(&self, i: usize, j: usize) -> (i64, i64) {
        let (xi, yi) = self.coords(i);
        let (xj, yj) = self.coords(j);
        (
            wrap_offset(xj as i64 - xi as i64, self.width),
            wrap_offset(yj as i64 - yi as i64, self.height),
        )
    }
}

fn wrap_offset(d: i64, len: usize) -> i64 {
    let len = len as i64;
    let r = d.rem_euclid(len);
    if r > len / 2 {
        r - len
    } else {
        r
    }
}

pub fn build_lattice(width: usize, height: usize) -> Result<LatticeGeometry> {
    LatticeGeometry::new(width, height)
}

pub fn min_image_displacement(
    geometry: &LatticeGeometry,
    i: usize,
    j: usize,
) -> Result<DisplacementClass> {
    geometry.check_site(i)?;
    geometry.check_site(j)?;
    let (dx, dy) = geometry.min_image_offset(i, j);
    Ok(DisplacementClass {
        dx,
        dy,
        distance: ((dx * dx + dy * dy) as f64).sqrt(),
        pair_count: 1,
        axis: dx == 0 || dy == 0,
    })
}

/// Canonical class key of a displacement: reflections are always folded, and
/// on square lattices the x/y exchange is folded as well.
fn class_key(geometry: &LatticeGeometry, dx: i64, dy: i64) -> (i64, i64) {
    let (ax, ay) = (dx.abs(), dy.abs());
    if geometry.width == geometry.height && ay > ax {
        (ay, ax)
    } else {
        (ax, ay)
    }
}

/// Partition of all ordered pairs `i != j` by minimum-image displacement.
#[derive(Debug, Clone)]
pub struct ClassTable {
    classes: Vec<DisplacementClass>,
    /// Class index of each displacement, addressed by
    /// `(dy mod height) * width + (dx mod width)`; the zero offset maps to `u32::MAX`.
    by_offset: Vec<u32>,
    width: usize,
    height: usize,
}

impl ClassTable {
    pub fn new(geometry: &LatticeGeometry) -> Self {
        let (w, h) = (geometry.width, geometry.height);
        let n = geometry.site_count();
        // Every site sees the same set of offsets, so each offset contributes n ordered pairs.
        let mut keyed: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for oy in 0..h {
            for ox in 0..w {
                if ox == 0 && oy == 0 {
                    continue;
                }
                let dx = wrap_offset(ox as i64, w);
                let dy = wrap_offset(oy as i64, h);
                *keyed.entry(class_key(geometry, dx, dy)).or_default() += n;
            }
        }
        let mut classes: Vec<DisplacementClass> = keyed
            .into_iter()
            .map(|((dx, dy), pair_count)| DisplacementClass {
                dx,
                dy,
                distance: ((dx * dx + dy * dy) as f64).sqrt(),
                pair_count,
                axis: dx == 0 || dy == 0,
            })
            .collect();
        classes.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(b.dx.cmp(&a.dx))
                .then(a.dy.cmp(&b.dy))
        });
        let index: BTreeMap<(i64, i64), u32> = classes
            .iter()
            .enumerate()
            .map(|(c, cls)| ((cls.dx, cls.dy), c as u32))
            .collect();
        let mut by_offset = vec![u32::MAX; w * h];
        for oy in 0..h {
            for ox in 0..w {
                if ox == 0 && oy == 0 {
                    continue;
                }
                let key = class_key(geometry, wrap_offset(ox as i64, w), wrap_offset(oy as i64, h));
                by_offset[oy * w + ox] = index[&key];
            }
        }
        ClassTable {
            classes,
            by_offset,
            width: w,
            height: h,
        }
    }

    pub fn classes(&self) -> &[DisplacementClass] {
        &self.classes
    }

    /// Class index for the ordered pair `(i, j)`, `None` when `i == j`.
    #[inline]
    pub fn class_of(&self, i: usize, j: usize) -> Option<usize> {
        let (w, h) = (self.width, self.height);
        let ox = (j % w + w - i % w) % w;
        let oy = (j / w + h - i / w) % h;
        match self.by_offset[oy * w + ox] {
            u32::MAX => None,
            c => Some(c as usize),
        }
    }

    /// Class index for a raw periodic offset `(ox, oy)` with `0 <= ox < width`, `0 <= oy < height`.
    #[inline]
    pub fn class_of_offset(&self, ox: usize, oy: usize) -> Option<usize> {
        match self.by_offset[oy * self.width + ox] {
            u32::MAX => None,
            c => Some(c as usize),
        }
    }
}

/// All displacement classes of ordered pairs `i != j`, sorted by distance.
pub fn distance_classes(geometry: &LatticeGeometry) -> Vec<DisplacementClass> {
    ClassTable::new(geometry).classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn distinct_distances(classes: &[DisplacementClass]) -> Vec<f64> {
        let mut d: Vec<f64> = classes.iter().map(|c| c.distance).collect();
        d.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        d
    }

    #[test]
    fn four_by_four_torus() {
        let g = build_lattice(4, 4).unwrap();
        assert_eq!(g.site_count(), 16);
        assert!(!g.is_degenerate());
        for i in 0..16 {
            assert_eq!(g.neighbors(i).len(), 4);
        }
        assert_eq!(g.bonds().len(), 32);
    }

    #[test]
    fn two_by_one_has_single_bond() {
        let g = build_lattice(2, 1).unwrap();
        assert!(g.is_degenerate());
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.bonds(), &[(0, 1)]);
    }

    #[test]
    fn two_by_two_bonds() {
        let g = build_lattice(2, 2).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.bonds().len(), 4);
    }

    #[test]
    fn single_site_has_no_neighbors() {
        let g = build_lattice(1, 1).unwrap();
        assert!(g.neighbors(0).is_empty());
        assert!(g.bonds().is_empty());
    }

    #[test]
    fn six_by_six_site_zero() {
        let g = build_lattice(6, 6).unwrap();
        assert_eq!(g.neighbors(0), &[1, 5, 6, 30]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(build_lattice(0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_lattice(4, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn wrapped_displacement() {
        let g = build_lattice(4, 4).unwrap();
        let d = min_image_displacement(&g, 0, 3).unwrap();
        assert_eq!((d.dx, d.dy), (-1, 0));
        assert_eq!(d.distance, 1.0);

        let g = build_lattice(12, 12).unwrap();
        let d = min_image_displacement(&g, 0, 78).unwrap();
        assert_eq!((d.dx, d.dy), (6, 6));
        assert!((d.distance - 6.0 * 2f64.sqrt()).abs() < 1e-12);

        let d = min_image_displacement(&g, 17, 17).unwrap();
        assert_eq!((d.dx, d.dy, d.distance), (0, 0, 0.0));

        assert!(min_image_displacement(&g, 0, 144).is_err());
    }

    #[test]
    fn four_by_four_distance_set() {
        let g = build_lattice(4, 4).unwrap();
        let classes = distance_classes(&g);
        let s2 = 2f64.sqrt();
        let expected = [1.0, s2, 2.0, 5f64.sqrt(), 2.0 * s2];
        let got = distinct_distances(&classes);
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(classes.iter().map(|c| c.pair_count).sum::<usize>(), 240);
    }

    #[test]
    fn two_by_two_distance_set() {
        let g = build_lattice(2, 2).unwrap();
        let classes = distance_classes(&g);
        let got = distinct_distances(&classes);
        assert_eq!(got.len(), 2);
        assert!((got[0] - 1.0).abs() < 1e-12);
        assert!((got[1] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(classes.iter().map(|c| c.pair_count).sum::<usize>(), 12);
    }

    #[test]
    fn nearest_neighbor_class_count() {
        for l in [3, 4, 5, 6, 12] {
            let g = build_lattice(l, l).unwrap();
            let classes = distance_classes(&g);
            let nn = classes.iter().find(|c| (c.dx, c.dy) == (1, 0)).unwrap();
            assert_eq!(nn.pair_count, 4 * l * l);
            assert!(nn.axis);
        }
    }

    #[test]
    fn rectangles_keep_axes_apart() {
        let g = build_lattice(6, 4).unwrap();
        let classes = distance_classes(&g);
        let x = classes.iter().find(|c| (c.dx, c.dy) == (1, 0)).unwrap();
        let y = classes.iter().find(|c| (c.dx, c.dy) == (0, 1)).unwrap();
        assert_eq!(x.pair_count, 2 * 24);
        assert_eq!(y.pair_count, 2 * 24);
        let n = 24;
        assert_eq!(classes.iter().map(|c| c.pair_count).sum::<usize>(), n * (n - 1));
    }

    #[test]
    fn class_table_matches_displacements() {
        let g = build_lattice(5, 4).unwrap();
        let table = ClassTable::new(&g);
        for i in 0..g.site_count() {
            assert_eq!(table.class_of(i, i), None);
            for j in 0..g.site_count() {
                if i == j {
                    continue;
                }
                let d = min_image_displacement(&g, i, j).unwrap();
                let c = table.classes()[table.class_of(i, j).unwrap()];
                assert_eq!((c.dx, c.dy), (d.dx.abs(), d.dy.abs()));
            }
        }
    }
}
