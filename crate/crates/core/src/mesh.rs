//! Uniform mesh over the closed unit square and two-component grid functions.
//!
//! Grid values are stored column-major by `i`: column `i` (the vertical line
//! `x = x_i`) is a contiguous slice of `ny + 1` values, so the line solvers can
//! borrow one column at a time.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Mesh {
    /// Builds the mesh with `nx` intervals along x and `ny` along y.
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::DimensionTooSmall { nx, ny });
        }
        Ok(Mesh {
            nx,
            ny,
            hx: 1.0 / nx as f64,
            hy: 1.0 / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Number of nodes including the boundary.
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    // Computed as i/nx rather than i*hx so the last node lands exactly on 1.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.ny as f64
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || i == self.nx || j == 0 || j == self.ny
    }

    /// Boundary nodes in a fixed order (bottom, top, then left and right edges).
    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let bottom_top = (0..=nx).flat_map(move |i| [(i, 0), (i, ny)]);
        let sides = (1..ny).flat_map(move |j| [(0, j), (nx, j)]);
        bottom_top.chain(sides)
    }

    /// Interior nodes, column by column.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ny = self.ny;
        (1..self.nx).flat_map(move |i| (1..ny).map(move |j| (i, j)))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ny = self.ny;
        (0..=self.nx).flat_map(move |i| (0..=ny).map(move |j| (i, j)))
    }

    #[inline]
    pub(crate) fn index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }
}

/// Mesh function `U = (U_1, U_2)` on every node of the closed mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPair {
    mesh: Mesh,
    values: [Vec<f64>; 2],
}

impl GridPair {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, [0.0, 0.0])
    }

    pub fn constant(mesh: &Mesh, value: [f64; 2]) -> Self {
        let n = mesh.node_count();
        GridPair {
            mesh: *mesh,
            values: [vec![value[0]; n], vec![value[1]; n]],
        }
    }

    /// Samples `f(alpha, x, y)` at every node; `alpha` is 0 or 1.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(mesh);
        for alpha in 0..2 {
            for (i, j) in mesh.nodes() {
                let v = f(alpha, mesh.x(i), mesh.y(j));
                g.set(alpha, i, j, v);
            }
        }
        g
    }

    /// Builds a pair from two raw column-major arrays of length `node_count()`.
    pub fn from_components(mesh: &Mesh, first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        let n = mesh.node_count();
        if first.len() != n || second.len() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: (first.len(), second.len()),
            });
        }
        Ok(GridPair {
            mesh: *mesh,
            values: [first, second],
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn get(&self, alpha: usize, i: usize, j: usize) -> f64 {
        self.values[alpha][self.mesh.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, alpha: usize, i: usize, j: usize, value: f64) {
        let k = self.mesh.index(i, j);
        self.values[alpha][k] = value;
    }

    /// Both components at one node.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let k = self.mesh.index(i, j);
        [self.values[0][k], self.values[1][k]]
    }

    pub fn component(&self, alpha: usize) -> &[f64] {
        &self.values[alpha]
    }

    /// Full column `i` including the two boundary rows.
    pub fn column(&self, alpha: usize, i: usize) -> &[f64] {
        let n = self.mesh.ny + 1;
        &self.values[alpha][i * n..(i + 1) * n]
    }

    pub fn column_mut(&mut self, alpha: usize, i: usize) -> &mut [f64] {
        let n = self.mesh.ny + 1;
        &mut self.values[alpha][i * n..(i + 1) * n]
    }

    /// Rows `1..ny` of column `i`, i.e. the unknowns of one line block.
    pub fn interior_column(&self, alpha: usize, i: usize) -> &[f64] {
        let col = self.column(alpha, i);
        &col[1..col.len() - 1]
    }

    pub fn interior_column_mut(&mut self, alpha: usize, i: usize) -> &mut [f64] {
        let col = self.column_mut(alpha, i);
        let n = col.len();
        &mut col[1..n - 1]
    }

    pub fn check_same_mesh(&self, other: &GridPair) -> Result<()> {
        if self.mesh.nx != other.mesh.nx || self.mesh.ny != other.mesh.ny {
            return Err(Error::ShapeMismatch {
                expected: (self.mesh.nx, self.mesh.ny),
                got: (other.mesh.nx, other.mesh.ny),
            });
        }
        Ok(())
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh.nx != mesh.nx || self.mesh.ny != mesh.ny {
            return Err(Error::ShapeMismatch {
                expected: (mesh.nx, mesh.ny),
                got: (self.mesh.nx, self.mesh.ny),
            });
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Max over both components and all nodes of `|value|`.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_component(&self, alpha: usize) -> f64 {
        self.values[alpha]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> GridPair {
        let mut out = self.clone();
        for alpha in 0..2 {
            for (i, j) in self.mesh.nodes() {
                let v = f(alpha, i, j, self.get(alpha, i, j));
                out.set(alpha, i, j, v);
            }
        }
        out
    }

    /// `self - other` nodewise.
    pub fn sub(&self, other: &GridPair) -> Result<GridPair> {
        self.check_same_mesh(other)?;
        let mut out = self.clone();
        for alpha in 0..2 {
            for (o, b) in out.values[alpha].iter_mut().zip(&other.values[alpha]) {
                *o -= b;
            }
        }
        Ok(out)
    }

    /// Point reflection `(x, y) -> (1 - x, 1 - y)` of both components.
    pub fn reflected(&self) -> GridPair {
        let (nx, ny) = (self.mesh.nx, self.mesh.ny);
        let mut out = self.clone();
        for alpha in 0..2 {
            for (i, j) in self.mesh.nodes() {
                out.set(alpha, i, j, self.get(alpha, nx - i, ny - j));
            }
        }
        out
    }

    /// Writes one component as CSV with header `x,y,value`, rows `j` outer and
    /// `i` inner, every number at 17 significant digits.
    pub fn write_component_csv<W: Write>(&self, alpha: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for j in 0..=self.mesh.ny {
            for i in 0..=self.mesh.nx {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    self.mesh.x(i),
                    self.mesh.y(j),
                    self.get(alpha, i, j)
                )?;
            }
        }
        Ok(())
    }

    pub fn save_component_csv(&self, alpha: usize, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_component_csv(alpha, &mut w)?;
        w.flush()
    }
}

/// Max over both components and all nodes of `|a - b|`.
pub fn max_norm_diff(a: &GridPair, b: &GridPair) -> Result<f64> {
    a.check_same_mesh(b)?;
    let mut m = 0.0_f64;
    for alpha in 0..2 {
        for (x, y) in a.values[alpha].iter().zip(&b.values[alpha]) {
            m = m.max((x - y).abs());
        }
    }
    Ok(m)
}

/// True iff `a <= b + slack` at every node in both components.
pub fn pointwise_leq(a: &GridPair, b: &GridPair, slack: f64) -> Result<bool> {
    Ok(first_order_violation(a, b, slack)?.is_none())
}

/// First node (component, i, j) where `a > b + slack`, with the excess `a - b`.
pub(crate) fn first_order_violation(
    a: &GridPair,
    b: &GridPair,
    slack: f64,
) -> Result<Option<(usize, usize, usize, f64)>> {
    a.check_same_mesh(b)?;
    let n = a.mesh.ny + 1;
    for alpha in 0..2 {
        for (k, (x, y)) in a.values[alpha].iter().zip(&b.values[alpha]).enumerate() {
            if !(*x <= *y + slack) {
                return Ok(Some((alpha, k / n, k % n, x - y)));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_mesh_examples() {
        let m = Mesh::new(2, 2).unwrap();
        assert_eq!(m.hx(), 0.5);
        assert_eq!(m.hy(), 0.5);
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.interior_count(), 1);

        let m = Mesh::new(4, 2).unwrap();
        assert_eq!(m.hx(), 0.25);
        assert_eq!(m.hy(), 0.5);

        assert!(matches!(
            Mesh::new(1, 4),
            Err(Error::DimensionTooSmall { nx: 1, ny: 4 })
        ));
        assert!(Mesh::new(4, 0).is_err());
    }

    #[test]
    fn last_node_is_exactly_one() {
        for n in 2..200 {
            for m in [2, 3, 7, 17, 100] {
                let mesh = Mesh::new(n, m).unwrap();
                assert_eq!(mesh.x(n), 1.0);
                assert_eq!(mesh.y(m), 1.0);
                assert!((mesh.hx() * n as f64 - 1.0).abs() <= f64::EPSILON);
            }
        }
    }

    #[test]
    fn boundary_classification() {
        let mesh = Mesh::new(4, 3).unwrap();
        let boundary: Vec<_> = mesh.boundary_nodes().collect();
        assert_eq!(boundary.len(), mesh.node_count() - mesh.interior_count());
        assert!(boundary.iter().all(|&(i, j)| mesh.is_boundary(i, j)));
        assert!(mesh.interior_nodes().all(|(i, j)| !mesh.is_boundary(i, j)));
    }

    #[test]
    fn norm_diff_examples() {
        let mesh = Mesh::new(3, 3).unwrap();
        let a = GridPair::constant(&mesh, [1.0, 1.0]);
        let b = GridPair::zeros(&mesh);
        assert_eq!(max_norm_diff(&a, &a).unwrap(), 0.0);
        assert_eq!(max_norm_diff(&a, &b).unwrap(), 1.0);
        let mut c = b.clone();
        c.set(1, 2, 1, 2.0);
        assert_eq!(max_norm_diff(&c, &b).unwrap(), 2.0);

        let other = GridPair::zeros(&Mesh::new(3, 4).unwrap());
        assert!(matches!(
            max_norm_diff(&a, &other),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn leq_examples() {
        let mesh = Mesh::new(3, 3).unwrap();
        let zero = GridPair::zeros(&mesh);
        let one = GridPair::constant(&mesh, [1.0, 1.0]);
        let tiny = GridPair::constant(&mesh, [-1e-15, -1e-15]);
        assert!(pointwise_leq(&one, &one, 0.0).unwrap());
        assert!(pointwise_leq(&zero, &tiny, 1e-12).unwrap());
        assert!(!pointwise_leq(&one, &zero, 1e-12).unwrap());
        let other = GridPair::zeros(&Mesh::new(2, 3).unwrap());
        assert!(pointwise_leq(&zero, &other, 0.0).is_err());
    }

    #[test]
    fn column_layout_matches_get() {
        let mesh = Mesh::new(3, 4).unwrap();
        let g = GridPair::from_fn(&mesh, |a, x, y| a as f64 * 100.0 + 10.0 * x + y);
        for i in 0..=3 {
            let col = g.column(1, i);
            assert_eq!(col.len(), 5);
            for j in 0..=4 {
                assert_eq!(col[j], g.get(1, i, j));
            }
            assert_eq!(g.interior_column(1, i), &col[1..4]);
        }
    }

    #[test]
    fn csv_layout() {
        let mesh = Mesh::new(2, 2).unwrap();
        let g = GridPair::from_fn(&mesh, |_, x, y| x + 2.0 * y);
        let mut buf = Vec::new();
        g.write_component_csv(0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines.len(), 10);
        // second row is (i = 1, j = 0)
        let fields: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(fields, vec![0.5, 0.0, 0.5]);
        let last: Vec<f64> = lines[9].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn csv_round_trips_bits() {
        let mesh = Mesh::new(3, 2).unwrap();
        let g = GridPair::from_fn(&mesh, |_, x, y| (x * 7.1 + y).sin() / 3.0);
        let mut buf = Vec::new();
        g.write_component_csv(0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        let mut k = 0;
        for j in 0..=2 {
            for i in 0..=3 {
                assert_eq!(parsed[k].to_bits(), g.get(0, i, j).to_bits());
                k += 1;
            }
        }
    }

    #[test]
    fn reflection_is_involution() {
        let mesh = Mesh::new(4, 3).unwrap();
        let g = GridPair::from_fn(&mesh, |a, x, y| a as f64 + x * x - y);
        assert_eq!(g.reflected().reflected(), g);
        assert_eq!(g.reflected().get(0, 0, 0), g.get(0, 4, 3));
    }
}
