//! Square-lattice geometry: the grid, wide stencils, grid functions and
//! Euclidean ball indexing.
//!
//! The computational domain is the square `[-L, L]^2` sampled by an odd number
//! of nodes per side so that the origin is always a node. Node coordinates are
//! computed as `(i - c) * h` with `c = (n - 1) / 2`, which makes the lattice
//! exactly symmetric about the origin.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest admissible number of nodes per side.
pub const MIN_NODES_PER_SIDE: usize = 17;

/// Largest supported stencil width.
pub const MAX_STENCIL_WIDTH: usize = 4;

/// Lattice position `(i, j)`; `i` runs along `x_1`, `j` along `x_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub i: usize,
    pub j: usize,
}

impl Node {
    pub fn new(i: usize, j: usize) -> Self {
        Node { i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    spacing: f64,
}

impl Grid2D {
    pub fn new(n_per_side: usize, half_width: f64) -> Result<Self> {
        if n_per_side < MIN_NODES_PER_SIDE || n_per_side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "n_per_side must be odd and >= {MIN_NODES_PER_SIDE}, got {n_per_side}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        let spacing = 2.0 * half_width / (n_per_side - 1) as f64;
        Ok(Grid2D {
            n: n_per_side,
            half_width,
            spacing,
        })
    }

    pub fn n_per_side(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Lattice spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn origin(&self) -> Node {
        let c = self.center_index();
        Node::new(c, c)
    }

    pub fn flat(&self, node: Node) -> usize {
        node.j * self.n + node.i
    }

    pub fn node(&self, flat: usize) -> Node {
        Node::new(flat % self.n, flat / self.n)
    }

    /// Physical coordinate of lattice index `k` along either axis.
    pub fn coordinate(&self, k: usize) -> f64 {
        (k as f64 - self.center_index() as f64) * self.spacing
    }

    pub fn point(&self, node: Node) -> [f64; 2] {
        [self.coordinate(node.i), self.coordinate(node.j)]
    }

    pub fn point_flat(&self, flat: usize) -> [f64; 2] {
        self.point(self.node(flat))
    }

    /// Node closest to `p`, or `None` when `p` lies outside the square.
    pub fn nearest_node(&self, p: [f64; 2]) -> Option<Node> {
        let to_index = |x: f64| -> Option<usize> {
            let k = (x / self.spacing + self.center_index() as f64).round();
            (k >= 0.0 && k <= (self.n - 1) as f64).then_some(k as usize)
        };
        Some(Node::new(to_index(p[0])?, to_index(p[1])?))
    }

    /// True for nodes on the outermost ring of the lattice.
    pub fn is_edge(&self, node: Node) -> bool {
        node.i == 0 || node.j == 0 || node.i == self.n - 1 || node.j == self.n - 1
    }

    /// True when every offset of a width-`width` stencil lands inside the lattice.
    pub fn has_support(&self, node: Node, width: usize) -> bool {
        let hi = self.n - 1 - width;
        node.i >= width && node.j >= width && node.i <= hi && node.j <= hi
    }

    /// Flat indices of nodes with full stencil support, in lexicographic order.
    pub fn supported_nodes(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        let lo = width;
        let hi = self.n - width;
        (lo..hi).flat_map(move |j| (lo..hi).map(move |i| j * self.n + i))
    }

    pub fn distance(&self, a: Node, b: Node) -> f64 {
        let pa = self.point(a);
        let pb = self.point(b);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// Distance from `node` to the outermost lattice ring.
    pub fn distance_to_edge(&self, node: Node) -> f64 {
        let k = node.i.min(node.j).min(self.n - 1 - node.i).min(self.n - 1 - node.j);
        k as f64 * self.spacing
    }
}

pub fn build_grid(n_per_side: usize, half_width: f64) -> Result<Grid2D> {
    Grid2D::new(n_per_side, half_width)
}

/// Primitive lattice direction `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub p: i32,
    pub q: i32,
}

impl Direction {
    /// Arm length in units of the lattice spacing.
    pub fn unit_length(&self) -> f64 {
        f64::from(self.p).hypot(f64::from(self.q))
    }

    fn norm2(&self) -> i32 {
        self.p * self.p + self.q * self.q
    }

    fn angle(&self) -> f64 {
        let a = f64::from(self.q).atan2(f64::from(self.p));
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }
}

/// Directions of a stencil that share one arm length.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmClass {
    pub unit_length: f64,
    pub members: Vec<usize>,
}

/// Wide stencil of Chebyshev radius `width`: all primitive offsets `(p, q)`
/// with `max(|p|, |q|) <= width`, ordered by polar angle starting at `(1, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSet {
    width: usize,
    directions: Vec<Direction>,
    classes: Vec<ArmClass>,
}

fn gcd(mut a: i32, mut b: i32) -> i32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

impl StencilSet {
    pub fn new(width: usize) -> Result<Self> {
        if !(1..=MAX_STENCIL_WIDTH).contains(&width) {
            return Err(Error::invalid(format!(
                "stencil width must lie in 1..={MAX_STENCIL_WIDTH}, got {width}"
            )));
        }
        let w = width as i32;
        let mut directions: Vec<Direction> = (-w..=w)
            .flat_map(|p| (-w..=w).map(move |q| Direction { p, q }))
            .filter(|d| (d.p, d.q) != (0, 0) && gcd(d.p.abs(), d.q.abs()) == 1)
            .collect();
        directions.sort_by(|a, b| a.angle().total_cmp(&b.angle()));

        let mut norms: Vec<i32> = directions.iter().map(Direction::norm2).collect();
        norms.sort_unstable();
        norms.dedup();
        let classes = norms
            .into_iter()
            .map(|n2| ArmClass {
                unit_length: f64::from(n2).sqrt(),
                members: (0..directions.len())
                    .filter(|&k| directions[k].norm2() == n2)
                    .collect(),
            })
            .collect();

        Ok(StencilSet {
            width,
            directions,
            classes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Index of the direction `-d_k`. Angular ordering puts it half a turn away.
    pub fn antipode(&self, k: usize) -> usize {
        (k + self.directions.len() / 2) % self.directions.len()
    }

    /// Physical arm length of direction `k` on a lattice of spacing `h`.
    pub fn arm_length(&self, k: usize, h: f64) -> f64 {
        self.directions[k].unit_length() * h
    }

    pub fn classes(&self) -> &[ArmClass] {
        &self.classes
    }

    pub(crate) fn bind(&self, grid: &Grid2D) -> BoundStencil {
        let n = grid.n_per_side() as isize;
        let h = grid.spacing();
        BoundStencil {
            offsets: self
                .directions
                .iter()
                .map(|d| d.q as isize * n + d.p as isize)
                .collect(),
            arms: self.directions.iter().map(|d| d.unit_length() * h).collect(),
            classes: self
                .classes
                .iter()
                .map(|c| (c.unit_length * h, c.members.clone()))
                .collect(),
        }
    }
}

pub fn build_stencil(width: usize) -> Result<StencilSet> {
    StencilSet::new(width)
}

/// Stencil resolved against a concrete grid: flat offsets and physical arms.
#[derive(Debug, Clone)]
pub(crate) struct BoundStencil {
    pub offsets: Vec<isize>,
    pub arms: Vec<f64>,
    /// `(arm length, member directions)` per arm-length class.
    pub classes: Vec<(f64, Vec<usize>)>,
}

impl BoundStencil {
    #[inline]
    pub fn neighbor(&self, flat: usize, k: usize) -> usize {
        (flat as isize + self.offsets[k]) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldRole {
    Solution,
    RhsSample,
    Residual,
    Oracle,
}

/// One real value per lattice node, stored row-major (`flat = j * n + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
    role: FieldRole,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite value at node {:?}",
                grid.node(k)
            )));
        }
        Ok(ScalarField { grid, values, role })
    }

    pub fn zeros(grid: Grid2D, role: FieldRole) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.node_count()],
            role,
        }
    }

    pub fn from_fn(grid: Grid2D, role: FieldRole, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count()).map(|k| f(grid.point_flat(k))).collect();
        ScalarField::new(grid, values, role)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: Node) -> f64 {
        self.values[self.grid.flat(node)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise affine map `a * u + b`, used by the scaling identities.
    pub fn affine_map(&self, a: f64, b: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| a * v + b).collect();
        ScalarField::new(self.grid, values, self.role)
    }
}

/// Nodes of the closed Euclidean ball `B_r(center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallIndex {
    pub center: Node,
    pub radius: f64,
    /// Flat indices in lexicographic order.
    pub nodes: Vec<usize>,
}

fn check_ball(grid: &Grid2D, center: Node, r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("ball radius must be positive, got {r}")));
    }
    let n = grid.n_per_side();
    if center.i >= n || center.j >= n {
        return Err(Error::domain(format!("center {center:?} is not a grid node")));
    }
    if r >= grid.distance_to_edge(center) {
        return Err(Error::domain(format!(
            "ball of radius {r} around {:?} touches the lattice boundary",
            grid.point(center)
        )));
    }
    Ok(())
}

/// Nodes `x` with `r_inner <= |x - center| <= r_outer`, scanning only the
/// bounding box of the outer ball.
fn annulus(grid: &Grid2D, center: Node, r_inner: f64, r_outer: f64) -> Vec<usize> {
    let reach = (r_outer / grid.spacing()).ceil() as usize;
    let lo_i = center.i.saturating_sub(reach);
    let lo_j = center.j.saturating_sub(reach);
    let hi_i = (center.i + reach).min(grid.n_per_side() - 1);
    let hi_j = (center.j + reach).min(grid.n_per_side() - 1);
    let mut out = Vec::new();
    for j in lo_j..=hi_j {
        for i in lo_i..=hi_i {
            let node = Node::new(i, j);
            let d = grid.distance(center, node);
            if d <= r_outer && d >= r_inner {
                out.push(grid.flat(node));
            }
        }
    }
    out
}

pub fn ball_nodes(grid: &Grid2D, center: Node, r: f64) -> Result<BallIndex> {
    check_ball(grid, center, r)?;
    Ok(BallIndex {
        center,
        radius: r,
        nodes: annulus(grid, center, 0.0, r),
    })
}

/// Lattice stand-in for the sphere `∂B_r(center)`: the shell
/// `{r - h <= |x - center| <= r}`.
pub fn shell_nodes(grid: &Grid2D, center: Node, r: f64) -> Result<BallIndex> {
    check_ball(grid, center, r)?;
    Ok(BallIndex {
        center,
        radius: r,
        nodes: annulus(grid, center, r - grid.spacing(), r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_origin() {
        let g = build_grid(17, 1.0).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.point(g.origin()), [0.0, 0.0]);
        let g = build_grid(129, 1.0).unwrap();
        assert_eq!(g.spacing(), 0.015625);
        let g = build_grid(33, 1.3).unwrap();
        assert_eq!(g.point(g.origin()), [0.0, 0.0]);
        assert_eq!(g.coordinate(0), -g.coordinate(32));
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(build_grid(16, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_grid(15, 1.0), Err(Error::InvalidParameter(_))));
        assert!(build_grid(17, 0.0).is_err());
        assert!(build_grid(17, f64::NAN).is_err());
    }

    #[test]
    fn stencil_counts() {
        let s1 = build_stencil(1).unwrap();
        assert_eq!(s1.len(), 8);
        let mut got: Vec<_> = s1.directions().iter().map(|d| (d.p, d.q)).collect();
        got.sort();
        let mut want = vec![(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        want.sort();
        assert_eq!(got, want);

        let s2 = build_stencil(2).unwrap();
        assert_eq!(s2.len(), 16);
        for d in [(1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1)] {
            assert!(s2.directions().contains(&Direction { p: d.0, q: d.1 }));
        }
        assert_eq!(s2.classes().len(), 3);
        assert!(matches!(build_stencil(0), Err(Error::InvalidParameter(_))));
        assert!(build_stencil(5).is_err());
    }

    #[test]
    fn stencil_antipodal_and_primitive() {
        for w in 1..=MAX_STENCIL_WIDTH {
            let s = build_stencil(w).unwrap();
            assert_eq!(s.len() % 2, 0);
            for (k, d) in s.directions().iter().enumerate() {
                let a = s.directions()[s.antipode(k)];
                assert_eq!((a.p, a.q), (-d.p, -d.q));
                // no positive multiples
                for e in s.directions() {
                    if e != d {
                        let cross = d.p * e.q - d.q * e.p;
                        let dot = d.p * e.p + d.q * e.q;
                        assert!(cross != 0 || dot < 0);
                    }
                }
            }
            let total: usize = s.classes().iter().map(|c| c.members.len()).sum();
            assert_eq!(total, s.len());
        }
    }

    #[test]
    fn ball_examples() {
        let g = build_grid(17, 1.0).unwrap();
        let o = g.origin();
        assert_eq!(ball_nodes(&g, o, 0.13).unwrap().nodes.len(), 5);
        assert_eq!(ball_nodes(&g, o, 0.05).unwrap().nodes, vec![g.flat(o)]);
        assert!(matches!(ball_nodes(&g, o, 1.1), Err(Error::OutOfDomain(_))));
        assert!(matches!(ball_nodes(&g, o, 1.0), Err(Error::OutOfDomain(_))));
        assert!(ball_nodes(&g, o, 0.0).is_err());
    }

    #[test]
    fn ball_matches_brute_force() {
        for (n, l) in [(17, 1.0), (33, 2.0), (65, 1.0)] {
            let g = build_grid(n, l).unwrap();
            for (ci, cj, r) in [(8, 8, 0.4), (10, 7, 0.31), (12, 9, 0.2), (9, 9, 0.5)] {
                let c = Node::new(ci, cj);
                let Ok(ball) = ball_nodes(&g, c, r) else { continue };
                let pc = g.point(c);
                let brute: Vec<usize> = (0..g.node_count())
                    .filter(|&k| {
                        let p = g.point_flat(k);
                        (p[0] - pc[0]).hypot(p[1] - pc[1]) <= r
                    })
                    .collect();
                assert_eq!(ball.nodes, brute);
            }
        }
    }

    #[test]
    fn shell_is_subset_of_ball() {
        let g = build_grid(65, 1.0).unwrap();
        let o = g.origin();
        let ball = ball_nodes(&g, o, 0.3).unwrap();
        let shell = shell_nodes(&g, o, 0.3).unwrap();
        assert!(!shell.nodes.is_empty());
        assert!(shell.nodes.iter().all(|k| ball.nodes.contains(k)));
    }

    #[test]
    fn field_validation() {
        let g = build_grid(17, 1.0).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 10], FieldRole::Solution).is_err());
        let mut v = vec![0.0; g.node_count()];
        v[3] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g, v, FieldRole::Solution),
            Err(Error::NumericalFailure(_))
        ));
    }
}
