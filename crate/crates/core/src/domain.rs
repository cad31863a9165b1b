//! Hole geometry and the exterior-domain mask.
//!
//! The hole H is a bounded open set pinned to zero Dirichlet data. It must
//! contain the disk of radius 2 about the origin and fit inside the disk of
//! its bounding radius R; the grid must cover B_R with margin
//! (`half_width >= 4 R`). Membership is decided at cell centers.

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }

    fn bounding_radius(&self) -> f64 {
        (self.center[0].powi(2) + self.center[1].powi(2)).sqrt() + self.radius
    }

    /// Largest s with B_s(0) inside this disk (negative if origin outside).
    fn inscribed_radius_about_origin(&self) -> f64 {
        self.radius - (self.center[0].powi(2) + self.center[1].powi(2)).sqrt()
    }
}

/// Supported hole geometries.
#[derive(Clone, Debug, PartialEq)]
pub enum HoleShape {
    Disk(Disk),
    /// Union of disks; possibly disconnected (several holes in one medium).
    DiskUnion(Vec<Disk>),
    /// Axis-aligned rectangle given by opposite corners.
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl HoleShape {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        HoleShape::Disk(Disk { center, radius })
    }

    /// Bounding radius R (the hole fits in B_R(0)).
    pub fn bounding_radius(&self) -> f64 {
        match self {
            HoleShape::Disk(d) => d.bounding_radius(),
            HoleShape::DiskUnion(ds) => {
                ds.iter().map(|d| d.bounding_radius()).fold(0.0, f64::max)
            }
            HoleShape::Rect { min, max } => {
                let corners = [
                    (min[0], min[1]),
                    (min[0], max[1]),
                    (max[0], min[1]),
                    (max[0], max[1]),
                ];
                corners
                    .iter()
                    .map(|(x, y)| (x * x + y * y).sqrt())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Point membership (open set; boundary counts as outside).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            HoleShape::Disk(d) => d.contains(x, y),
            HoleShape::DiskUnion(ds) => ds.iter().any(|d| d.contains(x, y)),
            HoleShape::Rect { min, max } => {
                x > min[0] && x < max[0] && y > min[1] && y < max[1]
            }
        }
    }

    /// Enforce B_2(0) inside the hole and a finite bounding radius.
    ///
    /// For disk unions the lower inclusion is checked conservatively: some
    /// single disk must contain B_2.
    pub fn validate(&self) -> Result<()> {
        let contains_b2 = match self {
            HoleShape::Disk(d) => d.inscribed_radius_about_origin() >= 2.0,
            HoleShape::DiskUnion(ds) => {
                if ds.is_empty() {
                    return Err(Error::Hole("disk union is empty".into()));
                }
                ds.iter().any(|d| d.inscribed_radius_about_origin() >= 2.0)
            }
            HoleShape::Rect { min, max } => {
                if min[0] >= max[0] || min[1] >= max[1] {
                    return Err(Error::Hole(format!(
                        "degenerate rectangle corners {min:?}, {max:?}"
                    )));
                }
                min[0] <= -2.0 && min[1] <= -2.0 && max[0] >= 2.0 && max[1] >= 2.0
            }
        };
        if !contains_b2 {
            return Err(Error::Hole(
                "hole must contain the disk of radius 2 about the origin".into(),
            ));
        }
        let r = self.bounding_radius();
        if !r.is_finite() {
            return Err(Error::Hole("hole bounding radius is not finite".into()));
        }
        Ok(())
    }
}

/// Cell-center membership mask: `in_hole` and its complement, the exterior.
#[derive(Clone, Debug)]
pub struct DomainMask {
    grid: Grid2D,
    in_hole: Vec<bool>,
    hole_cells: usize,
    bounding_radius: f64,
}

/// Rasterize a validated hole on a grid.
pub fn build_domain(grid: &Grid2D, hole: &HoleShape) -> Result<DomainMask> {
    hole.validate()?;
    let r = hole.bounding_radius();
    if grid.half_width() < 4.0 * r {
        return Err(Error::Grid(format!(
            "grid half_width {} must be at least 4x the hole bounding radius {r}",
            grid.half_width()
        )));
    }
    let n = grid.n();
    let mut in_hole = vec![false; grid.cell_count()];
    let mut hole_cells = 0usize;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            if hole.contains(grid.coord(ix), y) {
                in_hole[iy * n + ix] = true;
                hole_cells += 1;
            }
        }
    }
    let mask = DomainMask { grid: *grid, in_hole, hole_cells, bounding_radius: r };
    // cell centers inside B_2 must have rasterized as hole
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            if x * x + y * y < 4.0 && !mask.is_hole(ix, iy) {
                return Err(Error::Hole(format!(
                    "cell center ({x}, {y}) lies in B_2 but not in the hole"
                )));
            }
        }
    }
    // every boundary cell of the grid is exterior
    for i in 0..n {
        if mask.is_hole(i, 0) || mask.is_hole(i, n - 1) || mask.is_hole(0, i) || mask.is_hole(n - 1, i) {
            return Err(Error::Hole("hole reaches the grid boundary ring".into()));
        }
    }
    Ok(mask)
}

impl DomainMask {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn is_hole(&self, ix: usize, iy: usize) -> bool {
        self.in_hole[iy * self.grid.n() + ix]
    }

    pub fn flags(&self) -> &[bool] {
        &self.in_hole
    }

    pub fn hole_cell_count(&self) -> usize {
        self.hole_cells
    }

    /// Rasterized hole area, `cells * h^2`.
    pub fn hole_area(&self) -> f64 {
        self.hole_cells as f64 * self.grid.cell_area()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Zero the field on hole cells.
    pub fn apply(&self, field: &mut crate::grid::Field2D) {
        assert_eq!(field.grid(), self.grid, "mask/field grid mismatch");
        let n = self.grid.n();
        let flags = &self.in_hole;
        let data = field.as_mut_slice();
        crate::exec::for_each_row_mut(data, n, |iy, row| {
            let frow = &flags[iy * n..(iy + 1) * n];
            for (v, &h) in row.iter_mut().zip(frow) {
                if h {
                    *v = 0.0;
                }
            }
        });
    }
}
