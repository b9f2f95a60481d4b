//! Coverage-area integrals of the user density.

use std::f64::consts::PI;

use super::{GeoPoint, TabulatedPdf};

/// Grid resolution used for numerical integration of tabulated densities.
pub const GRID_STEP_M: f64 = 5.0;

/// Horizontal disk in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    pub fn around(p: &GeoPoint, r: f64) -> Self {
        Disk { cx: p.x, cy: p.y, r }
    }

    pub fn area(&self) -> f64 {
        PI * self.r * self.r
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        dx * dx + dy * dy <= self.r * self.r
    }

    fn center_distance(&self, other: &Disk) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }

    pub fn overlaps(&self, other: &Disk) -> bool {
        self.center_distance(other) < self.r + other.r
    }
}

/// Area of the intersection of two disks (closed form).
pub fn lens_area(a: &Disk, b: &Disk) -> f64 {
    let d = a.center_distance(b);
    let (r1, r2) = (a.r, b.r);
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.max(0.0).sqrt()
}

/// Midpoint-rule integral of a tabulated density over `region ∩ macro` minus `excluded` disks.
pub fn integrate_tabulated(
    pdf: &TabulatedPdf,
    slot: usize,
    region: &Disk,
    macro_disk: &Disk,
    excluded: &[Disk],
) -> f64 {
    let h = GRID_STEP_M;
    let x_lo = region.cx - region.r;
    let y_lo = region.cy - region.r;
    let n = ((2.0 * region.r) / h).ceil() as usize;
    let mut acc = 0.0;
    for ix in 0..n {
        let x = x_lo + (ix as f64 + 0.5) * h;
        for iy in 0..n {
            let y = y_lo + (iy as f64 + 0.5) * h;
            if !region.contains(x, y) || !macro_disk.contains(x, y) {
                continue;
            }
            if excluded.iter().any(|d| d.contains(x, y)) {
                continue;
            }
            acc += pdf.density(slot, x, y) * h * h;
        }
    }
    acc
}
