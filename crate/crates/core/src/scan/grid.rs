use crate::error::Result;
use crate::families::{region_contains, EllipsoidType};
use crate::geometry::ShapeCoords;
use crate::potential::PotentialConstants;

use super::config::{GridSpec, ScanConfig, Window};

/// Probes per line used to find the part of the line inside the region.
const EXTENT_PROBES: usize = 256;
const EXTENT_BISECTIONS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    /// Line number and position on the line; neighbours differ by one in
    /// exactly one of them.
    pub line: usize,
    pub index: usize,
}

/// Membership in the existence region; points outside the shape triangle are
/// outside every region.
pub fn in_region(kind: EllipsoidType, x: f64, y: f64, k: &PotentialConstants) -> bool {
    ShapeCoords::new(x, y)
        .and_then(|s| s.to_semiaxes())
        .and_then(|b| region_contains(kind, &b, k))
        .unwrap_or(false)
}

/// `[y_lo, y_hi]` spanned by the region on the vertical line `x`, clipped to
/// the window, or `None` when no probe is inside.
pub fn line_extent(kind: EllipsoidType, x: f64, w: &Window, k: &PotentialConstants) -> Option<(f64, f64)> {
    let lo = w.y_min.max(0.0);
    let hi = w.y_max.min(x);
    if hi <= lo {
        return None;
    }
    let h = (hi - lo) / EXTENT_PROBES as f64;
    let probe = |i: usize| lo + (i as f64 + 0.5) * h;
    let inside: Vec<bool> = (0..EXTENT_PROBES).map(|i| in_region(kind, x, probe(i), k)).collect();
    let first = inside.iter().position(|&v| v)?;
    let last = inside.iter().rposition(|&v| v)?;
    let edge = |mut a: f64, mut b: f64| {
        // `a` inside, `b` outside.
        for _ in 0..EXTENT_BISECTIONS {
            let m = 0.5 * (a + b);
            if in_region(kind, x, m, k) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let y_lo = if first == 0 { lo } else { edge(probe(first), probe(first - 1)) };
    let y_hi = if last + 1 == EXTENT_PROBES { hi } else { edge(probe(last), probe(last + 1)) };
    Some((y_lo, y_hi))
}

/// Grid points in line-major order, sorted by `(x, y)`.
pub fn grid_points(cfg: &ScanConfig) -> Result<Vec<GridPoint>> {
    let k = cfg.constants()?;
    let w = &cfg.window;
    match &cfg.grid {
        GridSpec::Points(list) => {
            let mut pts: Vec<(f64, f64)> = list
                .iter()
                .copied()
                .filter(|&(x, y)| x >= w.x_min && x <= w.x_max && y >= w.y_min && y <= w.y_max)
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            Ok(pts
                .into_iter()
                .enumerate()
                .map(|(i, (x, y))| GridPoint { x, y, line: i, index: 0 })
                .collect())
        }
        GridSpec::Lines {
            dx,
            min_points,
            max_points,
        } => {
            let first = (w.x_min / dx).floor() as i64 + 1;
            let last = ((w.x_max.min(1.0)) / dx).ceil() as i64 - 1;
            let lines: Vec<f64> = (first..=last)
                .map(|i| i as f64 * dx)
                .filter(|&x| x > w.x_min && x < w.x_max && x < 1.0)
                .collect();
            let extents = super::par_map(cfg.threads, &lines, |&x| line_extent(cfg.kind, x, w, &k));
            let mut out = Vec::new();
            for (line, (&x, ext)) in lines.iter().zip(extents).enumerate() {
                let Some((lo, hi)) = ext else { continue };
                let n = (((hi - lo) / dx).ceil() as usize).clamp(*min_points, *max_points);
                let step = (hi - lo) / n as f64;
                out.extend((0..n).map(|index| GridPoint {
                    x,
                    y: lo + (index as f64 + 0.5) * step,
                    line,
                    index,
                }));
            }
            Ok(out)
        }
    }
}
