use std::fmt::Write as _;
use std::io::Write;

use crate::classify::ClassTag;
use crate::error::{Error, Result};

use super::record::{ScanKind, ScanRecord};

const SIZE: f64 = 800.0;

fn colour(kind: ScanKind, r: &ScanRecord) -> &'static str {
    if !r.in_region {
        return "#ffffff";
    }
    match kind {
        ScanKind::Regions => "#7a9cc6",
        ScanKind::Ellipticity => match r.elliptic {
            Some(true) => "#2b5d8a",
            Some(false) => "#d9d9d9",
            None => "#c0392b",
        },
        ScanKind::Classify => match r.class {
            Some(ClassTag::Convex) => "#1b7837",
            Some(ClassTag::QuasiConvex) => "#5aae61",
            Some(ClassTag::DirectionallyQuasiConvex) => "#2b5d8a",
            Some(ClassTag::Indeterminate) => "#e08214",
            Some(ClassTag::Resonant(_)) => "#c0392b",
            Some(ClassTag::NotElliptic) => "#d9d9d9",
            None => "#000000",
        },
    }
}

/// Raster of the scanned points over the unit square of shape coordinates,
/// `x = b2/b1` to the right and `y = b3/b1` up.
pub fn write_svg<W: Write>(records: &[ScanRecord], kind: ScanKind, mut out: W) -> Result<()> {
    let mut xs: Vec<f64> = records.iter().map(|r| r.x).collect();
    xs.dedup();
    let dx = xs.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(0.01, f64::min);
    let w = (dx * SIZE).max(1.0);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##).unwrap();
    writeln!(s, r##"<path d="M0 {SIZE} L{SIZE} 0 L{SIZE} {SIZE} Z" fill="none" stroke="#888888"/>"##).unwrap();
    for r in records.iter().filter(|r| r.in_region) {
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{w:.2}" fill="{}"/>"#,
            r.x * SIZE - w / 2.0,
            (1.0 - r.y) * SIZE - w / 2.0,
            colour(kind, r)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    out.write_all(s.as_bytes()).map_err(|e| Error::Io(e.to_string()))
}
