use std::path::PathBuf;
use std::str::FromStr;

use crate::classify::{ClassifyOptions, DEFAULT_CLASSIFY_TOL, DEFAULT_N_THETA};
use crate::error::{Error, Result};
use crate::families::{Branch, EllipsoidType};
use crate::normalform::DEFAULT_RES_TOL;
use crate::potential::PotentialConstants;
use crate::reduced::{EllipticityOptions, ELLIPTIC_TOL};

/// Spacing of the vertical grid lines used when none is configured.
pub const DEFAULT_DX: f64 = 0.0025;

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// Vertical lines `x = k·dx` through the window; on each line the points
    /// are spread uniformly over the part of the line inside the region,
    /// `ceil(extent/dx)` of them clamped to `[min_points, max_points]`.
    Lines {
        dx: f64,
        min_points: usize,
        max_points: usize,
    },
    Points(Vec<(f64, f64)>),
}

/// Rectangle of shape coordinates `(x, y) = (b2/b1, b3/b1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub kind: EllipsoidType,
    pub branch: Branch,
    pub grid: GridSpec,
    pub window: Window,
    pub tol_ell: f64,
    /// Normal-form resonance tolerance, relative to `|Ω|`.
    pub res_tol: f64,
    pub classify_tol: f64,
    pub n_theta: usize,
    /// Points whose nearest harmonic has `|Ω·ν|/|Ω|` below this are flagged
    /// `near-resonant`.
    pub near_res_tol: f64,
    pub max_order: u32,
    /// Bisection steps used to place resonance-curve points; 0 reports the
    /// midpoint of the bracketing pair.
    pub refine_steps: u32,
    pub g: f64,
    pub threads: usize,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl ScanConfig {
    pub fn new(kind: EllipsoidType) -> Self {
        ScanConfig {
            kind,
            branch: Branch::PlusMinus,
            grid: GridSpec::Lines {
                dx: DEFAULT_DX,
                min_points: 20,
                max_points: 100,
            },
            window: Window::default(),
            tol_ell: ELLIPTIC_TOL,
            res_tol: DEFAULT_RES_TOL,
            classify_tol: DEFAULT_CLASSIFY_TOL,
            n_theta: DEFAULT_N_THETA,
            near_res_tol: 1e-4,
            max_order: 4,
            refine_steps: 12,
            g: 1.0,
            threads: 1,
            csv: None,
            svg: None,
        }
    }

    /// Reads `key = value` lines; `#` starts a comment. `type` is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let kind = pairs
            .iter()
            .find(|(k, _)| k == "type")
            .ok_or_else(|| Error::Config("missing `type`".into()))?
            .1
            .parse()?;
        let mut cfg = ScanConfig::new(kind);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        match key {
            "type" => self.kind = value.parse()?,
            "branch" => self.branch = value.parse()?,
            "dx" | "points_min" | "points_max" => {
                let (mut dx, mut lo, mut hi) = match self.grid {
                    GridSpec::Lines {
                        dx,
                        min_points,
                        max_points,
                    } => (dx, min_points, max_points),
                    GridSpec::Points(_) => (DEFAULT_DX, 20, 100),
                };
                match key {
                    "dx" => dx = num(key, value)?,
                    "points_min" => lo = num(key, value)?,
                    _ => hi = num(key, value)?,
                }
                self.grid = GridSpec::Lines {
                    dx,
                    min_points: lo,
                    max_points: hi,
                };
            }
            "points" => self.grid = GridSpec::Points(parse_points(value)?),
            "x_min" => self.window.x_min = num(key, value)?,
            "x_max" => self.window.x_max = num(key, value)?,
            "y_min" => self.window.y_min = num(key, value)?,
            "y_max" => self.window.y_max = num(key, value)?,
            "tol_ell" => self.tol_ell = num(key, value)?,
            "res_tol" => self.res_tol = num(key, value)?,
            "classify_tol" => self.classify_tol = num(key, value)?,
            "n_theta" => self.n_theta = num(key, value)?,
            "near_res_tol" => self.near_res_tol = num(key, value)?,
            "max_order" => self.max_order = num(key, value)?,
            "refine_steps" => self.refine_steps = num(key, value)?,
            "g" => self.g = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "csv" => self.csv = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match &self.grid {
            GridSpec::Lines {
                dx,
                min_points,
                max_points,
            } => {
                if !(*dx > 0.0 && *dx < 1.0) {
                    return bad("dx must lie in (0, 1)");
                }
                if *min_points == 0 || min_points > max_points {
                    return bad("need 0 < points_min <= points_max");
                }
            }
            GridSpec::Points(p) if p.is_empty() => return bad("empty point list"),
            GridSpec::Points(_) => {}
        }
        let w = &self.window;
        if !(w.x_min < w.x_max && w.y_min < w.y_max) {
            return bad("empty window");
        }
        for (name, v) in [
            ("tol_ell", self.tol_ell),
            ("res_tol", self.res_tol),
            ("classify_tol", self.classify_tol),
            ("near_res_tol", self.near_res_tol),
            ("g", self.g),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if self.n_theta < 2 {
            return bad("n_theta must be at least 2");
        }
        if !(1..=4).contains(&self.max_order) {
            return bad("max_order must lie in 1..=4");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<PotentialConstants> {
        PotentialConstants::new(self.g)
    }

    pub fn ellipticity(&self) -> EllipticityOptions {
        EllipticityOptions { tol: self.tol_ell }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            tol: self.classify_tol,
            n_theta: self.n_theta,
        }
    }
}

/// `x:y` pairs separated by `;` or whitespace.
fn parse_points(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(|c: char| c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (x, y) = t
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("point `{t}` is not x:y")))?;
            let p = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("point `{t}` is not numeric")))
            };
            Ok((p(x)?, p(y)?))
        })
        .collect()
}
