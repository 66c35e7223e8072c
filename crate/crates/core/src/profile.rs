//! Refractive-index profiles: 2D sampled maps for waveguides and radial
//! power-law profiles for circular fibers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::grid::Grid;
use crate::{Error, Result};

/// Physical bounds on a plausible refractive index sample.
pub const INDEX_MIN: f64 = 1.0;
pub const INDEX_MAX: f64 = 3.0;

/// 2D sampled refractive-index map at a reference wavelength.
///
/// Row `i` of the value array corresponds to `y = y0 + i·dy`, column `j` to
/// `x = x0 + j·dx`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct IndexProfile {
    grid: Grid,
    values: Array2<f64>,
    wavelength_ref_um: f64,
}

impl IndexProfile {
    /// Builds a profile, validating grid/value invariants.
    pub fn new(grid: Grid, values: Array2<f64>, wavelength_ref_um: f64) -> Result<Self> {
        if values.nrows() != grid.ny || values.ncols() != grid.nx {
            return Err(Error::invalid(format!(
                "value array is {}x{} but the grid is {}x{} (rows x cols)",
                values.nrows(),
                values.ncols(),
                grid.ny,
                grid.nx
            )));
        }
        if !(wavelength_ref_um > 0.0) || !wavelength_ref_um.is_finite() {
            return Err(Error::invalid("reference wavelength must be positive"));
        }
        for (idx, &v) in values.indexed_iter() {
            if !v.is_finite() || !(INDEX_MIN..=INDEX_MAX).contains(&v) {
                return Err(Error::invalid(format!(
                    "index {v} at row {}, col {} outside [{INDEX_MIN}, {INDEX_MAX}]",
                    idx.0, idx.1
                )));
            }
        }
        Ok(IndexProfile { grid, values, wavelength_ref_um })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn wavelength_ref_um(&self) -> f64 {
        self.wavelength_ref_um
    }

    pub fn min_index(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_index(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index value at the sample nearest the profile maximum.
    pub fn peak_position(&self) -> (f64, f64) {
        let mut best = (0, 0);
        let mut max = f64::NEG_INFINITY;
        for ((i, j), &v) in self.values.indexed_iter() {
            if v > max {
                max = v;
                best = (i, j);
            }
        }
        (self.grid.x(best.1), self.grid.y(best.0))
    }

    /// Cladding-index estimate: the largest sample on the window boundary.
    /// Any mode with an effective index above this value is bound.
    pub fn boundary_max(&self) -> f64 {
        let (ny, nx) = (self.grid.ny, self.grid.nx);
        let mut max = f64::NEG_INFINITY;
        for j in 0..nx {
            max = max.max(self.values[(0, j)]).max(self.values[(ny - 1, j)]);
        }
        for i in 0..ny {
            max = max.max(self.values[(i, 0)]).max(self.values[(i, nx - 1)]);
        }
        max
    }

    /// Index value at (x, y) by bilinear interpolation; the nearest edge
    /// sample is used outside the window.
    pub fn index_at(&self, x_um: f64, y_um: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x_um - g.x0) / g.dx).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((y_um - g.y0) / g.dy).clamp(0.0, (g.ny - 1) as f64);
        let j0 = (fx.floor() as usize).min(g.nx - 2).min(g.nx - 1);
        let i0 = (fy.floor() as usize).min(g.ny.saturating_sub(2));
        let j1 = (j0 + 1).min(g.nx - 1);
        let i1 = (i0 + 1).min(g.ny - 1);
        let tx = fx - j0 as f64;
        let ty = fy - i0 as f64;
        let v00 = self.values[(i0, j0)];
        let v01 = self.values[(i0, j1)];
        let v10 = self.values[(i1, j0)];
        let v11 = self.values[(i1, j1)];
        v00 * (1.0 - tx) * (1.0 - ty)
            + v01 * tx * (1.0 - ty)
            + v10 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Reads a profile from the canonical CSV format.
    ///
    /// Line 1 is `# x0,y0,dx,dy,wavelength_um`; every following line is one
    /// row of index values (row `i` is `y = y0 + i·dy`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from(reader: impl Read) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::Parse("empty profile file".into())),
        };
        let header = header.trim_end_matches('\r');
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("malformed header: expected leading '#'".into()))?;
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "malformed header: expected 5 comma-separated values \
                 (x0,y0,dx,dy,wavelength_um), got {}",
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 5];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f.parse::<f64>().map_err(|_| {
                Error::Parse(format!("malformed header: field {} ({f:?}) is not a number", k + 1))
            })?;
        }
        let [x0, y0, dx, dy, wavelength] = vals;

        let mut data: Vec<f64> = Vec::new();
        let mut ncols = 0usize;
        let mut nrows = 0usize;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let row: Vec<&str> = line.split(',').map(str::trim).collect();
            if nrows == 0 {
                ncols = row.len();
            } else if row.len() != ncols {
                return Err(Error::Parse(format!(
                    "non-rectangular grid: row {} has {} columns, expected {ncols}",
                    lineno + 1,
                    row.len()
                )));
            }
            for f in &row {
                let v = f.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: {f:?} is not a number", lineno + 1))
                })?;
                data.push(v);
            }
            nrows += 1;
        }
        if nrows == 0 {
            return Err(Error::Parse("profile has no data rows".into()));
        }
        let grid = Grid::new(x0, y0, dx, dy, ncols, nrows)?;
        let values = Array2::from_shape_vec((nrows, ncols), data)
            .map_err(|e| Error::Parse(format!("grid shape: {e}")))?;
        IndexProfile::new(grid, values, wavelength)
    }

    /// Writes the canonical CSV format. Values use the shortest decimal
    /// representation that round-trips, so save/load is bit-exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_to(BufWriter::new(file))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "# {},{},{},{},{}",
            self.grid.x0, self.grid.y0, self.grid.dx, self.grid.dy, self.wavelength_ref_um
        )?;
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
                first = false;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Shape parameters of the synthetic graded-index generator.
///
/// The index surplus is a product of a horizontal super-Gaussian (flat-topped,
/// order `horiz_order`) and a vertically skewed Gaussian peaking at the
/// requested offset, which mimics a triangle-like grading toward one side of
/// the core.
#[derive(Debug, Clone)]
pub struct GradingShape {
    /// Even exponent of the horizontal super-Gaussian.
    pub horiz_order: u32,
    /// Horizontal 1/e half-width as a fraction of the core width.
    pub horiz_width_frac: f64,
    /// Vertical 1/e widths as a fraction of the distance from peak to the
    /// respective core edge.
    pub vert_width_frac: f64,
}

impl Default for GradingShape {
    fn default() -> Self {
        GradingShape { horiz_order: 6, horiz_width_frac: 0.42, vert_width_frac: 0.55 }
    }
}

/// Parameters of [`synth_gi_profile`].
#[derive(Debug, Clone)]
pub struct GiProfileSpec {
    pub core_width_um: f64,
    pub core_height_um: f64,
    pub n_clad: f64,
    pub delta_n: f64,
    /// Location of the index maximum relative to the core center.
    pub peak_offset_um: (f64, f64),
    pub shape: GradingShape,
    pub step_um: f64,
    /// Cladding margin on every side of the core; at least 10 µm.
    pub margin_um: f64,
    pub wavelength_ref_um: f64,
}

impl Default for GiProfileSpec {
    fn default() -> Self {
        GiProfileSpec {
            core_width_um: 35.0,
            core_height_um: 35.0,
            n_clad: 1.51,
            delta_n: 0.01,
            peak_offset_um: (0.0, 10.0),
            shape: GradingShape::default(),
            step_um: 0.25,
            margin_um: 15.0,
            wavelength_ref_um: 0.85,
        }
    }
}

/// Generates a synthetic graded-index profile with a configurable peak
/// position: `n = n_clad + Δn·g(x, y)` with `g` normalized to 1 at its
/// maximum. The window is the core plus `margin_um` of cladding per side.
pub fn synth_gi_profile(spec: &GiProfileSpec) -> Result<IndexProfile> {
    let GiProfileSpec {
        core_width_um: w,
        core_height_um: h,
        n_clad,
        delta_n,
        peak_offset_um: (px, py),
        ref shape,
        step_um,
        margin_um,
        wavelength_ref_um,
    } = *spec;

    if delta_n < 0.0 {
        return Err(Error::invalid(format!("delta_n must be non-negative, got {delta_n}")));
    }
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::invalid("core size must be positive"));
    }
    if margin_um < 10.0 {
        return Err(Error::invalid(format!(
            "cladding margin must be at least 10 µm, got {margin_um}"
        )));
    }
    if px.abs() > w / 2.0 || py.abs() > h / 2.0 {
        return Err(Error::invalid(format!(
            "peak offset ({px}, {py}) lies outside the {w}x{h} µm core"
        )));
    }
    if shape.horiz_order == 0 || shape.horiz_order % 2 != 0 {
        return Err(Error::invalid("horizontal super-Gaussian order must be even and positive"));
    }

    let grid = Grid::centered(w / 2.0 + margin_um, h / 2.0 + margin_um, step_um)?;
    let cx = (grid.nx - 1) / 2;
    let cy = (grid.ny - 1) / 2;

    let rx = shape.horiz_width_frac * w;
    // Vertical widths guard against a peak sitting on the core edge.
    let s_up = (shape.vert_width_frac * (h / 2.0 - py)).max(1.0);
    let s_dn = (shape.vert_width_frac * (py + h / 2.0)).max(1.0);
    let order = shape.horiz_order as i32;

    let mut g = Array2::<f64>::zeros((grid.ny, grid.nx));
    for i in 0..grid.ny {
        let y = (i as f64 - cy as f64) * grid.dy;
        let v = y - py;
        let s = if v >= 0.0 { s_up } else { s_dn };
        let vert = (-(v / s) * (v / s)).exp();
        for j in 0..grid.nx {
            // (j - cx)·dx is bit-antisymmetric about the center column, so a
            // centered peak yields a bit-exact mirror-symmetric profile.
            let x = (j as f64 - cx as f64) * grid.dx;
            let u = x - px;
            let horiz = (-(u / rx).powi(order)).exp();
            g[(i, j)] = horiz * vert;
        }
    }

    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut values = Array2::<f64>::zeros((grid.ny, grid.nx));
    if delta_n > 0.0 && gmax > 0.0 {
        for (dst, &gv) in values.iter_mut().zip(g.iter()) {
            *dst = n_clad + delta_n * (gv / gmax);
        }
    } else {
        values.fill(n_clad);
    }

    IndexProfile::new(grid, values, wavelength_ref_um)
}

/// Radial grading law of a circular fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    /// Power-law core: n(r)² = n1² − NA²·(r/a)^α.
    Power(f64),
    /// Step-index limit (α → ∞).
    Step,
}

/// Circular multimode-fiber description.
#[derive(Debug, Clone)]
pub struct RadialFiberSpec {
    pub core_radius_um: f64,
    pub na: f64,
    pub n_clad: f64,
    pub grading: Grading,
}

impl RadialFiberSpec {
    pub fn new(core_radius_um: f64, na: f64, n_clad: f64, grading: Grading) -> Result<Self> {
        if !(core_radius_um > 0.0) {
            return Err(Error::invalid("core radius must be positive"));
        }
        if !(na > 0.0 && na < 1.0) {
            return Err(Error::invalid(format!("NA must be in (0, 1), got {na}")));
        }
        if !(n_clad >= INDEX_MIN && n_clad <= INDEX_MAX) {
            return Err(Error::invalid("cladding index out of range"));
        }
        if let Grading::Power(alpha) = grading {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::invalid(format!(
                    "grading exponent must be positive and finite, got {alpha} \
                     (use the step variant for α = ∞)"
                )));
            }
        }
        Ok(RadialFiberSpec { core_radius_um, na, n_clad, grading })
    }

    /// Standard 50/125 µm graded-index multimode fiber (a = 25 µm, NA = 0.2,
    /// α = 2) with a silica-like cladding index.
    pub fn mmf_50_125() -> Self {
        RadialFiberSpec::new(25.0, 0.2, 1.4525, Grading::Power(2.0)).unwrap()
    }

    /// Peak core index n1 = sqrt(n_clad² + NA²).
    pub fn core_index(&self) -> f64 {
        (self.n_clad * self.n_clad + self.na * self.na).sqrt()
    }

    /// V-number at the given wavelength.
    pub fn v_number(&self, wavelength_um: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.core_radius_um * self.na / wavelength_um
    }

    /// Refractive index at radius `r` (µm). Total over r ≥ 0; negative r is
    /// treated by symmetry.
    pub fn index_at(&self, r_um: f64) -> f64 {
        let r = r_um.abs();
        let a = self.core_radius_um;
        if r >= a {
            return self.n_clad;
        }
        match self.grading {
            Grading::Step => self.core_index(),
            Grading::Power(alpha) => {
                let n1sq = self.n_clad * self.n_clad + self.na * self.na;
                (n1sq - self.na * self.na * (r / a).powf(alpha)).sqrt()
            }
        }
    }
}
