//! Standalone SVG plots of boundary loci in the hλ plane.

use std::fmt::Write as _;

use stiffode::ComplexNumber as Complex64;

pub const MIN_PIXELS: u32 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub width_px: u32,
    pub height_px: u32,
    /// Shade the exterior of the locus (the BDF stable region) instead of
    /// the interior.
    pub shade_exterior: bool,
    /// Dashed vertical line, used for the stiff-stability abscissa.
    pub dashed_vertical_at: Option<f64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlotError {
    #[error("degenerate plot range [{0}, {1}]")]
    DegenerateRange(f64, f64),
    #[error("plot dimensions must be at least {MIN_PIXELS}px, got {0}x{1}")]
    TooSmall(u32, u32),
    #[error("locus has fewer than two finite points")]
    EmptyLocus,
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), PlotError> {
        for (lo, hi) in [self.x_range, self.y_range] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(PlotError::DegenerateRange(lo, hi));
            }
        }
        if self.width_px < MIN_PIXELS || self.height_px < MIN_PIXELS {
            return Err(PlotError::TooSmall(self.width_px, self.height_px));
        }
        Ok(())
    }

    /// Bounding box of the finite locus points and the origin, padded by 10%
    /// and widened to a 1:1 aspect ratio for the given pixel size.
    pub fn fit(
        points: &[Complex64],
        width_px: u32,
        height_px: u32,
        extra_x: Option<f64>,
    ) -> Result<Self, PlotError> {
        let finite: Vec<&Complex64> = points
            .iter()
            .filter(|z| z.re.is_finite() && z.im.is_finite())
            .collect();
        if finite.len() < 2 {
            return Err(PlotError::EmptyLocus);
        }
        let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for z in finite {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        if let Some(x) = extra_x {
            x0 = x0.min(x);
            x1 = x1.max(x);
        }
        let pad = 0.1 * (x1 - x0).max(y1 - y0).max(1e-9);
        let (mut x0, mut x1, mut y0, mut y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
        let aspect = f64::from(width_px) / f64::from(height_px);
        let (w, h) = (x1 - x0, y1 - y0);
        if w / h < aspect {
            let grow = (h * aspect - w) / 2.0;
            x0 -= grow;
            x1 += grow;
        } else {
            let grow = (w / aspect - h) / 2.0;
            y0 -= grow;
            y1 += grow;
        }
        Ok(PlotSpec {
            x_range: (x0, x1),
            y_range: (y0, y1),
            width_px,
            height_px,
            shade_exterior: true,
            dashed_vertical_at: None,
        })
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        ((x - lo) / (hi - lo) * f64::from(self.width_px)).clamp(-1e6, 1e6)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        ((hi - y) / (hi - lo) * f64::from(self.height_px)).clamp(-1e6, 1e6)
    }
}

/// Round step near `span / target`, from the 1-2-5 sequence.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(range: (f64, f64)) -> Vec<f64> {
    let step = tick_step(range.1 - range.0, 8.0);
    let first = (range.0 / step).ceil() as i64;
    let last = (range.1 / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a closed locus. Non-finite points are skipped.
pub fn render_locus(
    spec: &PlotSpec,
    locus: &[Complex64],
    title: &str,
    shade: bool,
) -> Result<String, PlotError> {
    spec.validate()?;
    let pts: Vec<(f64, f64)> = locus
        .iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .map(|z| (spec.px(z.re), spec.py(z.im)))
        .collect();
    if pts.len() < 2 {
        return Err(PlotError::EmptyLocus);
    }
    let (w, h) = (spec.width_px, spec.height_px);
    let mut path = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{x:.2},{y:.2} ");
    }
    path.push('Z');

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "  <title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        r#"  <rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    if shade {
        let region = if spec.shade_exterior {
            format!("M0,0 L{w},0 L{w},{h} L0,{h} Z {path}")
        } else {
            path.clone()
        };
        let _ = writeln!(
            s,
            r##"  <path class="stable-region" fill="#bcd7f0" fill-rule="evenodd" stroke="none" d="{region}"/>"##
        );
    }

    let _ = writeln!(
        s,
        r##"  <g class="axes" stroke="#444" stroke-width="1" font-family="sans-serif" font-size="11" fill="#222">"##
    );
    let ax_y = spec.py(0.0).clamp(0.0, f64::from(h));
    let ax_x = spec.px(0.0).clamp(0.0, f64::from(w));
    let _ = writeln!(
        s,
        r#"    <line x1="0" y1="{ax_y:.2}" x2="{w}" y2="{ax_y:.2}"/>"#
    );
    let _ = writeln!(
        s,
        r#"    <line x1="{ax_x:.2}" y1="0" x2="{ax_x:.2}" y2="{h}"/>"#
    );
    for t in ticks(spec.x_range) {
        let x = spec.px(t);
        let _ = writeln!(
            s,
            r#"    <line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none">{}</text>"#,
            ax_y - 4.0,
            ax_y + 4.0,
            ax_y + 16.0,
            label(t)
        );
    }
    for t in ticks(spec.y_range) {
        if t == 0.0 {
            continue;
        }
        let y = spec.py(t);
        let _ = writeln!(
            s,
            r#"    <line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/><text x="{:.2}" y="{:.2}" text-anchor="start" stroke="none">{}</text>"#,
            ax_x - 4.0,
            ax_x + 4.0,
            ax_x + 6.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(
        s,
        r##"  <path class="locus" fill="none" stroke="#1f4e79" stroke-width="1.5" d="{path}"/>"##
    );
    if let Some(d) = spec.dashed_vertical_at {
        let x = spec.px(d);
        let _ = writeln!(
            s,
            r##"  <line class="delta" data-re="{}" x1="{x:.2}" y1="0" x2="{x:.2}" y2="{h}" stroke="#b22222" stroke-width="1.2" stroke-dasharray="6 4"/>"##,
            label(d)
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
