use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::data::EnsembleForecast;
use crate::error::ensure_dim;
use crate::{Error, Result, HOURS};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN: f64 = 50.0;
/// Upper limit on the number of scenario trajectories drawn.
pub const MAX_DRAWN_SCENARIOS: usize = 200;
const PALETTE: [&str; 6] = ["#e41a1c", "#ff7f00", "#4daf4a", "#984ea3", "#a65628", "#f781bf"];

/// Per-hour range (max minus min) of an `S × D` scenario matrix.
pub fn scenario_range(scenarios: ArrayView2<f64>) -> Vec<f64> {
    scenarios
        .columns()
        .into_iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if c.is_empty() {
                0.0
            } else {
                hi - lo
            }
        })
        .collect()
}

/// SVG fan chart of one day: scenarios in colour, ensemble members in black
/// and the realised price in blue.
pub fn render_svg(scenarios: ArrayView2<f64>, forecast: &EnsembleForecast, actual: &[f64]) -> Result<String> {
    ensure_dim(HOURS, actual.len())?;
    if scenarios.nrows() > 0 {
        ensure_dim(HOURS, scenarios.ncols())?;
    }
    let drawn = scenarios.nrows().min(MAX_DRAWN_SCENARIOS);
    let shown = scenarios.slice(ndarray::s![..drawn, ..]);
    let all = shown.iter().chain(forecast.values.iter()).chain(actual.iter());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("plot input".into()));
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |h: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * h as f64 / (HOURS - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let path = |vals: &mut dyn Iterator<Item = f64>| {
        let mut p = String::new();
        for (h, v) in vals.enumerate() {
            let _ = write!(p, "{}{:.2},{:.2}", if h == 0 { "" } else { " " }, x(h), y(v));
        }
        p
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="25" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        forecast.day
    );
    // axes with a few labelled ticks
    let _ = writeln!(
        s,
        r#"<path d="M{m:.2},{t:.2} L{m:.2},{b:.2} L{r:.2},{b:.2}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.1}</text>"#,
            MARGIN - 5.0,
            y(v) + 3.0
        );
    }
    for h in (0..HOURS).step_by(4) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            x(h),
            HEIGHT - MARGIN + 15.0,
            h + 1
        );
    }
    for (i, row) in shown.rows().into_iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.35" stroke-width="1"/>"#,
            path(&mut row.iter().copied()),
            PALETTE[i % PALETTE.len()]
        );
    }
    for col in forecast.values.columns() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            path(&mut col.iter().copied())
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="blue" stroke-width="2.5"/>"#,
        path(&mut actual.iter().copied())
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn plot_scenarios(
    scenarios: ArrayView2<f64>,
    forecast: &EnsembleForecast,
    actual: &[f64],
    out: &Path,
) -> Result<()> {
    let svg = render_svg(scenarios, forecast, actual)?;
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}
