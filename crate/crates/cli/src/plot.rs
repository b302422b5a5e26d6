use plotters::prelude::*;

const SIZE: (u32, u32) = (800, 500);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Overlaid step histograms of several samples (shared bins).
pub fn histogram_svg(title: &str, x_label: &str, series: &[(String, Vec<f64>)], bins: usize) -> Result<String, String> {
    let (lo, hi) = finite_range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let width = (hi - lo) / bins as f64;
    let counts: Vec<Vec<f64>> = series
        .iter()
        .map(|(_, v)| {
            let mut c = vec![0.0; bins];
            let finite = v.iter().filter(|x| x.is_finite()).count().max(1) as f64;
            for x in v.iter().filter(|x| x.is_finite()) {
                let i = (((x - lo) / width) as usize).min(bins - 1);
                c[i] += 1.0 / finite;
            }
            c
        })
        .collect();
    let top = counts.iter().flatten().copied().fold(0.0, f64::max).max(1e-12) * 1.1;

    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(lo..hi, 0.0..top)
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc("fraction of paths")
            .draw()
            .map_err(|e| e.to_string())?;
        for (k, ((label, _), c)) in series.iter().zip(&counts).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut pts = Vec::with_capacity(2 * bins + 2);
            pts.push((lo, 0.0));
            for (i, &h) in c.iter().enumerate() {
                let x0 = lo + i as f64 * width;
                pts.push((x0, h));
                pts.push((x0 + width, h));
            }
            pts.push((hi, 0.0));
            chart
                .draw_series(LineSeries::new(pts, color.stroke_width(2)))
                .map_err(|e| e.to_string())?
                .label(label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| e.to_string())?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(out)
}

/// Line chart with a log2 x axis (truncation levels).
pub fn levels_svg(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<String, String> {
    let xs = series.iter().flat_map(|(_, v)| v.iter().map(|p| p.0.log2()));
    let (x_lo, x_hi) = finite_range(xs);
    let (_, y_hi) = finite_range(series.iter().flat_map(|(_, v)| v.iter().map(|p| p.1)));
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x_lo..x_hi, 0.0..y_hi.max(1e-3))
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc("log2 n")
            .y_desc(y_label)
            .draw()
            .map_err(|e| e.to_string())?;
        for (k, (label, pts)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.log2(), y)).collect();
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(|e| e.to_string())?
                .label(label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            chart
                .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
                .map_err(|e| e.to_string())?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| e.to_string())?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(out)
}
