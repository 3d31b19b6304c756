//! Single-point metric evaluation for `cmap eval-metric`.

use std::str::FromStr;

use cmap_core::cmap::{DeformedCmap, Rearrangement};
use cmap_core::geometry::ChartPoint;
use cmap_core::Error;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Closed-form expression.
    Fs,
    /// Assembled from the Griffiths Hermitian form on the fibres.
    Assembled,
    /// Twist of the elementary deformation.
    Twist,
}

impl FromStr for Route {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fs" => Ok(Route::Fs),
            "assembled" => Ok(Route::Assembled),
            "twist" => Ok(Route::Twist),
            other => Err(CliError::Config(format!("unknown route `{other}` (expected fs, assembled or twist)"))),
        }
    }
}

/// Parses a comma- or whitespace-separated list of reals.
pub fn parse_point(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("point component `{s}` is not a number"))))
        .collect()
}

/// The metric matrix at `point` in coordinates `(X, r, w, t)`.
pub fn evaluate(n: usize, k: u32, point: &[f64], route: Route) -> Result<Vec<Vec<f64>>, CliError> {
    let cmap = DeformedCmap::new(n, k).map_err(|e| CliError::Config(e.to_string()))?;
    if point.len() != cmap.dim() {
        return Err(CliError::Config(format!("expected {} coordinates for n = {n}, got {}", cmap.dim(), point.len())));
    }
    let p = ChartPoint(point.to_vec());
    let classify = |e: Error| match e {
        Error::Domain(m) => CliError::Domain(m),
        other => CliError::Domain(other.to_string()),
    };
    cmap.check_point(&p).map_err(classify)?;
    let g = match route {
        Route::Fs => cmap.metric_fs_at(&p),
        Route::Assembled => cmap.metric_assembled(&p, Rearrangement::Griffiths),
        Route::Twist => cmap.metric_via_twist(&p),
    }
    .map_err(classify)?;
    Ok((0..g.nrows()).map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect()).collect())
}

/// Formats with 15 significant digits, dropping trailing zeros.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (14 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.14e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent present");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}

pub fn render(matrix: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|v| format_significant(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(1.0), "1");
        assert_eq!(format_significant(4.0), "4");
        assert_eq!(format_significant(0.1 + 0.2), "0.3");
        assert_eq!(format_significant(-2.0 / 3.0), "-0.666666666666667");
        assert_eq!(format_significant(123456.789), "123456.789");
        assert_eq!(format_significant(1.5e-9), "1.5e-9");
        assert_eq!(format_significant(-1e20), "-1e20");
    }

    #[test]
    fn unit_point() {
        let g = evaluate(0, 0, &[1.0, 0.0, 0.0, 0.0], Route::Fs).unwrap();
        assert_eq!(render(&g), "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 4\n");
    }

    #[test]
    fn routes_print_alike() {
        let p = [0.2, -0.1, 2.1, 0.3, 0.4, -0.5, 0.6, 1.0];
        let fs = evaluate(1, 1, &p, Route::Fs).unwrap();
        for route in [Route::Assembled, Route::Twist] {
            let g = evaluate(1, 1, &p, route).unwrap();
            for (a, b) in g.iter().flatten().zip(fs.iter().flatten()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(evaluate(0, 1, &[0.1, 0.0, 0.0, 0.0], Route::Fs), Err(CliError::Domain(_))));
        assert!(matches!(evaluate(0, 0, &[1.0, 0.0], Route::Fs), Err(CliError::Config(_))));
        assert!(parse_point("1, 2 3").unwrap() == vec![1.0, 2.0, 3.0]);
    }
}
