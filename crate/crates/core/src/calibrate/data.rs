use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-track measurement statistics, widths and depths in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCase {
    pub id: String,
    /// W.
    pub power: f64,
    /// m/s.
    pub speed: f64,
    pub width_mean: f64,
    pub width_std: f64,
    pub depth_mean: f64,
    pub depth_std: f64,
    pub n_width: usize,
    /// Zero when the count was not reported.
    pub n_depth: usize,
}

impl ExperimentCase {
    /// Line energy P/V, J/m.
    pub fn energy(&self) -> f64 {
        self.power / self.speed
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.power > 0.0
            && self.speed > 0.0
            && self.width_std >= 0.0
            && self.depth_std >= 0.0
            && [self.width_mean, self.depth_mean, self.width_std, self.depth_std].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid experiment case {}", self.id)))
        }
    }
}

/// AFRL single tracks A1–A11: width from 50 locations, depth as the sum of
/// cross-section depth and height.
pub fn builtin_afrl() -> Vec<ExperimentCase> {
    const ROWS: [(&str, f64, f64, f64, f64, f64, f64); 11] = [
        ("A1", 300.0, 1230.0, 111.9, 10.9, 113.3, 13.4),
        ("A2", 300.0, 1230.0, 111.3, 12.1, 118.2, 19.9),
        ("A3", 290.0, 953.0, 125.5, 10.0, 140.0, 12.8),
        ("A4", 370.0, 1230.0, 118.9, 10.4, 142.1, 17.4),
        ("A5", 225.0, 1230.0, 99.9, 13.3, 85.3, 13.6),
        ("A6", 290.0, 1588.0, 100.1, 13.8, 89.3, 19.9),
        ("A7", 241.0, 990.0, 109.4, 10.5, 103.8, 13.2),
        ("A8", 349.0, 1430.0, 113.4, 11.3, 118.5, 18.2),
        ("A9", 300.0, 1230.0, 112.2, 11.8, 115.5, 30.6),
        ("A10", 349.0, 1058.0, 127.3, 9.4, 147.1, 19.4),
        ("A11", 241.0, 1529.0, 90.8, 13.4, 76.4, 22.1),
    ];
    ROWS.iter()
        .map(|&(id, p, v_mm, wm, ws, dm, ds)| ExperimentCase {
            id: id.to_string(),
            power: p,
            speed: v_mm * 1e-3,
            width_mean: wm,
            width_std: ws,
            depth_mean: dm,
            depth_std: ds,
            n_width: 50,
            n_depth: 0,
        })
        .collect()
}

const HEADER: &str = "id,power_W,speed_mm_s,width_mean_um,width_std_um,depth_mean_um,depth_std_um,n_width,n_depth";

pub fn cases_to_csv(cases: &[ExperimentCase]) -> String {
    let mut out = format!("{HEADER}\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.id,
            c.power,
            c.speed * 1e3,
            c.width_mean,
            c.width_std,
            c.depth_mean,
            c.depth_std,
            c.n_width,
            c.n_depth
        ));
    }
    out
}

pub fn cases_from_csv(text: &str) -> Result<Vec<ExperimentCase>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::InvalidInput(format!("experiment CSV must start with `{HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let c: Vec<&str> = line.split(',').map(str::trim).collect();
            if c.len() != 9 {
                return Err(Error::InvalidInput(format!("experiment CSV row {} has {} columns", n + 2, c.len())));
            }
            let f = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("row {}: {e}", n + 2)));
            let u = |s: &str| s.parse::<usize>().map_err(|e| Error::InvalidInput(format!("row {}: {e}", n + 2)));
            let case = ExperimentCase {
                id: c[0].to_string(),
                power: f(c[1])?,
                speed: f(c[2])? * 1e-3,
                width_mean: f(c[3])?,
                width_std: f(c[4])?,
                depth_mean: f(c[5])?,
                depth_std: f(c[6])?,
                n_width: u(c[7])?,
                n_depth: u(c[8])?,
            };
            case.validate()?;
            Ok(case)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let cases = builtin_afrl();
        assert_eq!(cases.len(), 11);
        let a1 = &cases[0];
        assert_eq!((a1.power, a1.speed, a1.width_mean, a1.width_std, a1.depth_mean, a1.depth_std), (300.0, 1.23, 111.9, 10.9, 113.3, 13.4));
        let a10 = &cases[9];
        assert_eq!((a10.width_mean, a10.width_std, a10.depth_mean, a10.depth_std), (127.3, 9.4, 147.1, 19.4));
        assert!((cases[10].energy() - 157.6).abs() < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let cases = builtin_afrl();
        let back = cases_from_csv(&cases_to_csv(&cases)).unwrap();
        for (a, b) in cases.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert!((a.speed - b.speed).abs() < 1e-15);
            assert_eq!(a.width_mean, b.width_mean);
        }
    }
}
