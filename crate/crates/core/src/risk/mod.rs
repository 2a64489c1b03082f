//! Per-line per-day wildfire risk from a wildfire-potential raster.
//!
//! Pixel statistics are taken over every pixel crossed by any line on any
//! configured day. Pixels below `mean + std` are zeroed, and a line's daily
//! risk is the integral of the remaining values along its path (value times
//! km travelled inside each pixel). Lines are then classified per day as
//! high, medium or low risk.

pub mod raster;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::LatLon;
use crate::grid::Network;
use crate::{Error, Result};

pub use raster::{Footprint, PixelGrid, RasterMeta};

pub const DEFAULT_R_PSPS: f64 = 6e8;
pub const DEFAULT_R_HIGH: f64 = 1e6;
pub const DEFAULT_R_LOW: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelStats {
    pub mean: f64,
    pub std_dev: f64,
}

impl PixelStats {
    pub fn cutoff(&self) -> f64 {
        self.mean + self.std_dev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default = "d_psps")]
    pub r_psps: f64,
    #[serde(default = "d_high")]
    pub r_high: f64,
    #[serde(default = "d_low")]
    pub r_low: f64,
}

fn d_psps() -> f64 {
    DEFAULT_R_PSPS
}
fn d_high() -> f64 {
    DEFAULT_R_HIGH
}
fn d_low() -> f64 {
    DEFAULT_R_LOW
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            r_psps: DEFAULT_R_PSPS,
            r_high: DEFAULT_R_HIGH,
            r_low: DEFAULT_R_LOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    High,
    Med,
    Low,
}

impl Category {
    pub fn switchable(self) -> bool {
        matches!(self, Category::High | Category::Med)
    }
}

/// Mean and population standard deviation over the multiset of pixel values
/// crossed by each line on each day. A pixel crossed by two lines counts
/// twice; a pixel crossed twice by the same line counts once.
pub fn compute_pixel_stats(grid: &PixelGrid, line_paths: &[Vec<LatLon>], days: &[u32]) -> Result<PixelStats> {
    let cell_sets: Vec<Vec<usize>> = line_paths
        .iter()
        .map(|p| Footprint::of_path(&grid.meta, p).cells())
        .collect();
    let mut values = Vec::new();
    for day in days {
        let v = grid
            .day(*day)
            .ok_or_else(|| Error::Invalid(format!("raster has no values for day {day}")))?;
        for cells in &cell_sets {
            values.extend(cells.iter().map(|&c| v[c]));
        }
    }
    if values.is_empty() {
        return Err(Error::NoOnLinePixels);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(PixelStats {
        mean,
        std_dev: var.sqrt(),
    })
}

/// Keeps a pixel's value iff it is at least `mean + std`, else zero.
pub fn threshold_value(v: f64, stats: &PixelStats) -> f64 {
    if v >= stats.cutoff() {
        v
    } else {
        0.0
    }
}

pub fn threshold_pixels(grid: &PixelGrid, stats: &PixelStats) -> PixelGrid {
    let values = grid
        .values
        .iter()
        .map(|(d, v)| (*d, v.iter().map(|x| threshold_value(*x, stats)).collect()))
        .collect();
    PixelGrid {
        meta: grid.meta,
        values,
    }
}

/// Risk of one line path on one day against a thresholded grid. Paths outside
/// the grid, or days without data, carry zero risk.
pub fn line_day_risk(path: &[LatLon], thresholded: &PixelGrid, day: u32) -> f64 {
    match thresholded.day(day) {
        Some(v) => Footprint::of_path(&thresholded.meta, path).integrate(v),
        None => 0.0,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayCategories {
    pub high: Vec<String>,
    pub med: Vec<String>,
    pub low: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `[line][day position]`.
    pub matrix: Vec<Vec<Category>>,
    pub per_day: Vec<DayCategories>,
    pub harden_set: Vec<String>,
}

/// Splits lines per day into high (`r >= r_high`), medium
/// (`r_low <= r < r_high`) and low (`r < r_low`) risk; the harden set is
/// every line that is high or medium on some day.
pub fn classify(lines: &[String], risk: &[Vec<f64>], r_high: f64, r_low: f64) -> Result<Classification> {
    if !(r_low < r_high) {
        return Err(Error::Config(format!(
            "R_low ({r_low}) must be below R_high ({r_high})"
        )));
    }
    let days = risk.first().map_or(0, Vec::len);
    let matrix: Vec<Vec<Category>> = risk
        .iter()
        .map(|row| {
            row.iter()
                .map(|&r| {
                    if r >= r_high {
                        Category::High
                    } else if r >= r_low {
                        Category::Med
                    } else {
                        Category::Low
                    }
                })
                .collect()
        })
        .collect();
    let mut per_day = vec![DayCategories::default(); days];
    for (l, row) in matrix.iter().enumerate() {
        for (d, c) in row.iter().enumerate() {
            let set = &mut per_day[d];
            match c {
                Category::High => set.high.push(lines[l].clone()),
                Category::Med => set.med.push(lines[l].clone()),
                Category::Low => set.low.push(lines[l].clone()),
            }
        }
    }
    let harden_set = matrix
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(|c| c.switchable()))
        .map(|(l, _)| lines[l].clone())
        .collect();
    Ok(Classification {
        matrix,
        per_day,
        harden_set,
    })
}

/// Risk values, categories and thresholds for every line and day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub days: Vec<u32>,
    pub lines: Vec<String>,
    /// `[line][day position]`.
    pub line_day_risk: Vec<Vec<f64>>,
    /// Derived on load; optional in input files.
    #[serde(default)]
    pub day_total: Vec<f64>,
    pub thresholds: Thresholds,
    #[serde(default)]
    pub categories: Vec<DayCategories>,
    #[serde(default)]
    pub harden_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_stats: Option<PixelStats>,
    #[serde(skip)]
    matrix: Vec<Vec<Category>>,
    #[serde(skip)]
    line_index: BTreeMap<String, usize>,
}

impl RiskProfile {
    pub fn from_line_risk(
        lines: Vec<String>,
        days: Vec<u32>,
        line_day_risk: Vec<Vec<f64>>,
        thresholds: Thresholds,
    ) -> Result<Self> {
        if line_day_risk.len() != lines.len() || line_day_risk.iter().any(|r| r.len() != days.len()) {
            return Err(Error::Invalid("risk matrix must be lines x days".into()));
        }
        if line_day_risk.iter().flatten().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Invalid("line risk must be finite and >= 0".into()));
        }
        let cls = classify(&lines, &line_day_risk, thresholds.r_high, thresholds.r_low)?;
        let day_total = (0..days.len())
            .map(|d| line_day_risk.iter().map(|row| row[d]).sum())
            .collect();
        let line_index = lines.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Ok(RiskProfile {
            days,
            lines,
            line_day_risk,
            day_total,
            thresholds,
            categories: cls.per_day,
            harden_set: cls.harden_set,
            pixel_stats: None,
            matrix: cls.matrix,
            line_index,
        })
    }

    /// Full raster pipeline over the network's lines and horizon days.
    pub fn from_raster(net: &Network, grid: &PixelGrid, thresholds: Thresholds) -> Result<Self> {
        let days = net.horizon.days.clone();
        let paths: Vec<Vec<LatLon>> = net.lines.iter().map(|l| l.path.clone()).collect();
        let stats = compute_pixel_stats(grid, &paths, &days)?;
        let hot = threshold_pixels(grid, &stats);
        let risk: Vec<Vec<f64>> = paths
            .par_iter()
            .map(|p| {
                let fp = Footprint::of_path(&hot.meta, p);
                days.iter()
                    .map(|d| hot.day(*d).map_or(0.0, |v| fp.integrate(v)))
                    .collect()
            })
            .collect();
        let lines = net.lines.iter().map(|l| l.id.clone()).collect();
        let mut profile = RiskProfile::from_line_risk(lines, days, risk, thresholds)?;
        profile.pixel_stats = Some(stats);
        Ok(profile)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RiskProfile = serde_json::from_str(text).map_err(|e| Error::json("risk profile", e))?;
        let mut p = RiskProfile::from_line_risk(raw.lines, raw.days, raw.line_day_risk, raw.thresholds)?;
        p.pixel_stats = raw.pixel_stats;
        Ok(p)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RiskProfile::from_json_str(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("risk profile serializes")
    }

    pub fn line_idx(&self, id: &str) -> Option<usize> {
        self.line_index.get(id).copied()
    }

    pub fn category(&self, line: usize, day: usize) -> Category {
        self.matrix[line][day]
    }

    pub fn risk(&self, line: usize, day: usize) -> f64 {
        self.line_day_risk[line][day]
    }

    pub fn in_harden_set(&self, line: usize) -> bool {
        self.matrix[line].iter().any(|c| c.switchable())
    }

    /// Season total `sum_d r_{l,d}` for a line.
    pub fn season_risk(&self, line: usize) -> f64 {
        self.line_day_risk[line].iter().sum()
    }
}

/// Days whose all-energized total risk reaches the shutoff trigger.
pub fn psps_days(profile: &RiskProfile) -> Vec<u32> {
    profile
        .days
        .iter()
        .zip(&profile.day_total)
        .filter(|(_, total)| **total >= profile.thresholds.r_psps)
        .map(|(d, _)| *d)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(rows: usize, cols: usize, cs: f64) -> RasterMeta {
        RasterMeta {
            origin_lat: 30.0,
            origin_lon: -100.0,
            cell_size_deg: cs,
            rows,
            cols,
        }
    }

    #[test]
    fn two_point_stats() {
        let mut v = BTreeMap::new();
        v.insert(1, vec![10.0, 20.0]);
        let g = PixelGrid::new(meta(1, 2, 0.01), v).unwrap();
        let path = vec![LatLon::new(29.995, -99.995), LatLon::new(29.995, -99.985)];
        let s = compute_pixel_stats(&g, &[path], &[1]).unwrap();
        assert_eq!(s.mean, 15.0);
        assert_eq!(s.std_dev, 5.0);
    }

    #[test]
    fn constant_field_has_zero_std() {
        let mut v = BTreeMap::new();
        v.insert(1, vec![42.0; 9]);
        let g = PixelGrid::new(meta(3, 3, 0.01), v).unwrap();
        let path = vec![LatLon::new(29.999, -99.999), LatLon::new(29.971, -99.971)];
        let s = compute_pixel_stats(&g, &[path], &[1]).unwrap();
        assert_eq!(s.mean, 42.0);
        assert_eq!(s.std_dev, 0.0);
    }

    #[test]
    fn no_on_line_pixels() {
        let mut v = BTreeMap::new();
        v.insert(1, vec![1.0; 9]);
        let g = PixelGrid::new(meta(3, 3, 0.01), v).unwrap();
        let path = vec![LatLon::new(0.0, 0.0), LatLon::new(0.1, 0.1)];
        assert!(matches!(
            compute_pixel_stats(&g, &[path], &[1]),
            Err(Error::NoOnLinePixels)
        ));
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let s = PixelStats {
            mean: 10.0,
            std_dev: 5.0,
        };
        assert_eq!(threshold_value(16.0, &s), 16.0);
        assert_eq!(threshold_value(14.999, &s), 0.0);
        assert_eq!(threshold_value(15.0, &s), 15.0);
    }

    #[test]
    fn single_cell_integral() {
        // One large cell; a 2 km path along a parallel.
        let mut v = BTreeMap::new();
        v.insert(1, vec![50.0]);
        let g = PixelGrid::new(meta(1, 1, 1.0), v).unwrap();
        let lat = 29.5;
        let dlon = 2.0 / crate::geo::equirect_speed_km(0.0, 1.0, lat);
        let path = vec![LatLon::new(lat, -99.5), LatLon::new(lat, -99.5 + dlon)];
        let r = line_day_risk(&path, &g, 1);
        assert!((r - 100.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn zero_cell_contributes_nothing() {
        let mut v = BTreeMap::new();
        v.insert(1, vec![0.0, 30.0]);
        let lat = 29.5;
        let g = PixelGrid::new(meta(1, 2, 1.0), v).unwrap();
        let one_km = 1.0 / crate::geo::equirect_speed_km(0.0, 1.0, lat);
        let path = vec![LatLon::new(lat, -99.0 - one_km), LatLon::new(lat, -99.0 + one_km)];
        let r = line_day_risk(&path, &g, 1);
        assert!((r - 30.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn classification_at_default_thresholds() {
        let lines = vec!["a".to_string(), "b".into(), "c".into(), "d".into()];
        let risk = vec![vec![2e6], vec![0.5], vec![1e6], vec![1.0]];
        let c = classify(&lines, &risk, 1e6, 1.0).unwrap();
        assert_eq!(
            c.matrix,
            vec![
                vec![Category::High],
                vec![Category::Low],
                vec![Category::High],
                vec![Category::Med]
            ]
        );
        assert_eq!(c.per_day[0].high, vec!["a", "c"]);
        assert_eq!(c.harden_set, vec!["a", "c", "d"]);
    }

    #[test]
    fn inverted_thresholds_rejected() {
        let lines = vec!["a".to_string()];
        assert!(matches!(
            classify(&lines, &[vec![1.0]], 1.0, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn psps_trigger_boundary() {
        let p = RiskProfile::from_line_risk(
            vec!["a".into(), "b".into()],
            vec![1, 2, 3],
            vec![vec![3e8, 0.0, 1e8], vec![3e8, 0.0, 1e8]],
            Thresholds::default(),
        )
        .unwrap();
        assert_eq!(p.day_total, vec![6e8, 0.0, 2e8]);
        assert_eq!(psps_days(&p), vec![1]);
    }

    #[test]
    fn all_zero_risk_has_no_trigger_days() {
        let p = RiskProfile::from_line_risk(
            vec!["a".into()],
            vec![1, 2],
            vec![vec![0.0, 0.0]],
            Thresholds::default(),
        )
        .unwrap();
        assert!(psps_days(&p).is_empty());
        assert!(p.harden_set.is_empty());
    }

    #[test]
    fn profile_json_round_trip() {
        let p = RiskProfile::from_line_risk(
            vec!["a".into(), "b".into()],
            vec![4, 9],
            vec![vec![2e6, 3.0], vec![0.0, 0.5]],
            Thresholds::default(),
        )
        .unwrap();
        let back = RiskProfile::from_json_str(&p.to_json_pretty()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.category(0, 1), Category::Med);
        assert_eq!(back.line_idx("b"), Some(1));
    }
}
