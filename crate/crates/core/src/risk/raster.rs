use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geo::{equirect_piece_km, LatLon};
use crate::{Error, Result};

/// Largest wildfire-potential value a pixel may carry.
pub const MAX_PIXEL_VALUE: f64 = 247.0;

/// Raster geometry. The origin is the north-west corner of cell `(0, 0)`;
/// rows grow southward and columns eastward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterMeta {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub cell_size_deg: f64,
    pub rows: usize,
    pub cols: usize,
}

impl RasterMeta {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    fn grid_coords(&self, p: LatLon) -> (f64, f64) {
        (
            (self.origin_lat - p.lat) / self.cell_size_deg,
            (p.lon - self.origin_lon) / self.cell_size_deg,
        )
    }

    fn cell_at(&self, row_f: f64, col_f: f64) -> Option<usize> {
        if row_f < 0.0 || col_f < 0.0 {
            return None;
        }
        let (r, c) = (row_f.floor() as usize, col_f.floor() as usize);
        (r < self.rows && c < self.cols).then_some(r * self.cols + c)
    }
}

/// Daily wildfire-potential values on a regular lat/lon grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub meta: RasterMeta,
    /// Row-major cell values per day.
    pub values: BTreeMap<u32, Vec<f64>>,
}

impl PixelGrid {
    pub fn new(meta: RasterMeta, values: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        if !(meta.cell_size_deg > 0.0) || meta.rows == 0 || meta.cols == 0 {
            return Err(Error::Invalid("raster needs positive cell size and dimensions".into()));
        }
        for (day, v) in &values {
            if v.len() != meta.cells() {
                return Err(Error::Invalid(format!(
                    "day {day}: {} values for a {}x{} grid",
                    v.len(),
                    meta.rows,
                    meta.cols
                )));
            }
            if let Some(bad) = v.iter().find(|x| !(0.0..=MAX_PIXEL_VALUE).contains(*x)) {
                return Err(Error::Invalid(format!(
                    "day {day}: pixel value {bad} outside [0, {MAX_PIXEL_VALUE}]"
                )));
            }
        }
        Ok(PixelGrid { meta, values })
    }

    pub fn day(&self, day: u32) -> Option<&[f64]> {
        self.values.get(&day).map(Vec::as_slice)
    }

    /// Reads `day,row,col,value` records. Cells not listed are zero.
    pub fn from_csv_reader<R: Read>(meta: RasterMeta, reader: R, context: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            day: u32,
            row: usize,
            col: usize,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut values: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for (i, rec) in rdr.deserialize::<Rec>().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                context: context.into(),
                line,
                message: e.to_string(),
            })?;
            if rec.row >= meta.rows || rec.col >= meta.cols {
                return Err(Error::Parse {
                    context: context.into(),
                    line,
                    message: format!(
                        "cell ({}, {}) outside {}x{} grid",
                        rec.row, rec.col, meta.rows, meta.cols
                    ),
                });
            }
            if !seen.insert((rec.day, rec.row, rec.col)) {
                return Err(Error::Parse {
                    context: context.into(),
                    line,
                    message: "duplicate cell".into(),
                });
            }
            let cells = values.entry(rec.day).or_insert_with(|| vec![0.0; meta.cells()]);
            cells[rec.row * meta.cols + rec.col] = rec.value;
        }
        PixelGrid::new(meta, values)
    }

    pub fn from_files(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta_text = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let meta: RasterMeta =
            serde_json::from_str(&meta_text).map_err(|e| Error::json(meta_path.display().to_string(), e))?;
        let file = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
        PixelGrid::from_csv_reader(meta, file, &csv_path.display().to_string())
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|(d, v)| (*d, v.iter().map(|x| x * k).collect()))
            .collect();
        PixelGrid::new(self.meta, values)
    }
}

/// Cells crossed by a path with the length (km) travelled inside each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Footprint {
    pub pieces: Vec<(usize, f64)>,
}

/// Pieces shorter than this are treated as corner touches.
const MIN_PIECE_KM: f64 = 1e-12;

impl Footprint {
    /// Clips every polyline segment exactly against the cell grid.
    pub fn of_path(meta: &RasterMeta, path: &[LatLon]) -> Self {
        let mut pieces = Vec::new();
        for seg in path.windows(2) {
            clip_segment(meta, seg[0], seg[1], &mut pieces);
        }
        Footprint { pieces }
    }

    pub fn cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self.pieces.iter().map(|p| p.0).collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.pieces.iter().map(|&(c, km)| values[c] * km).sum()
    }
}

fn crossings(a: f64, b: f64, out: &mut Vec<f64>) {
    let d = b - a;
    if d == 0.0 {
        return;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut k = lo.ceil();
    while k <= hi {
        let t = (k - a) / d;
        if t > 0.0 && t < 1.0 {
            out.push(t);
        }
        k += 1.0;
    }
}

fn clip_segment(meta: &RasterMeta, a: LatLon, b: LatLon, out: &mut Vec<(usize, f64)>) {
    let (ra, ca) = meta.grid_coords(a);
    let (rb, cb) = meta.grid_coords(b);
    let mut ts = vec![0.0, 1.0];
    crossings(ra, rb, &mut ts);
    crossings(ca, cb, &mut ts);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let tm = 0.5 * (t0 + t1);
        let Some(cell) = meta.cell_at(ra + tm * (rb - ra), ca + tm * (cb - ca)) else {
            continue;
        };
        let km = equirect_piece_km(a, b, t0, t1);
        if km > MIN_PIECE_KM {
            out.push((cell, km));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta3() -> RasterMeta {
        RasterMeta {
            origin_lat: 30.0,
            origin_lon: -100.0,
            cell_size_deg: 0.01,
            rows: 3,
            cols: 3,
        }
    }

    #[test]
    fn horizontal_path_splits_at_cell_edges() {
        let m = meta3();
        let lat = 29.995;
        let fp = Footprint::of_path(&m, &[LatLon::new(lat, -99.995), LatLon::new(lat, -99.975)]);
        let cells: Vec<usize> = fp.pieces.iter().map(|p| p.0).collect();
        assert_eq!(cells, vec![0, 1, 2]);
        let km: Vec<f64> = fp.pieces.iter().map(|p| p.1).collect();
        assert!((km[0] - km[2]).abs() < 1e-12);
        assert!((km[1] - 2.0 * km[0]).abs() < 1e-9);
    }

    #[test]
    fn path_outside_grid_has_no_pieces() {
        let m = meta3();
        let fp = Footprint::of_path(&m, &[LatLon::new(10.0, 10.0), LatLon::new(10.1, 10.1)]);
        assert!(fp.pieces.is_empty());
    }

    #[test]
    fn csv_ingestion() {
        let csv = "day,row,col,value\n1,0,0,10\n1,2,2,247\n2,1,1,5\n";
        let g = PixelGrid::from_csv_reader(meta3(), csv.as_bytes(), "t").unwrap();
        assert_eq!(g.day(1).unwrap()[0], 10.0);
        assert_eq!(g.day(1).unwrap()[8], 247.0);
        assert_eq!(g.day(2).unwrap()[4], 5.0);
        assert_eq!(g.day(2).unwrap()[0], 0.0);
    }

    #[test]
    fn csv_rejects_out_of_range() {
        let csv = "day,row,col,value\n1,0,0,300\n";
        assert!(PixelGrid::from_csv_reader(meta3(), csv.as_bytes(), "t").is_err());
        let csv = "day,row,col,value\n1,5,0,3\n";
        let err = PixelGrid::from_csv_reader(meta3(), csv.as_bytes(), "t").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
