use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{TractRecord, VulnerabilityRule, POPULATION};
use crate::geo::LatLon;
use crate::{Error, Result};

/// Columns with this prefix hold indicator percentiles.
pub const PERCENTILE_PREFIX: &str = "pct_";
/// Columns with this prefix hold precomputed 0/1 vulnerability flags.
pub const FLAG_PREFIX: &str = "flag_";

/// Reads `gidtr, lat, lon, population, <group columns>, pct_<indicator>...,
/// flag_<index>...` records.
pub fn read_tracts_csv<R: Read>(reader: R, context: &str) -> Result<Vec<TractRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            context: context.into(),
            source: e,
        })?
        .clone();
    for required in ["gidtr", "lat", "lon", POPULATION] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Parse {
                context: context.into(),
                line: 1,
                message: format!("missing column {required:?}"),
            });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            context: context.into(),
            line,
            message: e.to_string(),
        })?;
        let mut t = TractRecord {
            gidtr: String::new(),
            center: LatLon::new(0.0, 0.0),
            features: BTreeMap::new(),
            percentiles: BTreeMap::new(),
            vuln_flags: BTreeMap::new(),
        };
        for (h, v) in headers.iter().zip(rec.iter()) {
            if h == "gidtr" {
                t.gidtr = v.to_owned();
                continue;
            }
            let num: f64 = v.parse().map_err(|_| Error::Parse {
                context: context.into(),
                line,
                message: format!("column {h:?}: not a number: {v:?}"),
            })?;
            match h {
                "lat" => t.center.lat = num,
                "lon" => t.center.lon = num,
                _ => {
                    if let Some(ind) = h.strip_prefix(PERCENTILE_PREFIX) {
                        t.percentiles.insert(ind.to_owned(), num);
                    } else if let Some(idx) = h.strip_prefix(FLAG_PREFIX) {
                        t.vuln_flags.insert(idx.to_owned(), num != 0.0);
                    } else {
                        t.features.insert(h.to_owned(), num);
                    }
                }
            }
        }
        t.check().map_err(|e| Error::Parse {
            context: context.into(),
            line,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Reads `{index_name: [[{indicator, min_percentile}, ...], ...]}`.
pub fn read_rules(path: &Path) -> Result<BTreeMap<String, VulnerabilityRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_columns_by_role() {
        let csv = "gidtr,lat,lon,population,White,Hispanic,pct_low_income,flag_SVI\n\
                   48001,31.5,-95.7,100,60,40,55.5,1\n";
        let t = read_tracts_csv(csv.as_bytes(), "t").unwrap();
        assert_eq!(t[0].gidtr, "48001");
        assert_eq!(t[0].population(), 100.0);
        assert_eq!(t[0].features["Hispanic"], 40.0);
        assert_eq!(t[0].percentiles["low_income"], 55.5);
        assert!(t[0].vuln_flags["SVI"]);
    }

    #[test]
    fn bad_number_has_line_context() {
        let csv = "gidtr,lat,lon,population\n1,2,3,4\n2,x,3,4\n";
        let err = read_tracts_csv(csv.as_bytes(), "tracts.csv").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("lat"), "{err}");
    }

    #[test]
    fn group_count_above_population_rejected() {
        let csv = "gidtr,lat,lon,population,White\n1,2,3,4,5\n";
        assert!(read_tracts_csv(csv.as_bytes(), "t").is_err());
    }
}
