//! Text formats: the JSON layout for weight vectors,
//! `{topology, outer: [...], subnets: [{layer0: [[...]], hidden: [[[...]]]}]}`,
//! and comma-separated point and observation files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::net::{Topology, WeightVector};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    topology: Topology,
    outer: Vec<f64>,
    subnets: Vec<SubnetFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubnetFile {
    /// `r` rows of `d + 1` entries, bias first.
    layer0: Vec<Vec<f64>>,
    /// `L - 1` levels of `r` rows of `r + 1` entries, bias first.
    hidden: Vec<Vec<Vec<f64>>>,
}

pub fn weights_to_json(w: &WeightVector) -> String {
    let topo = *w.topology();
    let (d, r) = (topo.dim(), topo.width());
    let subnets = (0..topo.subnets())
        .map(|k| {
            let block = w.subnet(k);
            let (first, rest) = block.split_at(topo.input_level_len());
            SubnetFile {
                layer0: first.chunks_exact(d + 1).map(<[f64]>::to_vec).collect(),
                hidden: rest
                    .chunks_exact(r * (r + 1))
                    .map(|level| level.chunks_exact(r + 1).map(<[f64]>::to_vec).collect())
                    .collect(),
            }
        })
        .collect();
    let file = WeightsFile {
        topology: topo,
        outer: w.outer().to_vec(),
        subnets,
    };
    serde_json::to_string_pretty(&file).expect("weights serialize")
}

fn expect_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Format(format!("{what}: expected {expected} entries, got {got}")))
    }
}

/// Parses and shape-checks a weight file; every entry must be finite.
pub fn weights_from_json(text: &str) -> Result<WeightVector> {
    let file: WeightsFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let topo = file.topology;
    let (d, r) = (topo.dim(), topo.width());
    expect_len("outer", file.outer.len(), topo.subnets())?;
    expect_len("subnets", file.subnets.len(), topo.subnets())?;
    let mut data = Vec::with_capacity(topo.param_count());
    data.extend_from_slice(&file.outer);
    for (k, s) in file.subnets.iter().enumerate() {
        expect_len(&format!("subnets[{k}].layer0"), s.layer0.len(), r)?;
        for (i, row) in s.layer0.iter().enumerate() {
            expect_len(&format!("subnets[{k}].layer0[{i}]"), row.len(), d + 1)?;
            data.extend_from_slice(row);
        }
        expect_len(&format!("subnets[{k}].hidden"), s.hidden.len(), topo.depth() - 1)?;
        for (l, level) in s.hidden.iter().enumerate() {
            expect_len(&format!("subnets[{k}].hidden[{l}]"), level.len(), r)?;
            for (i, row) in level.iter().enumerate() {
                expect_len(&format!("subnets[{k}].hidden[{l}][{i}]"), row.len(), r + 1)?;
                data.extend_from_slice(row);
            }
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("weights must be finite".into()));
    }
    WeightVector::from_vec(topo, data)
}

/// Rows of `width` comma-separated finite numbers. Blank lines and lines
/// starting with `#` are skipped; a first line that does not parse as
/// numbers is taken as a header.
fn parse_rows(text: &str, width: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let values: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let header = std::mem::replace(&mut first, false);
        let values = match values {
            Ok(v) => v,
            Err(_) if header => continue,
            Err(_) => return Err(Error::Format(format!("line {}: expected numbers", i + 1))),
        };
        if values.len() != width {
            return Err(Error::Format(format!(
                "line {}: expected {width} fields, got {}",
                i + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("line {}: values must be finite", i + 1)));
        }
        out.extend(values);
    }
    Ok(out)
}

/// Points with `dim` coordinates per line, returned row-major.
pub fn parse_points_csv(text: &str, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::param("dim", "must be >= 1"));
    }
    parse_rows(text, dim)
}

/// Observations `x_1, ..., x_d, y`, one per line.
pub fn parse_dataset_csv(text: &str, dim: usize) -> Result<Dataset> {
    if dim == 0 {
        return Err(Error::param("dim", "must be >= 1"));
    }
    let rows = parse_rows(text, dim + 1)?;
    let mut xs = Vec::with_capacity(rows.len() / (dim + 1) * dim);
    let mut ys = Vec::with_capacity(rows.len() / (dim + 1));
    for row in rows.chunks_exact(dim + 1) {
        xs.extend_from_slice(&row[..dim]);
        ys.push(row[dim]);
    }
    Dataset::new(dim, xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightVector {
        let topo = Topology::new(1, 3, 2, 2).unwrap();
        let data = (0..topo.param_count()).map(|i| i as f64 * 0.1 - 1.0 / 3.0).collect();
        WeightVector::from_vec(topo, data).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let w = sample();
        assert_eq!(weights_from_json(&weights_to_json(&w)).unwrap(), w);
    }

    #[test]
    fn layout_matches_documented_shape() {
        let v: serde_json::Value = serde_json::from_str(&weights_to_json(&sample())).unwrap();
        assert_eq!(v["outer"].as_array().unwrap().len(), 2);
        let s = &v["subnets"][0];
        assert_eq!(s["layer0"].as_array().unwrap().len(), 2);
        assert_eq!(s["layer0"][0].as_array().unwrap().len(), 2);
        assert_eq!(s["hidden"].as_array().unwrap().len(), 2);
        assert_eq!(s["hidden"][1][0].as_array().unwrap().len(), 3);
        assert_eq!(v["topology"]["depth"], 3);
    }

    #[test]
    fn shape_errors_are_reported() {
        let text = weights_to_json(&sample());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["subnets"][1]["hidden"][0][1] = serde_json::json!([1.0, 2.0]);
        let err = weights_from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("subnets[1].hidden[0][1]"), "{err}");
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(weights_from_json(&v.to_string()).is_err());
        assert!(weights_from_json("{").is_err());
    }

    #[test]
    fn csv_rows_with_header_and_comments() {
        let text = "x1,x2,y\n# comment\n0.5, -1, 2\n\n1e-3,2,3\n";
        let data = parse_dataset_csv(text, 2).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.point(1), &[1e-3, 2.0]);
        assert_eq!(data.targets(), &[2.0, 3.0]);
        assert_eq!(parse_points_csv("1\n2\n", 1).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = parse_points_csv("1,2\n3\n", 2).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_points_csv("1\nx\n", 1).is_err());
        assert!(parse_points_csv("inf\n", 1).is_err());
        assert!(parse_dataset_csv("", 1).is_err());
        assert!(parse_points_csv("1\n", 0).is_err());
    }
}
