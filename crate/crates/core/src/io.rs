//! Plain-text formats: flat `key=value` blocks and the dataset CSV.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::mixture::{Dataset, MixtureSpec};
use crate::numeric::fmt17;

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

pub fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(",")
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("not a number: `{t}`")))
        })
        .collect()
}

pub fn mixture_to_key_values(spec: &MixtureSpec) -> String {
    format_key_values([
        ("d", spec.d.to_string()),
        ("kappa", fmt17(spec.kappa)),
        ("sigma", fmt17(spec.sigma)),
        ("n", spec.n.to_string()),
        ("balance", fmt17(spec.balance)),
        ("seed", spec.seed.to_string()),
        ("s_plus", join_floats(&spec.s_plus)),
    ])
}

pub fn mixture_from_key_values(kv: &BTreeMap<String, String>) -> Result<MixtureSpec> {
    fn field<T: std::str::FromStr>(kv: &BTreeMap<String, String>, k: &str) -> Result<T> {
        kv.get(k)
            .ok_or_else(|| Error::Parse(format!("missing `{k}`")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad value for `{k}`")))
    }
    let d: usize = field(kv, "d")?;
    let mut spec = MixtureSpec::new(d, field(kv, "kappa")?, field(kv, "sigma")?, field(kv, "n")?, field(kv, "seed")?);
    if kv.contains_key("balance") {
        spec.balance = field(kv, "balance")?;
    }
    if let Some(s) = kv.get("s_plus") {
        spec.s_plus = parse_floats(s)?;
    }
    Ok(spec)
}

/// CSV with header `y,x0,…,x{d−1}`.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::from("y");
    for k in 0..data.d() {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(if data.y()[i] > 0.0 { "1" } else { "-1" });
        for v in data.row(i) {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"y") || cols.len() < 2 {
        return Err(Error::Parse("dataset header must start with `y`".into()));
    }
    let d = cols.len() - 1;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let vals = parse_floats(line)?;
        if vals.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                i + 1,
                d + 1,
                vals.len()
            )));
        }
        ys.push(vals[0]);
        xs.extend_from_slice(&vals[1..]);
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).map_err(|e| Error::Parse(e.to_string()))?;
    Dataset::new(x, Array1::from(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::sample_dataset;

    #[test]
    fn key_values_skip_comments_and_override() {
        let kv = parse_key_values("# c\n\na = 1\nb=x=y\na=2\n").unwrap();
        assert_eq!(kv["a"], "2");
        assert_eq!(kv["b"], "x=y");
        assert!(parse_key_values("novalue\n").is_err());
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let spec = MixtureSpec::new(5, 1.5, 0.7, 11, 3);
        let data = sample_dataset(&spec).unwrap();
        let back = dataset_from_csv(&dataset_to_csv(&data)).unwrap();
        assert_eq!(back, data);
        let spec_back = mixture_from_key_values(&parse_key_values(&mixture_to_key_values(&spec)).unwrap()).unwrap();
        assert_eq!(spec_back, spec);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(dataset_from_csv("").is_err());
        assert!(dataset_from_csv("a,b\n1,2\n").is_err());
        assert!(dataset_from_csv("y,x0\n1,2,3\n").is_err());
        assert!(matches!(dataset_from_csv("y,x0\n2,1\n-1,1\n"), Err(Error::Data(_))));
    }
}
