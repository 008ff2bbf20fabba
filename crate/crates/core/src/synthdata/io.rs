//! Columnar text format for datasets.
//!
//! ```text
//! # d=<d> sigma=<s> gamma=<g> eta=<e> pc=<p> seed=<seed> n=<n> fraction=<f> mu=<m0;m1;...>
//! <context>,<y>,<mask_flag>,<x_0>,...,<x_{3d-1}>
//! ```
//!
//! `context` is 1 or 2, `y` is -1 or 1 and `mask_flag` is 1 when the row
//! carries its context's canonical annotation. `fraction` and `mu` are
//! optional on read: a missing `fraction` is taken as (annotated rows)/n and
//! a missing `mu` as the unit-norm vector `1/sqrt(d)`. Reals are written in
//! shortest round-trip form, so save/load is exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{annotated_count, canonical_mask, Context, Dataset, Example, ProblemParams};
use crate::error::{Error, Result};

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_dataset(dataset))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, path)
}

pub fn format_dataset(dataset: &Dataset) -> String {
    let p = &dataset.params;
    let mut out = String::new();
    let mu = p
        .mu
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(";");
    writeln!(
        out,
        "# d={} sigma={:?} gamma={:?} eta={:?} pc={:?} seed={} n={} fraction={:?} mu={}",
        p.d(),
        p.sigma,
        p.gamma,
        p.eta,
        p.p_c,
        dataset.seed,
        dataset.len(),
        dataset.annotated_fraction,
        mu
    )
    .unwrap();
    for ex in &dataset.examples {
        write!(
            out,
            "{},{},{}",
            ex.context.code(),
            ex.y,
            u8::from(ex.annotation.is_some())
        )
        .unwrap();
        for v in &ex.x {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields = parse_header(header, path, hline)?;

    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| Error::parse(path, hline, format!("header is missing `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse::<f64>()
            .map_err(|e| Error::parse(path, hline, format!("bad `{key}`: {e}")))
    };
    let int = |key: &str| -> Result<u64> {
        get(key)?
            .parse::<u64>()
            .map_err(|e| Error::parse(path, hline, format!("bad `{key}`: {e}")))
    };

    let d = int("d")? as usize;
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let mu = match fields.get("mu") {
        Some(s) => s
            .split(';')
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, hline, format!("bad `mu`: {e}")))?,
        None => vec![1.0 / (d as f64).sqrt(); d],
    };
    if mu.len() != d {
        return Err(Error::invalid(
            "mu",
            format!("header has d={d} but mu has {} entries", mu.len()),
        ));
    }
    let params = ProblemParams::new(mu, num("sigma")?, num("gamma")?, num("eta")?, num("pc")?)?;
    let seed = int("seed")?;
    let n = int("n")? as usize;

    let width = 3 + 3 * d;
    let mut examples = Vec::with_capacity(n);
    for (lineno, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != width {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {width} columns, found {}", cols.len()),
            ));
        }
        let context = cols[0]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Context::from_code)
            .ok_or_else(|| Error::parse(path, lineno, format!("bad context `{}`", cols[0])))?;
        let y = match cols[1].trim() {
            "1" => 1,
            "-1" => -1,
            other => return Err(Error::parse(path, lineno, format!("bad label `{other}`"))),
        };
        let annotated = match cols[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(path, lineno, format!("bad mask flag `{other}`"))),
        };
        let x = cols[3..]
            .iter()
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad coordinate: {e}")))?;
        examples.push(Example {
            x,
            y,
            context,
            annotation: annotated.then(|| canonical_mask(context, d)),
        });
    }

    if examples.len() != n {
        return Err(Error::invalid(
            "n",
            format!("header declares {n} rows, file has {}", examples.len()),
        ));
    }
    let marked = examples.iter().filter(|e| e.annotation.is_some()).count();
    if examples[..marked].iter().any(|e| e.annotation.is_none()) {
        return Err(Error::invalid(
            "mask_flag",
            "annotated rows must form a prefix of the file",
        ));
    }
    let annotated_fraction = match fields.get("fraction") {
        Some(_) => {
            let f = num("fraction")?;
            if annotated_count(n, f) != marked {
                return Err(Error::invalid(
                    "fraction",
                    format!("fraction {f} implies {} annotated rows, file has {marked}", annotated_count(n, f)),
                ));
            }
            f
        }
        None if n == 0 => 0.0,
        None => marked as f64 / n as f64,
    };
    Ok(Dataset {
        examples,
        params,
        seed,
        annotated_fraction,
    })
}

fn parse_header(line: &str, path: &Path, lineno: usize) -> Result<HashMap<String, String>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, lineno, "header must start with `#`"))?;
    let mut fields = HashMap::new();
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(path, lineno, format!("expected key=value, got `{tok}`")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{attach_annotations, sample_dataset};

    fn params() -> ProblemParams {
        ProblemParams::isotropic(1, 1.0, 1.0, 0.1, 0.3, 0.5).unwrap()
    }

    #[test]
    fn three_rows_six_columns() {
        let ds = attach_annotations(sample_dataset(&params(), 3, 4).unwrap(), 0.34).unwrap();
        let text = format_dataset(&ds);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("# d=1 sigma=1.0 gamma=0.1 eta=0.3 pc=0.5 seed=4 n=3"));
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), 6);
        }
        assert!(lines[1].split(',').nth(2) == Some("1"));
        assert!(lines[2].split(',').nth(2) == Some("0"));
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = attach_annotations(sample_dataset(&params(), 25, 9).unwrap(), 0.3).unwrap();
        let back = parse_dataset(&format_dataset(&ds), Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let ds = sample_dataset(&params(), 2, 1).unwrap();
        let mut text = format_dataset(&ds);
        text.push_str("1,1,0,0.5\n");
        let text = text.replace("n=2", "n=3");
        match parse_dataset(&text, Path::new("f.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn row_count_mismatch_is_validation_error() {
        let ds = sample_dataset(&params(), 2, 1).unwrap();
        let text = format_dataset(&ds).replace("n=2", "n=5");
        assert!(matches!(
            parse_dataset(&text, Path::new("f")),
            Err(Error::Validation { field: "n", .. })
        ));
    }

    #[test]
    fn bad_params_in_header() {
        let ds = sample_dataset(&params(), 1, 1).unwrap();
        let text = format_dataset(&ds).replace("sigma=1.0", "sigma=-1.0");
        assert!(matches!(
            parse_dataset(&text, Path::new("f")),
            Err(Error::Validation { field: "sigma", .. })
        ));
    }

    #[test]
    fn minimal_header_defaults() {
        let text = "# d=1 sigma=1 gamma=0.1 eta=0.3 pc=0.9 seed=0 n=2\n1,1,1,0.5,0.25,1\n2,-1,0,-0.5,0.25,-1\n";
        let ds = parse_dataset(text, Path::new("f")).unwrap();
        assert_eq!(ds.params.mu, vec![1.0]);
        assert_eq!(ds.annotated_fraction, 0.5);
        assert_eq!(ds.examples[0].annotation, Some(canonical_mask(Context::C1, 1)));
        assert_eq!(ds.examples[1].context, Context::C2);
    }
}
