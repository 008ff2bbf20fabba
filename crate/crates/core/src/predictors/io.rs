//! Text model files.
//!
//! Every model is one or more blocks. A block is a header line
//! `# kind=<kind> d=<d> [key=value ...]` followed by whitespace-separated
//! reals written with 17 significant digits.
//!
//! * `linear` (optional `support=<start>..<end>`): the `3d` weights.
//! * `mlp` (`hidden=<H>`): input scale (`3d`), hidden weights row by row
//!   (`H x 3d`), hidden biases (`H`), output weights (`H`), output bias.
//! * `enp` (`mask_policy=<zero|none>`): no numbers; followed by the feature
//!   predictor block and then the target block.
//! * `icc` (`router=<oracle|learned>`, `context_predictor=<0|1>`): no
//!   numbers; followed by the c1 block, the c2 block and, when
//!   `context_predictor=1`, the router block.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EnpPipeline, IccModel, LinearPredictor, MaskPolicy, MlpPredictor, Model, Router, Scorer};
use crate::error::{Error, Result};

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    parse_model(&fs::read_to_string(path)?, path)
}

pub fn format_model(model: &Model) -> String {
    let mut out = String::new();
    match model {
        Model::Linear(p) => write_linear(&mut out, p),
        Model::Mlp(m) => write_mlp(&mut out, m),
        Model::Enp(p) => {
            writeln!(out, "# kind=enp d={} mask_policy={}", p.d(), p.mask_policy.name()).unwrap();
            write_scorer(&mut out, &p.feature);
            write_scorer(&mut out, &p.target);
        }
        Model::Icc(m) => {
            let router = match m.router {
                Router::OracleContext => "oracle",
                Router::LearnedRouter => "learned",
            };
            writeln!(
                out,
                "# kind=icc d={} router={} context_predictor={}",
                m.c1.input_dim() / 3,
                router,
                u8::from(m.context_predictor.is_some())
            )
            .unwrap();
            write_scorer(&mut out, &m.c1);
            write_scorer(&mut out, &m.c2);
            if let Some(g) = &m.context_predictor {
                write_scorer(&mut out, g);
            }
        }
    }
    out
}

fn write_scorer(out: &mut String, s: &Scorer) {
    match s {
        Scorer::Linear(p) => write_linear(out, p),
        Scorer::Mlp(m) => write_mlp(out, m),
    }
}

fn write_linear(out: &mut String, p: &LinearPredictor) {
    write!(out, "# kind=linear d={}", p.dim() / 3).unwrap();
    if let Some(r) = &p.support {
        write!(out, " support={}..{}", r.start, r.end).unwrap();
    }
    out.push('\n');
    write_row(out, &p.w);
}

fn write_mlp(out: &mut String, m: &MlpPredictor) {
    writeln!(out, "# kind=mlp d={} hidden={}", m.input_dim() / 3, m.hidden()).unwrap();
    write_row(out, &m.input_scale);
    for row in m.w1.chunks_exact(m.input_dim()) {
        write_row(out, row);
    }
    write_row(out, &m.b1);
    write_row(out, &m.w2);
    write_row(out, &[m.b2]);
}

fn write_row(out: &mut String, values: &[f64]) {
    let row = values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&row);
    out.push('\n');
}

struct Block {
    line: usize,
    fields: HashMap<String, String>,
    values: Vec<f64>,
}

impl Block {
    fn get(&self, key: &str, path: &Path) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::parse(path, self.line, format!("header is missing `{key}`")))
    }

    fn usize(&self, key: &str, path: &Path) -> Result<usize> {
        self.get(key, path)?
            .parse()
            .map_err(|e| Error::parse(path, self.line, format!("bad `{key}`: {e}")))
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<Model> {
    let mut blocks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('#') {
            let mut fields = HashMap::new();
            for tok in body.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| {
                    Error::parse(path, lineno, format!("expected key=value, got `{tok}`"))
                })?;
                fields.insert(k.to_string(), v.to_string());
            }
            blocks.push(Block {
                line: lineno,
                fields,
                values: Vec::new(),
            });
        } else {
            let block = blocks
                .last_mut()
                .ok_or_else(|| Error::parse(path, lineno, "weights before any header"))?;
            for tok in line.split_whitespace() {
                block.values.push(
                    tok.parse()
                        .map_err(|e| Error::parse(path, lineno, format!("bad number `{tok}`: {e}")))?,
                );
            }
        }
    }
    let mut iter = blocks.into_iter();
    let model = parse_top(&mut iter, path)?;
    if let Some(extra) = iter.next() {
        return Err(Error::parse(path, extra.line, "unexpected trailing block"));
    }
    Ok(model)
}

fn parse_top(blocks: &mut impl Iterator<Item = Block>, path: &Path) -> Result<Model> {
    let head = blocks
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty model file"))?;
    match head.get("kind", path)? {
        "linear" => Ok(Model::Linear(linear_from(&head, path)?)),
        "mlp" => Ok(Model::Mlp(mlp_from(&head, path)?)),
        "enp" => {
            let d = head.usize("d", path)?;
            let policy = head.get("mask_policy", path)?;
            let mask_policy = MaskPolicy::from_name(policy)
                .ok_or_else(|| Error::parse(path, head.line, format!("bad mask_policy `{policy}`")))?;
            let feature = next_scorer(blocks, d, head.line, path)?;
            let target = next_scorer(blocks, d, head.line, path)?;
            Ok(Model::Enp(EnpPipeline {
                feature,
                target,
                mask_policy,
            }))
        }
        "icc" => {
            let d = head.usize("d", path)?;
            let router = match head.get("router", path)? {
                "oracle" => Router::OracleContext,
                "learned" => Router::LearnedRouter,
                other => return Err(Error::parse(path, head.line, format!("bad router `{other}`"))),
            };
            let c1 = next_scorer(blocks, d, head.line, path)?;
            let c2 = next_scorer(blocks, d, head.line, path)?;
            let context_predictor = match head.fields.get("context_predictor").map(String::as_str) {
                Some("1") => Some(next_scorer(blocks, d, head.line, path)?),
                Some("0") | None => None,
                Some(other) => {
                    return Err(Error::parse(
                        path,
                        head.line,
                        format!("bad context_predictor `{other}`"),
                    ))
                }
            };
            Ok(Model::Icc(IccModel {
                c1,
                c2,
                router,
                context_predictor,
            }))
        }
        other => Err(Error::parse(path, head.line, format!("unknown model kind `{other}`"))),
    }
}

fn next_scorer(
    blocks: &mut impl Iterator<Item = Block>,
    d: usize,
    parent_line: usize,
    path: &Path,
) -> Result<Scorer> {
    let b = blocks
        .next()
        .ok_or_else(|| Error::parse(path, parent_line, "missing sub-model block"))?;
    let s: Scorer = match b.get("kind", path)? {
        "linear" => linear_from(&b, path)?.into(),
        "mlp" => mlp_from(&b, path)?.into(),
        other => return Err(Error::parse(path, b.line, format!("`{other}` cannot be a sub-model"))),
    };
    if s.input_dim() != 3 * d {
        return Err(Error::parse(path, b.line, format!("sub-model does not match d={d}")));
    }
    Ok(s)
}

fn expect_len(b: &Block, want: usize, path: &Path) -> Result<()> {
    if b.values.len() == want {
        Ok(())
    } else {
        Err(Error::parse(
            path,
            b.line,
            format!("expected {want} values in block, found {}", b.values.len()),
        ))
    }
}

fn linear_from(b: &Block, path: &Path) -> Result<LinearPredictor> {
    let d = b.usize("d", path)?;
    expect_len(b, 3 * d, path)?;
    let w = b.values.clone();
    match b.fields.get("support") {
        None => Ok(LinearPredictor::new(w)),
        Some(s) => {
            let (lo, hi) = s
                .split_once("..")
                .and_then(|(a, z)| Some((a.parse::<usize>().ok()?, z.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::parse(path, b.line, format!("bad support `{s}`")))?;
            if lo > hi || hi > 3 * d {
                return Err(Error::parse(path, b.line, format!("support `{s}` out of range")));
            }
            Ok(LinearPredictor::with_support(w, lo..hi))
        }
    }
}

fn mlp_from(b: &Block, path: &Path) -> Result<MlpPredictor> {
    let d = b.usize("d", path)?;
    let h = b.usize("hidden", path)?;
    let n = 3 * d;
    expect_len(b, n + h * n + 2 * h + 1, path)?;
    let v = &b.values;
    let mut at = 0;
    let mut take = |len: usize| {
        let s = v[at..at + len].to_vec();
        at += len;
        s
    };
    let input_scale = take(n);
    let w1 = take(h * n);
    let b1 = take(h);
    let w2 = take(h);
    let b2 = take(1)[0];
    Ok(MlpPredictor {
        input_scale,
        w1,
        b1,
        w2,
        b2,
    })
}
