//! Loading system files.
//!
//! A system file is TOML with one table per ingredient:
//!
//! ```toml
//! [system]
//! n = 2
//! name = "cubic"
//!
//! [legendre]
//! L1 = "v1 + 0.1*v1^3"
//! L2 = "v2 + 0.1*v2^3"
//!
//! [force]
//! Phi1 = "-x1"
//!
//! [connection]
//! Gamma_1_12 = "0.1*x2"
//! Gamma_1_21 = "0.1*x2"
//! ```
//!
//! `[legendre]` holds either `L1..Ln` or a single `lagrangian`. Optional
//! tables are `[inverse]` (`V1..Vn`), `[force]`, `[connection]` and
//! `[gauge]` (`T_k_ij`, or `T_k_i_j` when indices need more than one digit),
//! and `[surface]` for the normal-shift check. Omitted entries are zero.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use normality_core::experiments::Surface;
use normality_core::expr::{parse, parse_in, Expression, Scope};
use normality_core::system::{Mutation, SystemDef};
use normality_core::{Error as CoreError, ParseError, Rep};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Validation { path: PathBuf, message: String },
}

impl FileError {
    pub fn kind(&self) -> &'static str {
        match self {
            FileError::Io { .. } => "file",
            FileError::Syntax { .. } => "syntax",
            FileError::Validation { .. } => "validation",
        }
    }
}

type Entries = BTreeMap<String, Spanned<String>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: RawSystem,
    legendre: Entries,
    #[serde(default)]
    inverse: Entries,
    #[serde(default)]
    force: Entries,
    #[serde(default)]
    connection: Entries,
    #[serde(default)]
    gauge: Entries,
    surface: Option<RawSurface>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    name: Option<String>,
    newton_scale: Option<f64>,
    mutation: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    x: Entries,
    nu: Spanned<String>,
    range: BTreeMap<String, [f64; 2]>,
    samples: usize,
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default = "default_steps")]
    steps: usize,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_steps() -> usize {
    10
}

/// Initial surface and sampling plan for the normal-shift check.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSpec {
    pub surface: Surface,
    /// `[a, b]` for each parameter; samples sit at cell midpoints.
    pub ranges: Vec<[f64; 2]>,
    /// Samples per parameter.
    pub samples: usize,
    pub t_end: f64,
    pub steps: usize,
}

impl SurfaceSpec {
    /// Parameter grid, in lexicographic order.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for [a, b] in &self.ranges {
            let h = (b - a) / self.samples as f64;
            out = out
                .into_iter()
                .flat_map(|u| {
                    (0..self.samples).map(move |k| {
                        let mut u = u.clone();
                        u.push(a + (k as f64 + 0.5) * h);
                        u
                    })
                })
                .collect();
        }
        out
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.t_end * k as f64 / self.steps as f64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SystemFile {
    pub path: PathBuf,
    pub system: SystemDef,
    pub surface: Option<SurfaceSpec>,
}

pub fn load_system_file(path: &Path) -> Result<SystemFile, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Io { path: path.into(), source })?;
    parse_system_file(&text, path)
}

/// Parses file contents; `path` only labels errors.
pub fn parse_system_file(text: &str, path: &Path) -> Result<SystemFile, FileError> {
    let cx = Cx { text, path };
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| cx.line_col(s.start));
        FileError::Syntax { path: path.into(), line, column, message: e.message().trim().to_owned() }
    })?;
    let n = raw.system.n;
    if n == 0 {
        return Err(cx.invalid("n must be at least 1"));
    }

    let mut b = SystemDef::builder(n);
    if let Some(name) = &raw.system.name {
        b = b.name(name.clone());
    }
    if let Some(scale) = raw.system.newton_scale {
        b = b.newton_scale(scale);
    }
    if let Some(m) = &raw.system.mutation {
        let mutation = match m.get_ref().as_str() {
            "flip-beta-force-term" => Mutation::FlipBetaForceTerm,
            other => return Err(cx.at(m.span(), format!("unknown mutation '{other}'"))),
        };
        b = b.mutation(Some(mutation));
    }

    for (key, val) in &raw.legendre {
        cx.expression(val, n, Some(Rep::V), key)?;
        if key == "lagrangian" {
            b = b.lagrangian(val.get_ref());
        } else {
            let i = cx.vector_index(key, "L", n, val)?;
            b = b.legendre(i, val.get_ref());
        }
    }
    for (key, val) in &raw.inverse {
        cx.expression(val, n, Some(Rep::P), key)?;
        b = b.inverse(cx.vector_index(key, "V", n, val)?, val.get_ref());
    }
    for (key, val) in &raw.force {
        cx.expression(val, n, Some(Rep::V), key)?;
        b = b.force(cx.vector_index(key, "Phi", n, val)?, val.get_ref());
    }
    for (key, val) in &raw.connection {
        cx.expression(val, n, Some(Rep::V), key)?;
        let (k, i, j) = cx.tensor_index(key, "Gamma", n, val)?;
        b = b.connection(k, i, j, val.get_ref());
    }
    for (key, val) in &raw.gauge {
        cx.expression(val, n, Some(Rep::V), key)?;
        let (k, i, j) = cx.tensor_index(key, "T", n, val)?;
        b = b.gauge(k, i, j, val.get_ref());
    }

    let system = b.build().map_err(|e| cx.core(e))?;
    system.validate().map_err(|e| cx.core(e))?;
    let surface = raw.surface.map(|s| cx.surface(s, n)).transpose()?;
    Ok(SystemFile { path: path.into(), system, surface })
}

struct Cx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Cx<'_> {
    fn line_col(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn at(&self, span: Range<usize>, message: String) -> FileError {
        let (line, column) = self.line_col(span.start);
        FileError::Syntax { path: self.path.into(), line, column, message }
    }

    fn invalid(&self, message: impl Into<String>) -> FileError {
        FileError::Validation { path: self.path.into(), message: message.into() }
    }

    fn core(&self, e: CoreError) -> FileError {
        match e {
            CoreError::Validation(m) => self.invalid(m),
            CoreError::AsymmetricGauge { deviation } => {
                self.invalid(format!("gauge tensor is not symmetric in its lower indices (deviation {deviation:.3e})"))
            }
            other => self.invalid(format!("system fails at a validation point: {other}")),
        }
    }

    /// Byte offset in the file of the first character of a string value.
    fn content_start(&self, span: &Range<usize>) -> usize {
        let raw = &self.text[span.clone()];
        if raw.starts_with("\"\"\"") || raw.starts_with("'''") {
            let after = span.start + 3;
            if self.text[after..].starts_with('\n') {
                after + 1
            } else if self.text[after..].starts_with("\r\n") {
                after + 2
            } else {
                after
            }
        } else {
            span.start + 1
        }
    }

    /// Maps a location inside an expression to the file.
    fn locate(&self, val: &Spanned<String>, line: usize, column: usize) -> (usize, usize) {
        let start = self.content_start(&val.span());
        let (l0, c0) = self.line_col(start);
        if line <= 1 {
            (l0, c0 + column - 1)
        } else {
            (l0 + line - 1, column)
        }
    }

    fn expression(&self, val: &Spanned<String>, n: usize, rep: Option<Rep>, key: &str) -> Result<(), FileError> {
        self.located(val, key, parse(val.get_ref(), n)).and_then(|e| self.check_rep(val, key, &e, rep))
    }

    fn located(&self, val: &Spanned<String>, key: &str, r: Result<Expression, ParseError>) -> Result<Expression, FileError> {
        r.map_err(|e| {
            let (line, column, message) = match &e {
                ParseError::Syntax { line, column, message } => (*line, *column, message.clone()),
                ParseError::Dimension { name, line, column, dimension } => {
                    (*line, *column, format!("variable {name} exceeds dimension {dimension}"))
                }
                ParseError::MixedRepresentation { line, column } => {
                    (*line, *column, "expression mixes v and p variables".to_owned())
                }
            };
            let (line, column) = self.locate(val, line, column);
            FileError::Syntax { path: self.path.into(), line, column, message: format!("in {key}: {message}") }
        })
    }

    fn check_rep(&self, val: &Spanned<String>, key: &str, e: &Expression, rep: Option<Rep>) -> Result<(), FileError> {
        match (e.fiber(), rep) {
            (Some(found), Some(want)) if found != want => Err(self.at(
                val.span(),
                format!("{key} must not use {}-variables", found.letter()),
            )),
            _ => Ok(()),
        }
    }

    fn index(&self, digits: &str, n: usize, key: &str, val: &Spanned<String>) -> Result<usize, FileError> {
        match digits.parse::<usize>() {
            Ok(i) if (1..=n).contains(&i) => Ok(i - 1),
            _ => Err(self.at(val.span(), format!("index '{digits}' of {key} is outside 1..{n}"))),
        }
    }

    fn vector_index(&self, key: &str, prefix: &str, n: usize, val: &Spanned<String>) -> Result<usize, FileError> {
        match key.strip_prefix(prefix) {
            Some(d) if !d.is_empty() && d.bytes().all(|c| c.is_ascii_digit()) => self.index(d, n, key, val),
            _ => Err(self.at(val.span(), format!("unexpected key '{key}', expected {prefix}1..{prefix}{n}"))),
        }
    }

    fn tensor_index(
        &self,
        key: &str,
        prefix: &str,
        n: usize,
        val: &Spanned<String>,
    ) -> Result<(usize, usize, usize), FileError> {
        let bad = || self.at(val.span(), format!("unexpected key '{key}', expected {prefix}_k_ij"));
        let rest = key.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')).ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split('_').collect();
        if parts.iter().any(|p| p.is_empty() || !p.bytes().all(|c| c.is_ascii_digit())) {
            return Err(bad());
        }
        let (k, i, j) = match parts.as_slice() {
            [k, ij] if ij.len() == 2 => (*k, &ij[..1], &ij[1..]),
            [k, i, j] => (*k, *i, *j),
            _ => return Err(bad()),
        };
        Ok((self.index(k, n, key, val)?, self.index(i, n, key, val)?, self.index(j, n, key, val)?))
    }

    fn surface(&self, s: RawSurface, n: usize) -> Result<SurfaceSpec, FileError> {
        if n < 2 {
            return Err(self.invalid("a [surface] needs n >= 2"));
        }
        let scope = Scope::Surface { parameters: n - 1 };
        let mut x = Vec::with_capacity(n);
        for i in 1..=n {
            let key = format!("x{i}");
            let val = s.x.get(&key).ok_or_else(|| self.invalid(format!("[surface.x] is missing {key}")))?;
            x.push(self.located(val, &key, parse_in(val.get_ref(), scope))?);
        }
        if let Some(extra) = s.x.keys().find(|k| !(1..=n).any(|i| **k == format!("x{i}"))) {
            return Err(self.invalid(format!("unexpected key '{extra}' in [surface.x]")));
        }
        let nu = self.located(&s.nu, "nu", parse_in(s.nu.get_ref(), scope))?;
        let mut ranges = Vec::with_capacity(n - 1);
        for j in 1..n {
            let key = format!("u{j}");
            let r = s.range.get(&key).ok_or_else(|| self.invalid(format!("[surface.range] is missing {key}")))?;
            if !(r[0] < r[1]) {
                return Err(self.invalid(format!("range {key} must be increasing")));
            }
            ranges.push(*r);
        }
        if s.range.len() != n - 1 {
            return Err(self.invalid(format!("[surface.range] needs exactly u1..u{}", n - 1)));
        }
        if s.samples == 0 || s.steps == 0 || !(s.t_end > 0.0) {
            return Err(self.invalid("surface samples, steps and t_end must be positive"));
        }
        let surface = Surface::new(x, nu).map_err(|e| self.core(e))?;
        Ok(SurfaceSpec { surface, ranges, samples: s.samples, t_end: s.t_end, steps: s.steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<SystemFile, FileError> {
        parse_system_file(text, Path::new("test.toml"))
    }

    #[test]
    fn identity_system() {
        let f = load("[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL2 = \"v2\"\n").unwrap();
        assert_eq!(f.system.n(), 2);
        assert!(f.surface.is_none());
    }

    #[test]
    fn expression_errors_point_into_the_file() {
        let e = load("[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL2 = \"v2 + x3\"\n").unwrap_err();
        match e {
            FileError::Syntax { line, column, .. } => assert_eq!((line, column), (5, 12)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn asymmetric_connection_is_rejected() {
        let e = load("[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL2 = \"v2\"\n[connection]\nGamma_1_12 = \"x1\"\n")
            .unwrap_err();
        assert!(matches!(&e, FileError::Validation { message, .. } if message.contains("not symmetric")), "{e}");
    }

    #[test]
    fn inconsistent_inverse_is_rejected() {
        let src = "[system]\nn = 1\n[legendre]\nL1 = \"v1 + v1^3/3\"\n[inverse]\nV1 = \"0.7*p1\"\n";
        let e = load(src).unwrap_err();
        assert!(matches!(&e, FileError::Validation { message, .. } if message.contains("inconsistent")), "{e}");
    }

    #[test]
    fn key_and_table_errors() {
        let e = load("[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL3 = \"v2\"\n").unwrap_err();
        assert!(matches!(e, FileError::Syntax { line: 5, .. }), "{e}");
        let e = load("[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL2 = \"p2\"\n").unwrap_err();
        assert!(matches!(e, FileError::Syntax { .. }), "{e}");
        let e = load("[system]\nn = 2\nbogus = 1\n[legendre]\nL1 = \"v1\"\n").unwrap_err();
        assert!(matches!(e, FileError::Syntax { line: 3, .. }), "{e}");
    }

    #[test]
    fn surface_grid() {
        let src = "[system]\nn = 2\n[legendre]\nL1 = \"v1\"\nL2 = \"v2\"\n\
                   [surface]\nnu = \"1\"\nsamples = 4\n[surface.x]\nx1 = \"cos(u1)\"\nx2 = \"sin(u1)\"\n\
                   [surface.range]\nu1 = [0.0, 4.0]\n";
        let s = load(src).unwrap().surface.unwrap();
        assert_eq!(s.grid(), vec![vec![0.5], vec![1.5], vec![2.5], vec![3.5]]);
        assert_eq!(s.times().len(), 11);
    }
}
