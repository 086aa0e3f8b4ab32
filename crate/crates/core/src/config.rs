//! Flat `key = value` files.
//!
//! Scenario configs hold top-level keys shared by every scenario, followed by
//! optional `[name]` sections. `#` starts a comment. Problem files use the
//! same syntax without sections:
//!
//! ```text
//! k = 2
//! A0 = -1
//! A1 = 0
//! ic = 1; 1
//! solution = exp(z)
//! ```
//!
//! When `A0` is absent and `solution = exp(...)` is given, `A0` and the
//! initial data are manufactured from the solution and `A1 .. A{k-1}`.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::funcs::{lookup_or_parse, Expr};
use crate::lognum::LogComplex;
use crate::ode::{manufacture, OdeProblem};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// `self` with `over` taking precedence.
    pub fn merged(&self, over: &Params) -> Params {
        let mut out = self.clone();
        for (k, v) in &over.0 {
            out.0.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Parse(format!(
                "unknown key '{k}' (allowed: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Parse(format!("key '{key}': {e}"))),
        }
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: Params,
    pub sections: BTreeMap<String, Params>,
}

impl ConfigFile {
    /// Parameters for one section, top-level keys underneath.
    pub fn for_section(&self, name: &str) -> Params {
        match self.sections.get(name) {
            Some(s) => self.global.merged(s),
            None => self.global.clone(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    let mut current: Option<String> = None;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let no = no + 1;
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::Parse(format!("line {no}: bad section header")))?;
            if cfg.sections.contains_key(name) {
                return Err(Error::Parse(format!("line {no}: duplicate section [{name}]")));
            }
            cfg.sections.insert(name.to_string(), Params::new());
            current = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {no}: expected 'key = value'")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse(format!("line {no}: empty key")));
        }
        let target = match &current {
            Some(s) => cfg.sections.get_mut(s).expect("section exists"),
            None => &mut cfg.global,
        };
        if target.get(k).is_some() {
            return Err(Error::Parse(format!("line {no}: duplicate key '{k}'")));
        }
        target.set(k, v);
    }
    Ok(cfg)
}

fn const_value(s: &str) -> Result<LogComplex> {
    let e = lookup_or_parse(s)?;
    e.as_const()
        .map(LogComplex::from_complex)
        .ok_or_else(|| Error::Parse(format!("initial value '{s}' is not a constant")))
}

pub fn parse_problem(text: &str) -> Result<OdeProblem> {
    let cfg = parse_config(text)?;
    if !cfg.sections.is_empty() {
        return Err(Error::Parse("problem files have no sections".into()));
    }
    let p = cfg.global;
    let k: usize = p
        .get("k")
        .ok_or_else(|| Error::Parse("missing key 'k'".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("key 'k': {e}")))?;
    if k < 2 {
        return Err(Error::Parse(format!("order k = {k} must be at least 2")));
    }
    let names: Vec<String> = (0..k).map(|j| format!("A{j}")).collect();
    let mut allowed: Vec<&str> = names.iter().map(String::as_str).collect();
    allowed.extend(["k", "ic", "solution"]);
    p.reject_unknown(&allowed)?;

    let solution = p.get("solution").map(lookup_or_parse).transpose()?;
    let higher: Vec<Expr> = names[1..]
        .iter()
        .map(|n| p.get(n).map_or_else(|| Ok(Expr::real(0.0)), lookup_or_parse))
        .collect::<Result<_>>()?;
    let initial = p
        .list("ic")
        .map(|v| v.iter().map(|s| const_value(s)).collect::<Result<Vec<_>>>())
        .transpose()?;

    let mut problem = match (p.get("A0"), &solution) {
        (Some(a0), _) => {
            let mut coeffs = vec![lookup_or_parse(a0)?];
            coeffs.extend(higher);
            let mut pr = OdeProblem::new(coeffs, initial.clone())?;
            pr.solution = solution;
            pr
        }
        (None, Some(f)) => manufacture(f, &higher, k)?,
        (None, None) => return Err(Error::Parse("missing key 'A0' (or 'solution')".into())),
    };
    if let (Some(ic), None) = (initial, p.get("A0")) {
        problem = problem.with_initial(ic)?;
    }
    Ok(problem)
}
