//! Scenarios built on manufactured equations, their verdicts, and report bundles.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::bounds::{
    borel_shift_check, domination_check, log_derivative_check, lower_set_measure,
    order_of_bound, proximity_bound_check, BoundOptions, ExceptionalSet, Interpolation,
};
use crate::config::Params;
use crate::error::{Error, Result};
use crate::funcs::{build_tower, catalog, diff, ln_abs, lookup_or_parse, Expr, TowerSpec};
use crate::growth::{
    characteristic, order_estimate, proposition11_check, type_from_order, verify_ineq_12,
    GrowthMode, GrowthOptions, OrderEstimate, RadialGrid,
};
use crate::lognum::EXP_LIMIT;
use crate::ode::{manufacture, solve_series, OdeProblem};
use crate::scale::{check_admissible, SampleSpec, ScaleTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    Thm21,
    Thm22,
    Corollary21,
    Prop11,
    Lemma33,
    Lemma35,
    Lemma36,
    Lemma37,
    Lemma38,
    Lemma39,
    Ineq12,
    TripleSanity,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 12] = [
        ScenarioName::TripleSanity,
        ScenarioName::Ineq12,
        ScenarioName::Prop11,
        ScenarioName::Lemma33,
        ScenarioName::Lemma35,
        ScenarioName::Lemma36,
        ScenarioName::Lemma37,
        ScenarioName::Lemma38,
        ScenarioName::Lemma39,
        ScenarioName::Thm21,
        ScenarioName::Thm22,
        ScenarioName::Corollary21,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Thm21 => "thm21",
            ScenarioName::Thm22 => "thm22",
            ScenarioName::Corollary21 => "corollary21",
            ScenarioName::Prop11 => "prop11",
            ScenarioName::Lemma33 => "lemma33",
            ScenarioName::Lemma35 => "lemma35",
            ScenarioName::Lemma36 => "lemma36",
            ScenarioName::Lemma37 => "lemma37",
            ScenarioName::Lemma38 => "lemma38",
            ScenarioName::Lemma39 => "lemma39",
            ScenarioName::Ineq12 => "ineq12",
            ScenarioName::TripleSanity => "triple_sanity",
        }
    }

    /// Keys accepted in this scenario's config section, besides the common ones.
    fn keys(&self) -> &'static [&'static str] {
        match self {
            ScenarioName::Thm21 | ScenarioName::Corollary21 => &["k", "mu0", "c0", "lower"],
            ScenarioName::Thm22 => &["k", "mu", "c0", "cj"],
            ScenarioName::Prop11 => &["func"],
            ScenarioName::Lemma33 => &["funcs", "k", "eps", "d"],
            ScenarioName::Lemma35 => &["funcs", "eps"],
            ScenarioName::Lemma36 => &["func", "mu"],
            ScenarioName::Lemma37 => &["func", "omega", "rho"],
            ScenarioName::Lemma38 => &["funcs", "k", "terms", "n_dirs"],
            ScenarioName::Lemma39 => &["mu0", "c0"],
            ScenarioName::Ineq12 => &["funcs"],
            ScenarioName::TripleSanity => &["p_max"],
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
                Error::Parse(format!("unknown scenario '{s}' (known: {})", names.join(", ")))
            })
    }
}

const COMMON_KEYS: [&str; 10] = [
    "triple", "r0", "q", "n", "n_theta", "n_quad", "tail_k", "tol_order", "tol_type", "margin",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute, for order equalities.
    pub order: f64,
    /// Relative, for type comparisons.
    pub type_rel: f64,
    /// Absolute, for orders of `f` against `f'`.
    pub derivative: f64,
    /// Required gap between the solution's order and the lower coefficients.
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            order: 0.1,
            type_rel: 0.1,
            derivative: 0.05,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
struct Named {
    label: String,
    expr: Expr,
}

impl Named {
    fn parse(s: &str) -> Result<Named> {
        Ok(Named {
            label: s.trim().to_string(),
            expr: lookup_or_parse(s)?,
        })
    }

    fn file_stem(&self) -> String {
        self.label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Equation {
    f_spec: TowerSpec,
    problem: OdeProblem,
    /// Towers behind `A_1 .. A_{k-1}`; `None` is the zero coefficient.
    lower: Vec<Option<TowerSpec>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Equation(Equation),
    Prop11(Named),
    Lemma33 { funcs: Vec<Named>, k: usize, eps: f64, d: f64 },
    Lemma35 { funcs: Vec<Named>, eps: f64 },
    Lemma36 { f: Named, mu: f64 },
    Lemma37 { f: Named, omega: f64, rho: f64 },
    Lemma38 { problems: Vec<(String, OdeProblem)>, terms: usize, n_dirs: usize },
    Lemma39 { eq: Equation },
    Ineq12 { funcs: Vec<Named> },
    TripleSanity { p_max: u32 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub triple: ScaleTriple,
    pub grid: RadialGrid,
    pub opts: GrowthOptions,
    pub tol: Tolerances,
    pub notes: Vec<String>,
    kind: Kind,
}

fn setup<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Setup(_) => e,
        other => Error::Setup(other.to_string()),
    })
}

impl Scenario {
    fn new(name: ScenarioName, triple: ScaleTriple, grid: RadialGrid, kind: Kind) -> Self {
        Scenario {
            name,
            triple,
            grid,
            opts: GrowthOptions::default(),
            tol: Tolerances::default(),
            notes: Vec::new(),
            kind,
        }
    }

    /// Trims the grid so the innermost tower argument stays below the overflow limit.
    fn trim_for(&mut self, spec: &TowerSpec) -> Result<()> {
        if spec.level < 3 {
            return Ok(());
        }
        let limit = spec.max_radius(EXP_LIMIT);
        let (g, dropped) = setup(self.grid.trimmed(limit))?;
        if dropped > 0 {
            self.notes.push(format!(
                "grid trimmed to {} radii (r <= {limit:.6}) for tower({}, {}, {}); {dropped} dropped",
                g.n, spec.level, spec.c, spec.mu
            ));
        }
        self.grid = g;
        Ok(())
    }

    pub fn from_params(name: ScenarioName, p: &Params) -> Result<Scenario> {
        let mut allowed: Vec<&str> = COMMON_KEYS.to_vec();
        allowed.extend(name.keys());
        p.reject_unknown(&allowed)?;
        let triple: ScaleTriple = match p.get("triple") {
            Some(s) => s.parse()?,
            None => ScaleTriple::canonical(),
        };
        let d = RadialGrid::default();
        let grid = RadialGrid::new(p.parsed("r0", d.r0)?, p.parsed("q", d.q)?, p.parsed("n", d.n)?)?;
        let funcs = |default: &[&str]| -> Result<Vec<Named>> {
            match p.list("funcs") {
                Some(v) => v.iter().map(|s| Named::parse(s)).collect(),
                None => default.iter().map(|s| Named::parse(s)).collect(),
            }
        };
        let mut s = match name {
            ScenarioName::Thm21 | ScenarioName::Corollary21 => {
                let k = p.parsed("k", 2usize)?;
                let default_lower = if name == ScenarioName::Thm21 {
                    "1:0.5".to_string()
                } else {
                    "0.5:1; 1:0.5".to_string()
                };
                let default_k = if name == ScenarioName::Thm21 { 2 } else { 3 };
                let k = if p.get("k").is_some() { k } else { default_k };
                let lower = parse_lower(p.get("lower").unwrap_or(&default_lower), k)?;
                let (mu0, c0) = (p.parsed("mu0", 1.0)?, p.parsed("c0", 1.0)?);
                if name == ScenarioName::Thm21 {
                    build_thm21(&triple, k, mu0, c0, &lower, &grid)?
                } else {
                    build_corollary21(&triple, k, mu0, c0, &lower, &grid)?
                }
            }
            ScenarioName::Thm22 => {
                let k = p.parsed("k", 2usize)?;
                let cj = match p.list("cj") {
                    Some(v) => v
                        .iter()
                        .map(|s| parse_opt_f64(s))
                        .collect::<Result<Vec<_>>>()?,
                    None => vec![Some(1.0); k - 1],
                };
                build_thm22(&triple, k, p.parsed("mu", 1.0)?, p.parsed("c0", 2.0)?, &cj, &grid)?
            }
            ScenarioName::Prop11 => {
                let f = Named::parse(p.get("func").unwrap_or("tower(3,1,1)"))?;
                Scenario::new(name, triple, grid, Kind::Prop11(f))
            }
            ScenarioName::Lemma33 => Scenario::new(
                name,
                triple,
                grid,
                Kind::Lemma33 {
                    funcs: funcs(&["expz", "exp-pole", "tower2"])?,
                    k: p.parsed("k", 2)?,
                    eps: p.parsed("eps", 1.0)?,
                    d: p.parsed("d", 0.5)?,
                },
            ),
            ScenarioName::Lemma35 => Scenario::new(
                name,
                triple,
                grid,
                Kind::Lemma35 {
                    funcs: funcs(&["exp-pole", "tower2", "tower2-half", "tower3"])?,
                    eps: p.parsed("eps", 0.1)?,
                },
            ),
            ScenarioName::Lemma36 => Scenario::new(
                name,
                triple,
                grid,
                Kind::Lemma36 {
                    f: Named::parse(p.get("func").unwrap_or("tower(2,1,1)"))?,
                    mu: p.parsed("mu", 0.5)?,
                },
            ),
            ScenarioName::Lemma37 => Scenario::new(
                name,
                triple,
                grid,
                Kind::Lemma37 {
                    f: Named::parse(p.get("func").unwrap_or("tower(2,2,1)"))?,
                    omega: p.parsed("omega", 1.0)?,
                    rho: p.parsed("rho", 1.0)?,
                },
            ),
            ScenarioName::Lemma38 => {
                let k = p.parsed("k", 2usize)?;
                let names = p
                    .list("funcs")
                    .unwrap_or_else(|| vec!["expz".into(), "exp-pole".into()]);
                let mut problems = Vec::new();
                for kk in [k, k + 1] {
                    for n in &names {
                        let f = Named::parse(n)?;
                        let zeros = vec![Expr::real(0.0); kk - 1];
                        problems.push((format!("{}_k{kk}", f.file_stem()), setup(manufacture(&f.expr, &zeros, kk))?));
                    }
                }
                Scenario::new(
                    name,
                    triple,
                    grid,
                    Kind::Lemma38 {
                        problems,
                        terms: p.parsed("terms", 1024)?,
                        n_dirs: p.parsed("n_dirs", 16)?,
                    },
                )
            }
            ScenarioName::Lemma39 => {
                let (mu0, c0) = (p.parsed("mu0", 1.0)?, p.parsed("c0", 1.0)?);
                let mut s = build_thm21(&triple, 2, mu0, c0, &[None], &grid)?;
                let Kind::Equation(eq) = s.kind else { unreachable!() };
                s.kind = Kind::Lemma39 { eq };
                s.name = name;
                s
            }
            ScenarioName::Ineq12 => {
                let all: Vec<&str> = catalog().iter().map(|c| c.name).collect();
                Scenario::new(name, triple, grid, Kind::Ineq12 { funcs: funcs(&all)? })
            }
            ScenarioName::TripleSanity => Scenario::new(
                name,
                triple,
                grid,
                Kind::TripleSanity {
                    p_max: p.parsed("p_max", 3)?,
                },
            ),
        };
        let o = GrowthOptions::default();
        s.opts.n_theta = p.parsed("n_theta", o.n_theta)?;
        s.opts.n_quad = p.parsed("n_quad", o.n_quad)?;
        s.opts.tail_k = p.parsed("tail_k", o.tail_k)?;
        let t = Tolerances::default();
        s.tol.order = p.parsed("tol_order", t.order)?;
        s.tol.type_rel = p.parsed("tol_type", t.type_rel)?;
        s.tol.margin = p.parsed("margin", t.margin)?;
        Ok(s)
    }
}

fn parse_opt_f64(s: &str) -> Result<Option<f64>> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("'{s}': {e}")))?;
    Ok((v != 0.0).then_some(v))
}

/// `c:mu` entries separated by `;`, with `0` for a zero coefficient.
fn parse_lower(s: &str, k: usize) -> Result<Vec<Option<(f64, f64)>>> {
    let out: Vec<Option<(f64, f64)>> = s
        .split(';')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| {
            if item == "0" {
                return Ok(None);
            }
            let (c, mu) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("lower coefficient '{item}' is not c:mu or 0")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("'{item}': {e}")))
            };
            Ok(Some((num(c)?, num(mu)?)))
        })
        .collect::<Result<_>>()?;
    if out.len() > k.saturating_sub(1) {
        return Err(Error::Parse(format!("{} lower coefficients for order {k}", out.len())));
    }
    let mut out = out;
    out.resize(k.saturating_sub(1), None);
    Ok(out)
}

fn equation(
    name: ScenarioName,
    triple: &ScaleTriple,
    k: usize,
    f_spec: TowerSpec,
    lower: Vec<Option<TowerSpec>>,
    grid: &RadialGrid,
) -> Result<Scenario> {
    if k < 2 || lower.len() != k - 1 {
        return Err(Error::Setup(format!(
            "order {k} needs {} lower coefficients, got {}",
            k.saturating_sub(1),
            lower.len()
        )));
    }
    let f = build_tower(&f_spec);
    let higher: Vec<Expr> = lower
        .iter()
        .map(|t| t.map_or_else(|| Expr::real(0.0), |t| build_tower(&t)))
        .collect();
    let problem = setup(manufacture(&f, &higher, k))?;
    let eq = Equation { f_spec, problem, lower };
    let mut s = Scenario::new(name, *triple, *grid, Kind::Equation(eq));
    s.trim_for(&f_spec)?;
    if k == 2 && higher[0].as_const().is_some_and(|c| c.norm() == 0.0) {
        s.notes.push(
            "second solution: with A1 = 0 the reduction-of-order companion is f * int dz / f^2, \
             which differs from a multiple of f by a factor bounded as r -> 1; not measured"
                .into(),
        );
    }
    Ok(s)
}

/// `f = tower(3, c0, mu0)` with `A_j = tower(2, c_j, mu_j)`, `mu_j < mu0`, and `A_0` manufactured.
pub fn build_thm21(
    triple: &ScaleTriple,
    k: usize,
    mu0: f64,
    c0: f64,
    lower: &[Option<(f64, f64)>],
    grid: &RadialGrid,
) -> Result<Scenario> {
    let mut specs = Vec::new();
    for (j, l) in lower.iter().enumerate() {
        specs.push(match l {
            None => None,
            Some((c, mu)) => {
                if *mu >= mu0 {
                    return Err(Error::Setup(format!(
                        "dominance violated: mu_{} = {mu} is not below mu_0 = {mu0}",
                        j + 1
                    )));
                }
                Some(setup(TowerSpec::new(2, *c, *mu))?)
            }
        });
    }
    let f_spec = setup(TowerSpec::new(3, c0, mu0))?;
    equation(ScenarioName::Thm21, triple, k, f_spec, specs, grid)
}

/// Equal orders `mu` throughout, `A_j = tower(2, c_j, mu)` with every `c_j < c0`.
pub fn build_thm22(
    triple: &ScaleTriple,
    k: usize,
    mu: f64,
    c0: f64,
    cj: &[Option<f64>],
    grid: &RadialGrid,
) -> Result<Scenario> {
    let mut specs = Vec::new();
    for (j, c) in cj.iter().enumerate() {
        specs.push(match c {
            None => None,
            Some(c) => {
                if *c >= c0 {
                    return Err(Error::Setup(format!(
                        "type dominance cannot hold: c_{} = {c} is not below c_0 = {c0}",
                        j + 1
                    )));
                }
                Some(setup(TowerSpec::new(2, *c, mu))?)
            }
        });
    }
    let f_spec = setup(TowerSpec::new(3, c0, mu))?;
    equation(ScenarioName::Thm22, triple, k, f_spec, specs, grid)
}

/// Lower coefficients of smaller order, or of equal order and smaller type.
pub fn build_corollary21(
    triple: &ScaleTriple,
    k: usize,
    mu0: f64,
    c0: f64,
    lower: &[Option<(f64, f64)>],
    grid: &RadialGrid,
) -> Result<Scenario> {
    let mut specs = Vec::new();
    for (j, l) in lower.iter().enumerate() {
        specs.push(match l {
            None => None,
            Some((c, mu)) => {
                if *mu > mu0 || (*mu == mu0 && *c >= c0) {
                    return Err(Error::Setup(format!(
                        "A_{} = tower(2, {c}, {mu}) is not dominated by order {mu0}, type {c0}",
                        j + 1
                    )));
                }
                Some(setup(TowerSpec::new(2, *c, *mu))?)
            }
        });
    }
    let f_spec = setup(TowerSpec::new(3, c0, mu0))?;
    equation(ScenarioName::Corollary21, triple, k, f_spec, specs, grid)
}

/// Default parameters for a scenario.
pub fn build_default(name: ScenarioName) -> Result<Scenario> {
    Scenario::from_params(name, &Params::new())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name inside the bundle.
    pub file: String,
    pub csv: String,
    /// `(log(1/(1-r)), ratio)` points for an optional plot.
    pub plot: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: ScenarioName,
    pub triple: String,
    pub grid: String,
    pub relations: Vec<Relation>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    /// Measurement error that stopped the scenario.
    pub failure: Option<String>,
}

impl ScenarioReport {
    pub fn pass(&self) -> bool {
        self.failure.is_none() && !self.relations.is_empty() && self.relations.iter().all(|r| r.pass)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn text(&self) -> String {
        let mut out = format!(
            "scenario {}: {}\ntriple {}\ngrid {}\n",
            self.name,
            if self.pass() { "PASS" } else { "FAIL" },
            self.triple,
            self.grid
        );
        for r in &self.relations {
            out.push_str(&format!(
                "  [{}] {}: measured {}; expected {}\n",
                if r.pass { "pass" } else { "FAIL" },
                r.name,
                r.measured,
                r.expected
            ));
        }
        if let Some(f) = &self.failure {
            out.push_str(&format!("  failure: {f}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }

    /// `report.txt`, one CSV per table, and with `plots` an SVG beside each plotted table.
    pub fn write_bundle(&self, dir: &Path, plots: bool) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), self.text())?;
        for t in &self.tables {
            fs::write(dir.join(&t.file), &t.csv)?;
            if let (true, Some(pts)) = (plots, &t.plot) {
                let stem = t.file.trim_end_matches(".csv");
                fs::write(dir.join(format!("{stem}.svg")), svg_polyline(stem, pts))?;
            }
        }
        Ok(())
    }
}

/// A bare polyline with axis labels.
pub fn svg_polyline(title: &str, pts: &[(f64, f64)]) -> String {
    let (w, h, pad) = (480.0, 320.0, 40.0);
    let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let points: Vec<String> = finite
        .iter()
        .map(|&(x, y)| {
            let px = pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
            let py = h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <text x=\"{pad}\" y=\"20\">{title}</text>\n\
         <line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{mx}\" y=\"{lb}\">log(1/(1-r)) [{x0:.3}, {x1:.3}]</text>\n\
         <text x=\"4\" y=\"{my}\">ratio [{y0:.3}, {y1:.3}]</text>\n\
         <polyline fill=\"none\" stroke=\"steelblue\" points=\"{}\"/>\n</svg>\n",
        points.join(" "),
        b = h - pad,
        r = w - pad,
        mx = w / 2.0 - 60.0,
        lb = h - 10.0,
        my = pad - 8.0,
    )
}

fn order_table(file: String, est: &OrderEstimate) -> Table {
    let plot = est
        .radii
        .iter()
        .zip(&est.ratios)
        .filter_map(|(r, q)| q.map(|q| ((1.0 / (1.0 - r)).ln(), q)))
        .collect();
    Table {
        file,
        csv: est.to_csv(),
        plot: Some(plot),
    }
}

fn rel(name: impl Into<String>, measured: impl Into<String>, expected: impl Into<String>, pass: bool) -> Relation {
    Relation {
        name: name.into(),
        measured: measured.into(),
        expected: expected.into(),
        pass,
    }
}

struct Run<'a> {
    s: &'a Scenario,
    rep: ScenarioReport,
}

pub fn run(s: &Scenario) -> ScenarioReport {
    let mut ctx = Run {
        s,
        rep: ScenarioReport {
            name: s.name,
            triple: s.triple.to_string(),
            grid: s.grid.to_string(),
            relations: Vec::new(),
            tables: Vec::new(),
            notes: s.notes.clone(),
            failure: None,
        },
    };
    let result = ctx.triple_sanity().and_then(|ok| if ok { ctx.measure() } else { Ok(()) });
    if let Err(e) = result {
        ctx.rep.failure = Some(e.to_string());
    }
    ctx.rep
}

impl Run<'_> {
    fn push(&mut self, r: Relation) {
        self.rep.relations.push(r);
    }

    fn triple_sanity(&mut self) -> Result<bool> {
        let p_max = match self.s.kind {
            Kind::TripleSanity { p_max } => p_max,
            _ => 3,
        };
        let t = check_admissible(&self.s.triple, p_max, &SampleSpec::default())?;
        let pass = t.pass();
        if matches!(self.s.kind, Kind::TripleSanity { .. }) {
            for (label, part) in t.parts() {
                let failed: Vec<&str> = part.checks.iter().filter(|c| !c.pass).map(|c| c.label.as_str()).collect();
                let measured = if failed.is_empty() {
                    "all checks pass".to_string()
                } else {
                    format!("failing: {}", failed.join(", "))
                };
                self.push(rel(label, measured, "pass", part.pass));
            }
        } else {
            self.push(rel("triple admissible", if pass { "yes" } else { "no" }, "yes", pass));
        }
        if !pass {
            self.rep.notes.push(t.summary());
        }
        Ok(pass || matches!(self.s.kind, Kind::TripleSanity { .. }))
    }

    fn order(&mut self, f: &Expr, mode: GrowthMode, file: String) -> Result<OrderEstimate> {
        let g = self.s.grid;
        self.order_on(f, mode, file, &g)
    }

    fn order_on(&mut self, f: &Expr, mode: GrowthMode, file: String, g: &RadialGrid) -> Result<OrderEstimate> {
        let est = order_estimate(f, &self.s.triple, g, mode, &self.s.opts)?;
        if est.gap_count() > 0 {
            self.rep.notes.push(format!("{file}: {} radii unusable", est.gap_count()));
        }
        self.rep.tables.push(order_table(file, &est));
        Ok(est)
    }

    /// The scenario grid cut where `f` stops being representable on the positive axis.
    fn grid_for(&mut self, f: &Named) -> Result<RadialGrid> {
        let g = self.s.grid;
        let keep = g
            .radii()
            .iter()
            .take_while(|&&r| ln_abs(&f.expr, Complex64::new(r, 0.0)).is_ok())
            .count();
        if keep == g.n {
            return Ok(g);
        }
        let (t, dropped) = g.trimmed(g.radius(keep.max(1) - 1))?;
        self.rep.notes.push(format!(
            "{}: grid trimmed to {} radii, {dropped} beyond the representable range",
            f.label, t.n
        ));
        Ok(t)
    }

    fn measure(&mut self) -> Result<()> {
        let s = self.s;
        match &s.kind {
            Kind::TripleSanity { .. } => Ok(()),
            Kind::Equation(eq) => self.equation(eq),
            Kind::Prop11(f) => {
                let g = self.grid_for(f)?;
                let r = proposition11_check(&f.expr, &s.triple, &g, &s.opts)?;
                self.rep.tables.push(order_table(format!("{}_Mlog.csv", f.file_stem()), &r.m_log));
                self.rep.tables.push(order_table(format!("{}_Tlog.csv", f.file_stem()), &r.t_log));
                self.push(rel(
                    format!("|M_log - T_log| order of {}", f.label),
                    format!("{:.4} ({:.4} vs {:.4})", r.difference, r.m_log.value, r.t_log.value),
                    format!("<= {}", s.tol.order),
                    r.difference <= s.tol.order,
                ));
                Ok(())
            }
            Kind::Lemma33 { funcs, k, eps, d } => {
                for f in funcs {
                    let g = self.grid_for(f)?;
                    let ld = log_derivative_check(&f.expr, *k, 0, &g, *d, *eps, &s.opts)?;
                    self.rep.tables.push(Table {
                        file: format!("{}_logderiv.csv", f.file_stem()),
                        csv: ld.to_csv(),
                        plot: None,
                    });
                    self.push(rel(
                        format!("log-derivative bound for {} (k = {k})", f.label),
                        format!(
                            "violations {} (log-measure {:.4})",
                            ld.violations,
                            ld.violations.log_measure()
                        ),
                        format!("none over the last {} radii", s.opts.tail_k),
                        ld.tail_clean(s.opts.tail_k),
                    ));
                    let px = proximity_bound_check(&f.expr, *k, &s.triple, &g, *eps, &s.opts)?;
                    self.rep.tables.push(Table {
                        file: format!("{}_proximity.csv", f.file_stem()),
                        csv: px.bound.to_csv(),
                        plot: None,
                    });
                    self.push(rel(
                        format!("m(r, f^({k})/f) bound for {}", f.label),
                        format!(
                            "violation log-measure {:.4}, rho {:.4}, ln K {:.4}",
                            px.bound.violations.log_measure(),
                            px.rho,
                            px.ln_k
                        ),
                        format!("<= {}", px.bound.budget),
                        px.bound.pass,
                    ));
                }
                Ok(())
            }
            Kind::Lemma35 { funcs, eps } => self.lemma35(funcs, *eps),
            Kind::Lemma36 { f, mu } => self.lower_set(f, *mu, None),
            Kind::Lemma37 { f, omega, rho } => self.lower_set(f, 0.0, Some((*omega, *rho))),
            Kind::Lemma38 { problems, terms, n_dirs } => {
                for (label, p) in problems {
                    let series = solve_series(p, *terms)?;
                    let rep = domination_check(p, &series, &s.grid, *n_dirs, &BoundOptions::default())?;
                    self.rep.notes.extend(rep.notes.iter().map(|n| format!("{label}: {n}")));
                    self.rep.tables.push(Table {
                        file: format!("{label}_domination.csv"),
                        csv: rep.to_csv(),
                        plot: None,
                    });
                    self.push(rel(
                        format!("series log|f| <= growth bound for {label}"),
                        format!("min margin {:.4e} over {} radii", rep.min_margin(), rep.radii.len()),
                        ">= 0 at every radius up to the reliable radius",
                        rep.violations.is_empty(),
                    ));
                    self.bound_order(label, p)?;
                }
                Ok(())
            }
            Kind::Lemma39 { eq } => {
                let a0 = self.order(&eq.problem.coeffs[0], GrowthMode::MOrder, "A0_M.csv".into())?;
                let b = self.bound_order("level3", &eq.problem)?;
                self.push(rel(
                    "bound order matches rho(A_0)",
                    format!("{:.4} vs {:.4}", b.value, a0.value),
                    format!("within {}", s.tol.order),
                    (b.value - a0.value).abs() <= s.tol.order,
                ));
                let c = manufacture(&Expr::z().exp(), &[Expr::real(0.0)], 2)?;
                self.bound_order("constant", &c)?;
                Ok(())
            }
            Kind::Ineq12 { funcs } => {
                for f in funcs {
                    let rep = verify_ineq_12(&f.expr, &s.grid, &s.opts);
                    let mut skipped = 0;
                    let mut ok = true;
                    for row in &rep.rows {
                        match row {
                            Ok(r) => ok &= r.pass,
                            Err(e) if e.is_overflow() => skipped += 1,
                            Err(_) => ok = false,
                        }
                    }
                    let checked = rep.rows.len() - skipped;
                    let min = rep
                        .rows
                        .iter()
                        .flatten()
                        .map(|r| r.lower_margin.min(r.upper_margin))
                        .fold(f64::INFINITY, f64::min);
                    if skipped > 0 {
                        self.rep.notes.push(format!(
                            "{}: {skipped} radii skipped, T at (1+r)/2 beyond the representable range",
                            f.label
                        ));
                    }
                    self.rep.tables.push(Table {
                        file: format!("{}_ineq12.csv", f.file_stem()),
                        csv: rep.to_csv(),
                        plot: None,
                    });
                    self.push(rel(
                        format!("T <= log+ M <= (1+3r)/(1-r) T((1+r)/2) for {}", f.label),
                        format!("min margin {min:.4e} over {checked} radii"),
                        ">= 0",
                        ok && checked > 0,
                    ));
                }
                Ok(())
            }
        }
    }

    fn bound_order(&mut self, label: &str, p: &OdeProblem) -> Result<OrderEstimate> {
        let s = self.s;
        let b = order_of_bound(p, &s.triple, &s.grid, &BoundOptions::default(), &s.opts)?;
        self.rep.tables.push(order_table(format!("{label}_bound_Mlog.csv"), &b));
        let mut max_a = 0.0f64;
        for a in &p.coeffs {
            if a.as_const().is_some() {
                continue;
            }
            let est = order_estimate(a, &s.triple, &s.grid, GrowthMode::MOrder, &s.opts)?;
            max_a = max_a.max(est.value);
        }
        self.push(rel(
            format!("bound order <= max rho(A_j) + {} for {label}", s.tol.order),
            format!("{:.4} vs {:.4}", b.value, max_a),
            format!("<= {:.4}", max_a + s.tol.order),
            b.value <= max_a + s.tol.order,
        ));
        Ok(b)
    }

    fn equation(&mut self, eq: &Equation) -> Result<()> {
        let s = self.s;
        let tol = s.tol;
        let f = eq.problem.solution.clone().expect("manufactured");
        let rho_f = self.order(&f, GrowthMode::MLogOrder, "f_Mlog.csv".into())?;
        let mut rho = Vec::new();
        let mut ests = Vec::new();
        for (j, a) in eq.problem.coeffs.iter().enumerate() {
            if a.as_const().is_some() {
                self.rep.notes.push(format!("A_{j} is constant: order 0"));
                rho.push(0.0);
                ests.push(None);
                continue;
            }
            let est = self.order(a, GrowthMode::MOrder, format!("A{j}_M.csv"))?;
            rho.push(est.value);
            ests.push(Some(est));
        }
        let max_lower = rho[1..].iter().copied().fold(0.0f64, f64::max);
        let diff0 = (rho_f.value - rho[0]).abs();
        let conclusion = rel(
            "|rho_log(f) - rho(A_0)|",
            format!("{diff0:.4} ({:.4} vs {:.4})", rho_f.value, rho[0]),
            format!("<= {}", tol.order),
            diff0 <= tol.order,
        );
        match s.name {
            ScenarioName::Thm21 => {
                self.push(rel(
                    "max rho(A_j), j >= 1, below rho(A_0)",
                    format!("{max_lower:.4} vs {:.4}", rho[0]),
                    "strictly smaller",
                    max_lower < rho[0],
                ));
                self.push(conclusion);
                self.push(rel(
                    "rho_log(f) above max rho(A_j), j >= 1",
                    format!("{:.4} vs {max_lower:.4}", rho_f.value),
                    format!("gap >= {}", tol.margin),
                    rho_f.value >= max_lower + tol.margin,
                ));
            }
            ScenarioName::Thm22 => {
                let mu = eq.f_spec.mu;
                let t0 = type_from_order(ests[0].as_ref().expect("A_0 is not constant"), mu)?.value;
                let c0 = eq.f_spec.c;
                self.push(rel(
                    "tau(A_0) near c_0",
                    format!("{t0:.4} vs {c0}"),
                    format!("within {}%", tol.type_rel * 100.0),
                    ((t0 - c0) / c0).abs() <= tol.type_rel,
                ));
                let mut max_t = f64::NEG_INFINITY;
                for (j, spec) in eq.lower.iter().enumerate() {
                    let Some(spec) = spec else { continue };
                    let est = ests[j + 1].as_ref().expect("tower coefficient");
                    let tj = type_from_order(est, mu)?.value;
                    max_t = max_t.max(tj);
                    self.push(rel(
                        format!("rho(A_{}) equals rho(A_0)", j + 1),
                        format!("{:.4} vs {:.4}", est.value, rho[0]),
                        format!("within {}", tol.order),
                        (est.value - rho[0]).abs() <= tol.order,
                    ));
                    self.push(rel(
                        format!("tau(A_{}) near c_{}", j + 1, j + 1),
                        format!("{tj:.4} vs {}", spec.c),
                        format!("within {}%", tol.type_rel * 100.0),
                        ((tj - spec.c) / spec.c).abs() <= tol.type_rel,
                    ));
                }
                if max_t.is_finite() {
                    self.push(rel(
                        "setup: type dominance tau(A_0) > max tau(A_j)",
                        format!("{t0:.4} vs {max_t:.4}"),
                        "strictly larger",
                        t0 > max_t,
                    ));
                } else {
                    self.rep.notes.push(
                        "no lower coefficient attains the order of A_0: the type condition is vacuous".into(),
                    );
                }
                self.push(rel(
                    "rho_log(f) near mu",
                    format!("{:.4} vs {mu}", rho_f.value),
                    format!("within {}", tol.order),
                    (rho_f.value - mu).abs() <= tol.order,
                ));
                self.push(conclusion);
            }
            _ => {
                let strict = max_lower < rho[0] - tol.order;
                let mut typed = true;
                let t0 = match &ests[0] {
                    Some(e) => type_from_order(e, rho[0].max(1e-9))?.value,
                    None => 0.0,
                };
                let mut tied = Vec::new();
                for (j, e) in ests.iter().enumerate().skip(1) {
                    let Some(e) = e else { continue };
                    if (e.value - rho[0]).abs() <= tol.order {
                        let tj = type_from_order(e, rho[0].max(1e-9))?.value;
                        tied.push(format!("tau(A_{j}) = {tj:.4}"));
                        typed &= tj < t0;
                    }
                }
                let which = if strict {
                    "strict order dominance".to_string()
                } else if typed {
                    format!("equal orders, type dominance (tau(A_0) = {t0:.4}; {})", tied.join(", "))
                } else {
                    "neither".to_string()
                };
                self.push(rel(
                    "hypothesis: order dominance or type dominance",
                    which,
                    "one of the two holds",
                    strict || typed,
                ));
                self.push(conclusion);
            }
        }
        self.bound_order("equation", &eq.problem)?;
        Ok(())
    }

    fn lemma35(&mut self, funcs: &[Named], eps: f64) -> Result<()> {
        let s = self.s;
        let mut borel_done = false;
        for f in funcs {
            let level3 = f.expr.exp_depth() >= 3;
            let modes: &[GrowthMode] = if level3 {
                &[GrowthMode::MLogOrder, GrowthMode::TLogOrder]
            } else {
                &[GrowthMode::MOrder, GrowthMode::TOrder]
            };
            let df = diff(&f.expr)?;
            let g = self.grid_for(f)?;
            for &mode in modes {
                let a = self.order_on(&f.expr, mode, format!("{}_{}.csv", f.file_stem(), mode.name()), &g)?;
                let b = self.order_on(&df, mode, format!("{}_d1_{}.csv", f.file_stem(), mode.name()), &g)?;
                let d = (a.value - b.value).abs();
                self.push(rel(
                    format!("{} order of {} and its derivative", mode.name(), f.label),
                    format!("{d:.4} ({:.4} vs {:.4})", a.value, b.value),
                    format!("<= {}", s.tol.derivative),
                    d <= s.tol.derivative,
                ));
            }
            if !borel_done && !level3 {
                self.borel_pair(f, &df, eps)?;
                borel_done = true;
            }
        }
        Ok(())
    }

    /// `log T(r, f')` against `alpha^{-1}((rho + 4 eps) beta(log gamma(1/(1-r))))`,
    /// shifted with `d = 1/2`; both sides compared through one more log.
    fn borel_pair(&mut self, f: &Named, df: &Expr, eps: f64) -> Result<()> {
        let s = self.s;
        let rho = order_estimate(&f.expr, &s.triple, &s.grid, GrowthMode::TOrder, &s.opts)?.value;
        let radii = s.grid.radii();
        let mut g = Vec::new();
        let mut h = Vec::new();
        for &r in &radii {
            let t = characteristic(df, r, &s.opts)?.t;
            let ln_t = if t.is_zero() { f64::NEG_INFINITY } else { t.logmag };
            // ln log T where defined, else very negative.
            let v = if t.real_sign() > 0 && ln_t > 0.0 { ln_t.ln() } else { -1e300 };
            g.push(v);
            let y = ((rho + 4.0 * eps) * s.triple.denominator(r)).max(s.triple.alpha.cap_value);
            h.push(s.triple.alpha.ln_inverse(y)?);
        }
        let raw = g.clone();
        let mut run_max = f64::NEG_INFINITY;
        for v in g.iter_mut() {
            run_max = run_max.max(*v);
            *v = run_max;
        }
        if raw != g {
            self.rep.notes.push("log T(r, f') replaced by its running maximum".into());
        }
        let flags: Vec<bool> = g.iter().zip(&h).map(|(a, b)| a > b).collect();
        let bad = ExceptionalSet::from_grid_cells(&s.grid, &flags);
        let rep = borel_shift_check(&radii, &g, &h, &bad, 0.5, Interpolation::StepLower)?;
        self.push(rel(
            format!("shifted bound log T(r, f') <= h(1 - (1-r)/2) for {}", f.label),
            format!(
                "first violation {:?}, {} checked, {} beyond the grid, premise exceptional set {}",
                rep.first_violation, rep.checked, rep.skipped, bad
            ),
            "no violation",
            rep.pass,
        ));
        Ok(())
    }

    fn lower_set(&mut self, f: &Named, mu: f64, typed: Option<(f64, f64)>) -> Result<()> {
        let s = self.s;
        let g = self.grid_for(f)?;
        let rep = lower_set_measure(&f.expr, &s.triple, mu, &g, typed, &s.opts)?;
        let mut csv = String::from("r,holds,cumulative_log_measure\n");
        for i in 0..rep.radii.len() {
            csv.push_str(&format!("{},{},{}\n", rep.radii[i], rep.holds[i], rep.cumulative[i]));
        }
        self.rep.tables.push(Table {
            file: format!("{}_lower_set.csv", f.file_stem()),
            csv,
            plot: None,
        });
        let what = match typed {
            None => format!("order {:.4} above mu = {mu}", rep.measured),
            Some((omega, rho)) => format!("type {:.4} above omega = {omega} at rho = {rho}", rep.measured),
        };
        self.rep.notes.push(what);
        self.push(rel(
            format!("lower-bound set for {} has growing log-measure", f.label),
            format!("{:.4} total, set {}", rep.cumulative.last().copied().unwrap_or(0.0), rep.set),
            "> 3 with non-decreasing tail increments",
            rep.unbounded,
        ));
        Ok(())
    }
}

/// Runs every scenario with its section of `cfg` (top-level keys underneath).
pub fn run_suite(cfg: &crate::config::ConfigFile) -> Vec<(ScenarioName, Result<ScenarioReport>)> {
    ScenarioName::ALL
        .iter()
        .map(|&n| (n, Scenario::from_params(n, &cfg.for_section(n.as_str())).map(|s| run(&s))))
        .collect()
}
