//! Scenario documents: lists of run-length and delay cells evaluated side by
//! side with their closed-form counterparts.

use std::fmt::Write as _;

use covshift::{solve_threshold, theoretical_arl, Error, Result};
use serde::{Deserialize, Serialize};

use crate::factor::ChangeModel;
use crate::generator::{Base, GeneratorSpec, Innovation, PostChange};
use crate::montecarlo::{cell_loading, monte_carlo_arl, monte_carlo_edd, DepOrderChoice, McConfig, McResult, SummaryRecipe};
use crate::population::population_edd_bound;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// Used when the caller does not override it.
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Arl(ArlCell),
    Edd(EddCell),
}

fn default_n0() -> usize {
    200
}

fn default_arl_base() -> Base {
    Base::Toeplitz { r: 0.6 }
}

fn default_edd_base() -> Base {
    Base::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArlCell {
    pub p: usize,
    pub dep_order: usize,
    pub window: usize,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub target_arl: Option<f64>,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_arl_base")]
    pub base: Base,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default)]
    pub order: DepOrderChoice,
    /// Defaults to ten times the theoretical run length.
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// A reference value to print alongside.
    #[serde(default)]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EddCell {
    pub p: usize,
    pub dep_order: usize,
    pub window: usize,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub target_arl: Option<f64>,
    pub model: ChangeModel,
    pub rho: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
    /// Last pre-change index; defaults to `n0`.
    #[serde(default)]
    pub change_at: Option<usize>,
    #[serde(default = "default_edd_base")]
    pub base: Base,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default)]
    pub order: DepOrderChoice,
    /// Defaults to ten times the window.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub reference: Option<f64>,
}

fn resolve_threshold(threshold: Option<f64>, target: Option<f64>, window: usize) -> Result<f64> {
    match (threshold, target) {
        (Some(a), _) => Ok(a),
        (None, Some(arl)) => Ok(solve_threshold(arl, window)?.threshold),
        (None, None) => Err(Error::Config("cell needs a threshold or a target_arl".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub kind: String,
    pub label: String,
    pub p: usize,
    pub dep_order: usize,
    pub window: usize,
    pub threshold: f64,
    /// Closed-form run length, or the delay bound.
    pub theoretical: f64,
    pub monte_carlo: Option<McResult>,
    pub reference: Option<f64>,
}

impl Cell {
    pub fn evaluate(&self, replicates: usize, seed: u64) -> Result<CellOutcome> {
        match self {
            Cell::Arl(c) => {
                let a = resolve_threshold(c.threshold, c.target_arl, c.window)?;
                let arl = theoretical_arl(a, c.window)?;
                let spec = GeneratorSpec {
                    p: c.p,
                    dep_order: c.dep_order,
                    innovation: c.innovation,
                    base: c.base,
                    post_change: None,
                };
                spec.validate()?;
                let mc = if replicates == 0 {
                    None
                } else {
                    let cfg = McConfig {
                        spec,
                        recipe: SummaryRecipe { dep_order: c.order, ..SummaryRecipe::new(c.n0) },
                        threshold: a,
                        window: c.window,
                        max_steps: c.max_steps.unwrap_or((10.0 * arl).ceil() as usize),
                        seed,
                    };
                    Some(monte_carlo_arl(&cfg, replicates, false)?)
                };
                Ok(CellOutcome {
                    kind: "arl".into(),
                    label: format!("(a={a:.2}, ARL={arl:.0})"),
                    p: c.p,
                    dep_order: c.dep_order,
                    window: c.window,
                    threshold: a,
                    theoretical: arl,
                    monte_carlo: mc,
                    reference: c.reference,
                })
            }
            Cell::Edd(c) => {
                let a = resolve_threshold(c.threshold, c.target_arl, c.window)?;
                let spec = GeneratorSpec {
                    p: c.p,
                    dep_order: c.dep_order,
                    innovation: c.innovation,
                    base: c.base,
                    post_change: Some(PostChange {
                        model: c.model,
                        rho: c.rho,
                        change_at: c.change_at.unwrap_or(c.n0),
                    }),
                };
                let q = cell_loading(&spec, seed)?.expect("post-change present");
                let bound = population_edd_bound(&spec, &q, a, c.window)?.bound;
                let mc = if replicates == 0 {
                    None
                } else {
                    let cfg = McConfig {
                        spec,
                        recipe: SummaryRecipe { dep_order: c.order, ..SummaryRecipe::new(c.n0) },
                        threshold: a,
                        window: c.window,
                        max_steps: c.max_steps.unwrap_or(10 * c.window),
                        seed,
                    };
                    Some(monte_carlo_edd(&cfg, replicates, false)?.delays)
                };
                Ok(CellOutcome {
                    kind: "edd".into(),
                    label: format!("model {} rho={}", c.model.label(), c.rho),
                    p: c.p,
                    dep_order: c.dep_order,
                    window: c.window,
                    threshold: a,
                    theoretical: bound,
                    monte_carlo: mc,
                    reference: c.reference,
                })
            }
        }
    }
}

/// Evaluates every cell; cell `k` uses seed `seed + k`.
pub fn run_scenario(scenario: &Scenario, replicates: usize, seed: u64) -> Result<Vec<CellOutcome>> {
    scenario
        .cells
        .iter()
        .enumerate()
        .map(|(k, c)| c.evaluate(replicates, seed.wrapping_add(k as u64)))
        .collect()
}

fn opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.prec$}"),
        Some(_) => "inf".into(),
        None => "-".into(),
    }
}

/// Aligned text table, one line per cell.
pub fn render_table(rows: &[CellOutcome]) -> String {
    let header = [
        "kind", "cell", "p", "M", "H", "a", "theory", "monte carlo", "s.e.", "reps", "reference", "flags",
    ];
    let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let mc = r.monte_carlo.as_ref();
        let mut flags = Vec::new();
        if let Some(m) = mc {
            if m.censored > 0 {
                flags.push(format!("censored={}", m.censored));
            }
            if m.discarded > 0 {
                flags.push(format!("discarded={}", m.discarded));
            }
            if m.unreliable {
                flags.push("unreliable".to_string());
            }
        }
        lines.push(vec![
            r.kind.clone(),
            r.label.clone(),
            r.p.to_string(),
            r.dep_order.to_string(),
            r.window.to_string(),
            format!("{:.4}", r.threshold),
            opt(Some(r.theoretical), 2),
            opt(mc.map(|m| m.mean), 2),
            opt(mc.map(|m| m.std_error), 2),
            mc.map_or("0".into(), |m| m.replicates.to_string()),
            opt(r.reference, 2),
            flags.join(","),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let mut line = String::new();
        for (c, cell) in l.iter().enumerate() {
            if c > 1 {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{}{cell:<w$}", if c == 0 { "" } else { "  " }, w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
