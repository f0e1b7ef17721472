//! Difference-in-differences, event studies and moderated DiD.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TreatmentFlags, SECONDS_PER_DAY};
use crate::math;
use crate::ols::{self, Design, OlsFit};
use crate::parametric::Z_95;
use crate::{Error, Result};

/// One regression coefficient with HC1 inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub control_pre: Cell,
    pub control_post: Cell,
    pub treated_pre: Cell,
    pub treated_post: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidResult {
    /// `constant`, `treat`, `post`, `did`, then any moderator terms.
    pub terms: Vec<Term>,
    pub cells: CellMeans,
    pub n: usize,
    pub r_squared: f64,
}

impl DidResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn did(&self) -> &Term {
        self.term("did").expect("did term is always present")
    }
}

fn flags(dataset: &Dataset) -> Result<Vec<TreatmentFlags>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset
        .records()
        .iter()
        .map(|r| r.treatment.ok_or_else(|| Error::invalid("treatment", format!("record `{}` has no treat/post flags", r.id))))
        .collect()
}

fn indicator(xs: &[TreatmentFlags], f: impl Fn(&TreatmentFlags) -> bool) -> Vec<f64> {
    xs.iter().map(|x| if f(x) { 1.0 } else { 0.0 }).collect()
}

fn terms_of(fit: &OlsFit) -> Vec<Term> {
    let se = fit.robust_se();
    fit.names
        .iter()
        .zip(&fit.coefficients)
        .zip(&se)
        .map(|((name, &estimate), &se)| Term { name: name.clone(), estimate, se, p_value: math::normal_two_sided_p(estimate / se) })
        .collect()
}

fn cells(dataset: &Dataset, fl: &[TreatmentFlags]) -> Result<CellMeans> {
    let cell = |treated: bool, post: bool, label: &str| {
        let ys: Vec<f64> = dataset
            .records()
            .iter()
            .zip(fl)
            .filter(|(_, f)| f.treated == treated && f.post == post)
            .map(|(r, _)| r.response_time)
            .collect();
        if ys.is_empty() {
            return Err(Error::EmptyCell(label.to_string()));
        }
        Ok(Cell { n: ys.len(), mean: math::mean(&ys) })
    };
    Ok(CellMeans {
        control_pre: cell(false, false, "control-pre")?,
        control_post: cell(false, true, "control-post")?,
        treated_pre: cell(true, false, "treated-pre")?,
        treated_post: cell(true, true, "treated-post")?,
    })
}

fn base_design(fl: &[TreatmentFlags]) -> Design {
    let mut d = Design::with_intercept(fl.len());
    d.push("treat", indicator(fl, |f| f.treated))
        .push("post", indicator(fl, |f| f.post))
        .push("did", indicator(fl, |f| f.treated && f.post));
    d
}

/// Saturated 2×2 DiD of response time on `1, treat, post, treat·post`.
pub fn did_2x2(dataset: &Dataset) -> Result<DidResult> {
    let fl = flags(dataset)?;
    let cells = cells(dataset, &fl)?;
    let fit = ols::fit(&base_design(&fl), &dataset.response_times())?;
    Ok(DidResult { terms: terms_of(&fit), cells, n: fit.n, r_squared: fit.r_squared })
}

/// A boolean covariate interacted with the post indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moderator {
    pub name: String,
    pub values: Vec<bool>,
}

/// The 2×2 design plus, per moderator `m`, a main effect `m` and `post_x_m`.
pub fn did_interactions(dataset: &Dataset, moderators: &[Moderator]) -> Result<DidResult> {
    let fl = flags(dataset)?;
    let cells = cells(dataset, &fl)?;
    let mut design = base_design(&fl);
    for m in moderators {
        if m.values.len() != fl.len() {
            return Err(Error::invalid("moderators", format!("`{}` has {} values for {} records", m.name, m.values.len(), fl.len())));
        }
        let main: Vec<f64> = m.values.iter().map(|&v| f64::from(u8::from(v))).collect();
        let inter: Vec<f64> = main.iter().zip(&fl).map(|(v, f)| if f.post { *v } else { 0.0 }).collect();
        design.push(m.name.clone(), main).push(format!("post_x_{}", m.name), inter);
    }
    let fit = ols::fit(&design, &dataset.response_times())?;
    Ok(DidResult { terms: terms_of(&fit), cells, n: fit.n, r_squared: fit.r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTimeEstimate {
    /// Bins relative to treatment; `-1` is the reference.
    pub event_time: i64,
    pub reference: bool,
    /// `None` when a treated or control cell of the bin is empty.
    pub coefficient: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub p_value: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyResult {
    pub bin_weeks: u32,
    pub estimates: Vec<EventTimeEstimate>,
    pub n: usize,
    pub r_squared: f64,
}

impl EventStudyResult {
    pub fn at(&self, event_time: i64) -> Option<&EventTimeEstimate> {
        self.estimates.iter().find(|e| e.event_time == event_time)
    }
}

pub const REFERENCE_BIN: i64 = -1;

fn bin_label(b: i64) -> String {
    format!("{b}")
}

/// Event-time bins of `bin_weeks` weeks, floored relative to the treatment instant.
pub fn event_bins(dataset: &Dataset, bin_weeks: u32) -> Result<Vec<i64>> {
    let t0 = dataset.treatment_time().ok_or(Error::NoPostPeriod)?;
    let width = i64::from(bin_weeks) * 7 * SECONDS_PER_DAY;
    Ok(dataset.records().iter().map(|r| (r.dispatch_time.seconds() - t0.seconds()).div_euclid(width)).collect())
}

/// Treat × event-time indicators with bin fixed effects and a treat main effect.
pub fn event_study(dataset: &Dataset, bin_weeks: u32) -> Result<EventStudyResult> {
    if bin_weeks == 0 {
        return Err(Error::invalid("bin_weeks", "must be at least one week"));
    }
    let fl = flags(dataset)?;
    let bins = event_bins(dataset, bin_weeks)?;
    let mut counts: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (b, f) in bins.iter().zip(&fl) {
        let e = counts.entry(*b).or_default();
        if f.treated {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let pre = counts.keys().filter(|b| **b < 0).count();
    let post = counts.keys().filter(|b| **b >= 0).count();
    if pre < 2 {
        return Err(Error::InsufficientData { needed: 2, got: pre });
    }
    if post < 1 {
        return Err(Error::NoPostPeriod);
    }
    if !counts.contains_key(&REFERENCE_BIN) {
        return Err(Error::EmptyCell(format!("reference bin {REFERENCE_BIN}")));
    }

    let n = fl.len();
    let mut design = Design::with_intercept(n);
    design.push("treat", indicator(&fl, |f| f.treated));
    for &b in counts.keys().filter(|b| **b != REFERENCE_BIN) {
        design.push(format!("bin{}", bin_label(b)), bins.iter().map(|x| f64::from(u8::from(*x == b))).collect());
    }
    let estimable: Vec<i64> = counts.iter().filter(|(b, (t, c))| **b != REFERENCE_BIN && *t > 0 && *c > 0).map(|(b, _)| *b).collect();
    for &b in &estimable {
        let col = bins.iter().zip(&fl).map(|(x, f)| f64::from(u8::from(*x == b && f.treated))).collect();
        design.push(format!("treat_x_{}", bin_label(b)), col);
    }
    let fit = ols::fit(&design, &dataset.response_times())?;
    let se = fit.robust_se();

    let estimates = counts
        .iter()
        .map(|(&b, &(n_treated, n_control))| {
            if b == REFERENCE_BIN {
                return EventTimeEstimate {
                    event_time: b,
                    reference: true,
                    coefficient: Some(0.0),
                    se: Some(0.0),
                    ci_lower: Some(0.0),
                    ci_upper: Some(0.0),
                    p_value: None,
                    n_treated,
                    n_control,
                };
            }
            let j = fit.index(&format!("treat_x_{}", bin_label(b)));
            let coef = j.map(|j| fit.coefficients[j]);
            let s = j.map(|j| se[j]);
            EventTimeEstimate {
                event_time: b,
                reference: false,
                coefficient: coef,
                se: s,
                ci_lower: coef.zip(s).map(|(c, s)| c - Z_95 * s),
                ci_upper: coef.zip(s).map(|(c, s)| c + Z_95 * s),
                p_value: coef.zip(s).map(|(c, s)| math::normal_two_sided_p(c / s)),
                n_treated,
                n_control,
            }
        })
        .collect();
    Ok(EventStudyResult { bin_weeks, estimates, n, r_squared: fit.r_squared })
}
