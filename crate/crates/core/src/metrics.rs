//! Plan-similarity metrics: Exact Match (EM), Longest Common Subsequence
//! (LCSS) and Longest Common Subarray (LCSA).
//!
//! Each metric comes in two projections: `A` compares skill names only, `P`
//! compares the skill together with its normalized arguments. Scores are
//! normalized by `max(|pred|, |gt|)`; `done()` never takes part.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::plan_dsl::{Action, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricMode {
    /// Action type only.
    A,
    /// Action type and arguments.
    P,
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricMode::A => "A",
            MetricMode::P => "P",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    EmptyInput,
}

/// Comparable projection of one action under a mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token<'a> {
    Skill(&'a str),
    Call(&'a str, &'a [String]),
}

/// Projects a plan's non-terminator actions.
pub fn project(plan: &Plan, mode: MetricMode) -> Vec<Token<'_>> {
    plan.actions
        .iter()
        .filter(|a| !a.is_done())
        .map(|a: &Action| match mode {
            MetricMode::A => Token::Skill(&a.skill),
            MetricMode::P => Token::Call(&a.skill, &a.args),
        })
        .collect()
}

/// Length of the longest common subsequence, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Length of the longest common contiguous run.
pub fn longest_common_run<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // run[j] = length of the common run ending at a[i-1], b[j-1]
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

fn normalized(common: usize, a: usize, b: usize) -> f64 {
    match a.max(b) {
        0 => 1.0,
        denom => common as f64 / denom as f64,
    }
}

pub fn exact_match(pred: &Plan, gt: &Plan, mode: MetricMode) -> u8 {
    u8::from(project(pred, mode) == project(gt, mode))
}

pub fn lcs_subsequence(pred: &Plan, gt: &Plan, mode: MetricMode) -> f64 {
    let (p, g) = (project(pred, mode), project(gt, mode));
    normalized(lcs_length(&p, &g), p.len(), g.len())
}

pub fn lcs_subarray(pred: &Plan, gt: &Plan, mode: MetricMode) -> f64 {
    let (p, g) = (project(pred, mode), project(gt, mode));
    normalized(longest_common_run(&p, &g), p.len(), g.len())
}

/// Per-task metric sextuple plus the raw lengths behind each ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task_id: String,
    pub em_a: u8,
    pub em_p: u8,
    pub lcss_a: f64,
    pub lcss_p: f64,
    pub lcsa_a: f64,
    pub lcsa_p: f64,
    pub pred_len: usize,
    pub gt_len: usize,
    pub parse_ok: bool,
    pub lcss_len_a: usize,
    pub lcss_len_p: usize,
    pub lcsa_len_a: usize,
    pub lcsa_len_p: usize,
    /// Grouping keys such as `length` or `class`.
    #[serde(default)]
    pub groups: BTreeMap<String, String>,
}

impl EvalRecord {
    pub fn score(task_id: impl Into<String>, pred: &Plan, gt: &Plan, parse_ok: bool) -> Self {
        let (pa, ga) = (project(pred, MetricMode::A), project(gt, MetricMode::A));
        let (pp, gp) = (project(pred, MetricMode::P), project(gt, MetricMode::P));
        let lcss_len_a = lcs_length(&pa, &ga);
        let lcss_len_p = lcs_length(&pp, &gp);
        let lcsa_len_a = longest_common_run(&pa, &ga);
        let lcsa_len_p = longest_common_run(&pp, &gp);
        let (np, ng) = (pa.len(), ga.len());
        Self {
            task_id: task_id.into(),
            em_a: u8::from(pa == ga),
            em_p: u8::from(pp == gp),
            lcss_a: normalized(lcss_len_a, np, ng),
            lcss_p: normalized(lcss_len_p, np, ng),
            lcsa_a: normalized(lcsa_len_a, np, ng),
            lcsa_p: normalized(lcsa_len_p, np, ng),
            pred_len: np,
            gt_len: ng,
            parse_ok,
            lcss_len_a,
            lcss_len_p,
            lcsa_len_a,
            lcsa_len_p,
            groups: BTreeMap::new(),
        }
    }

    pub fn with_group(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.groups.insert(key.into(), value.into());
        self
    }
}

/// Means of the six metrics over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: String,
    pub value: String,
    pub count: usize,
    pub parse_failure_rate: f64,
    pub em_a: f64,
    pub lcss_a: f64,
    pub lcsa_a: f64,
    pub em_p: f64,
    pub lcss_p: f64,
    pub lcsa_p: f64,
}

impl GroupStats {
    fn from_records(key: &str, value: &str, records: &[&EvalRecord]) -> Self {
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&EvalRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            key: key.to_string(),
            value: value.to_string(),
            count: records.len(),
            parse_failure_rate: mean(&|r| if r.parse_ok { 0.0 } else { 1.0 }),
            em_a: mean(&|r| f64::from(r.em_a)),
            lcss_a: mean(&|r| r.lcss_a),
            lcsa_a: mean(&|r| r.lcsa_a),
            em_p: mean(&|r| f64::from(r.em_p)),
            lcss_p: mean(&|r| r.lcss_p),
            lcsa_p: mean(&|r| r.lcsa_p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: GroupStats,
    /// One entry per (key, value) pair, keys in the requested order and
    /// values in natural order (numeric values sort numerically).
    pub groups: Vec<GroupStats>,
}

pub const CSV_HEADER: &str = "group,value,count,parse_failure_rate,p_em,p_lcss,p_lcsa,a_em,a_lcss,a_lcsa";

fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

pub fn aggregate(records: &[EvalRecord], group_keys: &[&str]) -> Result<EvalReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let all: Vec<&EvalRecord> = records.iter().collect();
    let overall = GroupStats::from_records("all", "all", &all);
    let mut groups = Vec::new();
    for key in group_keys {
        let mut buckets: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
        for r in records {
            if let Some(v) = r.groups.get(*key) {
                buckets.entry(v.as_str()).or_default().push(r);
            }
        }
        let mut values: Vec<&str> = buckets.keys().copied().collect();
        values.sort_by(|a, b| natural_cmp(a, b));
        for v in values {
            groups.push(GroupStats::from_records(key, v, &buckets[v]));
        }
    }
    Ok(EvalReport { overall, groups })
}

impl EvalReport {
    pub fn groups_for<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a GroupStats> + 'a {
        self.groups.iter().filter(move |g| g.key == key)
    }

    /// CSV with one row per group value of `key`, or the overall row
    /// followed by every group when `key` is `None`.
    pub fn to_csv(&self, key: Option<&str>) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let rows = key
            .is_none()
            .then_some(&self.overall)
            .into_iter()
            .chain(self.groups.iter().filter(|g| key.is_none_or(|k| g.key == k)));
        for g in rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                g.key,
                csv_field(&g.value),
                g.count,
                g.parse_failure_rate,
                g.em_p,
                g.lcss_p,
                g.lcsa_p,
                g.em_a,
                g.lcss_a,
                g.lcsa_a
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
