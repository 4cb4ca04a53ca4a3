//! JSON and CSV formats. Every index in a JSON file is 1-based; triplets
//! `[i, j, v]` have `i <= j` and hold unscaled matrix entries.

use std::fmt::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::admm::{IterationRecord, Solution};
use crate::chordal::{Clique, Graph};
use crate::error::{Error, Result};
use crate::problem::{SdpProblem, Sense, TripletConstraint};
use crate::reweight::RoundRecord;
use crate::symsparse::{inner, Pattern, PatternVec};

/// Failure to read or interpret an input file.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Parse failure; `field` is the JSON path of the offending value.
    #[error("{path}: field `{field}`: {message}")]
    Parse { path: String, field: String, message: String },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: Error,
    },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> std::result::Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> std::result::Result<T, InputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        InputError::Parse {
            path: origin.to_string(),
            field,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidProblem(msg.into())
}

fn zero_based(field: &str, v: usize, n: usize) -> Result<usize> {
    if v == 0 || v > n {
        return Err(invalid(format!("{field}: index {v} outside 1..={n}")));
    }
    Ok(v - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphJson {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            n: g.n(),
            edges: g.edges().map(|(i, j)| (i + 1, j + 1)).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let mut g = Graph::new(self.n);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let field = format!("edges[{k}]");
            let (a, b) = (zero_based(&field, i, self.n)?, zero_based(&field, j, self.n)?);
            if a >= b {
                return Err(invalid(format!("{field}: expected i < j, got [{i}, {j}]")));
            }
            g.add_edge(a, b)?;
        }
        Ok(g)
    }
}

pub type TripletJson = (usize, usize, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseJson {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintJson {
    pub a: Vec<TripletJson>,
    pub b: f64,
    pub sense: SenseJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    pub n: usize,
    pub cost: Vec<TripletJson>,
    pub constraints: Vec<ConstraintJson>,
    pub target_rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_blocks: Option<Vec<Vec<usize>>>,
    /// Declared sparsity pattern; defaults to the aggregate pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<GraphJson>,
}

fn triplets_to_internal(field: &str, t: &[TripletJson], n: usize) -> Result<Vec<(usize, usize, f64)>> {
    t.iter()
        .enumerate()
        .map(|(k, &(i, j, v))| {
            let f = format!("{field}[{k}]");
            if i > j {
                return Err(invalid(format!("{f}: expected upper-triangle entry (i <= j), got [{i}, {j}]")));
            }
            if !v.is_finite() {
                return Err(invalid(format!("{f}: value is not finite")));
            }
            Ok((zero_based(&f, i, n)?, zero_based(&f, j, n)?, v))
        })
        .collect()
}

fn triplets_to_json(t: &[(usize, usize, f64)]) -> Vec<TripletJson> {
    t.iter().map(|&(i, j, v)| (i + 1, j + 1, v)).collect()
}

impl ProblemJson {
    pub fn to_problem(&self) -> Result<SdpProblem> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("n: must be at least 1"));
        }
        let cost = triplets_to_internal("cost", &self.cost, n)?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if !c.b.is_finite() {
                    return Err(invalid(format!("constraints[{k}].b: value is not finite")));
                }
                Ok(TripletConstraint {
                    a: triplets_to_internal(&format!("constraints[{k}].a"), &c.a, n)?,
                    b: c.b,
                    sense: match c.sense {
                        SenseJson::Eq => Sense::Eq,
                        SenseJson::Le => Sense::Le,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let blocks = self
            .penalty_blocks
            .as_ref()
            .map(|bs| {
                bs.iter()
                    .enumerate()
                    .map(|(k, b)| {
                        let f = format!("penalty_blocks[{k}]");
                        let v = b.iter().map(|&i| zero_based(&f, i, n)).collect::<Result<Vec<_>>>()?;
                        Clique::new(v).map_err(|e| invalid(format!("{f}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let pattern = match &self.pattern {
            Some(g) => {
                if g.n != n {
                    return Err(invalid(format!("pattern.n: expected {n}, got {}", g.n)));
                }
                Some(g.to_graph().map_err(|e| invalid(format!("pattern.{e}")))?)
            }
            None => None,
        };
        SdpProblem::from_triplets(n, pattern, &cost, &constraints, self.target_rank, blocks)
    }

    pub fn from_problem(p: &SdpProblem) -> Self {
        Self {
            n: p.n,
            cost: triplets_to_json(&p.cost.to_triplets()),
            constraints: p
                .constraints
                .iter()
                .map(|c| ConstraintJson {
                    a: triplets_to_json(&c.a.to_triplets()),
                    b: c.b,
                    sense: match c.sense {
                        Sense::Eq => SenseJson::Eq,
                        Sense::Le => SenseJson::Le,
                    },
                })
                .collect(),
            target_rank: p.target_rank,
            penalty_blocks: p
                .penalty_blocks
                .as_ref()
                .map(|bs| bs.iter().map(|b| b.vertices().iter().map(|v| v + 1).collect()).collect()),
            pattern: Some(GraphJson::from_graph(p.pattern.graph())),
        }
    }
}

pub fn load_problem(path: &Path) -> std::result::Result<SdpProblem, InputError> {
    let raw: ProblemJson = read_json(path)?;
    raw.to_problem().map_err(|source| InputError::Invalid {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub n: usize,
    pub status: String,
    /// `⟨C, X⟩`.
    pub objective: f64,
    /// `⟨C + W_C, X⟩` of the final solve.
    pub penalized_objective: f64,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub consensus_gap: f64,
    pub constraint_residual: f64,
    pub clique_ranks: Vec<usize>,
    pub max_clique_rank: usize,
    pub target_rank: usize,
    pub rounds: usize,
    pub stop: String,
    /// Upper-triangle entries of `X` on the chordal-extended pattern.
    pub x: Vec<TripletJson>,
}

impl SolutionJson {
    pub fn new(sol: &Solution, target_rank: usize, rounds: usize, stop: &str) -> Self {
        Self {
            n: sol.x.pattern().n(),
            status: sol.status.as_str().to_string(),
            objective: sol.base_objective,
            penalized_objective: sol.objective,
            iterations: sol.iterations,
            primal_res: sol.primal_res,
            dual_res: sol.dual_res,
            consensus_gap: sol.consensus_gap,
            constraint_residual: sol.constraint_residual,
            clique_ranks: sol.clique_ranks.clone(),
            max_clique_rank: sol.max_clique_rank(),
            target_rank,
            rounds,
            stop: stop.to_string(),
            x: triplets_to_json(&sol.x.to_triplets()),
        }
    }

    /// `X` on the pattern of its own entries (diagonal included).
    pub fn x_vec(&self) -> Result<PatternVec> {
        let t = triplets_to_internal("x", &self.x, self.n)?;
        let mut g = Graph::new(self.n);
        for &(i, j, _) in &t {
            g.add_edge(i, j)?;
        }
        PatternVec::from_triplets(&Pattern::new(g), &t)
    }

    /// `⟨C, X⟩` recomputed from the stored entries.
    pub fn objective_for(&self, p: &SdpProblem) -> Result<f64> {
        let x = self.x_vec()?;
        let cost = PatternVec::from_triplets(x.pattern(), &p.cost.to_triplets())?;
        inner(&cost, &x)
    }
}

/// CSV with a fixed header; floats use the shortest round-trip form.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.text)
    }
}

pub fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").expect("write to String");
    s
}

pub const ITERATION_HEADER: [&str; 6] = ["iter", "objective", "primal_res", "dual_res", "rho", "max_clique_rank"];
pub const ROUND_HEADER: [&str; 5] = ["round", "objective", "max_clique_rank", "min_rank_ratio", "solver_iters"];

pub fn iteration_cells(r: &IterationRecord) -> Vec<String> {
    vec![
        r.iter.to_string(),
        fmt_f64(r.objective),
        fmt_f64(r.primal_res),
        fmt_f64(r.dual_res),
        fmt_f64(r.rho),
        r.max_clique_rank.to_string(),
    ]
}

pub fn round_cells(r: &RoundRecord) -> Vec<String> {
    vec![
        r.round.to_string(),
        fmt_f64(r.objective),
        r.max_clique_rank.to_string(),
        fmt_f64(r.min_rank_ratio),
        r.solver_iters.to_string(),
    ]
}

/// Input of the completion tool: specified entries of a symmetric matrix.
/// The pattern is the set of listed positions plus the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionInput {
    pub n: usize,
    pub entries: Vec<TripletJson>,
}

impl CompletionInput {
    pub fn to_pattern_vec(&self) -> Result<PatternVec> {
        if self.n == 0 {
            return Err(invalid("n: must be at least 1"));
        }
        let t = triplets_to_internal("entries", &self.entries, self.n)?;
        let mut g = Graph::new(self.n);
        for &(i, j, _) in &t {
            g.add_edge(i, j)?;
        }
        let pattern = Pattern::new(g);
        let mut seen = std::collections::BTreeSet::new();
        for (k, &(i, j, _)) in t.iter().enumerate() {
            if !seen.insert((i, j)) {
                return Err(invalid(format!("entries[{k}]: duplicate position [{}, {}]", i + 1, j + 1)));
            }
        }
        PatternVec::from_triplets(&pattern, &t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOutput {
    pub n: usize,
    pub rank: usize,
    pub max_clique_rank: usize,
    /// Dense row-major completion.
    pub matrix: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_json_round_trip() {
        let text = r#"{"n": 3, "cost": [[1, 2, 0.5], [2, 3, -1.0]],
            "constraints": [{"a": [[1, 1, 1.0]], "b": 1.0, "sense": "eq"},
                            {"a": [[2, 2, 1.0], [3, 3, 1.0]], "b": 2.0, "sense": "le"}],
            "target_rank": 1, "penalty_blocks": [[1, 2]]}"#;
        let raw: ProblemJson = parse_json(text, "inline").unwrap();
        let p = raw.to_problem().unwrap();
        assert_eq!(p.n, 3);
        assert_eq!(p.constraints[1].sense, Sense::Le);
        assert_eq!(p.penalty_blocks.as_ref().unwrap()[0].vertices(), &[0, 1]);
        assert!((p.cost.get(0, 1) - 0.5).abs() < 1e-15);
        let again = ProblemJson::from_problem(&p).to_problem().unwrap();
        assert_eq!(again.pattern.graph(), p.pattern.graph());
        assert!(again.cost.values().iter().zip(p.cost.values()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text = r#"{"n": 2, "cost": [], "constraints": [{"a": [[1, 1, "x"]], "b": 1, "sense": "eq"}], "target_rank": 1}"#;
        match parse_json::<ProblemJson>(text, "p.json") {
            Err(InputError::Parse { field, .. }) => assert!(field.starts_with("constraints[0].a[0]"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_sense = r#"{"n": 2, "cost": [], "constraints": [{"a": [], "b": 1, "sense": "ge"}], "target_rank": 1}"#;
        match parse_json::<ProblemJson>(bad_sense, "p.json") {
            Err(InputError::Parse { field, .. }) => assert_eq!(field, "constraints[0].sense"),
            other => panic!("unexpected {other:?}"),
        }
        let lower: ProblemJson =
            parse_json(r#"{"n": 2, "cost": [[2, 1, 1.0]], "constraints": [], "target_rank": 1}"#, "p").unwrap();
        assert!(lower.to_problem().unwrap_err().to_string().contains("cost[0]"));
        let range: ProblemJson =
            parse_json(r#"{"n": 2, "cost": [[0, 1, 1.0]], "constraints": [], "target_rank": 1}"#, "p").unwrap();
        assert!(range.to_problem().is_err());
    }

    #[test]
    fn graph_json_is_one_based() {
        let g = Graph::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let j = GraphJson::from_graph(&g);
        assert_eq!(j.edges, vec![(1, 3), (2, 3)]);
        assert_eq!(j.to_graph().unwrap(), g);
        assert!(GraphJson { n: 2, edges: vec![(2, 1)] }.to_graph().is_err());
    }

    #[test]
    fn csv_floats_round_trip() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[fmt_f64(0.1 + 0.2), fmt_f64(1e-300)]);
        let line = c.as_str().lines().nth(1).unwrap();
        let back: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1 + 0.2, 1e-300]);
    }
}
