//! Discrete Bayesian network over the tertile-binned aspiration deltas:
//! BIC hill-climbing structure search, maximum-likelihood CPTs and exact
//! inference by variable elimination.
//!
//! Every variable has three states (low, medium, high). Parent
//! configurations are indexed in mixed radix with the first (lowest-index)
//! parent as the most significant digit.

use std::cell::RefCell;
use std::collections::HashMap;

use log::warn;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AspirationDelta, AspirationField};
use crate::rng::{derive_seed, seeded};
use crate::stats::{quantile_bins, Tertile};

pub const CARDINALITY: usize = 3;
pub const MAX_PARENTS: usize = 3;
pub const DEFAULT_RESTARTS: usize = 5;
const PERTURB_MOVES: usize = 3;
/// Smallest score change treated as an improvement (and tie width).
const SCORE_EPS: f64 = 1e-9;

/// Variable order of the network.
pub const BN_FIELDS: [AspirationField; 4] = [
    AspirationField::Health,
    AspirationField::SciEng,
    AspirationField::SciTech,
    AspirationField::Ict,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDataset {
    pub variables: Vec<String>,
    pub countries: Vec<String>,
    /// One column of categories per variable.
    pub columns: Vec<Vec<Tertile>>,
}

impl DiscreteDataset {
    pub fn new(
        variables: Vec<String>,
        countries: Vec<String>,
        columns: Vec<Vec<Tertile>>,
    ) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::Contract("one column per variable required".into()));
        }
        if columns.iter().any(|c| c.len() != countries.len()) {
            return Err(Error::Contract(
                "every column needs one entry per country".into(),
            ));
        }
        Ok(DiscreteDataset {
            variables,
            countries,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.countries.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Category shares of one variable.
    pub fn marginal(&self, var: usize) -> [f64; CARDINALITY] {
        let mut counts = [0.0; CARDINALITY];
        for t in &self.columns[var] {
            counts[t.index()] += 1.0;
        }
        counts.map(|c| c / self.n_rows() as f64)
    }
}

/// Listwise-complete rows binned per variable into tertiles.
pub fn discretize_dataset(deltas: &[AspirationDelta]) -> Result<DiscreteDataset> {
    let complete: Vec<&AspirationDelta> = deltas
        .iter()
        .filter(|d| BN_FIELDS.iter().all(|f| d.get(*f).is_some()))
        .collect();
    if complete.len() < 3 {
        return Err(Error::insufficient("discretization", 3, complete.len()));
    }
    let columns = BN_FIELDS
        .iter()
        .map(|f| {
            let values: Vec<f64> = complete.iter().map(|d| d.get(*f).unwrap()).collect();
            quantile_bins(&values)
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteDataset::new(
        BN_FIELDS
            .iter()
            .map(|f| f.delta_column().to_string())
            .collect(),
        complete.iter().map(|d| d.country.clone()).collect(),
        columns,
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagStructure {
    pub nodes: Vec<String>,
    /// Sorted parent indices per node.
    parents: Vec<Vec<usize>>,
}

impl DagStructure {
    pub fn empty(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        DagStructure {
            nodes,
            parents: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = DagStructure::empty(nodes);
        for &(p, c) in edges {
            dag.add_edge(p, c)?;
        }
        Ok(dag)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    /// `(parent, child)` pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges()
            .into_iter()
            .map(|(p, c)| (self.nodes[p].clone(), self.nodes[c].clone()))
            .collect()
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in 0..n {
                if self.has_edge(v, c) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_nodes() {
            return Err(Error::Contract(format!("node index {i} out of range")));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        self.check_index(parent)?;
        self.check_index(child)?;
        if parent == child {
            return Err(Error::Contract("self-loops are not allowed".into()));
        }
        if self.has_edge(parent, child) {
            return Err(Error::Contract(format!(
                "duplicate edge {parent} -> {child}"
            )));
        }
        if self.parents[child].len() >= MAX_PARENTS {
            return Err(Error::Contract(format!(
                "node {child} already has {MAX_PARENTS} parents"
            )));
        }
        let pos = self.parents[child].binary_search(&parent).unwrap_err();
        self.parents[child].insert(pos, parent);
        if !self.is_acyclic() {
            self.parents[child].remove(pos);
            return Err(Error::Contract(format!(
                "edge {parent} -> {child} would create a cycle"
            )));
        }
        Ok(())
    }

    pub fn remove_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        self.check_index(child)?;
        match self.parents[child].binary_search(&parent) {
            Ok(pos) => {
                self.parents[child].remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::Contract(format!("no edge {parent} -> {child}"))),
        }
    }

    pub fn reverse_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        self.remove_edge(parent, child)?;
        if let Err(e) = self.add_edge(child, parent) {
            self.add_edge(parent, child)
                .expect("restoring a removed edge");
            return Err(e);
        }
        Ok(())
    }

    /// Free parameters of a three-state network with this structure.
    pub fn free_parameters(&self) -> usize {
        self.parents
            .iter()
            .map(|ps| CARDINALITY.pow(ps.len() as u32) * (CARDINALITY - 1))
            .sum()
    }
}

fn config_index(row: usize, parents: &[usize], data: &DiscreteDataset) -> usize {
    parents.iter().fold(0, |acc, &p| {
        acc * CARDINALITY + data.columns[p][row].index()
    })
}

fn family_counts(
    data: &DiscreteDataset,
    child: usize,
    parents: &[usize],
) -> Vec<[usize; CARDINALITY]> {
    let mut counts = vec![[0usize; CARDINALITY]; CARDINALITY.pow(parents.len() as u32)];
    for row in 0..data.n_rows() {
        counts[config_index(row, parents, data)][data.columns[child][row].index()] += 1;
    }
    counts
}

/// Maximized log-likelihood of one family (natural log, `0 ln 0 = 0`).
pub fn family_log_likelihood(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    family_counts(data, child, parents)
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .filter(|&&c| c > 0)
                .map(|&c| c as f64 * (c as f64 / total as f64).ln())
                .sum::<f64>()
        })
        .sum()
}

/// Log-likelihood minus `(k / 2) ln N` for one family.
pub fn family_score(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    let k = CARDINALITY.pow(parents.len() as u32) * (CARDINALITY - 1);
    family_log_likelihood(data, child, parents) - 0.5 * k as f64 * (data.n_rows() as f64).ln()
}

fn check_structure(structure: &DagStructure, data: &DiscreteDataset) -> Result<()> {
    if structure.nodes != data.variables {
        return Err(Error::Contract(
            "structure nodes do not match dataset variables".into(),
        ));
    }
    if !structure.is_acyclic() {
        return Err(Error::Contract("structure contains a cycle".into()));
    }
    Ok(())
}

pub fn bic_score(structure: &DagStructure, data: &DiscreteDataset) -> Result<f64> {
    check_structure(structure, data)?;
    Ok((0..structure.n_nodes())
        .map(|c| family_score(data, c, structure.parents(c)))
        .sum())
}

/// Memoized family scores keyed by (child, parent bitmask).
struct ScoreCache<'a> {
    data: &'a DiscreteDataset,
    scores: RefCell<HashMap<(usize, u64), f64>>,
}

impl<'a> ScoreCache<'a> {
    fn new(data: &'a DiscreteDataset) -> Self {
        ScoreCache {
            data,
            scores: RefCell::new(HashMap::new()),
        }
    }

    fn family(&self, child: usize, parents: &[usize]) -> f64 {
        let mask = parents.iter().fold(0u64, |m, &p| m | (1 << p));
        *self
            .scores
            .borrow_mut()
            .entry((child, mask))
            .or_insert_with(|| family_score(self.data, child, parents))
    }

    fn total(&self, dag: &DagStructure) -> f64 {
        (0..dag.n_nodes())
            .map(|c| self.family(c, dag.parents(c)))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Add,
    Remove,
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub parent: usize,
    pub child: usize,
}

fn apply_move(dag: &DagStructure, mv: Move) -> Option<DagStructure> {
    let mut next = dag.clone();
    let ok = match mv.kind {
        MoveKind::Add => next.add_edge(mv.parent, mv.child),
        MoveKind::Remove => next.remove_edge(mv.parent, mv.child),
        MoveKind::Reverse => next.reverse_edge(mv.parent, mv.child),
    };
    ok.ok().map(|_| next)
}

fn move_gain(cache: &ScoreCache, dag: &DagStructure, next: &DagStructure, mv: Move) -> f64 {
    let touched: &[usize] = match mv.kind {
        MoveKind::Reverse => &[mv.parent, mv.child],
        _ => &[mv.child],
    };
    touched
        .iter()
        .map(|&c| cache.family(c, next.parents(c)) - cache.family(c, dag.parents(c)))
        .sum()
}

/// Greedy ascent; each step takes the best strictly improving move, ties
/// resolved by the (kind, parent, child) enumeration order.
fn greedy(cache: &ScoreCache, mut dag: DagStructure) -> DagStructure {
    let n = dag.n_nodes();
    loop {
        let mut best: Option<(f64, DagStructure)> = None;
        for kind in [MoveKind::Add, MoveKind::Remove, MoveKind::Reverse] {
            for parent in 0..n {
                for child in 0..n {
                    if parent == child {
                        continue;
                    }
                    let mv = Move {
                        kind,
                        parent,
                        child,
                    };
                    let Some(next) = apply_move(&dag, mv) else {
                        continue;
                    };
                    let gain = move_gain(cache, &dag, &next, mv);
                    if gain > SCORE_EPS && best.as_ref().is_none_or(|(g, _)| gain > g + SCORE_EPS) {
                        best = Some((gain, next));
                    }
                }
            }
        }
        match best {
            Some((_, next)) => {
                assert!(next.is_acyclic(), "accepted move produced a cycle");
                dag = next;
            }
            None => return dag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillClimbOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl HillClimbOptions {
    pub fn with_seed(seed: u64) -> Self {
        HillClimbOptions {
            restarts: DEFAULT_RESTARTS,
            seed,
        }
    }
}

/// Structure search from the empty graph with the default restart count.
pub fn hill_climb(data: &DiscreteDataset, seed: u64) -> DagStructure {
    hill_climb_with(data, &HillClimbOptions::with_seed(seed)).0
}

/// Returns the best structure and its BIC. Each restart perturbs the
/// incumbent with a few random legal moves and climbs again; a restart
/// replaces the incumbent only when it scores strictly higher.
pub fn hill_climb_with(data: &DiscreteDataset, opts: &HillClimbOptions) -> (DagStructure, f64) {
    let cache = ScoreCache::new(data);
    let n = data.n_vars();
    let mut best = greedy(&cache, DagStructure::empty(data.variables.clone()));
    let mut best_score = cache.total(&best);

    if n < 2 {
        return (best, best_score);
    }
    for r in 0..opts.restarts {
        let mut rng = seeded(derive_seed(opts.seed, r as u64));
        let mut start = best.clone();
        let mut applied = 0;
        for _ in 0..PERTURB_MOVES * 10 {
            if applied == PERTURB_MOVES {
                break;
            }
            let kind = [MoveKind::Add, MoveKind::Remove, MoveKind::Reverse][rng.random_range(0..3)];
            let parent = rng.random_range(0..n);
            let child = rng.random_range(0..n);
            if parent == child {
                continue;
            }
            if let Some(next) = apply_move(
                &start,
                Move {
                    kind,
                    parent,
                    child,
                },
            ) {
                start = next;
                applied += 1;
            }
        }
        let candidate = greedy(&cache, start);
        let score = cache.total(&candidate);
        if score > best_score + SCORE_EPS {
            best = candidate;
            best_score = score;
        }
    }
    (best, best_score)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: usize,
    pub parents: Vec<usize>,
    /// `3^|parents|` rows of `P(node | parent configuration)`.
    pub table: Vec<[f64; CARDINALITY]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNet {
    pub structure: DagStructure,
    pub cpts: Vec<Cpt>,
    pub warnings: Vec<String>,
}

/// Relative-frequency CPTs; unseen parent configurations get a uniform row.
pub fn fit_cpts(structure: &DagStructure, data: &DiscreteDataset) -> Result<BayesNet> {
    check_structure(structure, data)?;
    let mut warnings = Vec::new();
    let cpts = (0..structure.n_nodes())
        .map(|node| {
            let parents = structure.parents(node).to_vec();
            let table = family_counts(data, node, &parents)
                .iter()
                .enumerate()
                .map(|(cfg, row)| {
                    let total: usize = row.iter().sum();
                    if total == 0 {
                        let msg = format!(
                            "{}: parent configuration {cfg} never observed; using a uniform row",
                            structure.nodes[node]
                        );
                        warn!("{msg}");
                        warnings.push(msg);
                        [1.0 / CARDINALITY as f64; CARDINALITY]
                    } else {
                        row.map(|c| c as f64 / total as f64)
                    }
                })
                .collect();
            Cpt {
                node,
                parents,
                table,
            }
        })
        .collect();
    Ok(BayesNet {
        structure: structure.clone(),
        cpts,
        warnings,
    })
}

impl BayesNet {
    /// Assembles a network from explicit tables (validated).
    pub fn from_parts(
        structure: DagStructure,
        tables: Vec<Vec<[f64; CARDINALITY]>>,
    ) -> Result<Self> {
        if !structure.is_acyclic() {
            return Err(Error::Contract("structure contains a cycle".into()));
        }
        if tables.len() != structure.n_nodes() {
            return Err(Error::Contract("one table per node required".into()));
        }
        let mut cpts = Vec::with_capacity(tables.len());
        for (node, table) in tables.into_iter().enumerate() {
            let parents = structure.parents(node).to_vec();
            if table.len() != CARDINALITY.pow(parents.len() as u32) {
                return Err(Error::Contract(format!(
                    "table for node {node} has {} rows, expected {}",
                    table.len(),
                    CARDINALITY.pow(parents.len() as u32)
                )));
            }
            for row in &table {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Contract(format!(
                        "table for node {node} has an invalid row {row:?}"
                    )));
                }
            }
            cpts.push(Cpt {
                node,
                parents,
                table,
            });
        }
        Ok(BayesNet {
            structure,
            cpts,
            warnings: Vec::new(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.structure.nodes
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.structure
            .nodes
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Contract(format!("unknown variable `{name}`")))
    }

    /// Product of CPT entries for one full assignment of category indices.
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        self.cpts
            .iter()
            .map(|cpt| {
                let cfg = cpt
                    .parents
                    .iter()
                    .fold(0, |acc, &p| acc * CARDINALITY + assignment[p]);
                cpt.table[cfg][assignment[cpt.node]]
            })
            .product()
    }

    pub fn marginal(&self, node: usize) -> Result<[f64; CARDINALITY]> {
        query_indexed(self, node, &[])
    }
}

/// Table over a sorted variable scope, row-major with three states each.
#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn index(vars: &[usize], assignment: &[usize]) -> usize {
        vars.iter()
            .fold(0, |acc, &v| acc * CARDINALITY + assignment[v])
    }

    fn from_cpt(cpt: &Cpt, n_vars: usize) -> Factor {
        let mut vars = cpt.parents.clone();
        vars.push(cpt.node);
        vars.sort_unstable();
        let mut values = vec![0.0; CARDINALITY.pow(vars.len() as u32)];
        let mut assignment = vec![0; n_vars];
        for_each_assignment(&vars, &mut assignment, &mut |a| {
            let cfg = cpt
                .parents
                .iter()
                .fold(0, |acc, &p| acc * CARDINALITY + a[p]);
            values[Factor::index(&vars, a)] = cpt.table[cfg][a[cpt.node]];
        });
        Factor { vars, values }
    }

    fn reduce(&self, var: usize, value: usize, n_vars: usize) -> Factor {
        if !self.vars.contains(&var) {
            return self.clone();
        }
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let mut values = vec![0.0; CARDINALITY.pow(vars.len() as u32)];
        let mut assignment = vec![0; n_vars];
        assignment[var] = value;
        for_each_assignment(&vars, &mut assignment, &mut |a| {
            values[Factor::index(&vars, a)] = self.values[Factor::index(&self.vars, a)];
        });
        Factor { vars, values }
    }

    fn product(&self, other: &Factor, n_vars: usize) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let mut values = vec![0.0; CARDINALITY.pow(vars.len() as u32)];
        let mut assignment = vec![0; n_vars];
        for_each_assignment(&vars, &mut assignment, &mut |a| {
            values[Factor::index(&vars, a)] = self.values[Factor::index(&self.vars, a)]
                * other.values[Factor::index(&other.vars, a)];
        });
        Factor { vars, values }
    }

    fn sum_out(&self, var: usize, n_vars: usize) -> Factor {
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let mut values = vec![0.0; CARDINALITY.pow(vars.len() as u32)];
        let mut assignment = vec![0; n_vars];
        for_each_assignment(&self.vars, &mut assignment, &mut |a| {
            values[Factor::index(&vars, a)] += self.values[Factor::index(&self.vars, a)];
        });
        Factor { vars, values }
    }
}

fn for_each_assignment(vars: &[usize], assignment: &mut [usize], f: &mut dyn FnMut(&[usize])) {
    match vars.split_first() {
        None => f(assignment),
        Some((&v, rest)) => {
            for s in 0..CARDINALITY {
                assignment[v] = s;
                for_each_assignment(rest, assignment, f);
            }
        }
    }
}

/// Posterior of `target` given named evidence.
pub fn query(
    net: &BayesNet,
    target: &str,
    evidence: &[(&str, Tertile)],
) -> Result<[f64; CARDINALITY]> {
    let t = net.index_of(target)?;
    let ev = evidence
        .iter()
        .map(|(name, cat)| Ok((net.index_of(name)?, cat.index())))
        .collect::<Result<Vec<_>>>()?;
    query_indexed(net, t, &ev)
}

/// Variable elimination with a greedy min-degree order (ties broken by
/// variable name).
pub fn query_indexed(
    net: &BayesNet,
    target: usize,
    evidence: &[(usize, usize)],
) -> Result<[f64; CARDINALITY]> {
    let n = net.structure.n_nodes();
    if target >= n {
        return Err(Error::Contract(format!(
            "target index {target} out of range"
        )));
    }
    let mut observed: Vec<Option<usize>> = vec![None; n];
    for &(var, value) in evidence {
        if var >= n || value >= CARDINALITY {
            return Err(Error::Contract(format!(
                "invalid evidence ({var}, {value})"
            )));
        }
        if var == target {
            return Err(Error::Contract(
                "target variable cannot also be evidence".into(),
            ));
        }
        match observed[var] {
            Some(prev) if prev != value => {
                return Err(Error::Contract(format!(
                    "conflicting evidence for variable {var}"
                )))
            }
            _ => observed[var] = Some(value),
        }
    }

    let mut factors: Vec<Factor> = net
        .cpts
        .iter()
        .map(|cpt| {
            let mut f = Factor::from_cpt(cpt, n);
            for (var, value) in observed.iter().enumerate() {
                if let Some(value) = value {
                    f = f.reduce(var, *value, n);
                }
            }
            f
        })
        .collect();

    let mut hidden: Vec<usize> = (0..n)
        .filter(|&v| v != target && observed[v].is_none())
        .collect();
    while !hidden.is_empty() {
        let degree = |v: usize| {
            let mut nb: Vec<usize> = factors
                .iter()
                .filter(|f| f.vars.contains(&v))
                .flat_map(|f| f.vars.iter().copied())
                .filter(|&u| u != v)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb.len()
        };
        let pos = (0..hidden.len())
            .min_by(|&a, &b| {
                let (va, vb) = (hidden[a], hidden[b]);
                degree(va)
                    .cmp(&degree(vb))
                    .then_with(|| net.structure.nodes[va].cmp(&net.structure.nodes[vb]))
            })
            .unwrap();
        let var = hidden.remove(pos);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        if let Some(first) = touching.first() {
            let joined = touching[1..]
                .iter()
                .fold(first.clone(), |acc, f| acc.product(f, n));
            factors.push(joined.sum_out(var, n));
        }
    }

    let unit = Factor {
        vars: Vec::new(),
        values: vec![1.0],
    };
    let result = factors.iter().fold(unit, |acc, f| acc.product(f, n));
    debug_assert_eq!(result.vars, vec![target]);
    let z: f64 = result.values.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    Ok(std::array::from_fn(|s| result.values[s] / z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(n: usize) -> Vec<String> {
        ["x", "y", "z", "w"][..n]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn dataset(cols: Vec<Vec<usize>>) -> DiscreteDataset {
        let n = cols[0].len();
        DiscreteDataset::new(
            names(cols.len()),
            (0..n).map(|i| format!("c{i}")).collect(),
            cols.into_iter()
                .map(|c| {
                    c.into_iter()
                        .map(|i| Tertile::from_index(i).unwrap())
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dag_mutations_keep_acyclicity() {
        let mut g = DagStructure::empty(names(3));
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        assert!(g.add_edge(2, 0).is_err());
        assert!(g.add_edge(0, 0).is_err());
        assert!(g.add_edge(0, 1).is_err());
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert!(g.reverse_edge(0, 1).is_ok());
        assert_eq!(g.edges(), vec![(1, 0), (1, 2)]);
        g.add_edge(0, 2).unwrap();
        // 1 -> 0 -> 2 and 1 -> 2; reversing 1 -> 2 would close a cycle
        assert!(g.reverse_edge(1, 2).is_err());
        assert_eq!(g.edges(), vec![(0, 2), (1, 0), (1, 2)]);
        assert!(g.is_acyclic());
        assert!(g.remove_edge(2, 1).is_err());
    }

    #[test]
    fn uniform_empty_graph_loglik() {
        let d = dataset(vec![
            vec![0, 0, 0, 1, 1, 1, 2, 2, 2],
            vec![0, 1, 2, 0, 1, 2, 0, 1, 2],
        ]);
        let g = DagStructure::empty(names(2));
        let expected = 2.0 * (-9.0 * 3f64.ln() - 9f64.ln());
        assert_abs_diff_eq!(bic_score(&g, &d).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            family_log_likelihood(&d, 0, &[]),
            -9.0 * 3f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn penalty_grows_with_parents() {
        let g0 = DagStructure::empty(names(4));
        let g1 = DagStructure::from_edges(names(4), &[(0, 3)]).unwrap();
        let g2 = DagStructure::from_edges(names(4), &[(0, 3), (1, 3)]).unwrap();
        let g3 = DagStructure::from_edges(names(4), &[(0, 3), (1, 3), (2, 3)]).unwrap();
        let k: Vec<usize> = [&g0, &g1, &g2, &g3]
            .iter()
            .map(|g| g.free_parameters())
            .collect();
        assert_eq!(k, vec![8, 12, 24, 60]);
        assert!(k.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn copy_dependence_beats_empty() {
        let x: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let d = dataset(vec![x.clone(), x]);
        let empty = DagStructure::empty(names(2));
        let edge = DagStructure::from_edges(names(2), &[(0, 1)]).unwrap();
        assert!(bic_score(&edge, &d).unwrap() > bic_score(&empty, &d).unwrap());
        let g = hill_climb(&d, 1);
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn cyclic_or_mismatched_structures_rejected() {
        let d = dataset(vec![vec![0, 1, 2], vec![0, 1, 2]]);
        let g = DagStructure::empty(names(3));
        assert!(bic_score(&g, &d).is_err());
        assert!(fit_cpts(&g, &d).is_err());
    }

    #[test]
    fn cpt_examples() {
        let x = vec![0, 1, 2, 0, 1, 2, 0, 1, 2];
        let d = dataset(vec![x.clone(), x]);
        let net = fit_cpts(&DagStructure::empty(names(2)), &d).unwrap();
        for p in net.cpts[0].table[0] {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let net = fit_cpts(&DagStructure::from_edges(names(2), &[(0, 1)]).unwrap(), &d).unwrap();
        for c in 0..3 {
            assert_eq!(net.cpts[1].table[c][c], 1.0);
        }
        assert!(net.warnings.is_empty());

        let d = dataset(vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]]);
        let net = fit_cpts(&DagStructure::from_edges(names(2), &[(0, 1)]).unwrap(), &d).unwrap();
        assert_eq!(net.cpts[1].table[2], [1.0 / 3.0; 3]);
        assert_eq!(net.warnings.len(), 1);
    }

    #[test]
    fn query_two_node_matches_hand_enumeration() {
        let g =
            DagStructure::from_edges(vec!["delta_sci_eng".into(), "delta_ict".into()], &[(0, 1)])
                .unwrap();
        let prior = [0.2, 0.5, 0.3];
        let cond = [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.1, 0.8]];
        let net = BayesNet::from_parts(g, vec![vec![prior], cond.to_vec()]).unwrap();
        let post = query(&net, "delta_ict", &[("delta_sci_eng", Tertile::Low)]).unwrap();
        for s in 0..3 {
            assert_abs_diff_eq!(post[s], cond[0][s], epsilon = 1e-12);
        }
        let marg = query(&net, "delta_ict", &[]).unwrap();
        for s in 0..3 {
            let want: f64 = (0..3).map(|x| prior[x] * cond[x][s]).sum();
            assert_abs_diff_eq!(marg[s], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn query_errors() {
        let g = DagStructure::from_edges(names(2), &[(0, 1)]).unwrap();
        let net = BayesNet::from_parts(
            g,
            vec![
                vec![[0.0, 0.5, 0.5]],
                vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            ],
        )
        .unwrap();
        assert!(matches!(
            query(&net, "y", &[("x", Tertile::Low)]),
            Err(Error::ZeroEvidence)
        ));
        assert!(matches!(
            query(&net, "x", &[("x", Tertile::Low)]),
            Err(Error::Contract(_))
        ));
        assert!(query(&net, "nope", &[]).is_err());
    }

    #[test]
    fn from_parts_validates_tables() {
        let g = DagStructure::empty(names(1));
        assert!(BayesNet::from_parts(g.clone(), vec![vec![[0.5, 0.5, 0.5]]]).is_err());
        assert!(BayesNet::from_parts(g.clone(), vec![vec![[0.5, 0.5, 0.0]; 3]]).is_err());
        assert!(BayesNet::from_parts(g, vec![vec![[0.5, 0.5, 0.0]]]).is_ok());
    }

    #[test]
    fn discretize_examples() {
        let deltas: Vec<AspirationDelta> = (1..=9)
            .map(|i| AspirationDelta {
                country: format!("c{i}"),
                delta_ict: Some(i as f64),
                delta_health: Some(2.0),
                delta_sci_eng: Some(-(i as f64)),
                delta_sci_tech: if i == 9 { None } else { Some(0.5 * i as f64) },
            })
            .collect();
        let d = discretize_dataset(&deltas).unwrap();
        assert_eq!(d.n_rows(), 8);
        assert_eq!(
            d.variables,
            vec![
                "delta_health",
                "delta_sci_eng",
                "delta_sci_tech",
                "delta_ict"
            ]
        );
        assert!(d.columns[0].iter().all(|t| *t == Tertile::Low));
        assert!(discretize_dataset(&deltas[..2]).is_err());
    }
}
