//! Path analysis: model-implied correlations decomposed over directed paths
//! of the QTL-extended network.
//!
//! For an exogenous source `u` and target `v`,
//! `cor(u, v) = sum over directed paths u ⇝ v of the product of standardized
//! path coefficients`, where an arc `j -> i` with coefficient `b` has
//! standardized coefficient `b * sqrt(var(j) / var(i))`. Along a path the
//! variance factors telescope to `sqrt(var(u) / var(v))`.
//!
//! QTLs enter with additive 0/1/2 coding (variance 1/2 in an F2) and
//! dominance is ignored, so the decomposition matches the simulator only for
//! additive models.

use std::io::Write;

use serde::Serialize;

use crate::genetics::Locus;
use crate::graph::{DirectedGraph, ExtendedGraph, QtlNode};
use crate::hcgr::HcgrModel;
use crate::{Error, Result};

/// Variance of the additive code of an F2 genotype.
pub const F2_ADDITIVE_VARIANCE: f64 = 0.5;

/// All simple directed paths from `u` to `v`, explored in increasing child
/// order.
pub fn directed_paths<G: DirectedGraph + ?Sized>(g: &G, u: usize, v: usize) -> Result<Vec<Vec<usize>>> {
    let n = g.node_count();
    if u >= n || v >= n {
        return Err(Error::InvalidInput(format!("node out of range (graph has {n} nodes)")));
    }
    if u == v {
        return Err(Error::InvalidInput("source and target must differ".into()));
    }
    fn walk<G: DirectedGraph + ?Sized>(g: &G, at: usize, v: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == v {
            out.push(path.clone());
            return;
        }
        let mut children = g.children_of(at);
        children.sort_unstable();
        for c in children {
            // Acyclic graphs never revisit; the check guards cyclic input.
            if !path.contains(&c) {
                path.push(c);
                walk(g, c, v, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, u, v, &mut vec![u], &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathTerm {
    pub nodes: Vec<usize>,
    /// Product of unstandardized coefficients along the path.
    pub coefficient_product: f64,
    /// Product of standardized coefficients.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDecomposition {
    pub source: usize,
    pub target: usize,
    pub paths: Vec<PathTerm>,
    /// `sqrt(var(source) / var(target))`.
    pub variance_ratio: f64,
    pub total: f64,
}

impl PathDecomposition {
    /// CSV with one row per path: path, coefficient_product, contribution.
    pub fn write_csv<W: Write>(&self, labels: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path", "coefficient_product", "contribution"])?;
        for p in &self.paths {
            let path = p.nodes.iter().map(|&k| labels[k].as_str()).collect::<Vec<_>>().join(" -> ");
            w.write_record([path, p.coefficient_product.to_string(), p.contribution.to_string()])?;
        }
        w.write_record(["total".to_string(), String::new(), self.total.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// An additive HCGR model viewed as a linear path diagram over traits
/// (`0..T`) and distinct QTL loci (`T..`).
#[derive(Debug, Clone)]
pub struct PathModel {
    graph: ExtendedGraph,
    labels: Vec<String>,
    /// `coef[i][j]`: coefficient of node `j` in the equation of node `i`.
    coef: Vec<Vec<f64>>,
    cov: Vec<Vec<f64>>,
}

impl PathModel {
    /// Errors if two distinct QTL loci share a chromosome: linked loci are
    /// correlated and the independent-QTL bookkeeping would be wrong.
    pub fn new(model: &HcgrModel) -> Result<Self> {
        let t = model.n_traits();
        let mut loci: Vec<Locus> = Vec::new();
        let mut qtl_edges = Vec::new();
        for (ti, eq) in model.traits().iter().enumerate() {
            for q in &eq.qtls {
                let k = match loci.iter().position(|l| same_locus(l, &q.locus)) {
                    Some(k) => k,
                    None => {
                        if loci.iter().any(|l| l.chromosome == q.locus.chromosome) {
                            return Err(Error::Unsupported(format!(
                                "linked QTLs on chromosome {}",
                                q.locus.chromosome
                            )));
                        }
                        loci.push(q.locus.clone());
                        loci.len() - 1
                    }
                };
                qtl_edges.push((k, ti));
            }
        }
        let graph = ExtendedGraph::new(
            model.dag().clone(),
            loci.iter().cloned().map(QtlNode::at).collect(),
            qtl_edges,
        )?;
        let n = graph.node_count();
        let mut coef = vec![vec![0.0; n]; n];
        for (ti, eq) in model.traits().iter().enumerate() {
            for p in &eq.parents {
                coef[ti][p.parent] += p.coefficient;
            }
            for q in &eq.qtls {
                let k = loci.iter().position(|l| same_locus(l, &q.locus)).expect("registered above");
                coef[ti][t + k] += q.additive;
            }
        }
        let mut labels = model.trait_names();
        labels.extend(graph.qtls().iter().map(|q| q.label.clone()));

        // Covariance by propagation: QTLs are independent with variance 1/2,
        // then each trait in topological order.
        let mut cov = vec![vec![0.0; n]; n];
        let mut done: Vec<usize> = (t..n).collect();
        for k in t..n {
            cov[k][k] = F2_ADDITIVE_VARIANCE;
        }
        for ti in model.dag().topological_order() {
            let inputs: Vec<usize> = (0..n).filter(|&j| coef[ti][j] != 0.0).collect();
            for &x in &done {
                let c: f64 = inputs.iter().map(|&j| coef[ti][j] * cov[j][x]).sum();
                cov[ti][x] = c;
                cov[x][ti] = c;
            }
            let var: f64 = inputs.iter().map(|&j| coef[ti][j] * cov[j][ti]).sum::<f64>()
                + model.traits()[ti].variance;
            cov[ti][ti] = var;
            done.push(ti);
        }
        Ok(Self {
            graph,
            labels,
            coef,
            cov,
        })
    }

    pub fn graph(&self) -> &ExtendedGraph {
        &self.graph
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_traits(&self) -> usize {
        self.graph.n_phenotypes()
    }

    /// Extended-graph node of the QTL at `locus`.
    pub fn qtl_node(&self, locus: &Locus) -> Option<usize> {
        self.graph
            .qtls()
            .iter()
            .position(|q| q.locus.as_ref().is_some_and(|l| same_locus(l, locus)))
            .map(|k| self.graph.qtl_node(k))
    }

    pub fn covariance(&self, u: usize, v: usize) -> f64 {
        self.cov[u][v]
    }

    pub fn variance(&self, u: usize) -> f64 {
        self.cov[u][u]
    }

    /// Correlation of `source` (which must have no parents) with `target`,
    /// decomposed over directed paths.
    pub fn implied_correlation(&self, source: usize, target: usize) -> Result<PathDecomposition> {
        if source >= self.graph.node_count() {
            return Err(Error::InvalidInput(format!("node {source} out of range")));
        }
        if !self.graph.parents_of(source).is_empty() {
            return Err(Error::InvalidInput(format!(
                "source {} has parents; only exogenous sources decompose over directed paths",
                self.labels[source]
            )));
        }
        let (vs, vt) = (self.variance(source), self.variance(target));
        if !(vs > 0.0 && vt > 0.0) {
            return Err(Error::Degenerate("zero-variance node".into()));
        }
        let variance_ratio = (vs / vt).sqrt();
        let paths: Vec<PathTerm> = directed_paths(&self.graph, source, target)?
            .into_iter()
            .map(|nodes| {
                let coefficient_product: f64 = nodes.windows(2).map(|w| self.coef[w[1]][w[0]]).product();
                PathTerm {
                    nodes,
                    coefficient_product,
                    contribution: coefficient_product * variance_ratio,
                }
            })
            .collect();
        let total = paths.iter().map(|p| p.contribution).sum();
        Ok(PathDecomposition {
            source,
            target,
            paths,
            variance_ratio,
            total,
        })
    }
}

fn same_locus(a: &Locus, b: &Locus) -> bool {
    a.chromosome == b.chromosome && (a.position - b.position).abs() < 1e-6
}

/// Convenience: correlation between the QTL at `locus` and trait `target`.
pub fn implied_correlation(model: &HcgrModel, locus: &Locus, target: usize) -> Result<PathDecomposition> {
    let pm = PathModel::new(model)?;
    let q = pm
        .qtl_node(locus)
        .ok_or_else(|| Error::InvalidInput(format!("no QTL at {}@{}", locus.chromosome, locus.position)))?;
    pm.implied_correlation(q, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hcgr::TraitEquation;
    use crate::simulate::{self, SignalStrength};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn fig1_midpoint() -> (HcgrModel, PathModel) {
        let m = simulate::midpoint_model(&simulate::map());
        let pm = PathModel::new(&m).unwrap();
        (m, pm)
    }

    #[test]
    fn fig1_path_enumeration() {
        let (m, pm) = fig1_midpoint();
        let map = simulate::map();
        let q1 = pm.qtl_node(&simulate::qtl_locus(&map, 0).unwrap()).unwrap();
        let q5 = pm.qtl_node(&simulate::qtl_locus(&map, 4).unwrap()).unwrap();
        let paths = directed_paths(pm.graph(), q1, 4).unwrap();
        assert_eq!(
            paths,
            vec![vec![q1, 0, 1, 4], vec![q1, 0, 2, 3, 4], vec![q1, 0, 2, 4], vec![q1, 0, 3, 4]]
        );
        assert_eq!(directed_paths(pm.graph(), q5, 4).unwrap(), vec![vec![q5, 4]]);
        assert!(directed_paths(pm.graph(), 4, 0).unwrap().is_empty());
        assert!(directed_paths(pm.graph(), 1, 1).is_err());
        assert_eq!(m.n_traits(), pm.n_traits());
    }

    #[test]
    fn midpoint_hot_spot_inequality() {
        let (_, pm) = fig1_midpoint();
        let map = simulate::map();
        let q1 = pm.qtl_node(&simulate::qtl_locus(&map, 0).unwrap()).unwrap();
        let q5 = pm.qtl_node(&simulate::qtl_locus(&map, 4).unwrap()).unwrap();
        let c1 = pm.implied_correlation(q1, 4).unwrap();
        let c5 = pm.implied_correlation(q5, 4).unwrap();
        assert_eq!(c1.paths.len(), 4);
        assert!(c1.total > c5.total, "{} vs {}", c1.total, c5.total);
        let sum: f64 = c1.paths.iter().map(|p| p.contribution).sum();
        assert!((sum - c1.total).abs() < 1e-10);
    }

    #[test]
    fn single_arc() {
        let m = HcgrModel::new(vec![
            TraitEquation::new("u", 0.0, 2.0),
            TraitEquation::new("v", 0.0, 0.5).with_parent(0, 0.8),
        ])
        .unwrap();
        let pm = PathModel::new(&m).unwrap();
        let d = pm.implied_correlation(0, 1).unwrap();
        let var_v = 0.64 * 2.0 + 0.5;
        assert!((d.total - 0.8 * (2.0f64 / var_v).sqrt()).abs() < 1e-12);
        assert!(pm.implied_correlation(1, 0).is_err());
    }

    #[test]
    fn linked_qtls_are_rejected() {
        let m = HcgrModel::new(vec![
            TraitEquation::new("a", 0.0, 1.0).with_qtl(Locus::new("1", 10.0), 1.0, 0.0),
            TraitEquation::new("b", 0.0, 1.0).with_qtl(Locus::new("1", 30.0), 1.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(PathModel::new(&m), Err(Error::Unsupported(_))));
    }

    /// Covariance of (traits, QTLs) from Omega^-1 plus the QTL-driven part.
    fn matrix_oracle(m: &HcgrModel, pm: &PathModel) -> DMatrix<f64> {
        let t = m.n_traits();
        let n = pm.graph().node_count();
        let nq = n - t;
        let b = DMatrix::from_fn(t, t, |i, j| m.coefficient(i, j));
        let minv = (DMatrix::identity(t, t) - b).try_inverse().unwrap();
        let a = DMatrix::from_fn(t, nq, |i, k| {
            let node = pm.graph().qtl_node(k);
            m.traits()[i]
                .qtls
                .iter()
                .filter(|q| pm.qtl_node(&q.locus) == Some(node))
                .map(|q| q.additive)
                .sum()
        });
        let sq = DMatrix::identity(nq, nq) * F2_ADDITIVE_VARIANCE;
        let yy = m.concentration_matrix().try_inverse().unwrap() + &minv * &a * &sq * a.transpose() * minv.transpose();
        let yq = &minv * &a * &sq;
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (t, t)).copy_from(&yy);
        full.view_mut((0, t), (t, nq)).copy_from(&yq);
        full.view_mut((t, 0), (nq, t)).copy_from(&yq.transpose());
        full.view_mut((t, t), (nq, nq)).copy_from(&sq);
        full
    }

    #[test]
    fn propagated_covariance_matches_matrix_oracle() {
        let map = simulate::map();
        let mut rng = crate::seeded_rng(17);
        for _ in 0..200 {
            let nt = rng.random_range(2..=5);
            let m = simulate::random_model(&map, nt, 0.5, &mut rng);
            let pm = PathModel::new(&m).unwrap();
            let oracle = matrix_oracle(&m, &pm);
            let n = pm.graph().node_count();
            for u in 0..n {
                for v in 0..n {
                    assert!((pm.covariance(u, v) - oracle[(u, v)]).abs() < 1e-8);
                }
            }
            for k in 0..n - nt {
                let q = pm.graph().qtl_node(k);
                for target in 0..nt {
                    let d = pm.implied_correlation(q, target).unwrap();
                    let want = oracle[(q, target)] / (oracle[(q, q)] * oracle[(target, target)]).sqrt();
                    assert!((d.total - want).abs() < 1e-8);
                }
            }
        }
    }

    fn flip_to_positive(m: &HcgrModel) -> HcgrModel {
        let traits = m
            .traits()
            .iter()
            .cloned()
            .map(|mut eq| {
                for p in eq.parents.iter_mut() {
                    p.coefficient = p.coefficient.abs();
                }
                eq
            })
            .collect();
        HcgrModel::new(traits).unwrap()
    }

    #[test]
    fn hot_spot_frequency_by_signal() {
        let map = simulate::map();
        let l1 = simulate::qtl_locus(&map, 0).unwrap();
        let l5 = simulate::qtl_locus(&map, 4).unwrap();
        let mut rng = crate::seeded_rng(99);
        let draws = 2000;
        let upstream_wins = |m: &HcgrModel| {
            let c1 = implied_correlation(m, &l1, 4).unwrap().total;
            let c5 = implied_correlation(m, &l5, 4).unwrap().total;
            c1.abs() > c5.abs()
        };
        let (mut strong, mut strong_positive, mut weak) = (0, 0, 0);
        for _ in 0..draws {
            let m = simulate::sample_model(&map, SignalStrength::Strong, &mut rng);
            strong += upstream_wins(&m) as usize;
            strong_positive += upstream_wins(&flip_to_positive(&m)) as usize;
            weak += upstream_wins(&simulate::sample_model(&map, SignalStrength::Weak, &mut rng)) as usize;
        }
        let f = |k: usize| k as f64 / draws as f64;
        // With random coefficient signs, upstream paths cancel a third of the
        // time, in line with Q1 being detected for Y5 about twice as often as Q5.
        assert!(f(strong) > 0.55 && f(strong) < 0.8, "{}", f(strong));
        assert!(f(strong_positive) > 0.9, "{}", f(strong_positive));
        assert!(f(weak) < 0.5, "{}", f(weak));
    }

    #[test]
    fn csv_report() {
        let (_, pm) = fig1_midpoint();
        let q5 = pm.qtl_node(&simulate::qtl_locus(&simulate::map(), 4).unwrap()).unwrap();
        let d = pm.implied_correlation(q5, 4).unwrap();
        let mut out = Vec::new();
        d.write_csv(pm.labels(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("path,coefficient_product,contribution\n5@44.4 -> Y5,0.75,"));
        assert_eq!(text.lines().count(), 3);
    }
}
