use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use gmkit::factor::eliminate;
use gmkit::graph::{minimal_directed_imap, node_set, Dag, IndependenceOracle, Ugm, DEFAULT_NODE_CAP};
use gmkit::learning::{fit_cpt_bayes, fit_cpt_mle, ising2_mle, score_matching_fit, CptEntry};
use gmkit::message_passing::FactorGraph;
use gmkit::numerics::{solve, Matrix};
use gmkit::samplers::{
    gibbs_rbm, laplace_log_density, laplace_normal_bound, mh, normal_tail_probability, poisson_regression_log_pstar, rejection_sample,
    sample_laplace, standard_normal_log_density, SeededRng, Trace, TAIL_THRESHOLD,
};
use gmkit::sequential::{alpha_filter, ffbs_with, kalman_filter, predict_hidden, predict_visible, smooth, viterbi};
use gmkit::variational::{elbo, isotropic_kl, isotropic_kl_fit, mean_field_solve, MeanFieldState};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::data::{read_binary, read_table, Table};
use crate::envelope::Envelope;
use crate::error::{CliError, Result};
use crate::model::{parse_model, ModelDocument};

/// What a command produced, before timing and rounding.
struct Outcome {
    outputs: Value,
    seed: Option<u64>,
}

impl From<Value> for Outcome {
    fn from(outputs: Value) -> Self {
        Outcome { outputs, seed: None }
    }
}

fn seeded(outputs: Value, seed: u64) -> Outcome {
    Outcome { outputs, seed: Some(seed) }
}

/// Executes one command and wraps its outputs in an envelope.
pub fn run(command: &Command) -> Result<Envelope> {
    let start = Instant::now();
    let (name, inputs, outcome) = match command {
        Command::Graph(c) => graph(c)?,
        Command::Fg(c) => fg(c)?,
        Command::Hmm(c) => hmm(c)?,
        Command::Kalman(KalmanCommand::Filter(a)) => ("kalman filter", echo(a), kalman(a)?),
        Command::Fit(c) => fit(c)?,
        Command::Sample(c) => sample(c)?,
        Command::Vi(c) => vi(c)?,
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(Envelope::new(name, inputs, outcome.outputs, outcome.seed, elapsed))
}

type Dispatched = (&'static str, Value, Outcome);

fn echo<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialise")
}

fn load(path: &Path) -> Result<ModelDocument> {
    parse_model(path)
}

/// Evidence pairs; a variable may be observed once.
fn evidence(ev: &[Evidence]) -> Result<Vec<(&str, usize)>> {
    let mut seen = std::collections::BTreeSet::new();
    ev.iter()
        .map(|e| {
            if seen.insert(e.var.as_str()) {
                Ok((e.var.as_str(), e.state))
            } else {
                Err(validation(format!("variable {} is observed twice", e.var)))
            }
        })
        .collect()
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

// ---- graph ----

enum Structure {
    Directed(Dag),
    Undirected(Ugm),
}

/// The model's single graph section.
fn structure(doc: &ModelDocument) -> Result<Structure> {
    match (doc.dag.is_some(), doc.ugm.is_some()) {
        (true, false) => Ok(Structure::Directed(doc.dag()?)),
        (false, true) => Ok(Structure::Undirected(doc.ugm()?)),
        (true, true) => Err(validation("model has both \"dag\" and \"ugm\"; this command needs exactly one")),
        (false, false) => Err(validation("model has neither a \"dag\" nor a \"ugm\" section")),
    }
}

fn pairs(edges: Vec<(String, String)>) -> Value {
    Value::Array(edges.into_iter().map(|(a, b)| json!([a, b])).collect())
}

fn graph(c: &GraphCommand) -> Result<Dispatched> {
    Ok(match c {
        GraphCommand::Dsep(a) => {
            let dag = load(&a.model.model)?.dag()?;
            let sep = dag.d_separated(&node_set(&a.x), &node_set(&a.y), &node_set(&a.given))?;
            ("graph dsep", echo(a), json!({ "separated": sep }).into())
        }
        GraphCommand::Usep(a) => {
            let ugm = load(&a.model.model)?.ugm()?;
            let sep = ugm.u_separated(&node_set(&a.x), &node_set(&a.y), &node_set(&a.given))?;
            ("graph usep", echo(a), json!({ "separated": sep }).into())
        }
        GraphCommand::Mb(a) => {
            let mb = match structure(&load(&a.model.model)?)? {
                Structure::Directed(g) => g.markov_blanket(&a.var)?,
                Structure::Undirected(g) => g.markov_blanket(&a.var)?,
            };
            ("graph mb", echo(a), json!({ "markov_blanket": mb }).into())
        }
        GraphCommand::Moralize(a) => {
            let dag = load(&a.model)?.dag()?;
            let moral = dag.moralise();
            let edges = moral.edges();
            let added: Vec<(String, String)> = edges.iter().filter(|(x, y)| !dag.adjacent(x, y)).cloned().collect();
            ("graph moralize", echo(a), json!({ "edges": pairs(edges), "added": pairs(added) }).into())
        }
        GraphCommand::Iequiv(a) => {
            let left = load(&a.model.model)?.dag()?;
            let right = load(&a.against)?.dag()?;
            let imm = |g: &Dag| -> Value { g.immoralities().into_iter().map(|i| json!([i.left, i.child, i.right])).collect() };
            let out = json!({
                "equivalent": left.i_equivalent(&right)?,
                "immoralities": imm(&left),
                "against_immoralities": imm(&right),
            });
            ("graph iequiv", echo(a), out.into())
        }
        GraphCommand::Imap(a) => {
            let doc = load(&a.model.model)?;
            let graph = structure(&doc)?;
            let oracle: &dyn IndependenceOracle = match &graph {
                Structure::Directed(g) => g,
                Structure::Undirected(g) => g,
            };
            let nodes = match &graph {
                Structure::Directed(g) => g.nodes().clone(),
                Structure::Undirected(g) => g.nodes(),
            };
            if node_set(&a.order) != nodes || a.order.len() != nodes.len() {
                return Err(validation("--order must list every node of the graph exactly once"));
            }
            let imap = minimal_directed_imap(oracle, &a.order, DEFAULT_NODE_CAP)?;
            let mut parents = Map::new();
            for n in &a.order {
                parents.insert(n.clone(), json!(imap.parents(n)?));
            }
            ("graph imap", echo(a), json!({ "parents": parents }).into())
        }
    })
}

// ---- factor graphs ----

fn declared_order(fg: &FactorGraph) -> Vec<String> {
    fg.variables().iter().map(|v| v.name.clone()).collect()
}

fn fg(c: &FgCommand) -> Result<Dispatched> {
    Ok(match c {
        FgCommand::Marginal(a) => {
            let fg = load(&a.model.model)?.factor_graph()?;
            let ev = evidence(&a.evidence)?;
            let sp = fg.conditioned_sum_product(&ev)?;
            let observed: Vec<&str> = ev.iter().map(|(v, _)| *v).collect();
            let wanted: Vec<String> = if a.var.is_empty() {
                declared_order(&fg).into_iter().filter(|v| !observed.contains(&v.as_str())).collect()
            } else {
                a.var.clone()
            };
            let mut out = Map::new();
            for v in wanted {
                if observed.contains(&v.as_str()) {
                    return Err(validation(format!("variable {v} is observed")));
                }
                let m = sp.marginal(&v).ok_or_else(|| validation(format!("unknown variable {v}")))?;
                out.insert(v, json!(m));
            }
            ("fg marginal", echo(a), Value::Object(out).into())
        }
        FgCommand::Map(a) => {
            let fg = load(&a.model.model)?.factor_graph()?;
            let (graph, log_constant) = fg.condition(&evidence(&a.evidence)?)?;
            let root = match &a.root {
                Some(r) => r.clone(),
                None => graph.variables().first().map(|v| v.name.clone()).ok_or_else(|| validation("every variable is observed"))?,
            };
            let map = graph.max_sum_map(&root)?;
            let mut assignment = Map::new();
            for v in declared_order(&graph) {
                assignment.insert(v.clone(), json!(map.assignment[&v]));
            }
            let out = json!({ "assignment": assignment, "log_score": map.log_score + log_constant });
            ("fg map", echo(a), out.into())
        }
        FgCommand::Eliminate(a) => {
            let fg = load(&a.model.model)?.factor_graph()?;
            let (graph, _) = fg.condition(&evidence(&a.evidence)?)?;
            let factors: Vec<_> = graph.factors().iter().map(|(_, f)| f.clone()).collect();
            let keep: Vec<&str> = a.keep.iter().map(String::as_str).collect();
            let order: Vec<String> = if a.order.is_empty() {
                declared_order(&graph).into_iter().filter(|v| !a.keep.contains(v)).collect()
            } else {
                a.order.clone()
            };
            let order: Vec<&str> = order.iter().map(String::as_str).collect();
            let (result, report) = eliminate(&factors, &keep, &order)?;
            let (p, _) = result.normalise()?;
            let mut out = Map::new();
            if let [only] = keep.as_slice() {
                out.insert(only.to_string(), json!(p.values()));
            } else {
                out.insert("scope".into(), json!(p.names().collect::<Vec<_>>()));
                out.insert("values".into(), json!(p.values()));
            }
            out.insert("peak_entries".into(), json!(report.peak_entries));
            out.insert("step_sizes".into(), json!(report.step_sizes));
            out.insert("order".into(), json!(report.order));
            ("fg eliminate", echo(a), Value::Object(out).into())
        }
        FgCommand::Condition(a) => {
            let fg = load(&a.model.model)?.factor_graph()?;
            let (graph, log_constant) = fg.condition(&evidence(&a.evidence)?)?;
            let factors: Vec<Value> = graph
                .factors()
                .iter()
                .map(|(name, f)| json!({ "name": name, "scope": f.names().collect::<Vec<_>>(), "values": f.values() }))
                .collect();
            ("fg condition", echo(a), json!({ "factors": factors, "log_constant": log_constant }).into())
        }
    })
}

// ---- sequential ----

fn observations(doc: &ModelDocument, flag: &[usize]) -> Result<Vec<usize>> {
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    doc.hmm
        .as_ref()
        .and_then(|h| h.observations.clone())
        .ok_or_else(|| validation("no observations: pass --obs or add \"observations\" to the hmm section"))
}

fn hmm(c: &HmmCommand) -> Result<Dispatched> {
    let base = match c {
        HmmCommand::Filter(a) | HmmCommand::Smooth(a) | HmmCommand::Viterbi(a) => a,
        HmmCommand::PredictH(p) | HmmCommand::PredictV(p) => &p.hmm,
        HmmCommand::Ffbs(f) => &f.hmm,
    };
    let doc = load(&base.model.model)?;
    let v = observations(&doc, &base.obs)?;
    Ok(match c {
        HmmCommand::Filter(a) => {
            let f = alpha_filter(&doc.hmm(v.len())?, &v)?;
            ("hmm filter", echo(a), json!({ "filtered": f.marginals, "log_likelihood": f.log_likelihood() }).into())
        }
        HmmCommand::PredictH(a) => {
            let p = predict_hidden(&doc.hmm(v.len().max(a.t))?, &v, a.t)?;
            ("hmm predict-h", echo(a), json!({ "t": a.t, "probs": p.probs, "log_evidence": p.log_evidence }).into())
        }
        HmmCommand::PredictV(a) => {
            let p = predict_visible(&doc.hmm(v.len().max(a.t))?, &v, a.t)?;
            ("hmm predict-v", echo(a), json!({ "t": a.t, "probs": p }).into())
        }
        HmmCommand::Smooth(a) => {
            let s = smooth(&doc.hmm(v.len())?, &v)?;
            ("hmm smooth", echo(a), json!({ "smoothed": s.marginals, "log_likelihood": s.log_likelihood }).into())
        }
        HmmCommand::Viterbi(a) => {
            let (path, log_prob) = viterbi(&doc.hmm(v.len())?, &v)?;
            ("hmm viterbi", echo(a), json!({ "path": path, "log_prob": log_prob }).into())
        }
        HmmCommand::Ffbs(a) => {
            let model = doc.hmm(v.len())?;
            let filtered = alpha_filter(&model, &v)?;
            let mut rng = SeededRng::new(a.seed);
            let paths = (0..a.n).map(|_| ffbs_with(&model, &filtered, &mut rng)).collect::<std::result::Result<Vec<_>, _>>()?;
            ("hmm ffbs", echo(a), seeded(json!({ "paths": paths }), a.seed))
        }
    })
}

fn kalman(a: &KalmanArgs) -> Result<Outcome> {
    let doc = load(&a.model.model)?;
    let model = doc.kalman()?;
    let v = if a.obs.is_empty() {
        doc.kalman
            .as_ref()
            .and_then(|k| k.observations.clone())
            .ok_or_else(|| validation("no observations: pass --obs or add \"observations\" to the kalman section"))?
    } else {
        a.obs.clone()
    };
    let steps: Vec<Value> = kalman_filter(&model, &v)?
        .iter()
        .map(|s| json!({ "mean": s.mean, "variance": s.variance, "gain": s.gain, "predicted_variance": s.predicted_variance }))
        .collect();
    Ok(json!({ "steps": steps }).into())
}

// ---- learning ----

fn parent_states(parents: &[String], states: Vec<usize>) -> Value {
    let mut m = Map::new();
    for (p, s) in parents.iter().zip(states) {
        m.insert(p.clone(), json!(s));
    }
    Value::Object(m)
}

/// Gaussian statistics over `d` columns: `x_i` for each column, then `x_i x_j` for `i ≤ j`.
fn gaussian_statistics(d: usize) -> Vec<(usize, Option<usize>)> {
    let mut out: Vec<(usize, Option<usize>)> = (0..d).map(|i| (i, None)).collect();
    for i in 0..d {
        out.extend((i..d).map(|j| (i, Some(j))));
    }
    out
}

fn score_matching(table: &Table<f64>) -> Result<Value> {
    let d = table.columns.len();
    let stats = gaussian_statistics(d);
    let k = |x: &[f64]| {
        let mut m = Matrix::zeros(stats.len(), d);
        for (r, &(i, j)) in stats.iter().enumerate() {
            match j {
                None => m[(r, i)] = 1.0,
                Some(j) if j == i => m[(r, i)] = 2.0 * x[i],
                Some(j) => {
                    m[(r, i)] = x[j];
                    m[(r, j)] = x[i];
                }
            }
        }
        m
    };
    let h = |_: &[f64]| {
        let mut m = Matrix::zeros(stats.len(), d);
        for (r, &(i, j)) in stats.iter().enumerate() {
            if j == Some(i) {
                m[(r, i)] = 2.0;
            }
        }
        m
    };
    let fit = score_matching_fit(&table.rows, stats.len(), k, h)?;
    let names: Vec<String> = stats
        .iter()
        .map(|&(i, j)| match j {
            None => table.columns[i].clone(),
            Some(j) => format!("{}*{}", table.columns[i], table.columns[j]),
        })
        .collect();
    // θᵀF = ηᵀx − ½xᵀΛx fixes Λ_ii = −2θ_ii and Λ_ij = −θ_ij
    let mut precision = Matrix::zeros(d, d);
    for (&(i, j), t) in stats.iter().zip(&fit.theta) {
        match j {
            Some(j) if j == i => precision[(i, i)] = -2.0 * t,
            Some(j) => {
                precision[(i, j)] = -t;
                precision[(j, i)] = -t;
            }
            None => {}
        }
    }
    let mut out = json!({
        "statistics": names,
        "theta": fit.theta,
        "objective": fit.objective(&fit.theta),
        "precision": precision.to_rows(),
    });
    if let Ok(mean) = solve(&precision, &fit.theta[..d]) {
        out["mean"] = json!(mean);
    }
    Ok(out)
}

fn fit(c: &FitCommand) -> Result<Dispatched> {
    Ok(match c {
        FitCommand::CptMle(a) => {
            let dag = load(&a.model.model)?.dag()?;
            let est = fit_cpt_mle(&dag, &read_binary(&a.data)?)?;
            let mut nodes = Map::new();
            for (node, counts) in &est.counts {
                let cells: Vec<Value> = counts
                    .cells
                    .iter()
                    .zip(&est.estimates[node])
                    .enumerate()
                    .map(|(s, (cell, entry))| {
                        let theta = match entry {
                            CptEntry::Defined(p) => json!(p),
                            CptEntry::Undefined => Value::Null,
                        };
                        json!({ "parents": parent_states(&counts.parents, counts.parent_states(s)), "ones": cell.ones, "zeros": cell.zeros, "theta": theta })
                    })
                    .collect();
                nodes.insert(node.clone(), json!({ "parents": counts.parents, "cells": cells }));
            }
            ("fit cpt-mle", echo(a), json!({ "nodes": nodes }).into())
        }
        FitCommand::CptBayes(a) => {
            let dag = load(&a.cpt.model.model)?.dag()?;
            let fits = fit_cpt_bayes(&dag, &read_binary(&a.cpt.data)?, a.alpha0, a.beta0)?;
            let mut nodes = Map::new();
            for (node, cpt) in &fits {
                let cells: Vec<Value> = cpt
                    .posteriors
                    .iter()
                    .enumerate()
                    .map(|(s, post)| {
                        let states = (0..cpt.parents.len()).map(|k| (s >> k) & 1).collect();
                        json!({ "parents": parent_states(&cpt.parents, states), "alpha": post.alpha, "beta": post.beta, "predictive": post.mean() })
                    })
                    .collect();
                nodes.insert(node.clone(), json!({ "parents": cpt.parents, "cells": cells }));
            }
            ("fit cpt-bayes", echo(a), json!({ "nodes": nodes }).into())
        }
        FitCommand::ScoreMatching(a) => ("fit score-matching", echo(a), score_matching(&read_table(&a.data)?)?.into()),
        FitCommand::Ising2(a) => {
            let table: Table<i64> = read_table(&a.data)?;
            if table.columns.len() != 2 {
                return Err(validation(format!("ising2 needs exactly two columns, found {}", table.columns.len())));
            }
            let pairs: Vec<(i64, i64)> = table.rows.iter().map(|r| (r[0], r[1])).collect();
            let theta = ising2_mle(&pairs)?;
            let moment = pairs.iter().map(|(x, y)| (x * y) as f64).sum::<f64>() / pairs.len() as f64;
            ("fit ising2", echo(a), json!({ "theta": theta, "moment": moment }).into())
        }
    })
}

// ---- sampling ----

fn write_trace(path: &Path, columns: &[String], trace: &Trace, meta: Value) -> Result<()> {
    let io = |e: std::io::Error| CliError::io(path.display().to_string(), e);
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| CliError::Validation(format!("{}: {e}", path.display()));
    w.write_record(columns).map_err(csv_err)?;
    for s in &trace.samples {
        w.write_record(s.iter().map(f64::to_string)).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    let sidecar = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    std::fs::write(&sidecar, text + "\n").map_err(|e| CliError::io(sidecar.display().to_string(), e))
}

/// `<trace>.json` next to the trace CSV.
pub fn sidecar_path(trace: &Path) -> std::path::PathBuf {
    let mut name = trace.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

fn mh_command(a: &MhArgs) -> Result<Outcome> {
    type Target = Box<dyn Fn(&[f64]) -> f64>;
    let (target, columns, kind): (Target, Vec<String>, &str) = match (&a.model, &a.data) {
        (Some(path), None) => {
            let t = load(path)?.gaussian()?;
            let columns = (1..=t.dim()).map(|i| format!("x{i}")).collect();
            let f = move |x: &[f64]| {
                let lx = t.precision().matvec(x).expect("state has the target dimension");
                -0.5 * x.iter().zip(&lx).map(|(a, b)| a * b).sum::<f64>() + t.linear().iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            };
            (Box::new(f), columns, "gaussian")
        }
        (None, Some(path)) => {
            let table: Table<f64> = read_table(path)?;
            let col = |n: &str| table.column(n).ok_or_else(|| validation(format!("{}: missing column {n}", path.display())));
            let (xs, ys) = (col("x")?, col("y")?);
            let data = xs
                .into_iter()
                .zip(ys)
                .map(|(x, y)| {
                    if y >= 0.0 && y.fract() == 0.0 {
                        Ok((x, y as u64))
                    } else {
                        Err(validation(format!("count {y} is not a non-negative integer")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            (Box::new(poisson_regression_log_pstar(&data)), vec!["alpha".into(), "beta".into()], "poisson-regression")
        }
        _ => return Err(usage("sample mh needs exactly one of --model or --data")),
    };
    let init = if a.init.is_empty() { vec![0.0; columns.len()] } else { a.init.clone() };
    if init.len() != columns.len() {
        return Err(validation(format!("--init has {} entries, the target has dimension {}", init.len(), columns.len())));
    }
    let mut rng = SeededRng::new(a.seed);
    let trace = mh(&mut rng, target, &init, a.n, a.vari, a.warmup)?;
    let ess: Value = trace.ess().map_or(Value::Null, |e| json!(e));
    let mut out = json!({
        "target": kind,
        "columns": columns,
        "mean": trace.mean(),
        "covariance": trace.covariance().to_rows(),
        "acceptance_rate": trace.acceptance_rate(),
        "ess": ess,
    });
    if let Some(path) = &a.trace {
        let meta = json!({
            "target": kind,
            "columns": columns,
            "seed": a.seed,
            "samples": trace.samples.len(),
            "warmup": trace.warmup,
            "accepted": trace.accepted,
            "proposals": trace.proposals,
            "acceptance_rate": trace.acceptance_rate(),
            "vari": a.vari,
            "init": init,
        });
        write_trace(path, &columns, &trace, meta)?;
        out["trace"] = json!(path);
    }
    Ok(seeded(out, a.seed))
}

fn sample(c: &SampleCommand) -> Result<Dispatched> {
    Ok(match c {
        SampleCommand::Mh(a) => ("sample mh", echo(a), mh_command(a)?),
        SampleCommand::Rejection(a) => {
            let mut rng = SeededRng::new(a.seed);
            let b = a.scale;
            if !(b > 0.0 && b.is_finite()) {
                return Err(validation(format!("--scale must be positive, got {b}")));
            }
            let bound = laplace_normal_bound(b);
            let out = rejection_sample(&mut rng, standard_normal_log_density, |r: &mut SeededRng| sample_laplace(r, b), |x| laplace_log_density(x, b), bound, a.n)?;
            let n = out.samples.len() as f64;
            let mean = out.samples.iter().sum::<f64>() / n;
            let variance = out.samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let res = json!({
                "accepted": out.samples.len(),
                "proposals": out.proposals,
                "acceptance_rate": out.acceptance_rate(),
                "bound": bound,
                "mean": mean,
                "variance": variance,
            });
            ("sample rejection", echo(a), seeded(res, a.seed))
        }
        SampleCommand::Importance(a) => {
            let e = normal_tail_probability(&mut SeededRng::new(a.seed), a.n)?;
            let res = json!({
                "threshold": TAIL_THRESHOLD,
                "estimate": e.estimate,
                "weight_second_moment": e.weight_second_moment,
                "max_weight": e.max_weight,
            });
            ("sample importance", echo(a), seeded(res, a.seed))
        }
        SampleCommand::GibbsRbm(a) => {
            let model = load(&a.model.model)?.rbm()?;
            let init = if a.init.is_empty() { vec![0; model.visible()] } else { a.init.clone() };
            let draws = gibbs_rbm(&mut SeededRng::new(a.seed), &model, &init, a.n)?;
            let n = draws.len() as f64;
            let marginals: Vec<f64> = (0..model.visible()).map(|i| draws.iter().filter(|v| v[i] == 1).count() as f64 / n).collect();
            let mut freq: BTreeMap<String, usize> = BTreeMap::new();
            for v in &draws {
                *freq.entry(v.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()).or_default() += 1;
            }
            let freq: Map<String, Value> = freq.into_iter().map(|(k, c)| (k, json!(c as f64 / n))).collect();
            let res = json!({ "visible_marginals": marginals, "state_frequencies": freq });
            ("sample gibbs-rbm", echo(a), seeded(res, a.seed))
        }
    })
}

// ---- variational ----

fn vi(c: &ViCommand) -> Result<Dispatched> {
    Ok(match c {
        ViCommand::Meanfield(a) => {
            let target = load(&a.model.model)?.gaussian()?;
            let init = if a.init.is_empty() { vec![0.0; target.dim()] } else { a.init.clone() };
            let state = mean_field_solve(&target, &MeanFieldState::at(init), a.sweeps, a.tol)?;
            let out = json!({
                "means": state.means,
                "variances": state.variances,
                "elbo": elbo(&target, &state)?,
                "posterior_mean": target.mean()?,
            });
            ("vi meanfield", echo(a), out.into())
        }
        ViCommand::Klfit(a) => {
            let l2 = isotropic_kl_fit(&a.variances)?;
            ("vi klfit", echo(a), json!({ "lambda2": l2, "kl": isotropic_kl(l2, &a.variances) }).into())
        }
    })
}
