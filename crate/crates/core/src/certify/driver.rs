use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{CertConfig, CertReport, CertStats, OutputBound, PreBounds};
use crate::encode::{
    encode_twin_subnet, score_neurons, select_refinement, EncodingConfig, Mode, Quantity, Relaxation, Scheme,
};
use crate::error::{Error, Result};
use crate::lincore::{MilpSolver, Sense, SolveStatus};
use crate::model::{
    decompose, propagate_layer, propagate_twin_intervals, HyperBox, Interval, Network, NeuronRanges, NeuronRef,
    Phase, RangeTable, Stage, SubNetwork,
};

/// Everything a per-neuron task reads.
struct Ctx<'a> {
    net: &'a Network,
    cfg: &'a CertConfig,
    table: &'a RangeTable,
}

struct Solved {
    ranges: NeuronRanges,
    stats: CertStats,
}

fn intersect_pre(a: &NeuronRanges, b: &NeuronRanges, relu: bool) -> NeuronRanges {
    NeuronRanges::from_pre(a.y.intersect(&b.y), a.dy.intersect(&b.dy), a.hat_y.intersect(&b.hat_y), relu)
}

impl Ctx<'_> {
    fn encoding_config(&self, refine_set: BTreeSet<NeuronRef>) -> EncodingConfig {
        EncodingConfig {
            scheme: self.cfg.scheme,
            relaxation: Relaxation::Lpr,
            refine_set,
            mode: self.cfg.mode.clone(),
            include_hat_relaxation: self.cfg.include_hat_relaxation,
            refine_target: self.cfg.refine_target,
        }
    }

    /// Top-`r` neurons among those in the sub-network's cone, excluding the input and target layers.
    fn refinement(&self, sub: &SubNetwork) -> BTreeSet<NeuronRef> {
        if self.cfg.refine_count == 0 {
            return BTreeSet::new();
        }
        let s = sub.source();
        let t = sub.target().layer;
        let cone = sub.cone();
        let scores: Vec<_> = score_neurons(self.net, self.table, s + 1..t, self.cfg.scheme)
            .into_iter()
            .filter(|sc| cone[sc.neuron.layer - s].binary_search(&sc.neuron.index).is_ok())
            .collect();
        select_refinement(&scores, self.cfg.refine_count)
    }

    /// Minimizes and maximizes each quantity of the target; returns the sound range per quantity.
    fn solve_ranges(
        &self,
        sub: &SubNetwork,
        target: &NeuronRanges,
        quantities: &[Quantity],
        stats: &mut CertStats,
    ) -> Result<Vec<Interval>> {
        let ecfg = self.encoding_config(self.refinement(sub));
        let enc = encode_twin_subnet(sub, self.table, &ecfg, Some(target))?;
        stats.refined_neurons += enc.refined.len();
        let binary = enc.num_binaries() > 0;
        let mut solver = MilpSolver::new(&enc.cs)?;
        let mut out = Vec::with_capacity(quantities.len());
        for &q in quantities {
            let mut bounds = [0.0; 2];
            for (k, sense) in [Sense::Minimize, Sense::Maximize].into_iter().enumerate() {
                let res = solver.solve(&enc.objective(q, sense), self.cfg.node_limit)?;
                if binary {
                    stats.milp_solves += 1;
                } else {
                    stats.lp_solves += 1;
                }
                stats.bb_nodes += res.nodes_explored;
                match res.status {
                    SolveStatus::Infeasible => {
                        let t = sub.target();
                        log::error!("infeasible sub-problem:\n{}", enc.cs.to_lp_string());
                        return Err(Error::Solver(format!(
                            "{q:?} {sense:?} sub-problem of neuron ({}, {}) with window {} is infeasible",
                            t.layer,
                            t.index,
                            sub.depth()
                        )));
                    }
                    SolveStatus::BoundOnly => stats.truncated_solves += 1,
                    SolveStatus::Optimal => {}
                }
                bounds[k] = res.dual_bound;
            }
            out.push(Interval::new(bounds[0], bounds[1]));
        }
        Ok(out)
    }

    fn neuron(&self, layer: usize, j: usize, pre: &NeuronRanges, is_output: bool) -> Result<Solved> {
        let net = self.net;
        let cfg = self.cfg;
        let relu = net.affine_layer(layer).relu;
        let w = layer.min(cfg.window);
        let local = matches!(cfg.mode, Mode::Local(_));
        let mut stats = CertStats::default();
        let mut r = *pre;

        if cfg.pre_bounds == PreBounds::Lp {
            let sub = decompose(net, layer, j, Stage::Pre, w)?;
            let mut qs = vec![Quantity::Y];
            if cfg.scheme == Scheme::Itne {
                qs.push(Quantity::DeltaY);
            }
            if local {
                qs.push(Quantity::HatY);
            }
            let got = self.solve_ranges(&sub, &r, &qs, &mut stats)?;
            let y = r.y.intersect(&got[0]);
            let mut dy = r.dy;
            let mut hat_y = r.hat_y;
            let mut k = 1;
            if cfg.scheme == Scheme::Itne {
                dy = dy.intersect(&got[k]).with_zero();
                k += 1;
            }
            if local {
                hat_y = hat_y.intersect(&got[k]);
            } else {
                // both copies range over the same domain
                hat_y = hat_y.intersect(&y);
            }
            if cfg.scheme == Scheme::Itne {
                hat_y = hat_y.intersect(&y.add(&dy));
            }
            r = NeuronRanges::from_pre(y, dy, hat_y, relu);
        }
        if cfg.scheme == Scheme::Btne {
            r = btne_ranges(r);
        }

        if needs_dx_solve(cfg, &r, relu, is_output) {
            let sub = decompose(net, layer, j, Stage::Post, w)?;
            let got = self.solve_ranges(&sub, &r, &[Quantity::DeltaX], &mut stats)?;
            r.dx = match cfg.scheme {
                Scheme::Itne => r.dx.intersect(&got[0]).with_zero(),
                Scheme::Btne => got[0].with_zero(),
            };
        }
        Ok(Solved { ranges: r, stats })
    }
}

/// Under BTNE the copies share no distance information beyond the input.
fn btne_ranges(r: NeuronRanges) -> NeuronRanges {
    NeuronRanges {
        dy: r.hat_y.sub(&r.y),
        dx: r.hat_x.sub(&r.x),
        ..r
    }
}

fn needs_dx_solve(cfg: &CertConfig, r: &NeuronRanges, relu: bool, output: bool) -> bool {
    match cfg.scheme {
        Scheme::Btne => output,
        Scheme::Itne => match cfg.pre_bounds {
            PreBounds::Lp => relu && !r.is_stable(),
            PreBounds::Interval => !(relu && r.base_phase() == Phase::Inactive && r.hat_phase() == Phase::Inactive),
        },
    }
}

fn certify(net: &Network, cfg: &CertConfig, base: &HyperBox, hat: &HyperBox) -> Result<CertReport> {
    cfg.validate(net)?;
    let start = Instant::now();
    let intervals = propagate_twin_intervals(net, base, hat, cfg.delta)?;
    let mut table = RangeTable {
        layers: vec![intervals.layers[0].clone()],
    };
    let outputs = cfg.output_indices(net);
    let depth = net.depth();
    let mut stats = CertStats::default();

    for layer in 1..=depth {
        let aff = net.affine_layer(layer);
        let pre: Vec<NeuronRanges> = propagate_layer(aff, &table.layers[layer - 1])
            .iter()
            .zip(&intervals.layers[layer])
            .map(|(p, i)| intersect_pre(p, i, aff.relu))
            .collect();
        let is_output = layer == depth;
        let active: Vec<bool> = (0..aff.out_dim())
            .map(|j| !is_output || outputs.binary_search(&j).is_ok())
            .collect();
        table.layers.push(pre.clone());
        let ctx = Ctx {
            net,
            cfg,
            table: &table,
        };
        let solved: Vec<Result<Option<Solved>>> = (0..aff.out_dim())
            .into_par_iter()
            .map(|j| {
                if !active[j] {
                    return Ok(None);
                }
                ctx.neuron(layer, j, &pre[j], is_output).map(Some)
            })
            .collect();
        let mut next = pre;
        for (j, s) in solved.into_iter().enumerate() {
            if let Some(s) = s? {
                next[j] = s.ranges;
                stats.merge(&s.stats);
            }
        }
        *table.layers.last_mut().unwrap() = next;
        log::info!("layer {layer}/{depth} certified");
    }

    let last = &table.layers[depth];
    let outputs = outputs
        .into_iter()
        .map(|j| OutputBound {
            index: j,
            epsilon_upper: last[j].dx.magnitude(),
        })
        .collect();
    stats.wall_time_seconds = Some(start.elapsed().as_secs_f64());
    Ok(CertReport {
        config: cfg.clone(),
        outputs,
        ranges: Some(table),
        stats,
    })
}

/// Certified bound on `|F_j(x_hat) - F_j(x)|` over all `x, x_hat` in the domain with
/// `|x_hat - x|_inf <= delta`.
pub fn certify_global(net: &Network, cfg: &CertConfig) -> Result<CertReport> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Global;
    certify(net, &cfg, &cfg.domain, &cfg.domain)
}

/// Same bound with the base input pinned to `x0`.
pub fn certify_local(net: &Network, x0: &[f64], cfg: &CertConfig) -> Result<CertReport> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Local(x0.to_vec());
    cfg.validate(net)?;
    let base = HyperBox::point(x0);
    let hat = cfg.domain.ball_intersection(x0, cfg.delta);
    certify(net, &cfg, &base, &hat)
}
