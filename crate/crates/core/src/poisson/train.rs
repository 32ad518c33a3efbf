use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    ad_resgrad_loss, exact_partial, exact_solution, fd_resgrad_adjoint, fd_resgrad_loss, forcing,
    match_ad_weight, residual_gradients_from_jets, residual_layout, residuals, residuals_from_jets, AuxBank,
    AuxStrategy, Stage1Cloud,
};
use crate::diffnet::{init_mlp, Field, JetLayout, NetworkParams, Partial};
use crate::error::{Error, Result};
use crate::harness::{Arm, RunConfig, Stage};
use crate::optim::{optimizer_slot, AuxSchedule};
use crate::sampling;
use crate::train::{train, Objective, TrainOutcome};

/// Stage-1 training objective `L_PDE + lambda_BC L_BC + lambda_aux(epoch) L_aux`.
pub struct Stage1Problem {
    pub train: Stage1Cloud,
    pub val: Stage1Cloud,
    pub lambda_bc: f64,
    pub arm: Arm,
    pub bank: AuxBank,
    schedule: AuxSchedule,
    matched: bool,
    bank_nodes: Vec<Vec<f64>>,
    bank_interior: Vec<Vec<f64>>,
}

impl Stage1Problem {
    pub fn new(train: Stage1Cloud, val: Stage1Cloud, lambda_bc: f64, arm: Arm, schedule: AuxSchedule, bank: AuxBank) -> Self {
        let bank_nodes = (0..bank.count()).map(|b| bank.nodes(b)).collect();
        let bank_interior = (0..bank.count()).map(|b| bank.interior_nodes(b)).collect();
        Stage1Problem {
            train,
            val,
            lambda_bc,
            arm,
            bank,
            schedule,
            matched: false,
            bank_nodes,
            bank_interior,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let s = &cfg.stage1;
        let train = Stage1Cloud::sample(s.n_interior, s.n_boundary, cfg.seeds.cloud, sampling::stream::TRAIN_CLOUD);
        let val = Stage1Cloud::sample(
            s.n_val_interior,
            s.n_val_boundary,
            cfg.seeds.validation,
            sampling::stream::VALIDATION_CLOUD,
        );
        let bank = AuxBank::with_default_spacing(s.aux_strategy, s.aux_n, cfg.seeds.cloud)?;
        Ok(Self::new(train, val, s.lambda_bc, cfg.arm, cfg.aux_schedule(), bank))
    }

    /// Current schedule; for AD arms `lambda0` is the matched weight once switched on.
    pub fn schedule(&self) -> &AuxSchedule {
        &self.schedule
    }

    fn is_ad(&self) -> bool {
        matches!(self.arm, Arm::AdFixed | Arm::AdLinear)
    }

    /// FD residual-gradient loss of `field` on bank `b`.
    pub fn fd_loss(&self, field: &impl Field, b: usize) -> Result<f64> {
        let r = residuals(field, &self.bank_nodes[b])?;
        let m = self.bank.side();
        fd_resgrad_loss(&r, m, m, self.bank.h)
    }

    /// AD residual-gradient loss of `field` on the interior of bank `b`.
    pub fn ad_loss(&self, field: &impl Field, b: usize) -> Result<f64> {
        ad_resgrad_loss(field, &self.bank_interior[b])
    }
}

impl Objective for Stage1Problem {
    fn begin_epoch(&mut self, net: &NetworkParams, epoch: u64) -> Result<()> {
        if self.is_ad() && !self.matched && self.schedule.weight_at(epoch) > 0.0 {
            let b = self.bank.index_for_epoch(epoch);
            let s_fd = self.fd_loss(net, b)?;
            let s_ad = self.ad_loss(net, b)?;
            self.schedule.lambda0 = match_ad_weight(self.schedule.lambda0, s_fd, s_ad)?;
            self.matched = true;
        }
        Ok(())
    }

    fn loss_and_grad(&self, net: &NetworkParams, epoch: u64) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; net.n_params()];
        let layout = residual_layout();
        let (cxx, cyy) = (layout.expect(Partial::dd(0, 0)), layout.expect(Partial::dd(1, 1)));
        let w = layout.width();

        let taped = net.forward_taped(&self.train.interior, &layout, None)?;
        let r = residuals_from_jets(taped.jets(), &layout, &self.train.interior);
        let n = r.len() as f64;
        let pde = r.iter().map(|v| v * v).sum::<f64>() / n;
        let mut seeds = vec![0.0; r.len() * w];
        for (p, rv) in r.iter().enumerate() {
            seeds[p * w + cxx] = 2.0 * rv / n;
            seeds[p * w + cyy] = 2.0 * rv / n;
        }
        taped.backward_into(&seeds, &mut grad)?;

        let vl = JetLayout::value(2);
        let taped = net.forward_taped(&self.train.boundary, &vl, None)?;
        let nb = self.train.n_boundary() as f64;
        let diff: Vec<f64> = self
            .train
            .boundary
            .chunks(2)
            .enumerate()
            .map(|(p, x)| taped.jets().get(p, 0) - exact_solution(x[0], x[1]))
            .collect();
        let bc = diff.iter().map(|d| d * d).sum::<f64>() / nb;
        let seeds: Vec<f64> = diff.iter().map(|d| self.lambda_bc * 2.0 * d / nb).collect();
        taped.backward_into(&seeds, &mut grad)?;

        let mut total = pde + self.lambda_bc * bc;
        let lambda = self.schedule.weight_at(epoch);
        if lambda > 0.0 && self.arm != Arm::Off {
            let b = self.bank.index_for_epoch(epoch);
            let aux = if self.is_ad() {
                let nodes = &self.bank_interior[b];
                let gl = JetLayout::laplacian_gradient(2);
                let taped = net.forward_taped(nodes, &gl, None)?;
                let g = residual_gradients_from_jets(taped.jets(), &gl, nodes);
                let n = g.len() as f64;
                let c = |a, b, d| gl.expect(Partial::ddd(a, b, d));
                let (xxx, xyy, xxy, yyy) = (c(0, 0, 0), c(0, 1, 1), c(0, 0, 1), c(1, 1, 1));
                let gw = gl.width();
                let mut seeds = vec![0.0; g.len() * gw];
                for (p, v) in g.iter().enumerate() {
                    let (sx, sy) = (lambda * 2.0 * v[0] / n, lambda * 2.0 * v[1] / n);
                    seeds[p * gw + xxx] = sx;
                    seeds[p * gw + xyy] = sx;
                    seeds[p * gw + xxy] = sy;
                    seeds[p * gw + yyy] = sy;
                }
                taped.backward_into(&seeds, &mut grad)?;
                g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / n
            } else {
                let nodes = &self.bank_nodes[b];
                let m = self.bank.side();
                let taped = net.forward_taped(nodes, &layout, None)?;
                let r = residuals_from_jets(taped.jets(), &layout, nodes);
                let loss = fd_resgrad_loss(&r, m, m, self.bank.h)?;
                let bar = fd_resgrad_adjoint(&r, m, m, self.bank.h, lambda)?;
                let mut seeds = vec![0.0; r.len() * w];
                for (p, v) in bar.iter().enumerate() {
                    seeds[p * w + cxx] = *v;
                    seeds[p * w + cyy] = *v;
                }
                taped.backward_into(&seeds, &mut grad)?;
                loss
            };
            total += lambda * aux;
        }
        if !total.is_finite() {
            return Err(Error::non_finite("stage-1 objective", None));
        }
        Ok((total, grad))
    }

    fn validation_loss(&self, net: &NetworkParams) -> Result<f64> {
        let (pde, bc) = super::base_losses(net, &self.val)?;
        Ok(pde + self.lambda_bc * bc)
    }
}

/// Fresh-cloud audit metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Audit {
    pub rel_l2_u: f64,
    pub rel_l2_grad_u: f64,
    pub residual_rmse: f64,
    pub grad_r_rmse: f64,
    /// FD residual-gradient loss on the four half-cell-shifted aux grids.
    pub shifted_fd_rg: Vec<f64>,
}

/// Audits `field` on `n_points` scrambled Sobol points and on shifted aux grids of size `aux_n`.
pub fn audit_stage1(field: &impl Field, audit_seed: u64, n_points: usize, aux_n: usize) -> Result<Stage1Audit> {
    if n_points == 0 {
        return Err(Error::invalid("audit needs at least one point"));
    }
    let seed = (audit_seed ^ (audit_seed >> 32)) as u32;
    let pts = sampling::sobol_box(n_points, &[(0.0, 1.0), (0.0, 1.0)], seed);
    let layout = JetLayout::laplacian_gradient(2);
    let jets = field.jets(&pts, &layout)?;
    let (cx, cy) = (layout.expect(Partial::d(0)), layout.expect(Partial::d(1)));
    let (cxx, cyy) = (layout.expect(Partial::dd(0, 0)), layout.expect(Partial::dd(1, 1)));
    let grads = residual_gradients_from_jets(&jets, &layout, &pts);
    let (mut e_u, mut n_u, mut e_g, mut n_g, mut r2, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, x) in pts.chunks(2).enumerate() {
        let (xx, yy) = (x[0], x[1]);
        let u = exact_solution(xx, yy);
        let ux = exact_partial(xx, yy, Partial::d(0));
        let uy = exact_partial(xx, yy, Partial::d(1));
        e_u += (jets.get(p, 0) - u).powi(2);
        n_u += u * u;
        e_g += (jets.get(p, cx) - ux).powi(2) + (jets.get(p, cy) - uy).powi(2);
        n_g += ux * ux + uy * uy;
        r2 += (jets.get(p, cxx) + jets.get(p, cyy) - forcing(xx, yy)).powi(2);
        g2 += grads[p][0].powi(2) + grads[p][1].powi(2);
    }
    let n = n_points as f64;
    let shifted = AuxBank::with_default_spacing(AuxStrategy::Cycle4, aux_n, 0)?;
    let m = shifted.side();
    let shifted_fd_rg = (0..shifted.count())
        .map(|b| {
            let r = residuals(field, &shifted.nodes(b))?;
            fd_resgrad_loss(&r, m, m, shifted.h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Stage1Audit {
        rel_l2_u: (e_u / n_u).sqrt(),
        rel_l2_grad_u: (e_g / n_g).sqrt(),
        residual_rmse: (r2 / n).sqrt(),
        grad_r_rmse: (g2 / n).sqrt(),
        shifted_fd_rg,
    })
}

/// Result of one Stage-1 run.
#[derive(Debug, Clone)]
pub struct Stage1Run {
    pub outcome: TrainOutcome,
    pub audit: Option<Stage1Audit>,
    /// Auxiliary weight actually applied at switch-on (the matched value for AD arms).
    pub effective_aux_weight: f64,
    pub runtime_s: f64,
}

pub fn train_stage1(cfg: &RunConfig) -> Result<Stage1Run> {
    if cfg.stage != Stage::Stage1 {
        return Err(Error::Config("train_stage1 needs a stage1 config".into()));
    }
    cfg.validate()?;
    let started = Instant::now();
    let net = init_mlp(&cfg.layer_sizes(), cfg.activation(), cfg.seeds.init)?;
    let mut problem = Stage1Problem::from_config(cfg)?;
    let mut opt = optimizer_slot(cfg.optimizer.kind, net.n_params(), None)?;
    let outcome = train(
        net,
        &mut problem,
        opt.as_mut(),
        &cfg.lr_schedule(),
        cfg.epochs,
        cfg.validate_every,
    )?;
    let audit = if outcome.best_val.is_finite() {
        Some(audit_stage1(&outcome.best, cfg.seeds.audit, cfg.stage1.audit_points, cfg.stage1.aux_n)?)
    } else {
        None
    };
    Ok(Stage1Run {
        effective_aux_weight: problem.schedule().lambda0,
        outcome,
        audit,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}
