use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::problem::{input_map, residual_layout, residual_seeds, residuals_from_jets, six_terms, JetSource};
use super::{
    build_shell_bank, shell_resgrad_loss, six_term_loss, wall_bc_audit, wall_reference_compare, AnnulusGeometry,
    FluxProfile, ShellBank, Stage2Cloud, TermBreakdown, TermWeights, WallComparison,
};
use crate::diffnet::{init_mlp, InputMap, JetLayout, Jets, MappedNetwork, NetworkParams};
use crate::error::{Error, Result};
use crate::fdref::WallSlice;
use crate::harness::{Arm, RunConfig, Stage};
use crate::optim::{optimizer_slot, AuxSchedule};
use crate::sampling;
use crate::train::{train, Objective, TrainOutcome};

struct TapedSource<'a> {
    net: &'a NetworkParams,
    map: &'a InputMap,
    grad: &'a mut [f64],
}

impl JetSource for TapedSource<'_> {
    fn eval(&mut self, points: &[f64], layout: &JetLayout, seeds_for: &mut dyn FnMut(&Jets) -> Vec<f64>) -> Result<()> {
        let taped = self.net.forward_taped(points, layout, Some(self.map))?;
        let seeds = seeds_for(taped.jets());
        taped.backward_into(&seeds, self.grad)
    }
}

/// Stage-2 objective: six-term loss plus `lambda_shell(epoch)` times the shell penalty.
pub struct Stage2Problem {
    pub geom: AnnulusGeometry,
    pub flux: FluxProfile,
    pub weights: TermWeights,
    pub train: Stage2Cloud,
    pub val: Stage2Cloud,
    pub bank: ShellBank,
    pub map: InputMap,
    pub arm: Arm,
    pub schedule: AuxSchedule,
}

impl Stage2Problem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let s = &cfg.stage2;
        let geom = s.geometry;
        geom.validate()?;
        s.flux.validate()?;
        Ok(Stage2Problem {
            geom,
            flux: s.flux,
            weights: s.weights,
            train: Stage2Cloud::sample(
                &geom,
                s.n_interior,
                s.n_boundary,
                s.n_pairs,
                cfg.seeds.cloud,
                sampling::stream::TRAIN_CLOUD,
            ),
            val: Stage2Cloud::sample(
                &geom,
                s.n_val_interior,
                s.n_val_boundary,
                s.n_val_pairs,
                cfg.seeds.validation,
                sampling::stream::VALIDATION_CLOUD,
            ),
            bank: build_shell_bank(&geom, &s.shell, 0.0)?,
            map: input_map(&geom),
            arm: cfg.arm,
            schedule: cfg.aux_schedule(),
        })
    }

    pub fn field<'a>(&'a self, net: &'a NetworkParams) -> MappedNetwork<'a> {
        MappedNetwork::new(net, Some(&self.map))
    }
}

impl Objective for Stage2Problem {
    fn loss_and_grad(&self, net: &NetworkParams, epoch: u64) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; net.n_params()];
        let mut src = TapedSource {
            net,
            map: &self.map,
            grad: &mut grad,
        };
        let terms = six_terms(&mut src, &self.train, &self.geom, &self.flux, &self.weights)?;
        let mut total = terms.weighted_total(&self.weights);
        let lambda = self.schedule.weight_at(epoch);
        if lambda > 0.0 && self.arm != Arm::Off {
            let layout = residual_layout();
            let pts = &self.bank.points;
            let taped = net.forward_taped(pts, &layout, Some(&self.map))?;
            let r = residuals_from_jets(taped.jets(), &layout, pts);
            let (shell, bar) = self.bank.loss_from_residuals(&r, Some(lambda))?;
            let mut seeds = vec![0.0; taped.jets().as_slice().len()];
            residual_seeds(&bar.expect("adjoint requested"), &layout, pts, &mut seeds);
            taped.backward_into(&seeds, &mut grad)?;
            total += lambda * shell;
        }
        if !total.is_finite() {
            return Err(Error::non_finite("stage-2 objective", None));
        }
        Ok((total, grad))
    }

    fn validation_loss(&self, net: &NetworkParams) -> Result<f64> {
        Ok(six_term_loss(&self.field(net), &self.val, &self.geom, &self.flux, &self.weights)?.0)
    }
}

/// Wall audit of a Stage-2 model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Audit {
    pub wall_bc_rmse: f64,
    /// Unweighted shell penalty.
    pub shell_probe: f64,
    pub reference: Option<WallComparison>,
    /// Validation-cloud terms of the audited model.
    pub val_terms: TermBreakdown,
}

pub fn audit_stage2(problem: &Stage2Problem, net: &NetworkParams, cfg: &RunConfig, reference: Option<&WallSlice>) -> Result<Stage2Audit> {
    let field = problem.field(net);
    let s = &cfg.stage2;
    Ok(Stage2Audit {
        wall_bc_rmse: wall_bc_audit(&field, &problem.geom, &problem.flux, s.audit_n_theta, s.audit_n_z)?,
        shell_probe: shell_resgrad_loss(&field, &problem.bank)?,
        reference: reference
            .map(|slice| wall_reference_compare(&field, &problem.geom, &problem.flux, slice))
            .transpose()?,
        val_terms: six_term_loss(&field, &problem.val, &problem.geom, &problem.flux, &problem.weights)?.1,
    })
}

#[derive(Debug, Clone)]
pub struct Stage2Run {
    pub outcome: TrainOutcome,
    pub audit: Option<Stage2Audit>,
    pub runtime_s: f64,
}

pub fn train_stage2(cfg: &RunConfig) -> Result<Stage2Run> {
    if cfg.stage != Stage::Stage2 {
        return Err(Error::Config("train_stage2 needs a stage2 config".into()));
    }
    cfg.validate()?;
    let started = Instant::now();
    let reference = cfg
        .stage2
        .reference
        .as_ref()
        .map(crate::fdref::read_wall_slice)
        .transpose()?;
    let mut problem = Stage2Problem::from_config(cfg)?;
    let net = init_mlp(&cfg.layer_sizes(), cfg.activation(), cfg.seeds.init)?;
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
        Some(audit_stage2(&problem, &outcome.best, cfg, reference.as_ref())?)
    } else {
        None
    };
    Ok(Stage2Run {
        outcome,
        audit,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}
