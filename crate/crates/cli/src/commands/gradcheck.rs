use desireme::training::{grad_check, random_instance, total_loss, FaultInjection, GradCheckOptions};
use serde::Serialize;

use super::Context;
use crate::args::GradcheckArgs;
use crate::config::{echo, resolve_train_config, TrainEcho};
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct Echo {
    dim: usize,
    domains: usize,
    batch: usize,
    inject_fault: bool,
    #[serde(flatten)]
    train: TrainEcho,
}

pub fn run(a: GradcheckArgs, ctx: &Context) -> Result<()> {
    if a.dim < 2 || a.domains == 0 || a.batch == 0 {
        return Err(CliError::usage("gradcheck needs --dim >= 2, --domains >= 1 and --batch >= 1"));
    }
    let config = resolve_train_config(&a.hyper, &ctx.file, ctx.seed)?;
    echo(
        "gradcheck",
        &Echo {
            dim: a.dim,
            domains: a.domains,
            batch: a.batch,
            inject_fault: a.inject_fault,
            train: TrainEcho::from(&config),
        },
    );
    let (params, examples) = random_instance(a.dim, a.domains, a.batch, config.mode(), ctx.seed)?;
    let batch: Vec<_> = examples.iter().collect();

    let mut options = GradCheckOptions::default();
    if a.inject_fault {
        // Corrupt the largest entry so the error clears any tolerance floor.
        let (_, grads) = total_loss(&batch, &params, &config)?;
        let mut target = FaultInjection { tensor: 0, index: 0, factor: 2.0 };
        let mut largest = -1.0;
        for (t, values) in grads.tensors().iter().enumerate() {
            for (i, v) in values.iter().enumerate() {
                if v.abs() > largest {
                    largest = v.abs();
                    target.tensor = t;
                    target.index = i;
                }
            }
        }
        log::info!("injecting fault at {}[{}]", params.tensor_names()[target.tensor], target.index);
        options.fault = Some(target);
    }

    let report = grad_check(&params, &batch, &config, &options)?;
    println!(
        "checked={} kink_skipped={} max_rel_error={:.3e} mismatches={}",
        report.checked,
        report.kink_skipped,
        report.max_rel_error,
        report.mismatches.len()
    );
    for m in report.mismatches.iter().take(10) {
        println!(
            "  {}[{}] analytic={:.6e} numeric={:.6e} rel_error={:.3e}",
            m.tensor, m.index, m.analytic, m.numeric, m.rel_error
        );
    }
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "{} gradient entries exceed relative tolerance {:e}",
            report.mismatches.len(),
            options.rel_tol
        )))
    }
}
