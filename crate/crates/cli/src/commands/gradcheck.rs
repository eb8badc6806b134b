use anyhow::anyhow;
use relgcn::model::check_model_gradients;
use relgcn::tensor::{GradCheckOptions, GroupError};
use relgcn::{ModelConfig, Variant};
use serde::Serialize;

use super::{model_config, print_json};
use crate::args::GradcheckArgs;
use crate::error::{CliError, CliResult, EXIT_RUNTIME};

#[derive(Serialize)]
struct Report {
    seed: u64,
    tokens: usize,
    loss: f64,
    attempts: usize,
    kink_margin: f64,
    groups: Vec<GroupError>,
    max_rel_error: f64,
    threshold: f64,
    passed: bool,
}

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let variant = args.model.model.unwrap_or(Variant::Cgcn);
    let config = model_config(ModelConfig::tiny(variant), &args.model, args.k);
    if args.tokens < 2 {
        return Err(CliError::usage(anyhow!("--tokens must be at least 2")));
    }
    let opts = GradCheckOptions {
        eps: args.eps,
        corrupt: args.corrupt.then(|| ("out.w".to_string(), 0, 0.1)),
    };
    let check = check_model_gradients(&config, args.tokens, args.seed, &opts)?;
    let passed = check.report.max_rel_error < args.threshold;
    for g in &check.report.groups {
        eprintln!("{:<24} {:>6} entries  rel {:.3e}  abs {:.3e}", g.name, g.entries, g.max_rel_error, g.max_abs_error);
    }
    eprintln!("overall max relative error {:.3e} (threshold {:.0e})", check.report.max_rel_error, args.threshold);
    print_json(&Report {
        seed: args.seed,
        tokens: args.tokens,
        loss: check.report.loss,
        attempts: check.attempts,
        kink_margin: check.kink_margin,
        groups: check.report.groups,
        max_rel_error: check.report.max_rel_error,
        threshold: args.threshold,
        passed,
    })?;
    if passed {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_RUNTIME,
            error: anyhow!("gradient check failed: max relative error {:.3e}", check.report.max_rel_error),
        })
    }
}
