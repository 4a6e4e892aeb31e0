use desireme::demb;
use desireme::moe::{checkpoint, random_gate};
use desireme::{Matrix, MoeParams, Pooling, Rng, Vector};
use serde::Serialize;

use super::{require_embeddings, require_input, require_output, Context};
use crate::args::{TransformArgs, TransformMode};
use crate::config::echo;
use crate::error::Result;

/// RNG stream for random gates, so they never coincide with other draws
/// from the same seed.
const RNDG_STREAM: u64 = 11;

#[derive(Serialize)]
struct Echo {
    checkpoint: String,
    input: String,
    mode: String,
    seed: u64,
}

pub fn run(a: TransformArgs, ctx: &Context) -> Result<()> {
    require_input(&a.checkpoint)?;
    require_embeddings(&a.input)?;
    require_output(&a.output)?;

    let params: MoeParams<f32> = checkpoint::load(&a.checkpoint)?;
    let mode = a.mode.unwrap_or(match params.mode.pooling {
        Pooling::Weighted => TransformMode::Weighted,
        Pooling::Top1 => TransformMode::Top1,
    });
    echo(
        "transform",
        &Echo {
            checkpoint: a.checkpoint.display().to_string(),
            input: a.input.display().to_string(),
            mode: format!("{mode:?}").to_lowercase(),
            seed: ctx.seed,
        },
    );
    let (ids, queries) = demb::load(&a.input)?;

    let mut rng = Rng::new(ctx.seed).fork(RNDG_STREAM);
    let mut data = Vec::with_capacity(queries.as_slice().len());
    for i in 0..queries.rows() {
        let x = Vector::from_vec(queries.row(i).to_vec());
        let y = match mode {
            TransformMode::Weighted => params.transform_with(&x, Pooling::Weighted)?,
            TransformMode::Top1 => params.transform_with(&x, Pooling::Top1)?,
            TransformMode::RndG => {
                let gates = random_gate(params.num_domains(), &mut rng)?;
                params.transform_with_gates(&x, &gates, Pooling::Weighted)?
            }
        };
        data.extend_from_slice(y.as_slice());
    }
    let out = if queries.rows() == 0 {
        Matrix::zeros(0, queries.cols())
    } else {
        Matrix::new(queries.rows(), queries.cols(), data)?
    };
    demb::save(&a.output, &ids, &out)?;
    println!("transformed={}", ids.len());
    Ok(())
}
