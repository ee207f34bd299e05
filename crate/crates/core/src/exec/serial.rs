use std::time::Instant;

use super::{elapsed_ns, RunContext};
use crate::error::Result;
use crate::logger::{IterationRecord, Logger};
use crate::loss::Loss;
use crate::solver::{evaluate, DecisionVector, Policies};
use crate::terminator::Terminator;

/// terminate? → gradient → boost → smooth → step → prox → log → k++
pub(crate) fn run<L: Loss + ?Sized>(
    policies: &mut Policies,
    state: &mut DecisionVector,
    ctx: &RunContext<'_, L>,
    terminator: &mut dyn Terminator,
    logger: &mut dyn Logger,
) -> Result<()> {
    let start = Instant::now();
    let mut sampler = ctx.sampler.clone();
    let mut scratch = vec![0.0; state.dim()];
    let wants_x = logger.wants_x();

    while !terminator.should_stop(state.k, state.fval, &state.x, &state.g) {
        let batch = sampler.next_batch();
        let origin = batch.origin.unwrap_or(0);
        let fval = evaluate(ctx.loss, &batch, &state.x, &mut state.g)?;
        state.fval = fval;
        let k = state.k;
        policies.iterate(origin, k, k, fval, &mut state.x, &mut state.g, &mut scratch)?;
        if ctx.check_divergence {
            state.check_finite()?;
        }
        logger.log(IterationRecord {
            k,
            t_ns: elapsed_ns(start),
            fval,
            x: wants_x.then(|| state.x.clone()),
        });
        state.k += 1;
    }
    Ok(())
}
