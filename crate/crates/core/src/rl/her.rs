//! Hindsight relabeling with the "future" strategy.

use rand::Rng;

use crate::envcore::{EpisodeTrajectory, SimRng, Transition};

/// Returns every original transition followed by `k` copies whose goal is the
/// achieved subgoal of a uniformly drawn step at or after it. Rewards of the
/// copies come from `reward(next_state, goal)`; a copy is done when its new
/// reward is 1 or the original step was the last one.
pub fn her_relabel<F>(episode: &EpisodeTrajectory, k: usize, rng: &mut SimRng, reward: F) -> Vec<Transition>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let steps = &episode.transitions;
    let mut out = Vec::with_capacity(steps.len() * (k + 1));
    for (t, tr) in steps.iter().enumerate() {
        out.push(tr.clone());
        for _ in 0..k {
            let future = rng.random_range(t..steps.len());
            let goal = steps[future].achieved.clone();
            let r = reward(&tr.next_state, &goal);
            out.push(Transition {
                state: tr.state.clone(),
                action: tr.action.clone(),
                reward: r,
                next_state: tr.next_state.clone(),
                done: r == 1.0 || t + 1 == steps.len(),
                goal,
                achieved: tr.achieved.clone(),
            });
        }
    }
    out
}
