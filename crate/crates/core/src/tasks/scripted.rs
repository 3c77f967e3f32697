//! Waypoint proportional controllers for the planar transfer subtasks.

use super::planar::*;
use crate::envcore::Action;

/// Distance at which an end effector is treated as on top of its waypoint.
const ARRIVED: f64 = 0.005;

fn dist(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Proportional move command toward `(tx, ty)`, saturated to `[-1, 1]`.
fn toward(ex: f64, ey: f64, tx: f64, ty: f64, max_delta: f64) -> [f64; 2] {
    [
        ((tx - ex) / max_delta).clamp(-1.0, 1.0),
        ((ty - ey) / max_delta).clamp(-1.0, 1.0),
    ]
}

/// Opens a jaw if it is closed, otherwise leaves it.
fn open_cmd(j: f64) -> f64 {
    if j < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Expert action for subtask `i` (1-based) from `s` toward `subgoal`.
///
/// Pick (1): arm 1 approaches the block, closes, and carries it to the
/// subgoal. Hand-over (2): arm 2 closes on the block, arm 1 lets go, arm 2
/// carries it to the subgoal. Place (3): arm 2 carries the block to the
/// subgoal and opens. Arms not involved in a phase stay still.
pub fn scripted_action(cfg: &PlanarConfig, i: usize, s: &[f64], subgoal: &[f64]) -> Action {
    let d = cfg.max_delta;
    let mut a = vec![0.0; ACTION_DIM];
    let (bx, by) = (s[BX], s[BY]);
    let held1 = s[ATT1] > 0.5;
    let held2 = s[ATT2] > 0.5;
    let closed2 = s[J2] < JAW_CLOSED_BELOW;

    // grab a free block with one arm: (x, y, jaw) offsets into the action
    let grab = |a: &mut Vec<f64>, ex: f64, ey: f64, j: f64, off: usize| {
        if dist(ex, ey, bx, by) > ARRIVED {
            let m = toward(ex, ey, bx, by, d);
            a[off] = m[0];
            a[off + 1] = m[1];
            a[off + 2] = open_cmd(j);
        } else if j >= JAW_CLOSED_BELOW {
            a[off + 2] = -1.0;
        } else {
            a[off + 2] = 1.0;
        }
    };

    match i {
        1 => {
            if held1 {
                let m = toward(s[E1X], s[E1Y], subgoal[0], subgoal[1], d);
                a[0] = m[0];
                a[1] = m[1];
            } else if !held2 {
                grab(&mut a, s[E1X], s[E1Y], s[J1], 0);
            }
        }
        2 => {
            if held2 {
                let m = toward(s[E2X], s[E2Y], subgoal[0], subgoal[1], d);
                a[3] = m[0];
                a[4] = m[1];
            } else if held1 {
                let near = dist(s[E2X], s[E2Y], bx, by) <= ARRIVED;
                if !near {
                    let m = toward(s[E2X], s[E2Y], bx, by, d);
                    a[3] = m[0];
                    a[4] = m[1];
                    a[5] = open_cmd(s[J2]);
                } else if !closed2 {
                    a[5] = -1.0;
                } else {
                    a[2] = 1.0;
                }
            } else {
                grab(&mut a, s[E2X], s[E2Y], s[J2], 3);
            }
        }
        3 => {
            if held2 {
                if dist(bx, by, subgoal[0], subgoal[1]) > ARRIVED {
                    let m = toward(s[E2X], s[E2Y], subgoal[0], subgoal[1], d);
                    a[3] = m[0];
                    a[4] = m[1];
                } else {
                    a[5] = 1.0;
                }
            } else if !held1 && !crate::envcore::within_tolerance(&[bx, by], subgoal, cfg.tolerance)
            {
                grab(&mut a, s[E2X], s[E2Y], s[J2], 3);
            }
        }
        _ => {}
    }
    a
}
