//! `log|p⁺ − p⁻|` for the root marginal under all-plus versus all-minus
//! frontier spins, computed in log space so that differences far below
//! machine epsilon stay representable.

use super::{message, NodeKind, SawTree};
use crate::numeric::{log_add_exp, softplus, LogSumExp};

/// A signed quantity `sign · e^{log}`.
#[derive(Debug, Clone, Copy)]
struct Signed {
    log: f64,
    sign: f64,
}

impl Signed {
    const ZERO: Signed = Signed {
        log: f64::NEG_INFINITY,
        sign: 0.0,
    };
}

/// `log(1 − e^{−d})` given `log d`.
fn log1mexp_from_log(log_d: f64) -> f64 {
    if log_d < -30.0 {
        let d = log_d.exp();
        log_d - 0.5 * d
    } else {
        (-(-log_d.exp()).exp_m1()).ln()
    }
}

/// `log|e^x − e^y|` where `x − y = gap`.
fn log_exp_gap(x: f64, y: f64, gap: Signed) -> f64 {
    x.max(y) + log1mexp_from_log(gap.log)
}

/// `message(x) − message(y)` where `x − y = gap`.
fn message_gap(x: f64, y: f64, gap: Signed, beta: f64) -> Signed {
    if gap.sign == 0.0 || beta == 0.0 {
        return Signed::ZERO;
    }
    let log_z = (4.0 * beta).exp_m1().abs().ln() + log_exp_gap(x, y, gap)
        - softplus(2.0 * beta + y)
        - log_add_exp(x, 2.0 * beta);
    let sign = gap.sign * beta.signum();
    if log_z < -30.0 {
        let z = sign * log_z.exp();
        Signed {
            log: log_z + (-0.5 * z).ln_1p(),
            sign,
        }
    } else {
        let v = (sign * log_z.exp()).ln_1p();
        Signed {
            log: v.abs().ln(),
            sign: v.signum(),
        }
    }
}

fn signed_sum(terms: impl IntoIterator<Item = Signed>) -> Signed {
    let mut pos = LogSumExp::new();
    let mut neg = LogSumExp::new();
    for t in terms {
        if t.sign > 0.0 {
            pos.push(t.log);
        } else if t.sign < 0.0 {
            neg.push(t.log);
        }
    }
    let (p, n) = (pos.value(), neg.value());
    if p == n {
        return Signed::ZERO;
    }
    let (hi, lo, sign) = if p > n { (p, n, 1.0) } else { (n, p, -1.0) };
    Signed {
        log: hi + (-(lo - hi).exp()).ln_1p(),
        sign,
    }
}

/// `log|p⁺ − p⁻|` where `p^±` is the root marginal with every frontier leaf
/// fixed to `±1`; the tree's own frontier policy is ignored. Returns `−∞`
/// when the frontier cannot influence the root.
pub fn frontier_sensitivity(tree: &SawTree, beta: f64) -> f64 {
    let nodes = tree.nodes();
    let len = nodes.len();
    let mut plus = vec![0.0; len];
    let mut minus = vec![0.0; len];
    let mut gap = vec![Signed::ZERO; len];
    for id in (0..len).rev() {
        let n = &nodes[id];
        if n.fixed_spin.is_some() || n.kind == NodeKind::Frontier {
            continue;
        }
        let (mut lp, mut lm) = (2.0 * n.field, 2.0 * n.field);
        let mut terms = Vec::new();
        for &c in &n.children {
            let child = &nodes[c];
            match child.kind {
                NodeKind::Frontier => {
                    lp += 2.0 * beta;
                    lm -= 2.0 * beta;
                    if beta != 0.0 {
                        terms.push(Signed {
                            log: (4.0 * beta.abs()).ln(),
                            sign: beta.signum(),
                        });
                    }
                }
                NodeKind::Free => {
                    lp += message(plus[c], beta);
                    lm += message(minus[c], beta);
                    terms.push(message_gap(plus[c], minus[c], gap[c], beta));
                }
                NodeKind::CycleLeaf | NodeKind::BoundaryLeaf => {
                    let s = child.fixed_spin.expect("leaf spin").sign();
                    lp += 2.0 * beta * s;
                    lm += 2.0 * beta * s;
                }
            }
        }
        plus[id] = lp;
        minus[id] = lm;
        gap[id] = signed_sum(terms);
    }
    let root = &nodes[0];
    if root.kind == NodeKind::Frontier {
        return 0.0;
    }
    let g = gap[0];
    if g.sign == 0.0 {
        return f64::NEG_INFINITY;
    }
    log_exp_gap(plus[0], minus[0], g) - softplus(plus[0]) - softplus(minus[0])
}
