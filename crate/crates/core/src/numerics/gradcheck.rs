use super::optim::Parameters;
use super::tape::{NodeId, Tape};
use crate::error::Result;

/// Magnitude below which gradient coordinates are compared absolutely
/// rather than relatively.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub coordinates: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares the tape gradient of `loss_fn` against central differences
/// `(L(p + eps) - L(p - eps)) / 2 eps` on every scalar of `params`.
pub fn grad_check<P, F>(
    params: &P,
    epsilon: f64,
    tolerance: f64,
    loss_fn: F,
) -> Result<GradCheckReport>
where
    P: Parameters + Clone,
    F: Fn(&P, &mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(params, &mut tape)?;
    let analytic = tape.param_grads(loss, &params.tensor_shapes())?;

    let eval = |p: &P| -> Result<f64> {
        let mut t = Tape::new();
        let l = loss_fn(p, &mut t)?;
        t.value(l).item()
    };

    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        coordinates: 0,
        tolerance,
    };
    let mut probe = params.clone();
    for (t_idx, (name, g)) in names.iter().zip(analytic.iter()).enumerate() {
        let len = probe.tensors_mut()[t_idx].len();
        for i in 0..len {
            let original = probe.tensors_mut()[t_idx].data()[i];
            probe.tensors_mut()[t_idx].data_mut()[i] = original + epsilon;
            let up = eval(&probe)?;
            probe.tensors_mut()[t_idx].data_mut()[i] = original - epsilon;
            let down = eval(&probe)?;
            probe.tensors_mut()[t_idx].data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = g.map_or(0.0, |m| m.data()[i]);
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i));
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    Ok(report)
}
