use std::cell::RefCell;

use ode_solvers::{Dop853, SVector, System};

use super::{charts_for, hamiltonian_gradient, reduced_hamiltonian_with, EquilibriumCharts};
use crate::error::{Error, Result};
use crate::families::EquilibriumPoint;

type State = SVector<f64, 8>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-13,
            atol: 1e-15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowDiagnostics {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 8]>,
    /// `max |H(t) - H(0)| / |H(0)|` over the output times.
    pub energy_drift: f64,
    /// `max |ξ(t)|_inf` over the output times; measured from the equilibrium.
    pub max_excursion: f64,
    /// The trajectory left a chart or the shape domain and was cut short.
    pub truncated: bool,
    pub failure: Option<Error>,
}

struct Flow<'a> {
    e: &'a EquilibriumPoint,
    charts: &'a EquilibriumCharts,
    failure: &'a RefCell<Option<Error>>,
}

impl System<f64, State> for Flow<'_> {
    fn system(&self, _t: f64, y: &State, dy: &mut State) {
        let xi: [f64; 8] = std::array::from_fn(|i| y[i]);
        match self.domain_check(&xi).and_then(|_| hamiltonian_gradient(self.e, self.charts, &xi)) {
            Ok(g) => {
                // ξ' = J8 ∇H.
                for blk in [0, 4] {
                    for i in 0..2 {
                        dy[blk + i] = g[blk + 2 + i];
                        dy[blk + 2 + i] = -g[blk + i];
                    }
                }
            }
            Err(err) => {
                self.failure.borrow_mut().get_or_insert(err);
                dy.fill(0.0);
            }
        }
    }

    fn solout(&mut self, _t: f64, _y: &State, _dy: &State) -> bool {
        self.failure.borrow().is_some()
    }
}

impl Flow<'_> {
    fn domain_check(&self, xi: &[f64; 8]) -> Result<()> {
        for (q, p, ch) in [(xi[4], xi[6], &self.charts.left), (xi[5], xi[7], &self.charts.right)] {
            if let Some(ch) = ch {
                ch.check_domain(q, p)?;
            }
        }
        Ok(())
    }
}

/// Integrates Hamilton's equations of the reduced Hamiltonian from the
/// equilibrium displaced by `offset`, sampling every `dt` up to `t_end`.
pub fn integrate_reduced_flow(
    e: &EquilibriumPoint,
    offset: &[f64; 8],
    t_end: f64,
    dt: f64,
    opts: FlowOptions,
) -> Result<FlowDiagnostics> {
    let charts = charts_for(e)?;
    let h0 = reduced_hamiltonian_with(e, &charts, offset)?;
    let cell = RefCell::new(None);
    let flow = Flow {
        e,
        charts: &charts,
        failure: &cell,
    };
    let mut stepper = Dop853::new(flow, 0.0, t_end, dt, State::from(*offset), opts.rtol, opts.atol);
    let integration = stepper.integrate();
    let mut failure = cell.borrow().clone();
    if let Err(err) = integration {
        failure.get_or_insert(Error::Eigen(format!("integration failed: {err:?}")));
    }
    let times = stepper.x_out().clone();
    let states: Vec<[f64; 8]> = stepper
        .y_out()
        .iter()
        .map(|y| std::array::from_fn(|i| y[i]))
        .collect();
    let mut energy_drift: f64 = 0.0;
    let mut max_excursion: f64 = 0.0;
    let mut kept = 0;
    for xi in &states {
        match reduced_hamiltonian_with(e, &charts, xi) {
            Ok(h) => energy_drift = energy_drift.max((h - h0).abs() / h0.abs()),
            Err(err) => {
                failure.get_or_insert(err);
                break;
            }
        }
        max_excursion = max_excursion.max(xi.iter().fold(0.0, |m, v| m.max(v.abs())));
        kept += 1;
    }
    let truncated = failure.is_some();
    Ok(FlowDiagnostics {
        times: times[..kept].to_vec(),
        states: states[..kept].to_vec(),
        energy_drift,
        max_excursion,
        truncated,
        failure,
    })
}
