//! Runs the standard error-study grid on the sine-decay case.

use heatsource_core::harness::{self, run_inversion, InversionSpec, ManufacturedCase};
use heatsource_core::{ForwardModel, Objective, ObjectiveConfig};

fn main() -> heatsource_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let i_x: usize = args.get(1).map_or(100, |s| s.parse().unwrap());
    let i_t: usize = args.get(2).map_or(100, |s| s.parse().unwrap());
    let alpha: f64 = args.get(3).map_or(1e-6, |s| s.parse().unwrap());
    let spec = InversionSpec {
        i_x,
        i_t,
        alpha,
        ..InversionSpec::default()
    };
    println!("n_x n_t sensor      E_F        E_u0   iters  cost      ridge_E_F  ridge_E_u0");
    for cell in harness::study_grid(alpha) {
        let case = ManufacturedCase::sine_decay(cell.sensor)?;
        let spec = InversionSpec {
            n_x: cell.n_x,
            n_t: cell.n_t,
            ..spec.clone()
        };
        let inv = run_inversion(&case, &spec)?;
        let r = &inv.report;
        let tables = ForwardModel::new(case.geometry, spec.trunc)
            .sensitivities(&inv.mesh, cell.n_x, cell.n_t)?;
        let obj = Objective::new(&tables, &inv.measurements, ObjectiveConfig::new(alpha)?)?;
        let ridge = obj.ridge_solve()?;
        let (rf, ru) = harness::rmse(&case, &ridge, &inv.mesh);
        println!(
            "{:>3} {:>3} {:>6.2} {:>10.3e} {:>10.3e} {:>5} {:>9.3e} {:>10.3e} {:>10.3e}",
            r.n_x, r.n_t, r.sensor, r.e_f, r.e_u0, r.iterations, r.final_cost, rf, ru
        );
    }
    Ok(())
}
