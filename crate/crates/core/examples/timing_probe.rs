use std::time::Instant;
use quadcool_cli_shim::*;

mod quadcool_cli_shim { pub use quadcool::*; }

fn main() {
    // Dump the three reference sweeps for offline analysis.
    use quadcool::fock::HilbertDims;
    use quadcool::lindblad::{CavityRateConvention, SteadySolver, phonon_distribution};
    use quadcool::rates::SystemParams;
    use quadcool::{kinetics, stats};

    for &g in &[0.1f64, 0.4, 0.8] {
        let params = SystemParams::new(g, 0.25, 0.0, 0.1, 1e-6, 10.0).unwrap();
        let dims = HilbertDims::new(3, 30).unwrap();
        let mut solver = SteadySolver::new(&params, &dims, CavityRateConvention::FullKappa).unwrap();
        let t = Instant::now();
        let mut out = String::from("delta,n_rate,q_rate,f_rate,tail_rate_ok,n_master,q_master,f_master,tail_master\n");
        for i in 0..51 {
            let delta = -5.0 + 0.1 * i as f64;
            let p = params.with_delta(delta);
            let (nr, qr, fr, tro) = match kinetics::steady_distribution_auto(&p) {
                Ok(d) => (
                    stats::mean_phonon(&d),
                    stats::mandel_q(&d).unwrap_or(f64::NAN),
                    stats::number_fluctuations(&d).unwrap_or(f64::NAN),
                    d.tail_ok(),
                ),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN, false),
            };
            let (nm, qm, fm, tm) = match solver.solve_at(delta) {
                Ok(rho) => {
                    let marg = phonon_distribution(&rho).unwrap();
                    (
                        stats::mean_phonon(&marg),
                        stats::mandel_q(&marg).unwrap_or(f64::NAN),
                        stats::number_fluctuations(&marg).unwrap_or(f64::NAN),
                        *marg.probs().last().unwrap(),
                    )
                }
                Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            out.push_str(&format!(
                "{delta:.2},{nr:.8},{qr:.8},{fr:.8},{tro},{nm:.8},{qm:.8},{fm:.8},{tm:.3e}\n"
            ));
        }
        std::fs::write(format!("/tmp/refdata/sweep_g{g}.csv"), out).unwrap();
        eprintln!("g={g}: {:.0} s", t.elapsed().as_secs_f64());
    }
}
