use quadcool::fock::HilbertDims;
use quadcool::lindblad::{CavityRateConvention, SteadySolver, phonon_distribution};
use quadcool::rates::SystemParams;
use quadcool::{kinetics, stats};

fn main() {
    // Worst criterion-2 point: g=0.4, delta=-0.7. Compare rate vs master
    // at three drive strengths to show the gap is the O(Omega^2)
    // truncation of the rate theory.
    for &omega in &[0.1f64, 0.05, 0.025] {
        let params = SystemParams::new(0.4, 0.25, 0.0, omega, 1e-6, 10.0).unwrap();
        let dims = HilbertDims::new(3, 30).unwrap();
        let mut solver = SteadySolver::new(&params, &dims, CavityRateConvention::FullKappa).unwrap();
        let rho = solver.solve_at(-0.7).unwrap();
        let marg = phonon_distribution(&rho).unwrap();
        let master = stats::mean_phonon(&marg);
        let dist = kinetics::steady_distribution_auto(&params.with_delta(-0.7)).unwrap();
        let rate = stats::mean_phonon(&dist);
        println!(
            "omega={omega}: rate {rate:.5} master {master:.5} rel dev {:.4}",
            (rate - master).abs() / master
        );
    }
}
