use hetnet::*;
use std::time::Instant;

#[test]
fn scratch_rate_mc_vs_analytic() {
    let model = default_3gpp_model();
    let mut net = NetworkConfig::paper_defaults();
    net.lambda_s = 1.0;
    for mm in [20.0, 100.0, 300.0] {
        net.m_m = mm;
        let t0 = Instant::now();
        let analytic = achievable_rate(&model, &net).unwrap();
        let ta = t0.elapsed();
        let sim = SimConfig {
            window_radius: 6.0,
            n_realizations: 1000,
            seed: 42,
            network: net.clone(),
            model: model.clone(),
        };
        let t0 = Instant::now();
        let mc = estimate_rate(&sim).unwrap();
        println!(
            "ls=1 M_m={mm:4.0}: analytic={:.4} mc={:.4}±{:.4} rel_dev={:+.1}% rho1/sig2={:.2} [mc {:?}, an {:?}] resamp={}/{} defic={}",
            analytic.r_total, mc.mean_rate, mc.ci95_half_width,
            100.0 * (analytic.r_total - mc.mean_rate) / mc.mean_rate,
            analytic.constants.rho1 / net.sigma2_mw,
            t0.elapsed(), ta, mc.bs_resample_events, mc.user_resample_events, mc.deficient_cell_events
        );
    }
}
