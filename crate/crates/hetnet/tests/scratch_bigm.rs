use hetnet::*;

#[test]
fn scratch_mc_large_m() {
    let model = default_3gpp_model();
    let mut net = NetworkConfig::paper_defaults();
    net.lambda_s = 1.0;
    for mm in [640.0, 1280.0] {
        net.m_m = mm;
        let analytic = achievable_rate(&model, &net).unwrap();
        let sim = SimConfig {
            window_radius: 6.0,
            n_realizations: 1500,
            seed: 7,
            network: net.clone(),
            model: model.clone(),
        };
        let mc = estimate_rate(&sim).unwrap();
        println!("M_m={mm:6.0}: analytic={:.4} mc={:.4}±{:.4}", analytic.r_total, mc.mean_rate, mc.ci95_half_width);
    }
}
