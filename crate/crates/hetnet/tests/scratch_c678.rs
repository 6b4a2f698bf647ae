use hetnet::*;

#[test]
fn scratch_c6_monotone_saturation() {
    let model = default_3gpp_model();
    let mut net = NetworkConfig::paper_defaults();
    net.lambda_s = 1.0;
    let mut prev = 0.0;
    let mut prev_inc = f64::INFINITY;
    for mm in [10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0] {
        net.m_m = mm;
        let r = achievable_rate(&model, &net).unwrap().r_total;
        let inc = r - prev;
        println!("M_m={mm:6.0} R={r:.4} inc={inc:+.4} dec_inc={}", inc < prev_inc);
        prev = r; prev_inc = inc;
    }
}

#[test]
fn scratch_c78_lambda_peak() {
    let model = default_3gpp_model();
    let mut net = NetworkConfig::paper_defaults();
    for n in [5u32, 10, 15] {
        net.n_users = n;
        net.tau = n;
        let mut best = (0.0, 0.0);
        let mut r1 = 0.0;
        let mut r11 = 0.0;
        for ls in [1.0, 3.0, 6.0, 9.0, 11.0, 14.0, 18.0, 24.0, 32.0, 42.0, 55.0, 70.0] {
            net.lambda_s = ls;
            let r = achievable_rate(&model, &net).unwrap().r_total;
            if ls == 1.0 { r1 = r; }
            if ls == 11.0 { r11 = r; }
            if r > best.1 { best = (ls, r); }
            print!("{ls}:{r:.3} ");
        }
        println!("\nN={n}: peak at ls={} R={:.3}; R(11)/R(1)={:.3}", best.0, best.1, r11 / r1);
    }
}
