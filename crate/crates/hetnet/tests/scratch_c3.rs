use hetnet::*;

#[test]
fn scratch_slope() {
    let model = default_3gpp_model();
    let mut net = NetworkConfig::paper_defaults();
    net.bias = 1.0;
    let mut xs = vec![];
    let mut ys = vec![];
    let mut ns = vec![];
    for ls in 1..=30 {
        net.lambda_s = ls as f64;
        let a = association_probabilities(&model, &net).unwrap();
        xs.push(ls as f64);
        ys.push(a.a_s);
        ns.push(a.n_s.unwrap());
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let slope_ols = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let slope_origin = sxy / sxx;
    println!("OLS slope [1,30]: {slope_ols:.4}; through-origin: {slope_origin:.4}");
    // over [1,10]
    let k = 10;
    let (xs2, ys2) = (&xs[..k], &ys[..k]);
    let n2 = k as f64;
    let sx2: f64 = xs2.iter().sum(); let sy2: f64 = ys2.iter().sum();
    let sxy2: f64 = xs2.iter().zip(ys2).map(|(x,y)| x*y).sum();
    let sxx2: f64 = xs2.iter().map(|x| x*x).sum();
    println!("OLS slope [1,10]: {:.4}; origin [1,10]: {:.4}", (n2*sxy2 - sx2*sy2)/(n2*sxx2 - sx2*sx2), sxy2/sxx2);
    println!("n_s values: min={:.3} max={:.3} mean={:.3}", 
        ns.iter().cloned().fold(f64::INFINITY, f64::min),
        ns.iter().cloned().fold(0.0f64, f64::max),
        ns.iter().sum::<f64>() / n);
    println!("n_s first 10: {:?}", &ns[..10].iter().map(|v| (v*1000.0).round()/1000.0).collect::<Vec<_>>());
}
