macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(structured_algebra);
example!(whittle_logdet);
example!(preconditioned_solve);
example!(ski_regression);
example!(variance_estimator);
example!(projection_learning);
example!(exact_oracle);
example!(run_config);

#[test]
fn structured_products_agree() {
    assert!(structured_algebra::run_example().unwrap().iter().all(|&g| g < 1e-10));
}

#[test]
fn whittle_error_shrinks() {
    let r = whittle_logdet::run_example().unwrap();
    assert!(r.last().unwrap().1 < 0.01);
    assert!(r.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn preconditioning_helps() {
    let r = preconditioned_solve::run_example().unwrap();
    let whittle = r.iter().find(|(n, _)| n.starts_with("whittle")).unwrap().1;
    assert!(whittle < r[0].1);
}

#[test]
fn regression_is_accurate() {
    assert!(ski_regression::run_example().unwrap() < 0.1);
}

#[test]
fn variance_error_falls() {
    let r = variance_estimator::run_example().unwrap();
    assert!(r.last().unwrap().1 < r[0].1);
}

#[test]
fn projection_is_recovered() {
    assert!(projection_learning::run_example().unwrap() < 0.2);
}

#[test]
fn oracle_agrees_on_grid() {
    assert!(exact_oracle::run_example().unwrap() < 1e-2);
}

#[test]
fn config_example_renders() {
    let csv = run_config::run_example().unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("experiment,"));
    assert!(csv.contains("strang"));
}
