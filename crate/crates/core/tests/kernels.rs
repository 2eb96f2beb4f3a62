use activesearch_core::kernels::{KernelFamily, KernelSpec};

/// `K_ν(z) = ∫₀^∞ exp(−z cosh t) cosh(νt) dt` by the trapezoidal rule,
/// which converges geometrically for this integrand.
fn bessel_k(nu: f64, z: f64) -> f64 {
    let h = 0.005f64;
    let mut sum = 0.5 * (-z).exp();
    let mut t: f64 = h;
    loop {
        let term = (-z * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-20 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// `Γ(ν)` for half-integer `ν` from `Γ(1/2) = √π`.
fn gamma_half(nu: f64) -> f64 {
    let mut g = std::f64::consts::PI.sqrt();
    let mut a = 0.5;
    while a < nu - 1e-12 {
        g *= a;
        a += 1.0;
    }
    g
}

fn matern_general(nu: f64, r: f64, l: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / l;
    2f64.powf(1.0 - nu) / gamma_half(nu) * z.powf(nu) * bessel_k(nu, z)
}

#[test]
fn bessel_routine_reproduces_half_order_closed_form() {
    // K_{1/2}(z) = √(π / 2z) e^{−z}.
    for z in [0.05, 0.5, 1.0, 3.0, 10.0] {
        let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z as f64).exp();
        assert!((bessel_k(0.5, z) - exact).abs() < 1e-12 * exact.max(1.0), "z = {z}");
    }
}

#[test]
fn matern_32_reference_point() {
    let k = KernelSpec::new(KernelFamily::Matern32, 0.3).unwrap();
    let got = k.of_distance(0.3);
    let want = matern_general(1.5, 0.3, 0.3);
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn matern_closed_forms_follow_the_general_formula() {
    for (family, nu) in [(KernelFamily::Matern32, 1.5), (KernelFamily::Matern52, 2.5)] {
        for l in [0.05, 0.2, 1.0, 4.0] {
            let k = KernelSpec::new(family, l).unwrap();
            for i in 0..=60 {
                let r = i as f64 * 0.025;
                let want = matern_general(nu, r, l);
                let got = k.of_distance(r);
                assert!((got - want).abs() < 1e-10, "{family} l={l} r={r}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn explicit_formulas_at_sample_points() {
    for l in [0.1, 0.5, 2.0] {
        for r in [0.0, 0.05, 0.3, 1.2] {
            let se = KernelSpec::new(KernelFamily::SquaredExponential, l).unwrap();
            let ex = KernelSpec::new(KernelFamily::Exponential, l).unwrap();
            let pe1 = KernelSpec::with_power(KernelFamily::PowerExponential, l, 1.0).unwrap();
            let pe2 = KernelSpec::with_power(KernelFamily::PowerExponential, l * 2f64.sqrt(), 2.0).unwrap();
            assert!((se.of_distance(r) - (-r * r / (2.0 * l * l)).exp()).abs() < 1e-15);
            assert!((ex.of_distance(r) - (-r / l).exp()).abs() < 1e-15);
            assert!((pe1.of_distance(r) - ex.of_distance(r)).abs() < 1e-15);
            assert!((pe2.of_distance(r) - se.of_distance(r)).abs() < 1e-14);
        }
    }
}
