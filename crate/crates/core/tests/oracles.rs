//! Engine outputs checked against closed forms and independent computations.

use qoct::oct;
use qoct::qoct::{self as engine, AScanParams, CrossSpectrum};
use qoct::sample::{Layer, LayerStack, StackBuilder};
use qoct::spectrum::{calibrate_bandwidth, SpectralDensity, SpectralShape};
use qoct::SPEED_OF_LIGHT;

fn spectrum_for(fwhm_um: f64) -> SpectralDensity {
    SpectralDensity::new(812.0, SpectralShape::Gaussian, calibrate_bandwidth(fwhm_um).unwrap(), 1025)
        .unwrap()
}

fn params(start: f64, step: f64, n: usize) -> AScanParams {
    AScanParams {
        z_start_um: start,
        z_step_um: step,
        n_steps: n,
        washout_trials: 0,
        seed: 0,
    }
}

#[test]
fn calibration_round_trip() {
    for fwhm in [1.0, 5.0, 7.5, 15.0] {
        let s = spectrum_for(fwhm);
        let step = fwhm / 100.0;
        let curve = engine::ascan(&s, &LayerStack::mirror(0.0, 1.0).unwrap(), &params(-2.0 * fwhm, step, 401))
            .unwrap();
        let measured = engine::dip_fwhm(&curve).unwrap();
        assert!((measured - fwhm).abs() / fwhm < 0.01, "{fwhm}: {measured}");
    }
}

#[test]
fn two_surface_baseline_closed_form() {
    // |H|² = 2a²(1 + cos 2ωd/c); its Gaussian average is
    // 2a²(1 + cos(2ω₀d/c)·exp(−2σ²d²/c²)).
    let s = spectrum_for(7.5);
    let sigma = s.width();
    let omega0 = s.center_frequency();
    for d in [0.0, 0.1, 0.25, 1.3, 4.0, 30.0] {
        let stack = if d == 0.0 {
            LayerStack::mirror(0.0, 0.8).unwrap()
        } else {
            StackBuilder::new().reflector(0.0, 0.4).reflector(d, 0.4).build().unwrap()
        };
        let x = d * 1e-6 / SPEED_OF_LIGHT;
        let expected = if d == 0.0 {
            0.64
        } else {
            0.32 + 0.32 * (2.0 * omega0 * x).cos() * (-2.0 * sigma * sigma * x * x).exp()
        };
        let got = engine::lambda0(&s, &stack);
        assert!((got - expected).abs() < 1e-8, "d = {d}: {got} vs {expected}");
    }
}

#[test]
fn dip_sits_at_group_depth() {
    let s = spectrum_for(7.5);
    let omega0 = s.center_frequency();
    for (n_g, thickness) in [(1.5, 100.0), (1.344, 12.0), (1.0, 40.0)] {
        let stack = StackBuilder::new()
            .layer(Layer::from_indices(thickness, omega0, n_g - 0.02, n_g, 50.0))
            .reflector(thickness, 0.3)
            .build()
            .unwrap();
        let target = n_g * thickness;
        let curve = engine::ascan(&s, &stack, &params(target - 10.0, 0.01, 2001)).unwrap();
        let imin = (0..curve.values.len())
            .min_by(|&a, &b| curve.values[a].total_cmp(&curve.values[b]))
            .unwrap();
        assert!((curve.z_grid[imin] - target).abs() < 0.02, "{n_g}: {}", curve.z_grid[imin]);
    }
}

#[test]
fn even_order_dispersion_cancels_in_self_terms() {
    let s = spectrum_for(7.5);
    let omega0 = s.center_frequency();
    let with_gdd = |gdd_fs2_per_mm: f64| {
        let stack = StackBuilder::new()
            .layer(Layer::from_indices(5000.0, omega0, 1.45, 1.47, gdd_fs2_per_mm))
            .reflector(5000.0, 0.5)
            .build()
            .unwrap();
        let center = stack.group_depth_um(0);
        let cs = CrossSpectrum::new(&s, &stack);
        (-100..=100)
            .map(|i| cs.coincidence(center + 0.1 * i as f64).unwrap())
            .collect::<Vec<_>>()
    };
    let flat = with_gdd(0.0);
    for gdd in [36.0, 720.0, 5000.0] {
        for (a, b) in flat.iter().zip(with_gdd(gdd)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn oct_envelope_closed_form() {
    // Single mirror: |Σ w ρ e^{−2iΩz/c}| = exp(−2σ²z²/c²).
    let s = spectrum_for(7.5);
    let sigma = s.width();
    let z: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5).collect();
    let ifg = oct::interferogram(&s, &LayerStack::mirror(0.0, 1.0).unwrap(), &z);
    for (z, e) in z.iter().zip(&ifg.envelope) {
        let x = z * 1e-6 / SPEED_OF_LIGHT;
        let expected = (-2.0 * sigma * sigma * x * x).exp();
        assert!((e - expected).abs() < 1e-7, "{z}: {e} vs {expected}");
    }
}

#[test]
fn sinc_squared_spectrum_gives_full_dip() {
    let s = SpectralDensity::new(812.0, SpectralShape::SincSquared, 2.0e13, 2049).unwrap();
    let mirror = LayerStack::mirror(0.0, 1.0).unwrap();
    let cs = CrossSpectrum::new(&s, &mirror);
    assert!(cs.coincidence(0.0).unwrap() < 1e-12);
    let curve = engine::ascan(&s, &mirror, &params(-30.0, 0.05, 1201)).unwrap();
    let w = engine::dip_fwhm(&curve).unwrap();
    assert!(w > 1.0 && w < 30.0, "{w}");
}

#[test]
fn fft_grid_matches_direct_sum_on_the_phantom_stack() {
    let s = spectrum_for(7.5);
    let p = qoct::phantom::Phantom::generate(Default::default()).unwrap();
    let stack = p.local_stack(10.0, 20.0).unwrap();
    let cs = CrossSpectrum::new(&s, &stack);
    let fft = cs.lambda_grid_fft(-15.0, 1.0, 31);
    for (m, f) in fft.iter().enumerate() {
        let d = cs.lambda_complex(-15.0 + m as f64);
        assert!((f - d).norm() < 1e-9 * cs.lambda0());
    }
}
