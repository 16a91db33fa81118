use gyrocav::cavityqed::{BasisLabel, EnsembleCoupling, ModeDoublet, Selection};
use gyrocav::cli::RunConfig;
use gyrocav::spectra::*;
use gyrocav::thermo::{CouplingModel, PerSpinCoupling};
use gyrocav::Error;
use proptest::prelude::*;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn reference_model() -> CavityModel {
    RunConfig::reference().cavity_model().unwrap()
}

fn reference_grid() -> Vec<f64> {
    linspace(38.7, 48.7, 201)
}

#[test]
fn decoupled_sweep_shows_bare_lines() {
    let mut model = reference_model();
    model.doublet.g_rl_mhz = 0.0;
    model.per_spin = PerSpinCoupling::uniform(0.0);
    let grid = reference_grid();
    let sweep = field_sweep(&model, Selection::Plus, &grid).unwrap();
    for row in &sweep.rows {
        let mut bare = vec![
            model.doublet.f_r_ghz,
            model.doublet.f_l_ghz,
            gyrocav::spinmodel::plus_transition_ghz(&model.spin, row.field_mt),
        ];
        bare.sort_by(f64::total_cmp);
        for (b, e) in row.branches.iter().zip(&bare) {
            assert!((b.frequency_ghz - e).abs() < 1e-12);
        }
    }
    match extract_gap(&sweep, BranchPair::ExcludingDominant(BasisLabel::R)) {
        Err(Error::NoCrossing) => {}
        // Bare lines cross; the residual is bounded by one grid step of detuning.
        Ok(g) => assert!(g.gap_mhz < 28.1 * 0.05, "{g:?}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn sweep_rows_are_well_formed() {
    let sweep = field_sweep(&reference_model(), Selection::Plus, &reference_grid()).unwrap();
    assert_eq!(sweep.rows.len(), 201);
    for row in &sweep.rows {
        assert!(row.branches.windows(2).all(|w| w[0].frequency_ghz <= w[1].frequency_ghz));
        for b in &row.branches {
            let w: f64 = b.fractions.iter().map(|f| f.1).sum();
            assert!((w - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn synthetic_two_mode_gap() {
    // L and spin only: R is far off and uncoupled.
    let mut model = reference_model();
    model.doublet = ModeDoublet { f_r_ghz: 13.3, f_l_ghz: 13.259, kappa_r_mhz: 1e-4, kappa_l_mhz: 1e-4, g_rl_mhz: 0.0 };
    model.coupling_model = CouplingModel::Population;
    let f_field = (13.259 - model.spin.zfs_12_32_ghz) / model.spin.zeeman_slope_ghz_per_mt();
    model.per_spin = gyrocav::thermo::calibrate_per_spin(6.0, 0.0, &model.spin, f_field, model.temperature_k, model.coupling_model).unwrap();
    let grid = linspace(f_field - 2.0, f_field + 2.0, 81);
    let sweep = field_sweep(&model, Selection::Plus, &grid).unwrap();
    let gap = extract_gap(&sweep, BranchPair::Indices(0, 1)).unwrap();
    assert!((gap.gap_mhz - 12.0).abs() < 0.05, "{gap:?}");
    assert!((gap.field_mt - f_field).abs() < 0.05);
}

#[test]
fn reference_gap_against_dense_oracle() {
    let model = reference_model();
    let coarse = field_sweep(&model, Selection::Plus, &reference_grid()).unwrap();
    let gap = extract_gap(&coarse, BranchPair::ExcludingDominant(BasisLabel::R)).unwrap();
    // Oracle: brute-force minimum on a 50x denser grid.
    let dense_grid = linspace(38.7, 48.7, 10001);
    let dense = field_sweep(&model, Selection::Plus, &dense_grid).unwrap();
    let oracle = dense
        .rows
        .iter()
        .map(|r| {
            let skip = (0..3)
                .max_by(|&a, &b| r.branches[a].fraction(BasisLabel::R).total_cmp(&r.branches[b].fraction(BasisLabel::R)))
                .unwrap();
            let rest: Vec<f64> = (0..3).filter(|&i| i != skip).map(|i| r.branches[i].frequency_ghz).collect();
            (rest[1] - rest[0]).abs() * 1000.0
        })
        .fold(f64::INFINITY, f64::min);
    assert!((gap.gap_mhz - oracle).abs() < 0.01, "{} vs {oracle}", gap.gap_mhz);
    let g_plus = 6.0;
    let g_rl = model.doublet.g_rl_mhz;
    assert!(gap.gap_mhz >= 2.0 * g_plus * (1.0 - g_rl / g_plus));
}

#[test]
fn reversed_grid_reverses_rows() {
    let model = reference_model();
    let grid = reference_grid();
    let rev: Vec<f64> = grid.iter().rev().copied().collect();
    let a = field_sweep(&model, Selection::Plus, &grid).unwrap();
    let b = field_sweep(&model, Selection::Plus, &rev).unwrap();
    let mut b_rows = b.rows.clone();
    b_rows.reverse();
    assert_eq!(a.rows, b_rows);
    assert!(field_sweep(&model, Selection::Plus, &[40.0, 39.0, 41.0]).is_err());
    assert!(field_sweep(&model, Selection::Plus, &[]).is_err());
}

#[test]
fn sweep_is_deterministic() {
    let model = reference_model();
    let a = field_sweep(&model, Selection::Both, &reference_grid()).unwrap();
    let b = field_sweep(&model, Selection::Both, &reference_grid()).unwrap();
    let bits = |s: &SweepResult| -> Vec<u64> {
        s.rows
            .iter()
            .flat_map(|r| r.branches.iter().flat_map(|b| std::iter::once(b.frequency_ghz).chain(b.fractions.iter().map(|f| f.1))))
            .map(f64::to_bits)
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn gyrotropy_ordering() {
    let mut model = reference_model();
    model.doublet.g_rl_mhz = 0.5;
    let sweep = field_sweep(&model, Selection::Plus, &reference_grid()).unwrap();
    let r = max_displacement_mhz(&sweep, BasisLabel::R, model.doublet.f_r_ghz);
    let l = max_displacement_mhz(&sweep, BasisLabel::L, model.doublet.f_l_ghz);
    println!("gyrotropy: R {r:.4} MHz, L {l:.4} MHz");
    assert!(r < l);
    assert!(r < 0.2 * l);
}

/// Largest shift of the lower and upper photon-like branches (the two with
/// the least spin weight) relative to the same sweep without spins.
fn photon_branch_shifts(model: &CavityModel, grid: &[f64]) -> (f64, f64) {
    let with = field_sweep(model, Selection::Plus, grid).unwrap();
    let mut bare_model = *model;
    bare_model.per_spin = PerSpinCoupling::uniform(0.0);
    let without = field_sweep(&bare_model, Selection::Plus, grid).unwrap();
    let photon_like = |r: &SweepRow| {
        let mut b: Vec<_> = r.branches.iter().collect();
        b.sort_by(|x, y| x.spin_fraction().total_cmp(&y.spin_fraction()));
        let (lo, hi) = (b[0].frequency_ghz, b[1].frequency_ghz);
        (lo.min(hi), lo.max(hi))
    };
    with.rows.iter().zip(&without.rows).fold((0.0f64, 0.0f64), |acc, (a, b)| {
        let (a, b) = (photon_like(a), photon_like(b));
        (acc.0.max((a.0 - b.0).abs() * 1000.0), acc.1.max((a.1 - b.1).abs() * 1000.0))
    })
}

#[test]
fn symmetric_regime_collapse() {
    // Backscatter dominates: g_+ = 0.5 MHz < g_RL = 1 MHz on a near-degenerate doublet.
    let mut model = reference_model();
    model.doublet.f_r_ghz = 13.2595;
    model.doublet.g_rl_mhz = 1.0;
    model.per_spin = gyrocav::thermo::calibrate_per_spin(0.5, 0.0, &model.spin, 43.687, 0.036, model.coupling_model).unwrap();
    let grid = linspace(38.7, 48.7, 1001);
    let (lo, hi) = photon_branch_shifts(&model, &grid);
    println!("symmetric regime: lower {lo:.4} MHz, upper {hi:.4} MHz");
    assert!(lo.max(hi) < 2.0 * lo.min(hi));
}

#[test]
fn warm_regime_both_branches_move() {
    let cfg = RunConfig::from_toml_str(gyrocav::cli::REFERENCE_CONFIG, &["coupling.model=\"polarization\"".into()]).unwrap();
    let cold = cfg.cavity_model().unwrap();
    let warm = CavityModel { temperature_k: 5.0, ..cold };
    let g_cold = cold.ensemble_at(43.687).unwrap().g_plus_mhz;
    let g_warm = warm.ensemble_at(43.687).unwrap().g_plus_mhz;
    println!("g+ cold {g_cold:.3} MHz, warm {g_warm:.3} MHz, g_RL {}", cold.doublet.g_rl_mhz);
    assert!((g_cold - 6.0).abs() < 1e-9);
    assert!(g_warm < 0.5 * g_cold);
    let grid = reference_grid();
    // f_L < f_R, so the lower photon-like branch is the L-like one.
    let (l_cold, r_cold) = photon_branch_shifts(&cold, &grid);
    let (l_warm, r_warm) = photon_branch_shifts(&warm, &grid);
    println!("cold R {r_cold:.3} L {l_cold:.3}; warm R {r_warm:.3} L {l_warm:.3}");
    assert!(g_warm < 3.0 * cold.doublet.g_rl_mhz);
    // Both shifts are far beyond the mode linewidths.
    let kappa = cold.doublet.kappa_r_mhz.max(cold.doublet.kappa_l_mhz);
    assert!(r_warm > 1000.0 * kappa && l_warm > 1000.0 * kappa);
    assert!(r_warm > 0.2 * l_warm);
}

#[test]
fn loss_free_limit() {
    let model = reference_model();
    let field = 43.687;
    let ensemble = model.ensemble_at(field).unwrap();
    let branches: Vec<f64> = gyrocav::cavityqed::eigenmodes(&model.matrix_at(field, Selection::Plus).unwrap())
        .unwrap()
        .iter()
        .map(|b| b.frequency_ghz)
        .collect();
    let grid = linspace(13.245, 13.275, 30001);
    let mut errors = Vec::new();
    for (kappa, gamma) in [(1.0, 1.0), (0.3, 0.3), (0.1, 0.1)] {
        let d = ModeDoublet { kappa_r_mhz: kappa, kappa_l_mhz: kappa, ..model.doublet };
        let e = EnsembleCoupling { gamma_mhz: gamma, ..ensemble };
        let s = transmission(&d, &e, Selection::Plus, &grid, &PortCoupling::default()).unwrap();
        assert!(s.points.iter().all(|p| (0.0..=1.0).contains(&p.magnitude)));
        let peaks = find_peaks(&s, 0.01).unwrap();
        assert_eq!(peaks.len(), 3, "kappa {kappa}: {peaks:?}");
        let err = peaks
            .iter()
            .zip(&branches)
            .map(|(p, b)| (p.f_ghz - b).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    println!("loss-free errors (GHz): {errors:?}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
}

fn resonant_pair(g: f64) -> TransmissionSpectrum {
    let d = ModeDoublet { f_r_ghz: 13.261, f_l_ghz: 13.259, kappa_r_mhz: 0.00013261, kappa_l_mhz: 0.00013259, g_rl_mhz: 0.0 };
    let e = EnsembleCoupling { g_plus_mhz: g, g_minus_mhz: 0.0, gamma_mhz: 25.0, f_plus_ghz: 13.259, f_minus_ghz: 0.0 };
    let ports = PortCoupling { input_r: 0.0, input_l: 0.25, output_r: 0.0, output_l: 0.25 };
    transmission(&d, &e, Selection::Plus, &linspace(13.159, 13.359, 4001), &ports).unwrap()
}

#[test]
fn merged_and_resolved_peaks() {
    assert_eq!(count_peaks(&resonant_pair(6.0), DEFAULT_PROMINENCE).unwrap(), 1);
    assert_eq!(count_peaks(&resonant_pair(26.8), DEFAULT_PROMINENCE).unwrap(), 2);
}

#[test]
fn branch_tracking_follows_composition() {
    let mut model = reference_model();
    model.doublet.g_rl_mhz = 0.0;
    let sweep = field_sweep(&model, Selection::Plus, &reference_grid()).unwrap();
    let tracks = track_branches(&sweep);
    // Track that starts spin-like ends photon-like on the far side only if it
    // followed the avoided crossing; the R track stays pure throughout.
    let first = &sweep.rows[0];
    let r_track = (0..3).find(|&t| first.branches[tracks[0][t]].fraction(BasisLabel::R) == 1.0).unwrap();
    for (row, idx) in sweep.rows.iter().zip(&tracks) {
        assert_eq!(row.branches[idx[r_track]].fraction(BasisLabel::R), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transmission_is_passive(g in 0.0..40.0f64, kappa in 0.01..5.0f64, gamma in 0.1..50.0f64,
                               g_rl in 0.0..5.0f64, ports in prop::array::uniform4(0.0..0.5f64)) {
        // Each mode can leak at most its whole linewidth through the two ports.
        let ports = [ports[0], ports[1], 0.5 - ports[0], 0.5 - ports[1]];
        let d = ModeDoublet { f_r_ghz: 13.261, f_l_ghz: 13.259, kappa_r_mhz: kappa, kappa_l_mhz: kappa, g_rl_mhz: g_rl };
        let e = EnsembleCoupling { g_plus_mhz: g, g_minus_mhz: g, gamma_mhz: gamma, f_plus_ghz: 13.26, f_minus_ghz: 13.25 };
        let p = PortCoupling { input_r: ports[0], input_l: ports[1], output_r: ports[2], output_l: ports[3] };
        let s = transmission(&d, &e, Selection::Both, &linspace(13.2, 13.32, 241), &p).unwrap();
        for pt in &s.points {
            prop_assert!(pt.magnitude >= 0.0 && pt.magnitude <= 1.0 + 1e-12);
        }
    }
}
