use proptest::prelude::*;
use tlsloss::fieldsolver::io::{geometry_from_kv, write_field_dump};
use tlsloss::fieldsolver::*;
use tlsloss::kv::KvDocument;
use tlsloss::Error;

fn film(t: f64, eps: f64) -> InterfaceLayer {
    InterfaceLayer::new(t, eps).unwrap()
}

fn stacked_plates() -> ParallelPlate {
    ParallelPlate::new(10e-6, 5e-6, 5e-6, 11.6)
        .with_layer(InterfaceKind::SubstrateMetal, film(3e-9, 11.6))
        .with_layer(InterfaceKind::SubstrateVacuum, film(3e-9, 4.0))
        .with_layer(InterfaceKind::MetalVacuum, film(3e-9, 10.0))
}

fn small_cpw() -> CpwGeometry {
    CpwGeometry::new(15e-6, 10e-6).with_cells_per_gap(4)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn plate_films_match_series_capacitor() {
    let pp = stacked_plates();
    let (_, set) = participations_at(&pp).unwrap();
    for kind in InterfaceKind::ALL {
        let want = pp.series_participation(kind).unwrap();
        assert!(rel(set.get(kind).unwrap(), want) < 1e-6, "{kind:?}");
    }
    // Independent series-capacitor arithmetic for the SM film alone.
    let bulk = 5e-6 / 11.6 + 5e-6;
    assert!(rel(set.p_sm.unwrap(), 3e-9 / 11.6 / bulk) < 1e-6);
}

#[test]
fn plate_capacitance_matches_series_formula() {
    let (_, set) = participations_at(&stacked_plates()).unwrap();
    let analytic = EPSILON_0 * 10e-6 / (5e-6 / 11.6 + 5e-6);
    assert!(rel(set.capacitance_energy, analytic) < 1e-6);
    assert!(rel(set.capacitance_charge, analytic) < 1e-6);
}

#[test]
fn plate_refinement_converges_quickly() {
    let r = refine_with(&stacked_plates(), 0.01, &RefineOptions::default()).unwrap();
    assert!(r.refinements() <= 3);
    let last = r.trajectory.last().unwrap().max_relative_change.unwrap();
    assert!(r.result.error_estimate.unwrap() >= last);
}

#[test]
fn finite_plates_field_is_uniform_between_plates() {
    let geom = FinitePlates::new(40e-6, 4e-6);
    let sol = solve(&geom.cross_section().unwrap(), 1.0).unwrap();
    let g = &sol.grid;
    let expected = 1.0 / 4e-6;
    let mut checked = 0;
    for j in 0..g.ny() - 1 {
        let yc = 0.5 * (g.ys[j] + g.ys[j + 1]);
        if yc.abs() >= 2e-6 {
            continue;
        }
        for i in 0..g.nx() - 1 {
            let xc = 0.5 * (g.xs[i] + g.xs[i + 1]);
            if xc.abs() > 10e-6 {
                continue;
            }
            let (ex, ey) = sol.cell_field(i, j);
            assert!(rel(ex.hypot(ey), expected) < 0.01, "at ({xc:e}, {yc:e})");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn cpw_energy_and_charge_capacitance_agree() {
    let sol = solve_cross_section(&CpwGeometry::new(15e-6, 10e-6).with_cells_per_gap(16), 1.0).unwrap();
    assert!(rel(sol.energy_capacitance(), sol.charge_capacitance()) < 0.01);
    assert!(sol.total_energy > 0.0);
}

#[test]
fn cpw_potential_is_mirror_symmetric() {
    let sol = solve_cross_section(&small_cpw(), 1.0).unwrap();
    let nx = sol.grid.nx();
    for j in 0..sol.grid.ny() {
        for i in 0..nx / 2 {
            let a = sol.potential_at(i, j);
            let b = sol.potential_at(nx - 1 - i, j);
            assert!((a - b).abs() < 1e-9, "row {j} col {i}: {a} vs {b}");
        }
    }
}

#[test]
fn mirrored_ground_planes_share_participation() {
    let (_, set) = participations_at(&small_cpw()).unwrap();
    let l = set.conductor("ground_left").unwrap();
    let r = set.conductor("ground_right").unwrap();
    for kind in InterfaceKind::ALL {
        let d = rel(l.get(kind).unwrap(), r.get(kind).unwrap());
        assert!(d < 1e-7, "{kind:?} {d:e}");
    }
}

#[test]
fn maximum_principle_holds() {
    for cs in [small_cpw().cross_section().unwrap(), stacked_plates().cross_section().unwrap()] {
        for v in [1.0, -3.0] {
            assert!(solve(&cs, v).unwrap().satisfies_maximum_principle());
        }
    }
}

#[test]
fn conductor_shares_add_up() {
    let (_, set) = participations_at(&small_cpw()).unwrap();
    for kind in InterfaceKind::ALL {
        let signal = set.by_role(ConductorRole::Signal, kind).unwrap();
        let ground = set.by_role(ConductorRole::Ground, kind).unwrap();
        assert!(rel(signal + ground, set.get(kind).unwrap()) < 1e-12);
    }
    set.validate().unwrap();
}

#[test]
fn default_cpw_participations_are_thin_film_scale() {
    let (_, set) = participations_at(&CpwGeometry::new(24e-6, 24e-6)).unwrap();
    for kind in InterfaceKind::ALL {
        let p = set.get(kind).unwrap();
        assert!(p > 0.0 && p < 0.01, "{kind:?} {p}");
    }
}

#[test]
fn doubling_lengths_halves_participation() {
    let base = CpwGeometry::new(15e-6, 10e-6).with_cells_per_gap(8);
    let mut big = base.clone();
    big.center_width *= 2.0;
    big.gap *= 2.0;
    big.metal_thickness *= 2.0;
    big.half_width *= 2.0;
    big.height *= 2.0;
    let (_, a) = participations_at(&base).unwrap();
    let (_, b) = participations_at(&big).unwrap();
    for kind in InterfaceKind::ALL {
        let ratio = b.get(kind).unwrap() / a.get(kind).unwrap();
        assert!((ratio - 0.5).abs() < 0.05, "{kind:?} ratio {ratio}");
    }
}

#[test]
fn center_trace_sm_participation_supports_loss_tangent() {
    let mut g = CpwGeometry::new(15e-6, 10e-6);
    g.layers = Layers {
        sm: Some(film(3.9e-9, 11.6)),
        ..Layers::none()
    };
    let set = refine_until_converged(&g, 0.01).unwrap();
    let p = set.conductor("center").unwrap().p_sm.unwrap();
    assert!(p > 6.4e-4 / 2.0 && p < 6.4e-4 * 2.0, "{p}");
}

#[test]
fn tolerance_outside_range_is_rejected() {
    for tol in [0.0, -0.1, 0.5, f64::NAN] {
        assert!(matches!(refine_until_converged(&small_cpw(), tol), Err(Error::Precondition(_))));
    }
}

#[test]
fn size_cap_reports_trajectory() {
    let opts = RefineOptions { max_unknowns: 50_000 };
    match refine_with(&small_cpw(), 1e-6, &opts) {
        Err(Error::ConvergenceNotReached { trajectory }) => {
            assert!(!trajectory.0.is_empty());
            assert_eq!(trajectory.0[0].cells_per_gap, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_interface_is_reported() {
    let pp = ParallelPlate::new(10e-6, 0.0, 5e-6, 1.0).with_layer(InterfaceKind::SubstrateMetal, film(3e-9, 11.6));
    let sol = solve(&pp.cross_section().unwrap(), 1.0).unwrap();
    assert!(matches!(compute_participations(&sol, &pp), Err(Error::InterfaceNotSampled(_))));
}

#[test]
fn solution_must_match_geometry() {
    let sol = solve_cross_section(&small_cpw(), 1.0).unwrap();
    let other = small_cpw().with_cells_per_gap(8);
    assert!(matches!(compute_participations(&sol, &other), Err(Error::Precondition(_))));
}

#[test]
fn solves_are_deterministic() {
    let a = solve_cross_section(&small_cpw(), 1.0).unwrap();
    let b = solve_cross_section(&small_cpw(), 1.0).unwrap();
    assert_eq!(a.potential, b.potential);
    assert_eq!(a.total_energy, b.total_energy);
}

#[test]
fn invalid_excitation_is_rejected() {
    assert!(solve_cross_section(&small_cpw(), 0.0).is_err());
    assert!(solve_cross_section(&small_cpw(), f64::INFINITY).is_err());
}

#[test]
fn geometry_file_round_trip_and_dump() {
    let doc = KvDocument::parse(
        "[cpw]\nw_m = 15e-6\ng_m = 10e-6\n[layers.sm]\nthickness_m = 3e-9\nepsilon = 11.6\n[domain]\ncells_per_gap = 4\n",
    )
    .unwrap();
    let geom = geometry_from_kv(&doc).unwrap();
    let (sol, set) = participations_at(&geom).unwrap();
    assert!(set.p_sm.is_some() && set.p_sv.is_none());
    let mut buf = Vec::new();
    write_field_dump(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + sol.grid.cells.len());
    assert!(text.starts_with("x_m,y_m,potential_v"));
    let report = io::format_report(&set);
    assert!(report.contains("p_sm = ") && report.contains("[participation.center]"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn participations_ignore_excitation_scale(v in prop_oneof![-50.0..-1e-3f64, 1e-3..50.0f64]) {
        let g = small_cpw();
        let base = compute_participations(&solve_cross_section(&g, 1.0).unwrap(), &g).unwrap();
        let scaled = compute_participations(&solve_cross_section(&g, v).unwrap(), &g).unwrap();
        for kind in InterfaceKind::ALL {
            prop_assert!(rel(scaled.get(kind).unwrap(), base.get(kind).unwrap()) < 1e-8);
        }
    }

    #[test]
    fn potential_stays_within_conductor_values(v in -10.0..10.0f64, w in 5e-6..30e-6f64, gap in 3e-6..20e-6f64) {
        prop_assume!(v.abs() > 1e-6);
        let g = CpwGeometry::new(w, gap).with_cells_per_gap(2);
        let sol = solve_cross_section(&g, v).unwrap();
        prop_assert!(sol.satisfies_maximum_principle());
    }
}
