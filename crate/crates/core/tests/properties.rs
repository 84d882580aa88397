use agentflow::averaging::{convolve_at, convolve_grad_at, stack_at};
use agentflow::io::format_g;
use agentflow::models::sampled_flux_speed;
use agentflow::optimizer::{project, Rect, RouteParam};
use agentflow::pde::pde_step;
use agentflow::{cfl_dt, DensityField, Flux, GridSpec, MollifierKernel, RunConfig, ScenarioModel, SolverConfig};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::centered_square(1.0, 24).unwrap()
}

/// Random field on `grid()` with values in `[0, 1]`, empty near the edge.
fn field() -> impl Strategy<Value = DensityField> {
    prop::collection::vec(0.0..=1.0f64, 24 * 24).prop_map(|mut v| {
        for j in 0..24 {
            for i in 0..24 {
                if i < 3 || j < 3 || i >= 21 || j >= 21 {
                    v[j * 24 + i] = 0.0;
                }
            }
        }
        DensityField::from_values(grid(), 1.0, v).unwrap()
    })
}

fn scenario() -> impl Strategy<Value = ScenarioModel> {
    prop::sample::select(vec!["piper", "dogs", "prey"]).prop_map(|n| ScenarioModel::by_name(n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_is_a_metric(a in field(), b in field(), c in field()) {
        let d = |x: &DensityField, y: &DensityField| x.l1_distance(y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn averaging_is_linear(a in field(), b in field(), s in -2.0..2.0f64, x in -0.8..0.8f64, y in -0.8..0.8f64) {
        let k = MollifierKernel::new(0.3).unwrap();
        let sum = a.combine(s, &b, 1.0).unwrap();
        let lhs = convolve_at(&sum, &k, [x, y]);
        let rhs = s * convolve_at(&a, &k, [x, y]) + convolve_at(&b, &k, [x, y]);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        let g = convolve_grad_at(&sum, &k, [x, y]);
        let ga = convolve_grad_at(&a, &k, [x, y]);
        let gb = convolve_grad_at(&b, &k, [x, y]);
        for c in 0..2 {
            prop_assert!((g[c] - (s * ga[c] + gb[c])).abs() <= 1e-9 * (1.0 + g[c].abs()));
        }
    }

    #[test]
    fn kernel_gradient_matches_differences(x in -0.3..0.3f64, y in -0.3..0.3f64) {
        let k = MollifierKernel::new(0.35).unwrap();
        let h = 1e-6;
        let g = k.gradient([x, y]);
        let fx = (k.value([x + h, y]) - k.value([x - h, y])) / (2.0 * h);
        let fy = (k.value([x, y + h]) - k.value([x, y - h])) / (2.0 * h);
        let scale = k.max_gradient_norm();
        prop_assert!((g[0] - fx).abs() <= 1e-6 * scale);
        prop_assert!((g[1] - fy).abs() <= 1e-6 * scale);
        prop_assert!(g[0].hypot(g[1]) <= scale * (1.0 + 1e-12));
    }

    #[test]
    fn fluxes_vanish_at_vacuum_and_congestion(m in scenario(), x in -2.0..2.0f64, y in -2.0..2.0f64, seed in any::<u64>()) {
        let p: Vec<f64> = (0..m.agent_dim()).map(|k| ((seed >> (k % 60)) & 0xff) as f64 / 64.0 - 2.0).collect();
        prop_assert_eq!(m.flux(0.0, [x, y], 0.0, &p), [0.0, 0.0]);
        let full = m.flux(0.0, [x, y], m.rho_max(), &p);
        prop_assert!(full[0].abs() < 1e-12 && full[1].abs() < 1e-12);
    }

    #[test]
    fn declared_speed_bounds_the_flux(m in scenario(), seed in any::<u64>()) {
        let p: Vec<f64> = (0..m.agent_dim()).map(|k| ((seed >> (7 * k % 57)) & 0x7f) as f64 / 32.0 - 2.0).collect();
        let g = GridSpec::centered_square(2.0, 40).unwrap();
        let sampled = sampled_flux_speed(&m, &g, &p, m.rho_max());
        prop_assert!(sampled <= m.cfl_speed() * (1.0 + 1e-6), "{} > {}", sampled, m.cfl_speed());
    }

    #[test]
    fn agent_speed_grows_sublinearly(m in scenario(), rho in field(), seed in any::<u64>()) {
        let p: Vec<f64> = (0..m.agent_dim()).map(|k| ((seed >> (5 * k % 59)) & 0xff) as f64 / 16.0 - 8.0).collect();
        let points = m.agent_positions(&p).unwrap();
        let r = stack_at(&rho, &m.kernel(), &points, m.averaging_mode());
        let phi = m.speed(0.3, &p, &r);
        let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let c = m.sublinear_constant(rho.mass());
        prop_assert!(norm(&phi) <= c * (1.0 + norm(&p)) * (1.0 + 1e-12), "{} > {}", norm(&phi), c * (1.0 + norm(&p)));
    }

    #[test]
    fn step_conserves_mass(m in scenario(), rho in field(), odd in any::<bool>()) {
        let p = m.initial_state();
        let dt = cfl_dt(&m, rho.grid(), &SolverConfig::default()).unwrap();
        let out = pde_step(&rho, &m, 0.0, &p, dt, usize::from(odd), &SolverConfig::default()).unwrap();
        // the band is three cells wide and a step spreads by at most one cell per axis
        let mass = rho.mass();
        prop_assert!((out.field.mass() - mass).abs() <= 1e-12 * mass.max(1e-300));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        start in prop::array::uniform2(-3.0..3.0f64),
        nodes in prop::collection::vec(prop::array::uniform2(-3.0..3.0f64), 2..10),
        spacing in 0.05..1.5f64,
    ) {
        let k = Rect::new(-1.0, 0.5, -0.5, 1.0).unwrap();
        let r = RouteParam { start, nodes, spacing };
        let once = project(&r, &k);
        prop_assert!(once.is_feasible(&k));
        let twice = project(&once, &k);
        for (a, b) in once.nodes.iter().zip(&twice.nodes) {
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        prop_assert_eq!(once.start, twice.start);
    }

    #[test]
    fn g_format_round_trips(v in prop::num::f64::NORMAL) {
        let nine: f64 = format_g(v, 9).parse().unwrap();
        prop_assert!((nine - v).abs() <= 5e-9 * v.abs());
        let full: f64 = format_g(v, 17).parse().unwrap();
        prop_assert_eq!(full, v);
    }

    #[test]
    fn config_round_trips(
        name in prop::sample::select(vec!["piper", "dogs", "prey"]),
        n in 10usize..500,
        t_end in 0.01..3.0f64,
        cfl in 0.05..1.0f64,
        clamp in any::<bool>(),
        budget in 1usize..1000,
        seed in any::<u64>(),
        v_max in 0.1..20.0f64,
    ) {
        let text = format!(
            "scenario = {name}\ngrid.n = {n}\nt_end = {t_end}\nsnapshot_times = 0, {}\nsolver.cfl_factor = {cfl}\n\
             solver.clamp = {clamp}\noptimizer.budget = {budget}\noptimizer.seed = {seed}\n{name}.v_max = {v_max}\n",
            t_end / 2.0
        );
        let cfg = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(RunConfig::parse(&cfg.emit()).unwrap(), cfg);
    }
}

#[test]
fn tv_of_a_rectangle_is_its_perimeter_on_every_grid() {
    let m = ScenarioModel::by_name("piper").unwrap();
    for n in [100, 200, 400, 800] {
        let g = GridSpec::centered_square(2.0, n).unwrap();
        let tv = m.initial_density(&g).unwrap().total_variation();
        // [-0.5, 0] x [0.35, 0.85] has perimeter 2, up to a cell of rasterization
        assert!((tv - 2.0).abs() <= 4.0 * g.dx, "{n}: {tv}");
    }
}

#[test]
fn split_orderings_agree_to_second_order() {
    // even and odd steps differ only in the sweep order
    let m = ScenarioModel::by_name("piper").unwrap();
    let cfg = SolverConfig::default();
    for n in [80, 160] {
        let g = GridSpec::centered_square(2.0, n).unwrap();
        let bump = DensityField::from_fn(g, 1.0, |[x, y]| {
            let s = (x + 0.3) * (x + 0.3) + (y - 0.2) * (y - 0.2);
            0.8 * (-8.0 * s).exp() * f64::from(s < 1.0)
        });
        let dt = cfl_dt(&m, &g, &cfg).unwrap();
        let p = [0.2, -0.1];
        let xy = pde_step(&bump, &m, 0.0, &p, dt, 0, &cfg).unwrap().field;
        let yx = pde_step(&bump, &m, 0.0, &p, dt, 1, &cfg).unwrap().field;
        let gap = xy.l1_distance(&yx).unwrap();
        let bound = 10.0 * dt * dt * bump.total_variation();
        assert!(gap < bound, "{n}: {gap:e} >= {bound:e}");
    }
}

#[test]
fn support_spreads_one_cell_per_axis_per_sweep() {
    let m = ScenarioModel::by_name("dogs").unwrap();
    let g = GridSpec::centered_square(1.5, 60).unwrap();
    let mut rho = DensityField::zeros(g, 1.0);
    rho.set(30, 30, 0.5);
    let dt = cfl_dt(&m, &g, &SolverConfig::default()).unwrap();
    let out = pde_step(&rho, &m, 0.0, &m.initial_state(), dt, 0, &SolverConfig::default())
        .unwrap()
        .field;
    for j in 0..60 {
        for i in 0..60 {
            let inside = (29..=31).contains(&i) && (29..=31).contains(&j);
            if !inside {
                assert_eq!(out.get(i, j), 0.0, "({i}, {j})");
            }
        }
    }
}
