#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

use tdumpc_core::{
    generate_network, optimize_horizon, soft_threshold, step_network, step_neuron, AdamHyper,
    ControlPlan, HorizonProblem, NetworkState, NeuronParams, PhaseSchedule, SbmConfig,
    TrainSchedule,
};

fn sbm(n: usize) -> SbmConfig {
    let m = n / 3;
    SbmConfig {
        n: 3 * m,
        module_sizes: [m, m, m],
        p_within: 0.5,
        p_between: 0.2,
        inhibitory_fraction: 0.2,
        inhibitory: None,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn sigmoid_is_point_symmetric(x in -200.0f64..200.0) {
        let p = NeuronParams::default();
        let s = soft_threshold(p.sigmoid_center + x, &p) + soft_threshold(p.sigmoid_center - x, &p);
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euler_branch_is_monotone_in_current(
        v in -90.0f64..29.9,
        u in -20.0f64..20.0,
        i in -50.0f64..50.0,
        di in 1e-6f64..50.0,
    ) {
        let p = NeuronParams::default();
        let (lo, _) = step_neuron(v, u, i, &p);
        let (hi, _) = step_neuron(v, u, i + di, &p);
        prop_assert!(hi > lo);
    }

    #[test]
    fn reset_branch_ignores_current(v in 30.0f64..400.0, u in -20.0f64..20.0, i in -50.0f64..50.0) {
        let p = NeuronParams::default();
        prop_assert_eq!(step_neuron(v, u, i, &p), step_neuron(v, u, 0.0, &p));
    }

    #[test]
    fn step_commutes_with_relabeling(
        seed in any::<u64>(),
        v in prop::collection::vec(-80.0f64..60.0, 9),
        u in prop::collection::vec(-15.0f64..15.0, 9),
        c in prop::collection::vec(-20.0f64..20.0, 3),
        perm in Just((0..9usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let p = NeuronParams::default();
        let g = generate_network(&sbm(9), seed).unwrap();
        let s = NetworkState::new(v, u).unwrap();
        let mut control = vec![0.0; 9];
        for (k, &i) in g.partition().control_set().iter().enumerate() {
            control[i] = c[k];
        }
        let (next, mask) = step_network(&s, &control, &g, &p).unwrap();

        let gp = g.permuted(&perm).unwrap();
        let mut sp = NetworkState::new(vec![0.0; 9], vec![0.0; 9]).unwrap();
        let mut cp = vec![0.0; 9];
        for i in 0..9 {
            sp.v[perm[i]] = s.v[i];
            sp.u[perm[i]] = s.u[i];
            cp[perm[i]] = control[i];
        }
        let (next_p, mask_p) = step_network(&sp, &cp, &gp, &p).unwrap();
        for i in 0..9 {
            prop_assert!(close(next.v[i], next_p.v[perm[i]]));
            prop_assert!(close(next.u[i], next_p.u[perm[i]]));
            prop_assert_eq!(mask.fired(i), mask_p.fired(perm[i]));
        }
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        let cfg = sbm(15);
        prop_assert_eq!(generate_network(&cfg, seed).unwrap(), generate_network(&cfg, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn optimizer_never_returns_worse_than_its_start(
        seed in any::<u64>(),
        init in prop::collection::vec(-10.0f64..10.0, 12),
        v0 in prop::collection::vec(-70.0f64..25.0, 9),
        start in 0usize..20,
    ) {
        let p = NeuronParams::default();
        let g = generate_network(&sbm(9), seed).unwrap();
        let state0 = NetworkState::new(v0, vec![0.0; 9]).unwrap();
        let phases = PhaseSchedule { t_switch: 10.0 };
        let problem = HorizonProblem {
            state0: &state0,
            graph: &g,
            params: &p,
            phases: &phases,
            start_time: start,
        };
        let rows: Vec<Vec<f64>> = init.chunks(3).map(<[f64]>::to_vec).collect();
        let plan0 = ControlPlan::from_rows(g.partition().control_set(), &rows).unwrap();
        let schedule = TrainSchedule::new(vec![1, 2, 4], 5, None, 4).unwrap();
        let out = optimize_horizon(&problem, &schedule, AdamHyper::default(), None, &plan0).unwrap();
        let c0 = problem.cost(&plan0).unwrap();
        prop_assert!(out.cost <= c0);
        prop_assert_eq!(out.cost, problem.cost(&out.plan).unwrap());
        prop_assert!(out.history.iter().all(|&c| c >= out.cost));
    }
}
