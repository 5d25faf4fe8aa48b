mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use approx::assert_relative_eq;
use common::*;
use nalgebra::Vector3;
use polyped::actuation::{plan_profile, sample_profile, MotorLimits};
use polyped::analysis::{even_odd_difference_at, phase_error, PhaseModel};
use polyped::fsm::*;
use polyped::io::{parse_config_str, ExperimentConfig};
use polyped::kinematics::{virtual_body_frame, RobotModel};
use polyped::sim::{fictive_cycle_time, run_trial, InitMode, SimConfig, Simulator};
use polyped::terrain::{Hill, Stairs, Terrain, TerrainSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn leg_state() -> impl Strategy<Value = LegState> {
    prop::sample::select(LegState::ALL.to_vec())
}

fn yaw_state() -> impl Strategy<Value = YawState> {
    prop::sample::select(YawState::ALL.to_vec())
}

fn leg_fsm() -> impl Strategy<Value = LegFsm> {
    (leg_state(), 0.0..5.0, -FRAC_PI_2..=FRAC_PI_2).prop_map(|(state, entered_at, setpoint)| {
        LegFsm {
            state,
            entered_at,
            setpoint,
        }
    })
}

fn segment(index: usize) -> impl Strategy<Value = SegmentController> {
    (
        yaw_state(),
        0.0..5.0,
        0.0..1.0,
        -1.0..=1.0,
        leg_fsm(),
        leg_fsm(),
    )
        .prop_map(
            move |(yaw, entered, back, frac, left, right)| SegmentController {
                index,
                yaw,
                yaw_entered_at: entered,
                stroke_entered_at: entered - back,
                yaw_setpoint: frac * ControlParams::default().psi_max,
                left,
                right,
            },
        )
}

fn chain() -> impl Strategy<Value = Vec<SegmentController>> {
    (1usize..6).prop_flat_map(|n| (0..n).map(segment).collect::<Vec<_>>())
}

fn snapshot(t: f64) -> impl Strategy<Value = SensorSnapshot> {
    (
        -1.0..1.0,
        -2.0..2.0,
        -2.0..2.0,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(
            move |(psi, phi_left, phi_right, contact_left, contact_right)| SensorSnapshot {
                psi,
                phi_left,
                phi_right,
                contact_left,
                contact_right,
                upstream: Upstream::Idle,
                t,
            },
        )
}

fn chain_and_snapshots() -> impl Strategy<Value = (Vec<SegmentController>, Vec<SensorSnapshot>)> {
    chain().prop_flat_map(|c| {
        let n = c.len();
        (
            Just(c),
            (5.0..8.0).prop_flat_map(move |t| prop::collection::vec(snapshot(t), n)),
        )
    })
}

fn rule() -> impl Strategy<Value = SyncRule> {
    prop::sample::select(vec![
        SyncRule::OppositeStroke,
        SyncRule::OppositeEntry,
        SyncRule::AnyStroke,
        SyncRule::AnyEntry,
    ])
}

fn mirror_yaw(y: YawState) -> YawState {
    match y {
        YawState::Sync(s) => YawState::Sync(s.other()),
        YawState::Stroke(s, p) => YawState::Stroke(s.other(), p),
    }
}

fn mirror_segment(s: &SegmentController) -> SegmentController {
    SegmentController {
        yaw: mirror_yaw(s.yaw),
        yaw_setpoint: -s.yaw_setpoint,
        left: s.right,
        right: s.left,
        ..*s
    }
}

fn mirror_snapshot(s: &SensorSnapshot) -> SensorSnapshot {
    SensorSnapshot {
        psi: -s.psi,
        phi_left: s.phi_right,
        phi_right: s.phi_left,
        contact_left: s.contact_right,
        contact_right: s.contact_left,
        ..*s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn controller_step_is_deterministic((c, s) in chain_and_snapshots(), sync_rule in rule()) {
        let params = ControlParams { sync_rule, ..ControlParams::default() };
        prop_assert_eq!(
            step_controller(&c, &s, &params).unwrap(),
            step_controller(&c, &s, &params).unwrap()
        );
    }

    #[test]
    fn mirrored_inputs_give_mirrored_outputs((c, s) in chain_and_snapshots(), sync_rule in rule()) {
        let params = ControlParams { sync_rule, ..ControlParams::default() };
        let (next, set) = step_controller(&c, &s, &params).unwrap();
        let mc: Vec<_> = c.iter().map(mirror_segment).collect();
        let ms: Vec<_> = s.iter().map(mirror_snapshot).collect();
        let (mnext, mset) = step_controller(&mc, &ms, &params).unwrap();
        for (a, b) in next.iter().zip(&mnext) {
            prop_assert_eq!(mirror_segment(a), *b);
        }
        for (a, b) in set.iter().zip(&mset) {
            prop_assert_eq!((-a.yaw, a.right, a.left), (b.yaw, b.left, b.right));
        }
    }

    #[test]
    fn setpoints_stay_in_range((c, s) in chain_and_snapshots(), delta_phi in 0.0..0.99) {
        let params = ControlParams { delta_phi, ..ControlParams::default() };
        let (_, set) = step_controller(&c, &s, &params).unwrap();
        for p in set {
            prop_assert!(p.yaw.abs() <= params.psi_max);
            prop_assert!(p.left.abs() <= FRAC_PI_2 && p.right.abs() <= FRAC_PI_2);
        }
    }

    #[test]
    fn forced_exit_drops_rising_legs(seg in segment(0), side in any::<bool>(), t in 5.0..8.0, phi in -2.0..2.0) {
        let params = ControlParams::default();
        let mut seg = seg;
        if let YawState::Sync(s) = seg.yaw {
            seg.yaw = YawState::Stroke(s, StrokePhase::WaitRise);
        }
        let side = if side { Side::Left } else { Side::Right };
        seg.leg_mut(side).state = LegState::Rise;
        let (next, events) = seg.exit_stroke(t);
        prop_assert!(matches!(next.yaw, YawState::Sync(_)));
        let sense = LegSense { phi, contact: false, t };
        let leg = step_leg_fsm(seg.leg(side), sense, events.get(side), &params);
        prop_assert_eq!(leg.state, LegState::Fall);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Floating chains with varied timing keep cycling: every segment visits
    /// all four top-level states and never dwells longer than 3 cycles.
    #[test]
    fn floating_chains_stay_live(
        n in 2usize..5,
        psi_max in 0.3..1.2,
        thres in 0.5..0.95,
        t_rise in 0.0..0.3,
        t_fall in 0.0..0.3,
        profile_accel in 10.0..200.0,
        seed in 0u64..1000,
    ) {
        let params = ControlParams {
            psi_max,
            psi_thres: thres * psi_max,
            t_rise,
            t_fall,
            profile_accel,
            ..ControlParams::default()
        };
        let cycle = fictive_cycle_time(&params);
        let sim = Simulator::new(
            RobotModel::with_segments(n),
            Terrain::Floating,
            params,
            SimConfig::default(),
        ).unwrap();
        let traj = run_trial(&sim, InitMode::Randomized, seed, 6.0 * cycle).unwrap();
        for k in 0..n {
            let mut seen = [false; 4];
            let mut last = traj.records[0].segments[k].yaw_state.top_level_index();
            let mut since = traj.records[0].t;
            for r in &traj.records {
                let idx = r.segments[k].yaw_state.top_level_index();
                seen[idx] = true;
                if idx != last {
                    last = idx;
                    since = r.t;
                }
                prop_assert!(r.t - since <= 3.0 * cycle, "segment {} stuck at t = {}", k, r.t);
            }
            prop_assert!(seen.iter().all(|s| *s));
        }
    }
}

fn limits() -> impl Strategy<Value = MotorLimits> {
    (0.5..8.0, 5.0..200.0).prop_map(|(v_max, accel)| MotorLimits {
        v_max,
        accel,
        ..MotorLimits::default()
    })
}

proptest! {
    #[test]
    fn profile_respects_speed_and_approaches_target(
        start in -1.5..1.5,
        target in -1.5..1.5,
        lim in limits(),
        t0 in 0.0..10.0,
    ) {
        let (p, _) = plan_profile(start, target, &lim, t0);
        let h = 1e-3;
        let steps = (p.duration() / h).ceil() as usize + 2;
        let mut prev = sample_profile(&p, t0);
        for i in 1..=steps {
            let cur = sample_profile(&p, t0 + i as f64 * h);
            prop_assert!(cur.1.abs() <= lim.v_max + 1e-9);
            let fd = (cur.0 - prev.0) / h;
            prop_assert!((fd - 0.5 * (cur.1 + prev.1)).abs() <= lim.accel * h);
            prop_assert!((cur.0 - target).abs() <= (prev.0 - target).abs() + 1e-12);
            prev = cur;
        }
        prop_assert_eq!(prev, (target, 0.0));
    }

    #[test]
    fn profile_matches_closed_form_oracle(start in -1.5..1.5, target in -1.5..1.5, lim in limits()) {
        let (p, _) = plan_profile(start, target, &lim, 0.0);
        assert_relative_eq!(
            p.duration(),
            oracle_duration((target - start).abs(), lim.v_max, lim.accel),
            max_relative = 1e-12,
            epsilon = 1e-15
        );
        for k in 0..50 {
            let tau = p.duration() * k as f64 / 49.0;
            let v = oracle_velocity((target - start).abs(), lim.v_max, lim.accel, tau);
            prop_assert!((sample_profile(&p, tau).1.abs() - v).abs() < 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn body_frame_is_orthonormal_and_head_forward(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pos, z) = random_chain(&mut rng);
        let f = virtual_body_frame(&pos, &z, None).unwrap();
        for (a, b) in [(f.x, f.y), (f.y, f.z), (f.z, f.x)] {
            prop_assert!(a.dot(&b).abs() < 1e-9);
        }
        for a in [f.x, f.y, f.z] {
            prop_assert!((a.norm() - 1.0).abs() < 1e-9);
        }
        prop_assert!((f.x.cross(&f.y) - f.z).norm() < 1e-9);
        prop_assert!(f.x.dot(&(pos[0] - pos[pos.len() - 1])) >= 0.0);
    }

    #[test]
    fn reversing_the_chain_flips_forward_and_lateral(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pos, z) = random_chain(&mut rng);
        let f = virtual_body_frame(&pos, &z, None).unwrap();
        let rpos: Vec<_> = pos.iter().rev().copied().collect();
        let rz: Vec<_> = z.iter().rev().copied().collect();
        let r = virtual_body_frame(&rpos, &rz, None).unwrap();
        prop_assert!((f.origin - r.origin).norm() < 1e-9);
        prop_assert!((f.x + r.x).norm() < 1e-9);
        prop_assert!((f.y + r.y).norm() < 1e-9);
        prop_assert!((f.z - r.z).norm() < 1e-9);
    }

    #[test]
    fn body_frame_follows_rigid_motions(seed in any::<u64>(), shift in prop::array::uniform3(-10.0..10.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pos, z) = random_chain(&mut rng);
        let rot = random_rotation(&mut rng);
        let shift = Vector3::from(shift);
        let f = virtual_body_frame(&pos, &z, None).unwrap();
        let mpos: Vec<_> = pos.iter().map(|p| rot * p + shift).collect();
        let mz: Vec<_> = z.iter().map(|v| rot * v).collect();
        let g = virtual_body_frame(&mpos, &mz, None).unwrap();
        prop_assert!((rot * f.origin + shift - g.origin).norm() < 1e-9);
        prop_assert!((rot * f.x - g.x).norm() < 1e-9);
        prop_assert!((rot * f.y - g.y).norm() < 1e-9);
        prop_assert!((rot * f.z - g.z).norm() < 1e-9);
    }
}

proptest! {
    #[test]
    fn even_odd_matches_brute_force(phases in prop::collection::vec(-10.0..10.0, 2..12)) {
        let d = even_odd_difference_at(&phases).unwrap();
        prop_assert!(d > -PI && d <= PI);
        prop_assert!(circ_dist(d, brute_even_odd(&phases)) < 1e-12);
    }

    #[test]
    fn permuting_a_parity_class_keeps_delta(
        phases in prop::collection::vec(-10.0..10.0, 2..12),
        rot in 0usize..6,
    ) {
        let even: Vec<f64> = phases.iter().step_by(2).copied().collect();
        let mut shuffled = phases.clone();
        for (i, v) in shuffled.iter_mut().step_by(2).enumerate() {
            *v = even[(i + rot) % even.len()];
        }
        let a = even_odd_difference_at(&phases).unwrap();
        let b = even_odd_difference_at(&shuffled).unwrap();
        prop_assert!(circ_dist(a, b) < 1e-12);
    }

    #[test]
    fn phase_error_is_lipschitz_and_peaks_at_antipode(
        target in -PI..PI,
        delta in -PI..PI,
        h in -0.1f64..0.1,
    ) {
        let e = phase_error(&[delta, delta + h, target + PI], target);
        prop_assert!((0.0..=PI).contains(&e[0]));
        prop_assert!((e[1] - e[0]).abs() <= h.abs() + 1e-12);
        prop_assert!((e[2] - PI).abs() < 1e-12);
    }
}

fn ellipse(p: f64) -> (f64, f64) {
    (2.0 * p.cos(), p.sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phase_shifts_with_the_signal(shift in 0.0..3.0, omega in 2.0..8.0) {
        let dt = 0.01;
        let n = (6.0 * TAU / omega / dt) as usize;
        let (t, x, _) = synthetic_cycle(omega, n, dt, ellipse, |p| p);
        let (_, xs, _) = synthetic_cycle(omega, n, dt, ellipse, |p| p + omega * shift);
        let a = PhaseModel::fit(&[(&t, &x)]).unwrap().phase(&x).unwrap();
        let b = PhaseModel::fit(&[(&t, &xs)]).unwrap().phase(&xs).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            prop_assert!(circ_dist(pb - pa, omega * shift) < 0.02);
        }
    }

    #[test]
    fn phase_ignores_channel_scale(scale in 0.01..100.0) {
        let (t, x, _) = synthetic_cycle(4.0, 1200, 0.01, ellipse, |p| p - 0.4 * p.sin());
        let a = PhaseModel::fit(&[(&t, &x)]).unwrap().phase(&x).unwrap();
        let xs = &x * scale;
        let b = PhaseModel::fit(&[(&t, &xs)]).unwrap().phase(&xs).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            prop_assert!((pa - pb).abs() < 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn stairs_match_tread_enumeration(
        n_up in 1u32..15,
        n_down in 0u32..15,
        length in 0.05..0.5,
        height in 0.01..0.1,
        u in -0.2..1.2,
    ) {
        let s = Stairs { n_up, n_down, step_length: length, step_height: height };
        let x = u * (n_up + n_down) as f64 * length;
        prop_assert_eq!(s.height(x), stairs_oracle(x, n_up, n_down, length, height));
    }

    #[test]
    fn hill_is_continuous_and_matches_pieces(slope in 0.05..0.6, extent in 0.2..3.0, u in -0.5..4.5) {
        let hill = Hill::new(slope, extent);
        let x = u * extent;
        prop_assert_eq!(hill.height(x), hill_oracle(x, slope, extent));
        for k in 0..=4 {
            let b = k as f64 * extent;
            let eps = 1e-9 * extent;
            prop_assert!((hill.height(b - eps) - hill.height(b + eps)).abs() < 1e-8);
            prop_assert!((hill.slope_at(b - eps) - hill.slope_at(b + eps)).abs() < 1e-7);
        }
    }
}

fn terrain_spec() -> impl Strategy<Value = TerrainSpec> {
    prop_oneof![
        Just(TerrainSpec::Floating),
        Just(TerrainSpec::Flat),
        any::<u64>().prop_map(TerrainSpec::rough),
        (0.05..0.6, 0.5..3.0)
            .prop_map(|(max_slope, extent)| TerrainSpec::Hill { max_slope, extent }),
        (1u32..20, 0u32..20).prop_map(|(n_up, n_down)| TerrainSpec::Stairs {
            n_up,
            n_down,
            step_length: 0.3,
            step_height: 0.04,
        }),
    ]
}

proptest! {
    #[test]
    fn config_survives_json(
        n in 2usize..12,
        terrain in terrain_spec(),
        seed in any::<u64>(),
        trials in 1usize..50,
        duration in 0.1..100.0,
        delta_phi in 0.0..0.9,
        dt in 0.001..0.02,
        sync_rule in rule(),
    ) {
        let mut c = ExperimentConfig {
            terrain,
            base_seed: seed,
            n_trials: trials,
            duration,
            ..ExperimentConfig::default()
        };
        c.robot.n_segments = n;
        c.control.delta_phi = delta_phi;
        c.control.sync_rule = sync_rule;
        c.sim.dt = dt;
        prop_assert_eq!(parse_config_str(&c.to_json().unwrap()).unwrap(), c);
    }
}
