use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wifi_slicing::phy::{
    channel_plan, data_rate, packet_error_rate, ChannelSpec, ChannelWidth, GuardInterval, Mcs,
};
use wifi_slicing::scenario::{build_from_config, build_scenario, Mobility, Range};
use wifi_slicing::slicing::{cb_wmin, mcs_max, mcs_min, p_rx_min, SliceBMargins};
use wifi_slicing::{ScenarioConfig, Setting, Slice};

fn width() -> impl Strategy<Value = ChannelWidth> {
    prop::sample::select(ChannelWidth::ALL.to_vec())
}

fn gi() -> impl Strategy<Value = GuardInterval> {
    prop::sample::select(GuardInterval::ALL.to_vec())
}

fn mcs() -> impl Strategy<Value = Mcs> {
    (0u8..12).prop_map(|i| Mcs::new(i).unwrap())
}

fn channel() -> impl Strategy<Value = ChannelSpec> {
    width().prop_flat_map(|w| {
        prop::sample::select(channel_plan(w).to_vec())
            .prop_map(move |n| ChannelSpec::new(n, w).unwrap())
    })
}

proptest! {
    #[test]
    fn cb_wmin_is_minimal(demand in 0.0f64..1.5e9, m in mcs(), g in gi()) {
        let choice = cb_wmin(demand, m, g);
        if !choice.saturated {
            prop_assert!(data_rate(choice.width, m, g) >= demand);
            if choice.width != ChannelWidth::W20 {
                let narrower = ChannelWidth::ALL[ChannelWidth::ALL.iter().position(|&w| w == choice.width).unwrap() - 1];
                prop_assert!(data_rate(narrower, m, g) < demand);
            }
        } else {
            prop_assert!(data_rate(ChannelWidth::W160, m, g) < demand);
        }
    }

    #[test]
    fn mcs_min_is_minimal(demand in 0.0f64..1.5e9, w in width(), g in gi()) {
        let choice = mcs_min(demand, w, g);
        if !choice.saturated {
            prop_assert!(data_rate(w, choice.mcs, g) >= demand);
            if choice.mcs.index() > 0 {
                let below = Mcs::new(choice.mcs.index() - 1).unwrap();
                prop_assert!(data_rate(w, below, g) < demand);
            }
        }
    }

    #[test]
    fn mcs_max_meets_error_target(rx in -120.0f64..0.0, w in width()) {
        let m = mcs_max(rx, w);
        prop_assert!(rx >= p_rx_min(m, w) || m == Mcs::MIN);
        if m < Mcs::MAX {
            prop_assert!(rx < p_rx_min(Mcs::new(m.index() + 1).unwrap(), w));
        }
    }

    #[test]
    fn per_is_monotone(snr in -20.0f64..60.0, d in 0.01f64..5.0, m in mcs()) {
        prop_assert!(packet_error_rate(snr + d, m) <= packet_error_rate(snr, m));
        if m < Mcs::MAX {
            let up = Mcs::new(m.index() + 1).unwrap();
            prop_assert!(packet_error_rate(snr, up) >= packet_error_rate(snr, m));
        }
    }

    #[test]
    fn overlap_is_a_fraction(a in channel(), b in channel()) {
        let o = a.overlap(&b);
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert_eq!(a.overlap(&a), 1.0);
        // shared spectrum measured from either side is the same number of MHz
        let shared_ab = o * a.width().mhz() as f64;
        let shared_ba = b.overlap(&a) * b.width().mhz() as f64;
        prop_assert!((shared_ab - shared_ba).abs() < 1e-9);
    }

    #[test]
    fn margins_stay_bounded(steps in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 0..500)) {
        let mut m = SliceBMargins::default();
        for (ok, worse, better) in steps {
            m = m.next(ok, worse, better);
            prop_assert!((1..=4).contains(&m.mcs_add()));
            prop_assert!((1..=6).contains(&m.tx_power_add()));
        }
    }

    #[test]
    fn rate_draws_stay_in_range(seed in any::<u64>()) {
        let sc = build_scenario(Setting::S2_100_6, seed);
        for st in &sc.stations {
            prop_assert!(sc.config.rate_range(st.slice).contains(st.offered_bps));
            let (x, y) = st.mobility.position_at(0.0);
            prop_assert!((0.0..=20.0).contains(&x) && (0.0..=10.0).contains(&y));
        }
    }

    #[test]
    fn walk_stays_in_room(seed in any::<u64>(), x in 0.0f64..20.0, y in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mobility::new(x, y, 0.3, 3.0, (20.0, 10.0));
        for k in 1..2_000 {
            m.step(1.0, Range::new(2.0, 4.0), &mut rng);
            let (px, py) = m.position_at(k as f64 + 0.5);
            prop_assert!((0.0..=20.0).contains(&px) && (0.0..=10.0).contains(&py));
        }
    }
}

#[test]
fn long_walk_stays_in_room() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut m = Mobility::new(1.0, 9.0, 2.0, 4.0, (20.0, 10.0));
    for k in 0..1_000_000u64 {
        m.step(1.0, Range::new(2.0, 4.0), &mut rng);
        let (x, y) = m.position_at((k + 1) as f64);
        assert!((0.0..=20.0).contains(&x) && (0.0..=10.0).contains(&y), "step {k}: ({x}, {y})");
    }
}

#[test]
fn slice_b_never_moves_and_others_do() {
    let sc = build_from_config("t", ScenarioConfig::for_setting(Setting::S4_100_4), 9).unwrap();
    for st in &sc.stations {
        let moved = st.position_at(0.0) != st.position_at(3.7);
        assert_eq!(moved, st.slice != Slice::B, "station {}", st.id);
    }
}
