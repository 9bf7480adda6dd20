use proptest::prelude::*;
use streetsim::benchmark::{eval_vqa_circular, make_vqa_item, SeededGuessModel};
use streetsim::geo::{
    angular_offset, destination_point, haversine_distance, initial_bearing, normalize_heading,
    GeoCoordinate, GeoPolygon,
};
use streetsim::mobility::{plan_route, region_navigate_plan};
use streetsim::parallel::Execution;
use streetsim::world::{default_place_types, generate_world, load_world, save_world, GeneratorParams, Place};

fn coord() -> impl Strategy<Value = GeoCoordinate> {
    (-70.0..70.0f64, -179.0..179.0f64).prop_map(|(lat, lng)| GeoCoordinate::new(lat, lng).unwrap())
}

fn small_world(seed: u64, nodes: usize) -> streetsim::world::World {
    let center = GeoCoordinate::new(40.75, -73.98).unwrap();
    generate_world(seed, &GeneratorParams::city(center, nodes)).unwrap()
}

proptest! {
    #[test]
    fn heading_normalization_range(h in -1e4..1e4f64) {
        let n = normalize_heading(h);
        prop_assert!((0.0..360.0).contains(&n));
        prop_assert!(((n - h) / 360.0 - ((n - h) / 360.0).round()).abs() < 1e-9);
    }

    #[test]
    fn angular_offset_recovers_turn(h in 0.0..360.0f64, x in -179.0..179.0f64) {
        let o = angular_offset(h, h + x);
        prop_assert!((-180.0..180.0).contains(&o));
        prop_assert!((o - x).abs() < 1e-9);
    }

    #[test]
    fn haversine_is_a_symmetric_distance(a in coord(), b in coord()) {
        let d = haversine_distance(a, b);
        prop_assert!(d >= 0.0);
        prop_assert!((d - haversine_distance(b, a)).abs() <= 1e-6 * d.max(1.0));
    }

    #[test]
    fn destination_round_trip(o in coord(), h in 0.0..360.0f64, d in 1.0..5000.0f64) {
        let p = destination_point(o, h, d);
        prop_assert!((haversine_distance(o, p) - d).abs() < 1e-6 * d.max(1.0));
        let b = initial_bearing(o, p).unwrap();
        prop_assert!(angular_offset(h, b).abs() < 1e-6);
    }

    #[test]
    fn rectangle_contains_its_centroid_and_corners(o in coord(), w in 10.0..2000.0f64, h in 10.0..2000.0f64) {
        let ne = destination_point(destination_point(o, 0.0, h), 90.0, w);
        let poly = GeoPolygon::rectangle(o, ne).unwrap();
        prop_assert!(poly.contains(poly.centroid()));
        for v in poly.vertices() {
            prop_assert!(poly.contains(*v));
        }
        prop_assert!(!poly.contains(destination_point(o, 225.0, 50.0)));
    }

    #[test]
    fn circular_never_exceeds_plain(seed in any::<u64>(), acc in 0.0..=1.0f64, bias in 0.0..=1.0f64) {
        let vocab = default_place_types();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let items: Vec<_> = (0..40)
            .map(|i| {
                let p = Place {
                    id: format!("p{i}"),
                    name: String::new(),
                    types: vec![vocab[i % 7].clone()],
                    coord: GeoCoordinate::new(0.0, 0.0).unwrap(),
                    rating: None,
                    reviews: vec![],
                    photo_refs: vec![],
                };
                make_vqa_item(&format!("q{i}"), &p, &vocab, &mut rng)
            })
            .collect();
        for it in &items {
            prop_assert_eq!(it.rotated(4).clone(), it.clone());
            for r in 0..4 {
                let rot = it.rotated(r);
                prop_assert_eq!(rot.answer(), it.answer());
            }
        }
        let m = SeededGuessModel { seed, accuracy: acc, position_bias: bias };
        let r = eval_vqa_circular(&m, &items, Execution::Sequential).unwrap();
        prop_assert!(r.circular_macc.unwrap() <= r.plain_macc.unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_worlds_round_trip(seed in 0..1000u64, nodes in 20..150usize) {
        let w = small_world(seed, nodes);
        let bytes = save_world(&w);
        prop_assert_eq!(&save_world(&small_world(seed, nodes)), &bytes);
        let back = load_world(&bytes).unwrap();
        prop_assert_eq!(save_world(&back), bytes);
        prop_assert_eq!(back.digest(), w.digest());
    }

    #[test]
    fn route_lengths_obey_triangle_inequality(seed in 0..1000u64, picks in proptest::collection::vec(any::<prop::sample::Index>(), 3)) {
        let w = small_world(seed, 80);
        let ids: Vec<&str> = picks.iter().map(|i| w.nodes()[i.index(w.nodes().len())].id.as_str()).collect();
        let d = |a: &str, b: &str| plan_route(&w, a, b, "walk").unwrap().total_length;
        prop_assert!(d(ids[0], ids[2]) <= d(ids[0], ids[1]) + d(ids[1], ids[2]) + 1e-6);
        prop_assert!((d(ids[0], ids[1]) - d(ids[1], ids[0])).abs() < 1e-6);
        let r = plan_route(&w, ids[0], ids[2], "walk").unwrap();
        prop_assert_eq!(r.start(), ids[0]);
        prop_assert_eq!(r.stop(), ids[2]);
        prop_assert_eq!(r.legs.len() + 1, r.key_positions.len().max(1));
    }

    #[test]
    fn region_plan_is_a_permutation(seed in 0..1000u64, fx in 0.1..0.9f64, fy in 0.1..0.9f64, size in 100.0..500.0f64) {
        let w = small_world(seed, 120);
        let (sw, ne) = w.meta().bounds.clone().unwrap().bounds();
        let c = GeoCoordinate::new(sw.lat() + fy * (ne.lat() - sw.lat()), sw.lng() + fx * (ne.lng() - sw.lng())).unwrap();
        let half = size / 2.0;
        let a = destination_point(destination_point(c, 180.0, half), 270.0, half);
        let b = destination_point(destination_point(c, 0.0, half), 90.0, half);
        let poly = GeoPolygon::rectangle(a, b).unwrap();
        let inside = w.nodes_in(&poly).len();
        prop_assume!(inside > 0);
        let seq = region_navigate_plan(&w, &poly, Execution::Sequential).unwrap();
        let par = region_navigate_plan(&w, &poly, Execution::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        let mut ids = seq.nodes.clone();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), inside);
        prop_assert!(seq.cost <= seq.nearest_neighbor_cost + 1e-9);
    }
}
