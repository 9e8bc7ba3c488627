use proptest::prelude::*;
use walkstreet::features::{aggregate, aggregate_parallel, fraction_pairs, z_pair_metric, AggregateOptions, Assignment};
use walkstreet::{FractionKind, Gender, GeoPoint, KeywordLists, MachineTag, PhotoRecord, SegmentFeatures};

#[derive(Debug, Clone)]
struct PhotoSpec {
    owner: u8,
    gender: Option<bool>,
    age: Option<u32>,
    night: Option<(bool, f64)>,
    tags: Vec<u8>,
    segments: Vec<usize>,
}

const TAGS: [&str; 6] = ["tree", "Street Light", "car", "CARS", "sky", "bench"];

fn arb_photo(n_seg: usize) -> impl Strategy<Value = PhotoSpec> {
    (
        0u8..12,
        prop::option::of(any::<bool>()),
        prop::option::of(18u32..80),
        prop::option::of((any::<bool>(), 0.5..1.0f64)),
        prop::collection::vec(0u8..6, 0..5),
        prop::collection::btree_set(0..n_seg, 0..3),
    )
        .prop_map(|(owner, gender, age, night, tags, segs)| PhotoSpec {
            owner,
            gender,
            age,
            night,
            tags,
            segments: segs.into_iter().collect(),
        })
}

fn build(specs: &[PhotoSpec]) -> (Vec<PhotoRecord>, Assignment) {
    let photos = specs
        .iter()
        .enumerate()
        .map(|(i, s)| PhotoRecord {
            id: format!("p{i}"),
            location: GeoPoint { lon: 0.0, lat: 0.0 },
            owner_id: format!("o{}", s.owner),
            // Owner attributes are a function of the owner.
            gender: s.gender.map(|_| if s.owner % 2 == 0 { Gender::Male } else { Gender::Female }),
            age: s.age.map(|_| 20 + u32::from(s.owner)),
            user_tags: s.tags.iter().map(|&t| TAGS[t as usize].to_string()).collect(),
            machine_tags: s
                .night
                .map(|(n, c)| vec![MachineTag { label: if n { "night" } else { "day" }.into(), confidence: c }])
                .unwrap_or_default(),
            views: None,
            favorites: None,
            comments: None,
        })
        .collect();
    let assignment = Assignment {
        photos: specs.iter().map(|s| s.segments.clone()).collect(),
        venues: Vec::new(),
    };
    (photos, assignment)
}

fn run(n_seg: usize, specs: &[PhotoSpec], parallel: bool) -> Vec<SegmentFeatures> {
    let ids: Vec<String> = (0..n_seg).map(|i| format!("s{i}")).collect();
    let (photos, a) = build(specs);
    let kw = KeywordLists::default();
    let opts = AggregateOptions { keywords: &kw, night_confidence: 0.95 };
    if parallel {
        aggregate_parallel(&ids, &photos, &[], &a, &opts).unwrap()
    } else {
        aggregate(&ids, &photos, &[], &a, &opts).unwrap()
    }
}

proptest! {
    #[test]
    fn parallel_equals_sequential(specs in prop::collection::vec(arb_photo(6), 0..120)) {
        prop_assert_eq!(run(6, &specs, false), run(6, &specs, true));
    }

    #[test]
    fn photo_order_is_irrelevant(specs in prop::collection::vec(arb_photo(5), 0..60), seed in any::<u64>()) {
        let mut shuffled = specs.clone();
        let n = shuffled.len();
        if n > 1 {
            for i in 0..n {
                let j = (seed.wrapping_mul(i as u64 + 1) % n as u64) as usize;
                shuffled.swap(i, j);
            }
        }
        prop_assert_eq!(run(5, &specs, false), run(5, &shuffled, false));
    }

    #[test]
    fn count_invariants(specs in prop::collection::vec(arb_photo(4), 0..80)) {
        for f in run(4, &specs, false) {
            prop_assert!(f.night_count + f.notnight_count <= f.n_photos);
            prop_assert!(f.walk_tag_count <= f.tag_total && f.car_tag_count <= f.tag_total);
            prop_assert!(f.male_users + f.female_users <= f.n_users);
            prop_assert!(f.ages.len() as u64 <= f.n_users);
        }
    }

    #[test]
    fn unclassified_photos_leave_night_metric_alone(
        specs in prop::collection::vec(arb_photo(5), 10..60),
        extra in prop::collection::vec(arb_photo(5), 1..20),
    ) {
        let extra: Vec<PhotoSpec> = extra
            .into_iter()
            .map(|mut s| {
                s.night = Some((true, 0.9));
                s
            })
            .collect();
        let all: Vec<PhotoSpec> = specs.iter().cloned().chain(extra).collect();
        let (a, b) = (run(5, &specs, false), run(5, &all, false));
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.night_count, x.notnight_count), (y.night_count, y.notnight_count));
        }
        let za = z_pair_metric(&fraction_pairs(&a, FractionKind::Night).pairs, FractionKind::Night);
        let zb = z_pair_metric(&fraction_pairs(&b, FractionKind::Night).pairs, FractionKind::Night);
        match (za, zb) {
            (Ok(za), Ok(zb)) => prop_assert_eq!(za, zb),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "degeneracy changed"),
        }
    }

    #[test]
    fn z_components_are_standardized(
        counts in prop::collection::vec((0u64..50, 0u64..50), 3..60),
    ) {
        let features: Vec<SegmentFeatures> = counts
            .iter()
            .enumerate()
            .map(|(i, &(n, d))| SegmentFeatures {
                segment_id: format!("s{i}"),
                n_photos: n + d,
                night_count: n,
                notnight_count: d,
                ..Default::default()
            })
            .collect();
        let pairs = fraction_pairs(&features, FractionKind::Night);
        if let Ok(z) = z_pair_metric(&pairs.pairs, FractionKind::Night) {
            for comp in [|e: &walkstreet::features::ZEntry| e.z_a, |e: &walkstreet::features::ZEntry| e.z_b] {
                let v: Vec<f64> = z.entries.iter().map(comp).collect();
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
            }
            let score_mean = z.entries.iter().map(|e| e.score).sum::<f64>() / z.entries.len() as f64;
            prop_assert!(score_mean.abs() < 1e-9);
        }
    }

    #[test]
    fn z_metric_permutation_invariant(counts in prop::collection::vec((0u64..30, 0u64..30), 3..40), rot in 0usize..40) {
        let make = |c: &[(u64, u64)]| -> Vec<SegmentFeatures> {
            c.iter()
                .map(|&(n, d)| SegmentFeatures { male_users: n, female_users: d, n_users: n + d, ..Default::default() })
                .collect()
        };
        let mut rotated = counts.clone();
        let k = rot % counts.len();
        rotated.rotate_left(k);
        let za = z_pair_metric(&fraction_pairs(&make(&counts), FractionKind::Gender).pairs, FractionKind::Gender);
        let zb = z_pair_metric(&fraction_pairs(&make(&rotated), FractionKind::Gender).pairs, FractionKind::Gender);
        if let (Ok(za), Ok(zb)) = (za, zb) {
            let n = counts.len();
            let mut score_a = vec![None; n];
            for e in &za.entries {
                score_a[e.index] = Some(e.score);
            }
            for e in &zb.entries {
                let orig = (e.index + k) % n;
                prop_assert!((score_a[orig].unwrap() - e.score).abs() < 1e-9);
            }
        }
    }
}
