mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composite_matches_brute_force(seed in any::<u64>()) {
        let inst = common::random_instance(&mut common::rng(seed));
        let out = common::run_composite(&inst);
        let (img, lbl, src) = common::brute_force(&inst);
        prop_assert_eq!(out.image.pixels(), &img[..]);
        prop_assert_eq!(out.label.as_slice(), &lbl[..]);
        prop_assert_eq!(out.source, src);
    }

    #[test]
    fn only_things_are_copied(seed in any::<u64>()) {
        let inst = common::random_instance(&mut common::rng(seed));
        let out = common::run_composite(&inst);
        for (p, &s) in out.source.iter().enumerate() {
            if s != 0 {
                prop_assert!(inst.things.contains(out.label.as_slice()[p]));
            }
        }
    }
}

#[test]
fn excluding_the_base_never_copies_from_it() {
    let mut rng = common::rng(5);
    for _ in 0..100 {
        let mut inst = common::random_instance(&mut rng);
        inst.include_base = false;
        let out = common::run_composite(&inst);
        let (_, _, src) = common::brute_force(&inst);
        assert_eq!(out.source, src);
    }
}
