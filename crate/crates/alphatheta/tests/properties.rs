//! Property tests over randomly grown trees.

use alphatheta::growth::grow;
use alphatheta::params::Params;
use alphatheta::rng::RngFactory;
use alphatheta::trees::{parse_newick, serialize_newick, validate, Block};
use proptest::prelude::*;

fn arbitrary_tree() -> impl Strategy<Value = alphatheta::LabeledBinaryTree> {
    (2u32..=24, 0u64..1 << 48, 0i64..=10, 0i64..=20).prop_map(|(n, seed, a10, t10)| {
        let p = Params::from_ints(a10, 10, t10, 10);
        grow(n, &p, &mut RngFactory::new(seed).stream(0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn newick_round_trips(t in arbitrary_tree()) {
        let text = serialize_newick(&t);
        let (back, lengths) = parse_newick(&text).unwrap();
        prop_assert_eq!(back, t);
        prop_assert!(lengths.is_none());
    }

    #[test]
    fn deleting_any_block_invalidates(t in arbitrary_tree(), pick in any::<prop::sample::Index>()) {
        let blocks = t.blocks().clone();
        let victim = pick.get(&blocks.iter().cloned().collect::<Vec<_>>()).clone();
        let mut broken = blocks;
        broken.remove(&victim);
        prop_assert!(validate(broken, t.n()).is_err());
    }

    #[test]
    fn spinal_parts_sum(t in arbitrary_tree()) {
        let c = t.spinal_composition();
        prop_assert_eq!(c.total(), t.n() as u64 - 1);
        prop_assert!(c.parts().iter().all(|&part| part >= 1));
    }

    #[test]
    fn nested_reduction_composes(
        t in arbitrary_tree(),
        keep in prop::collection::btree_set(1u32..=24, 2..8)
    ) {
        let outer: Vec<u32> = keep.iter().copied().filter(|&x| x <= t.n()).collect();
        prop_assume!(outer.len() >= 2);
        let outer_block = Block::new(outer.clone());
        let reduced = t.reduce(&outer_block).unwrap();
        // Drop the largest retained label, once through the relabeled tree
        // and once directly from the original.
        let inner_direct = Block::new(outer[..outer.len() - 1].to_vec());
        let inner_relabeled = Block::new((1..outer.len() as u32).collect());
        let via_two_steps = reduced.reduce(&inner_relabeled).unwrap();
        let direct = t.reduce(&inner_direct).unwrap();
        prop_assert_eq!(via_two_steps, direct);
    }

    #[test]
    fn grown_trees_validate(t in arbitrary_tree()) {
        prop_assert!(validate(t.blocks().clone(), t.n()).is_ok());
    }
}
