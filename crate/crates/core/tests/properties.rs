mod support;

use std::collections::HashMap;

use livevis_core::diff::{apply_diff, line_diff, split_lines, DiffTag};
use livevis_core::image::{variance_image, Image};
use livevis_core::metavis::{compress_tree, TreeNode};
use livevis_core::scope::{parse_scopes, LanguageProfile, ScopeHash};
use livevis_core::{Camera, RevisionId, RevisionStore, SourceState, Vec3d};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use support::oracles;

fn state(n: usize, body: &str) -> SourceState {
    SourceState::new("minivis", [(format!("f{}.mv", n % 3), body.to_string())]).unwrap()
}

#[test]
fn checkout_matches_shadow_map() {
    let mut rng = StdRng::seed_from_u64(1);
    let mut store = RevisionStore::in_memory();
    let mut shadow: HashMap<RevisionId, SourceState> = HashMap::new();
    let mut ids: Vec<RevisionId> = Vec::new();
    for i in 0..100 {
        let parent = if ids.is_empty() { None } else { Some(ids[rng.gen_range(0..ids.len())]) };
        let source = state(i, &format!("pixel {{ {} }}", rng.gen_range(0..30)));
        let id = store.commit(parent.as_ref(), source.clone(), ScopeHash(0)).unwrap();
        shadow.insert(id, source);
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    assert_eq!(store.len(), shadow.len());
    for (id, source) in &shadow {
        assert_eq!(&store.checkout(id).unwrap(), source);
    }
}

/// Commit a random tree of `n` nodes; returns the ids and the shadow parent map.
fn random_store(rng: &mut StdRng, n: usize) -> (RevisionStore, Vec<RevisionId>, HashMap<RevisionId, Option<RevisionId>>) {
    let mut store = RevisionStore::in_memory();
    let mut ids = Vec::new();
    let mut parents = HashMap::new();
    for i in 0..n {
        let parent = if i == 0 { None } else { Some(ids[rng.gen_range(0..ids.len())]) };
        let id = store
            .commit(parent.as_ref(), state(i, &format!("// {i}")), ScopeHash(rng.gen_range(0..3)))
            .unwrap();
        ids.push(id);
        parents.insert(id, parent);
    }
    (store, ids, parents)
}

#[test]
fn parents_children_and_paths_match_shadow_tree() {
    let mut rng = StdRng::seed_from_u64(2);
    let (store, ids, parents) = random_store(&mut rng, 50);
    for id in &ids {
        assert_eq!(store.parent(id).unwrap(), parents[id]);
        let expected_children: Vec<RevisionId> = ids.iter().filter(|c| parents[*c] == Some(*id)).copied().collect();
        assert_eq!(store.children(id).unwrap(), expected_children);

        let mut chase = vec![*id];
        while let Some(p) = parents[chase.last().unwrap()] {
            chase.push(p);
        }
        chase.reverse();
        assert_eq!(store.branch_path(id).unwrap(), chase);
    }
    let seqs: Vec<u64> = store.revisions().map(|r| r.seq).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn persist_and_load_round_trip() {
    let mut rng = StdRng::seed_from_u64(3);
    let (store, ids, parents) = random_store(&mut rng, 50);
    let dir = tempfile::tempdir().unwrap();
    store.persist(dir.path()).unwrap();
    let loaded = RevisionStore::load(dir.path()).unwrap();
    assert_eq!(loaded.len(), 50);
    for (a, b) in store.revisions().zip(loaded.revisions()) {
        assert_eq!(a, b);
    }
    for id in &ids {
        assert_eq!(loaded.parent(id).unwrap(), parents[id]);
    }
}

#[test]
fn write_through_store_reopens_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut ids = Vec::new();
    {
        let mut store = RevisionStore::open(dir.path()).unwrap();
        let mut parent = None;
        for i in 0..5 {
            let id = store.commit(parent.as_ref(), state(i, &format!("pixel {{ {i} }}")), ScopeHash(i as u64)).unwrap();
            ids.push(id);
            parent = Some(id);
        }
    }
    let reopened = RevisionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.branch_path(ids.last().unwrap()).unwrap(), ids);
    let line = std::fs::read_to_string(dir.path().join("revisions.log")).unwrap();
    let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["id", "parent", "seq", "createdAt", "sstHash", "files"] {
        assert!(keys.contains(&k), "{k} missing from {keys:?}");
    }
}

#[test]
fn scope_parser_matches_strip_then_stack_oracle() {
    let mut rng = StdRng::seed_from_u64(4);
    let profile = LanguageProfile::c_like();
    for i in 0..400 {
        let text = oracles::random_program(&mut rng, i % 4 != 0);
        let ours = parse_scopes(&text, &profile, "p.c");
        let theirs = oracles::scope_oracle(&text, &profile, "p.c");
        match (ours, theirs) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "{text:?}"),
            (Err(e), Err((line, col))) => assert_eq!(
                e,
                livevis_core::scope::ScopeError::UnbalancedScope { file: "p.c".into(), line, col },
                "{text:?}"
            ),
            (a, b) => panic!("disagreement on {text:?}: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn depth_is_two_plus_brace_nesting() {
    let mut rng = StdRng::seed_from_u64(5);
    let profile = LanguageProfile::c_like();
    for _ in 0..100 {
        let text = oracles::random_program(&mut rng, true);
        let Ok(file) = parse_scopes(&text, &profile, "p.c") else { continue };
        let stripped = oracles::strip_comments_and_strings(&text, &profile);
        let (mut depth, mut max) = (0i32, 0i32);
        for c in stripped {
            match c {
                '{' => {
                    depth += 1;
                    max = max.max(depth);
                }
                '}' => depth -= 1,
                _ => {}
            }
        }
        let root = livevis_core::scope::merge_trees(vec![file]).unwrap();
        assert_eq!(root.depth() as i32, 2 + max);
    }
}

#[test]
fn scope_hash_has_no_collisions_on_random_trees() {
    let mut rng = StdRng::seed_from_u64(6);
    let trees: Vec<_> = (0..10_000).map(|_| { let files = rng.gen_range(1..3); oracles::random_tree(&mut rng, files) }).collect();
    let mut by_hash: HashMap<ScopeHash, usize> = HashMap::new();
    for (i, t) in trees.iter().enumerate() {
        if let Some(&j) = by_hash.get(&t.scope_hash()) {
            assert!(trees[j].structurally_equal(t), "collision between non-equal trees");
        } else {
            by_hash.insert(t.scope_hash(), i);
        }
    }
}

#[test]
fn structural_equality_is_an_equivalence() {
    let mut rng = StdRng::seed_from_u64(7);
    let trees: Vec<_> = (0..60).map(|_| oracles::random_tree(&mut rng, 1)).collect();
    for a in &trees {
        assert!(a.structurally_equal(a));
        for b in &trees {
            assert_eq!(a.structurally_equal(b), b.structurally_equal(a));
            assert_eq!(a.structurally_equal(b), a.scope_hash() == b.scope_hash());
            for c in &trees {
                if a.structurally_equal(b) && b.structurally_equal(c) {
                    assert!(a.structurally_equal(c));
                }
            }
        }
    }
}

#[test]
fn diff_is_minimal_against_dp_lcs() {
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..1000 {
        let a = oracles::random_text(&mut rng, 40);
        let b = if rng.gen_bool(0.5) { oracles::mutate_text(&mut rng, &a) } else { oracles::random_text(&mut rng, 40) };
        let d = line_diff(&a, &b);
        let (al, _) = split_lines(&a);
        let (bl, _) = split_lines(&b);
        let lcs = oracles::lcs_len(&al, &bl);
        assert_eq!(d.count(DiffTag::Remove) + d.count(DiffTag::Add), (al.len() - lcs) + (bl.len() - lcs));
        assert_eq!(apply_diff(&a, &d).unwrap(), b);
    }
}

#[test]
fn variance_examples_match_direct_oracle() {
    // one pixel black vs white in all channels
    let a = Image::filled(2, 2, [40, 40, 40]);
    let mut b = a.clone();
    b.set_pixel(1, 0, [255, 255, 255]);
    let mut a0 = a.clone();
    a0.set_pixel(1, 0, [0, 0, 0]);
    let out = variance_image(&[a0.clone(), b.clone()]).unwrap();
    let stack = vec![a0.pixels().collect::<Vec<_>>(), b.pixels().collect()];
    assert_eq!(oracles::variance_oracle(&stack, 1), 0.25);
    assert_eq!(out.pixel(1, 0), [255, 255, 255]);
    assert_eq!(out.pixel(0, 0), [0, 0, 0]);

    // three images at 0, 128, 255 in every channel, and in the red channel only
    let imgs: Vec<Image> = [0u8, 128, 255].iter().map(|&v| Image::filled(1, 1, [v, v, v])).collect();
    let stack: Vec<Vec<[u8; 3]>> = imgs.iter().map(|i| i.pixels().collect()).collect();
    let expected = oracles::gray_oracle(oracles::variance_oracle(&stack, 0));
    assert_eq!(expected, 208);
    assert_eq!(variance_image(&imgs).unwrap().pixel(0, 0)[0], expected);

    let imgs: Vec<Image> = [0u8, 128, 255].iter().map(|&v| Image::filled(1, 1, [v, 9, 9])).collect();
    let stack: Vec<Vec<[u8; 3]>> = imgs.iter().map(|i| i.pixels().collect()).collect();
    let expected = oracles::gray_oracle(oracles::variance_oracle(&stack, 0));
    assert_eq!(expected, 120);
    assert_eq!(variance_image(&imgs).unwrap().pixel(0, 0)[0], expected);
}

#[test]
fn compression_matches_union_find() {
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..200 {
        let (parents, hashes) = oracles::random_revision_tree(&mut rng, 200);
        let ids: Vec<RevisionId> = (0..parents.len())
            .map(|i| {
                let mut b = [0u8; 32];
                b[..8].copy_from_slice(&(i as u64).to_be_bytes());
                RevisionId(b)
            })
            .collect();
        let nodes: Vec<TreeNode> = (0..parents.len())
            .map(|i| TreeNode { id: ids[i], parent: parents[i].map(|p| ids[p]), seq: i as u64 + 1, sst_hash: ScopeHash(hashes[i]) })
            .collect();
        let index: HashMap<RevisionId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut groups: Vec<Vec<usize>> = compress_tree(&nodes)
            .iter()
            .map(|g| {
                let mut m: Vec<usize> = g.members.iter().map(|id| index[id]).collect();
                m.sort();
                m
            })
            .collect();
        groups.sort();
        assert_eq!(groups, oracles::equal_hash_components(&parents, &hashes));
    }
}

#[test]
fn arcball_preserves_orbit_radius() {
    let mut rng = StdRng::seed_from_u64(10);
    let mut cam = Camera::default();
    let r = cam.distance();
    for _ in 0..10_000 {
        let p = |rng: &mut StdRng| (rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
        let next = cam.arcball(p(&mut rng), p(&mut rng));
        assert!((next.distance() - r).abs() < 1e-9);
        assert!((next.up.norm() - 1.0).abs() < 1e-9);
        assert!(next.up.dot(next.at - next.eye).abs() < 1e-9);
        cam = next;
    }
}

#[test]
fn arcball_drags_along_a_great_circle_compose() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..500 {
        let p = |rng: &mut StdRng| (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
        let (p0, p2) = (p(&mut rng), p(&mut rng));
        let v0 = livevis_core::params::camera::sphere_point(p0);
        let v2 = livevis_core::params::camera::sphere_point(p2);
        // midpoint of the arc v0 -> v2 stays on the front cap
        let mid = (v0 + v2).normalized();
        let p1 = (mid.x, mid.y);
        let cam = Camera::new(Vec3d::new(1.0, 2.0, 6.0), Vec3d::new(0.5, 0.0, 0.0), Vec3d::new(0.0, 1.0, 0.0)).unwrap();
        let two = cam.arcball(p0, p1).arcball(p1, p2);
        let one = cam.arcball(p0, p2);
        assert!((two.eye - one.eye).norm() < 1e-6);
        assert!((two.up - one.up).norm() < 1e-6);
    }
}

proptest! {
    #[test]
    fn diff_round_trip(a in "[abc\n]{0,60}", b in "[abc\n]{0,60}") {
        let d = line_diff(&a, &b);
        prop_assert_eq!(apply_diff(&a, &d).unwrap(), b.clone());
        let r = line_diff(&b, &a);
        prop_assert_eq!(d.count(DiffTag::Add), r.count(DiffTag::Remove));
        prop_assert_eq!(d.count(DiffTag::Remove), r.count(DiffTag::Add));
    }

    #[test]
    fn ppm_round_trip(w in 1u32..17, h in 1u32..17, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let data: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let img = Image::from_rgb(w, h, data).unwrap();
        prop_assert_eq!(Image::decode_ppm(&img.encode_ppm()).unwrap(), img.clone());
        prop_assert_eq!(Image::decode_png(&img.encode_png()).unwrap(), img);
    }

    #[test]
    fn variance_is_permutation_and_duplication_invariant(k in 2usize..6, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let imgs: Vec<Image> = (0..k)
            .map(|_| Image::from_rgb(3, 2, (0..18).map(|_| rng.gen()).collect()).unwrap())
            .collect();
        let base = variance_image(&imgs).unwrap();
        let mut shuffled = imgs.clone();
        shuffled.reverse();
        shuffled.rotate_left(1);
        prop_assert_eq!(&variance_image(&shuffled).unwrap(), &base);
        let doubled: Vec<Image> = imgs.iter().chain(imgs.iter()).cloned().collect();
        prop_assert_eq!(&variance_image(&doubled).unwrap(), &base);
    }
}
