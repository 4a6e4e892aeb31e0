use std::collections::BTreeSet;

use desireme::eval::QrelSet;
use desireme::labeler::{
    build_label_file, label_query, resolve_top_categories, CategoryGraph, DocCategoryMap,
};
use desireme::Rng;
use proptest::prelude::*;

const TOPS: [&str; 8] = [
    "Culture",
    "Human behavior",
    "Law",
    "Mathematics",
    "Religion",
    "Science",
    "Society",
    "Sports",
];

/// A small slice of a Wikipedia-like category hierarchy, including a cycle.
fn fixture() -> (CategoryGraph, DocCategoryMap) {
    let edges = [
        ("Constitutional amendments", "Constitutional law"),
        ("Constitutional law", "Law"),
        ("Amendments to the United States Constitution", "Constitutional amendments"),
        ("Chinese New Year", "Festivals in China"),
        ("Festivals in China", "Festivals"),
        ("Festivals", "Culture"),
        ("Festivals", "Celebrations"),
        ("Celebrations", "Human behavior"),
        ("Celebrations", "Society"),
        ("Religious festivals", "Religion"),
        ("Religious festivals", "Festivals"),
        ("Lunar New Year", "Religious festivals"),
        ("Lunar New Year", "New Year celebrations"),
        ("New Year celebrations", "Lunar New Year"),
        ("Cricket", "Team sports"),
        ("Team sports", "Sports"),
    ];
    let graph = CategoryGraph::new(
        edges.iter().map(|(c, p)| (c.to_string(), p.to_string())),
        TOPS.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap();
    let mut docs = DocCategoryMap::new();
    docs.insert("Eleventh Amendment", vec!["Amendments to the United States Constitution".into()])
        .unwrap();
    docs.insert("Chinese New Year", vec!["Chinese New Year".into(), "Lunar New Year".into()])
        .unwrap();
    docs.insert("Law", vec!["Law".into()]).unwrap();
    docs.insert("Cricket", vec!["Cricket".into()]).unwrap();
    docs.insert("Stub", vec![]).unwrap();
    (graph, docs)
}

fn bits(indices: &[usize]) -> String {
    (0..TOPS.len()).map(|i| if indices.contains(&i) { '1' } else { '0' }).collect()
}

#[test]
fn single_label_law() {
    let (g, d) = fixture();
    assert_eq!(label_query("q", &["Law"], &d, &g).unwrap().to_string(), bits(&[2]));
    assert_eq!(
        label_query("q", &["Eleventh Amendment"], &d, &g).unwrap().to_string(),
        bits(&[2])
    );
}

#[test]
fn multi_label_festival() {
    let (g, d) = fixture();
    let v = label_query("q", &["Chinese New Year"], &d, &g).unwrap();
    // Human behavior, Culture, Society and Religion.
    assert_eq!(v.to_string(), bits(&[0, 1, 4, 6]));
    assert_eq!(v.count_ones(), 4);
}

#[test]
fn union_over_relevant_docs() {
    let (g, d) = fixture();
    let v = label_query("q", &["Law", "Cricket"], &d, &g).unwrap();
    assert_eq!(v.to_string(), bits(&[2, 7]));
}

#[test]
fn resolution_chain_and_cycle() {
    let (g, _) = fixture();
    let want: BTreeSet<String> = ["Law".to_string()].into();
    assert_eq!(resolve_top_categories("Constitutional amendments", &g), want);
    assert_eq!(resolve_top_categories("Law", &g), want);
    // Lunar New Year ⇄ New Year celebrations, yet Religion etc. are reached.
    assert!(resolve_top_categories("New Year celebrations", &g).contains("Religion"));
}

#[test]
fn coverage_on_toy_qrels() {
    let (g, d) = fixture();
    let qrels: QrelSet = [("q1", "Law"), ("q2", "Cricket"), ("q2", "Eleventh Amendment"), ("q3", "Stub")]
        .into_iter()
        .collect();
    let out = build_label_file(&qrels, &d, &g).unwrap();
    assert_eq!(out.stats.queries, 3);
    assert_eq!(out.stats.labeled, 2);
    // q1: {Law}; q2: {Law, Sports}.
    assert_eq!(out.stats.avg_labels(), 1.5);

    // Engineered for exactly two labels per labeled query.
    let qrels: QrelSet = [("a", "Law"), ("a", "Cricket"), ("b", "Cricket"), ("b", "Eleventh Amendment")]
        .into_iter()
        .collect();
    let out = build_label_file(&qrels, &d, &g).unwrap();
    assert_eq!(out.stats.labeled_fraction(), 1.0);
    assert_eq!(out.stats.avg_labels(), 2.0);
    assert_eq!(out.stats.to_string(), "labeled=100.0% avg_labels=2.00");
}

/// Random directed graph over `n` nodes with roughly `fanout` parents per
/// node (self-loops and cycles included) and a few top-level nodes.
fn random_graph(rng: &mut Rng, n: usize, fanout: usize) -> CategoryGraph {
    let mut edges = Vec::new();
    for c in 0..n {
        for _ in 0..rng.below(fanout as u64 + 1) {
            edges.push((format!("c{c}"), format!("c{}", rng.below(n as u64))));
        }
    }
    let k = 1 + rng.below(4) as usize;
    let mut tops: Vec<String> = (0..k).map(|_| format!("c{}", rng.below(n as u64))).collect();
    tops.sort();
    tops.dedup();
    CategoryGraph::new(edges, tops).unwrap()
}

#[test]
fn bfs_terminates_on_random_cyclic_graphs() {
    let mut rng = Rng::new(11);
    for i in 0..1000 {
        let n = 1 + rng.below(60) as usize;
        let g = random_graph(&mut rng, n, 3);
        for c in 0..n {
            let (tops, _) = g.resolve(&format!("c{c}"));
            assert!(tops.len() <= g.num_domains(), "graph {i}");
        }
    }
}

#[test]
fn bfs_terminates_on_large_graph() {
    let mut rng = Rng::new(12);
    let g = random_graph(&mut rng, 10_000, 4);
    for c in (0..10_000).step_by(97) {
        g.resolve(&format!("c{c}"));
    }
}

fn arb_case() -> impl Strategy<Value = (u64, Vec<usize>, Vec<usize>)> {
    (any::<u64>(), prop::collection::vec(0usize..12, 1..6), prop::collection::vec(0usize..12, 0..4))
}

/// Graph over 30 categories, 12 docs each tagged with a few categories.
fn random_corpus(seed: u64) -> (CategoryGraph, DocCategoryMap) {
    let mut rng = Rng::new(seed);
    let g = random_graph(&mut rng, 30, 2);
    let mut docs = DocCategoryMap::new();
    for d in 0..12 {
        let cats = (0..rng.below(4)).map(|_| format!("c{}", rng.below(30))).collect();
        docs.insert(format!("d{d}"), cats).unwrap();
    }
    (g, docs)
}

proptest! {
    #[test]
    fn adding_documents_never_removes_labels((seed, base, extra) in arb_case()) {
        let (g, docs) = random_corpus(seed);
        let ids: Vec<String> = base.iter().map(|i| format!("d{i}")).collect();
        let mut more = ids.clone();
        more.extend(extra.iter().map(|i| format!("d{i}")));
        let a = label_query("q", &ids, &docs, &g).unwrap();
        let b = label_query("q", &more, &docs, &g).unwrap();
        for i in a.indices() {
            prop_assert!(b.get(i));
        }
    }

    #[test]
    fn order_does_not_matter((seed, base, _) in arb_case(), shuffle_seed in any::<u64>()) {
        let (g, docs) = random_corpus(seed);
        let ids: Vec<String> = base.iter().map(|i| format!("d{i}")).collect();
        let mut permuted = ids.clone();
        Rng::new(shuffle_seed).shuffle(&mut permuted);
        prop_assert_eq!(
            label_query("q", &ids, &docs, &g).unwrap(),
            label_query("q", &permuted, &docs, &g).unwrap()
        );

        // Permuting a document's own category list.
        let cats: Vec<String> = (0..5).map(|i| format!("c{}", (seed as usize + 7 * i) % 30)).collect();
        let mut shuffled = cats.clone();
        Rng::new(shuffle_seed).shuffle(&mut shuffled);
        let mut m1 = DocCategoryMap::new();
        m1.insert("x", cats).unwrap();
        let mut m2 = DocCategoryMap::new();
        m2.insert("x", shuffled).unwrap();
        prop_assert_eq!(label_query("q", &["x"], &m1, &g).unwrap(), label_query("q", &["x"], &m2, &g).unwrap());
    }
}
