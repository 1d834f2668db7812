use std::sync::Arc;

use help_core::agents::{select_exemplars, Exemplar, Scorer, TfCosineScorer};
use help_core::grounding::{ground_term, Grounder, TrigramEmbedder, VocabIndex};
use help_core::metrics::{lcs_subarray, lcs_subsequence, exact_match, MetricMode};
use help_core::plan_dsl::{normalize_arg, parse_plan, render_plan, Action, Plan, SkillRegistry};
use proptest::prelude::*;

const SKILLS: [&str; 3] = ["move_to", "pick_up", "put"];
const OBJECTS: [&str; 5] = ["apple", "red cup", "shirt_1", "shirt_2", "toy cube"];
const LOCATIONS: [&str; 4] = ["table", "floor", "white box", "unspecified"];

fn action() -> impl Strategy<Value = Action> {
    (0..SKILLS.len(), 0..OBJECTS.len(), 0..LOCATIONS.len())
        .prop_map(|(s, o, l)| Action::new(SKILLS[s], [OBJECTS[o], LOCATIONS[l]]))
}

fn plan() -> impl Strategy<Value = Plan> {
    (prop::collection::vec(action(), 0..=8), any::<bool>()).prop_map(|(a, t)| Plan::new(a, t))
}

fn term() -> impl Strategy<Value = String> {
    "[a-z]{1,3}( [a-z]{1,4})?"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn metric_bounds_and_orderings(pred in plan(), gt in plan()) {
        for mode in [MetricMode::A, MetricMode::P] {
            let (ss, sa) = (lcs_subsequence(&pred, &gt, mode), lcs_subarray(&pred, &gt, mode));
            prop_assert!((0.0..=1.0).contains(&ss));
            prop_assert!(0.0 <= sa && sa <= ss);
            if exact_match(&pred, &gt, mode) == 1 {
                prop_assert_eq!((ss, sa), (1.0, 1.0));
            }
        }
        prop_assert!(exact_match(&pred, &gt, MetricMode::A) >= exact_match(&pred, &gt, MetricMode::P));
        prop_assert!(lcs_subsequence(&pred, &gt, MetricMode::A) >= lcs_subsequence(&pred, &gt, MetricMode::P));
        prop_assert!(lcs_subarray(&pred, &gt, MetricMode::A) >= lcs_subarray(&pred, &gt, MetricMode::P));
    }

    #[test]
    fn metrics_are_symmetric(pred in plan(), gt in plan()) {
        prop_assert_eq!(lcs_subsequence(&pred, &gt, MetricMode::P), lcs_subsequence(&gt, &pred, MetricMode::P));
        prop_assert_eq!(lcs_subarray(&pred, &gt, MetricMode::A), lcs_subarray(&gt, &pred, MetricMode::A));
    }

    #[test]
    fn parse_inverts_render(p in plan().prop_filter("renders to empty text", |p| p.terminated || !p.is_empty())) {
        let registry = SkillRegistry::household();
        let text = render_plan(&p, &registry).unwrap();
        prop_assert_eq!(parse_plan(&text, &registry).unwrap(), p);
    }

    #[test]
    fn numbering_is_ignored(p in plan().prop_filter("renders to empty text", |p| p.terminated || !p.is_empty()), shift in 0usize..50) {
        let registry = SkillRegistry::household();
        let renumbered: Vec<String> = render_plan(&p, &registry)
            .unwrap()
            .lines()
            .enumerate()
            .map(|(i, line)| {
                let body = line.split_once(". ").map_or(line, |(_, b)| b);
                if i % 2 == 0 { format!("{}. {body}", i + shift) } else { body.to_string() }
            })
            .collect();
        prop_assert_eq!(parse_plan(&renumbered.join("\n"), &registry).unwrap(), p);
    }

    #[test]
    fn normalize_is_idempotent(raw in "\\PC{0,20}") {
        let once = normalize_arg(&raw);
        prop_assert_eq!(normalize_arg(&once), once);
    }

    #[test]
    fn grounding_closure_and_exact_supremacy(t in term(), vocab in prop::collection::vec(term(), 1..6)) {
        let d = ground_term(&t, &vocab, &TrigramEmbedder, 0.35).unwrap();
        let names: Vec<String> = vocab.iter().map(|v| normalize_arg(v)).collect();
        if d.accepted {
            prop_assert!(names.contains(&d.chosen));
        } else {
            prop_assert_eq!(&d.chosen, &d.original);
        }
        if names.contains(&normalize_arg(&t)) {
            prop_assert_eq!(d.chosen, normalize_arg(&t));
            prop_assert_eq!(d.score, 1.0);
        }
    }

    #[test]
    fn grounding_is_idempotent(p in plan(), objects in prop::collection::vec(term(), 1..5), locations in prop::collection::vec(term(), 1..4)) {
        let registry = SkillRegistry::household();
        let g = Grounder::new(&objects, &locations, Arc::new(TrigramEmbedder), 0.35).unwrap();
        let (once, _) = g.ground_plan(&p, &registry).unwrap();
        let (twice, _) = g.ground_plan(&once, &registry).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn grounding_choice_survives_scaling(t in term(), vocab in prop::collection::vec(term(), 1..6), c in 0.01f64..100.0) {
        let index = VocabIndex::new(&vocab, &TrigramEmbedder).unwrap();
        let d = index.ground(&t, &TrigramEmbedder, -1.0).unwrap();
        let q = help_core::grounding::embed(&t, &TrigramEmbedder).unwrap();
        let names: Vec<String> = index.names().map(str::to_string).collect();
        if !names.contains(&q.term) {
            let scaled: Vec<f64> = names
                .iter()
                .map(|n| c * q.cosine(&help_core::grounding::embed(n, &TrigramEmbedder).unwrap()))
                .collect();
            let best = (0..scaled.len()).fold(0, |b, i| if scaled[i] > scaled[b] { i } else { b });
            prop_assert_eq!(&d.chosen, &names[best]);
        }
    }

    #[test]
    fn selection_ignores_monotone_rescoring(query in "[a-z ]{1,30}", a in 0.1f64..10.0, b in -5.0f64..5.0) {
        struct Affine(f64, f64);
        impl Scorer for Affine {
            fn scores(&self, q: &str, texts: &[&str]) -> Vec<f64> {
                TfCosineScorer.scores(q, texts).into_iter().map(|s| self.0 * s + self.1).collect()
            }
            fn identity(&self) -> String { "affine".into() }
        }
        let pool: Vec<Exemplar> = ["pick up the mug", "put the mug on the shelf", "grab the vase", "move the plant to the sill", "pick up the plant"]
            .iter()
            .enumerate()
            .map(|(i, t)| Exemplar::new(format!("x-{i}"), *t, "1. done()"))
            .collect();
        let ids = |s: &dyn Scorer| -> Vec<String> {
            select_exemplars(&query, &pool, 3, Some(s)).unwrap().iter().map(|e| e.id.clone()).collect()
        };
        prop_assert_eq!(ids(&TfCosineScorer), ids(&Affine(a, b)));
    }
}
